#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rpt {

// Full-precision decimal rendering; round-trips any finite double exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Tensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> values;
};

// Line-oriented checkpoint container:
//
//   rpt-tensors 1
//   attr <key> <value to end of line>
//   tensor <name> <ndim> <dim...>
//   <values, space separated, %.17g>
//   end
//
// Attributes and tensors keep insertion order, so writes are deterministic;
// doubles round-trip bit-exactly through the text encoding.
class TensorFile {
 public:
  void set_attr(const std::string& key, std::string value) {
    for (auto& kv : attrs_)
      if (kv.first == key) {
        kv.second = std::move(value);
        return;
      }
    attrs_.emplace_back(key, std::move(value));
  }

  const std::string* attr(const std::string& key) const {
    for (const auto& kv : attrs_)
      if (kv.first == key) return &kv.second;
    return nullptr;
  }

  const std::string& attr_required(const std::string& key) const {
    if (const std::string* v = attr(key)) return *v;
    throw std::runtime_error("tensor file: missing attribute '" + key + "'");
  }

  void add_tensor(std::string name, std::vector<int> dims, std::vector<double> values) {
    std::size_t expected = 1;
    for (int d : dims) {
      if (d < 0) throw std::invalid_argument("tensor file: negative dimension");
      expected *= static_cast<std::size_t>(d);
    }
    if (values.size() != expected)
      throw std::invalid_argument("tensor file: '" + name + "' has " +
                                  std::to_string(values.size()) + " values, dims imply " +
                                  std::to_string(expected));
    tensors_.push_back(Tensor{std::move(name), std::move(dims), std::move(values)});
  }

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return &t;
    return nullptr;
  }

  const Tensor& tensor_required(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw std::runtime_error("tensor file: missing tensor '" + name + "'");
  }

  const std::vector<Tensor>& tensors() const { return tensors_; }
  const std::vector<std::pair<std::string, std::string>>& attrs() const { return attrs_; }

  void write(std::ostream& os) const {
    os << "rpt-tensors 1\n";
    for (const auto& kv : attrs_) os << "attr " << kv.first << " " << kv.second << "\n";
    for (const auto& t : tensors_) {
      os << "tensor " << t.name << " " << t.dims.size();
      for (int d : t.dims) os << " " << d;
      os << "\n";
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (i) os << " ";
        os << format_full(t.values[i]);
      }
      os << "\n";
    }
    os << "end\n";
  }

  void write_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    write(os);
    os.flush();
    if (!os) throw std::runtime_error(path + ": write failed");
  }

  static TensorFile read(std::istream& is, const std::string& origin = "<stream>") {
    const auto fail = [&origin](const std::string& why) -> std::runtime_error {
      return std::runtime_error(origin + ": " + why);
    };
    TensorFile out;
    std::string line;
    if (!std::getline(is, line) || line != "rpt-tensors 1")
      throw fail("not a 'rpt-tensors 1' file");
    bool ended = false;
    while (std::getline(is, line)) {
      if (line == "end") {
        ended = true;
        break;
      }
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "attr") {
        std::string key;
        if (!(ls >> key)) throw fail("attr line without a key");
        std::string value;
        std::getline(ls, value);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        out.set_attr(key, value);
      } else if (tag == "tensor") {
        Tensor t;
        std::size_t ndim = 0;
        if (!(ls >> t.name >> ndim)) throw fail("malformed tensor header");
        std::size_t count = 1;
        for (std::size_t i = 0; i < ndim; ++i) {
          int d = 0;
          if (!(ls >> d) || d < 0) throw fail("malformed dimensions for tensor '" + t.name + "'");
          t.dims.push_back(d);
          count *= static_cast<std::size_t>(d);
        }
        std::string data;
        if (!std::getline(is, data)) throw fail("missing values for tensor '" + t.name + "'");
        const char* p = data.c_str();
        t.values.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
          char* endp = nullptr;
          const double v = std::strtod(p, &endp);
          if (endp == p) throw fail("too few values for tensor '" + t.name + "'");
          t.values.push_back(v);
          p = endp;
        }
        while (*p == ' ') ++p;
        if (*p != '\0') throw fail("trailing data after tensor '" + t.name + "'");
        out.tensors_.push_back(std::move(t));
      } else if (tag.empty()) {
        continue;  // tolerate blank lines between records
      } else {
        throw fail("unknown record '" + tag + "'");
      }
    }
    if (!ended) throw fail("missing 'end' marker");
    return out;
  }

  static TensorFile read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open for reading");
    return read(is, path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> attrs_;
  std::vector<Tensor> tensors_;
};

}  // namespace rpt
