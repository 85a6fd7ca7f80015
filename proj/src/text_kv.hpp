#pragma once

// Small "key: value" text format shared by dataset manifests and checkpoint
// metadata. Lists are comma separated.

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace vpt::detail {

std::string trim(const std::string& s);
std::vector<std::string> split_strings(const std::string& s);
std::string join_strings(const std::vector<std::string>& items);
std::vector<float> parse_floats(const std::string& s, const std::string& what = "value");
std::vector<std::size_t> parse_sizes(const std::string& s, const std::string& what = "value");
std::string format_number(double v);

template <typename T>
std::string join_numbers(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(9);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

class KeyValues {
 public:
  // `allowed` empty accepts any key.
  static KeyValues parse(const std::string& text, const std::string& source, const std::set<std::string>& allowed = {});

  void set(const std::string& key, const std::string& value) { fields_[key] = value; }
  bool has(const std::string& key) const { return fields_.count(key) != 0; }
  // Throws DataError naming the source when the key is absent.
  const std::string& get(const std::string& key) const;
  std::string str() const;

 private:
  std::string source_;
  std::map<std::string, std::string> fields_;
};

}  // namespace vpt::detail
