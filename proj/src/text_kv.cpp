#include "text_kv.hpp"

#include <cmath>
#include <stdexcept>

#include "vpt/errors.hpp"

namespace vpt::detail {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_strings(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string join_strings(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

std::vector<float> parse_floats(const std::string& s, const std::string& what) {
  std::vector<float> out;
  for (const auto& item : split_strings(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stof(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : split_strings(s)) {
    try {
      std::size_t used = 0;
      if (!item.empty() && item[0] == '-') throw std::invalid_argument(item);
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError(what + ": '" + item + "' is not a non-negative integer");
    }
  }
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

KeyValues KeyValues::parse(const std::string& text, const std::string& source, const std::set<std::string>& allowed) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw DataError(source + ": line without ':' -> " + line);
    const auto key = trim(line.substr(0, colon));
    if (!allowed.empty() && !allowed.count(key)) throw DataError(source + ": unknown key '" + key + "'");
    kv.fields_[key] = trim(line.substr(colon + 1));
  }
  return kv;
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = fields_.find(key);
  if (it == fields_.end()) throw DataError(source_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::str() const {
  std::string out;
  for (const auto& [k, v] : fields_) out += k + ": " + v + "\n";
  return out;
}

}  // namespace vpt::detail
