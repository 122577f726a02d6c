#include "tdcr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tdcr/errors.hpp"

namespace tdcr {

namespace {

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix,
             std::map<std::string, std::string>& out) {
  for (const auto& [key, child] : tree) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (child.empty()) {
      out[full] = boost::algorithm::trim_copy(child.data());
    } else {
      flatten(child, full, out);
    }
  }
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T value{};
  is >> value;
  if (is.fail() || !(is >> std::ws).eof()) {
    throw InvalidInputError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

Config Config::from_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidInputError(std::string("config parse error: ") + e.what());
  }
  Config c;
  flatten(tree, "", c.values_);
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw InvalidInputError("config key must not be empty");
  values_[key] = value;
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidInputError("expected key=value, got '" + assignment + "'");
  set(boost::algorithm::trim_copy(assignment.substr(0, eq)), boost::algorithm::trim_copy(assignment.substr(eq + 1)));
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

unsigned long long Config::get_u64(const std::string& key, unsigned long long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<unsigned long long>(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = boost::algorithm::to_lower_copy(it->second);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidInputError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

Eigen::Vector3d Config::get_vec3(const std::string& key, const Eigen::Vector3d& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> parts;
  boost::algorithm::split(parts, it->second, boost::is_any_of(", "), boost::token_compress_on);
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  if (parts.size() != 3) throw InvalidInputError("config key '" + key + "': expected three components");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) out[i] = parse_number<double>(key, parts[i]);
  return out;
}

std::string Config::to_ini() const {
  // Group by the first namespace component so the output reads back as INI sections.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      sections[""].emplace_back(k, v);
    } else {
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
    }
  }
  std::ostringstream os;
  for (const auto& [k, v] : sections[""]) os << k << " = " << v << "\n";
  for (const auto& [name, entries] : sections) {
    if (name.empty()) continue;
    os << "\n[" << name << "]\n";
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  }
  return os.str();
}

void Config::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_ini();
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string format_vec3(const Eigen::Vector3d& v) {
  return format_double(v.x()) + ", " + format_double(v.y()) + ", " + format_double(v.z());
}

}  // namespace tdcr
