#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tdcr {

// Flat key-value configuration with dotted namespaces (rod.*, twin.*, train.*, gpr.*, policy.*).
// Files use INI syntax; either `[rod]` sections or fully qualified `rod.key = value` lines work.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  // Parses `key=value`; throws InvalidInputError on malformed input.
  void set_assignment(const std::string& assignment);
  void merge(const Config& other);  // other's values win

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  unsigned long long get_u64(const std::string& key, unsigned long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Eigen::Vector3d get_vec3(const std::string& key, const Eigen::Vector3d& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Sorted INI rendering; stable so it can be hashed.
  std::string to_ini() const;
  void write(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

std::string format_double(double x);
std::string format_vec3(const Eigen::Vector3d& v);

}  // namespace tdcr
