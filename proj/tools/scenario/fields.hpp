#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace cjl::scenario {

// Typed reader for one JSON object. Every accessor records the resolved value; finish()
// rejects keys that were never read.
class Fields {
 public:
  Fields(const json& j, std::string path);

  bool has(const std::string& key) const { return obj_.contains(key); }
  double number(const std::string& key, std::optional<double> def = std::nullopt);
  double positive(const std::string& key, std::optional<double> def = std::nullopt);
  int integer(const std::string& key, std::optional<int> def, int min, int max = 1 << 30);
  std::uint64_t seed(const std::string& key, std::uint64_t def);
  bool boolean(const std::string& key, bool def);
  std::string choice(const std::string& key, std::optional<std::string> def, const std::vector<std::string>& allowed);
  std::string text(const std::string& key, std::optional<std::string> def);
  Vec3 vec3(const std::string& key, std::optional<Vec3> def = std::nullopt);
  Mat3 mat3(const std::string& key);
  std::vector<Vec3> vec3_list(const std::string& key, bool required, bool nonempty);
  std::pair<double, double> range(const std::string& key);
  // Raw value (marked as read); nullptr when absent.
  const json* raw(const std::string& key);
  // Nested object; the caller finishes it and stores its resolved form with set().
  Fields object(const std::string& key);
  void set(const std::string& key, json value) { out_[key] = std::move(value); }

  void finish() const;
  const json& resolved() const { return out_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& get(const std::string& key);
  json obj_;
  std::string path_;
  std::set<std::string> used_;
  json out_ = json::object();
};

json to_json(const Vec3& v);
json to_json(const Mat3& m);

}  // namespace cjl::scenario
