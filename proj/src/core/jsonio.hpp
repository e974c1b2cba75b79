#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "core/common.hpp"

namespace ltr {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Rejects unknown keys so config typos fail loudly instead of being ignored.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& path) {
  if (!obj.is_object()) throw_parse(path + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw_parse(path + ": unknown key \"" + it.key() + "\"");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw_parse(path + ": missing field " + key);
  return *it;
}

inline double get_num(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw_parse(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline double get_num_or(const json& obj, const char* key, double fallback,
                         const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw_parse(path + "." + key + ": expected a number");
  return it->get<double>();
}

inline int64_t get_int(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw_parse(path + "." + key + ": expected an integer");
  return v.get<int64_t>();
}

inline int64_t get_int_or(const json& obj, const char* key, int64_t fallback,
                          const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw_parse(path + "." + key + ": expected an integer");
  return it->get<int64_t>();
}

inline std::string get_str(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw_parse(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::string get_str_or(const json& obj, const char* key, const std::string& fallback,
                              const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw_parse(path + "." + key + ": expected a string");
  return it->get<std::string>();
}

inline const json& get_arr(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw_parse(path + "." + key + ": expected an array");
  return v;
}

}  // namespace ltr
