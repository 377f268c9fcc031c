#include "config.hpp"

#include <algorithm>
#include <cmath>

namespace sflow::cli {

std::string dotted(const std::string& pointer) {
  std::string out = pointer.empty() ? std::string() : pointer.substr(1);
  std::replace(out.begin(), out.end(), '/', '.');
  return out.empty() ? std::string("<root>") : out;
}

namespace {

[[noreturn]] void bad(const std::string& pointer, const std::string& what) {
  throw ConfigError("config key '" + dotted(pointer) + "': " + what);
}

double as_number(const Json& j, const std::string& pointer) {
  if (!j.is_number()) bad(pointer, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(pointer, "must be finite");
  return v;
}

}  // namespace

const Json* ConfigReader::Node::find(const std::string& key) const {
  const Json::json_pointer ptr(path_);
  if (!owner_->root_.contains(ptr)) return nullptr;
  const Json& here = owner_->root_.at(ptr);
  if (!here.is_object()) bad(path_, "expected a table");
  const auto it = here.find(key);
  return it == here.end() ? nullptr : &*it;
}

const Json& ConfigReader::Node::require(const std::string& key) const {
  const Json* j = find(key);
  if (!j) bad(key_path(key), "missing required key");
  return *j;
}

void ConfigReader::Node::record(const std::string& key, const Json& value) const {
  owner_->consumed_.insert(key_path(key));
  owner_->set_resolved(key_path(key), value);
}

bool ConfigReader::Node::has(const std::string& key) const { return find(key) != nullptr; }

ConfigReader::Node ConfigReader::Node::child(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_object()) bad(key_path(key), "expected a table");
  owner_->visited_.insert(key_path(key));
  owner_->set_resolved(key_path(key), Json::object());
  return Node(owner_, key_path(key));
}

ConfigReader::Node ConfigReader::Node::table(const std::string& key) const {
  if (has(key)) return child(key);
  owner_->set_resolved(key_path(key), Json::object());
  return Node(owner_, key_path(key));
}

std::vector<ConfigReader::Node> ConfigReader::Node::children(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_array()) bad(key_path(key), "expected a list of tables");
  owner_->visited_.insert(key_path(key));
  owner_->set_resolved(key_path(key), Json::array());
  std::vector<Node> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = key_path(key) + "/" + std::to_string(i);
    if (!j[i].is_object()) bad(p, "expected a table");
    owner_->visited_.insert(p);
    owner_->set_resolved(p, Json::object());
    out.emplace_back(owner_, p);
  }
  return out;
}

double ConfigReader::Node::number(const std::string& key) const {
  const double v = as_number(require(key), key_path(key));
  record(key, v);
  return v;
}

double ConfigReader::Node::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : (record(key, fallback), fallback);
}

long long ConfigReader::Node::integer(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_number_integer()) bad(key_path(key), "expected an integer");
  const long long v = j.get<long long>();
  record(key, v);
  return v;
}

long long ConfigReader::Node::integer(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : (record(key, fallback), fallback);
}

std::uint64_t ConfigReader::Node::u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) {
    record(key, fallback);
    return fallback;
  }
  const Json& j = require(key);
  if (!j.is_number_unsigned()) bad(key_path(key), "expected a non-negative integer");
  const auto v = j.get<std::uint64_t>();
  record(key, v);
  return v;
}

bool ConfigReader::Node::flag(const std::string& key, bool fallback) const {
  if (!has(key)) {
    record(key, fallback);
    return fallback;
  }
  const Json& j = require(key);
  if (!j.is_boolean()) bad(key_path(key), "expected true or false");
  record(key, j.get<bool>());
  return j.get<bool>();
}

std::string ConfigReader::Node::text(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_string()) bad(key_path(key), "expected a string");
  record(key, j);
  return j.get<std::string>();
}

std::string ConfigReader::Node::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : (record(key, fallback), fallback);
}

std::vector<double> ConfigReader::Node::numbers(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_array()) bad(key_path(key), "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], key_path(key) + "/" + std::to_string(i)));
  record(key, out);
  return out;
}

std::vector<double> ConfigReader::Node::numbers(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? numbers(key) : (record(key, fallback), fallback);
}

std::vector<int> ConfigReader::Node::integers(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_array()) bad(key_path(key), "expected a list of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) bad(key_path(key) + "/" + std::to_string(i), "expected an integer");
    out.push_back(j[i].get<int>());
  }
  record(key, out);
  return out;
}

PointSet ConfigReader::Node::points(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_array()) bad(key_path(key), "expected a list of points");
  PointSet out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = key_path(key) + "/" + std::to_string(i);
    if (!j[i].is_array() || j[i].empty() || j[i].size() > kMaxDim) bad(p, "expected a point with 1 to 3 coordinates");
    Vec x(static_cast<Eigen::Index>(j[i].size()));
    for (std::size_t k = 0; k < j[i].size(); ++k) x[static_cast<Eigen::Index>(k)] = as_number(j[i][k], p);
    out.push_back(x);
  }
  record(key, j);
  return out;
}

Vec ConfigReader::Node::vec(const std::string& key) const {
  const auto v = numbers(key);
  if (v.empty() || v.size() > kMaxDim) bad(key_path(key), "expected 1 to 3 coordinates");
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) x[static_cast<Eigen::Index>(k)] = v[k];
  return x;
}

Mat ConfigReader::Node::matrix(const std::string& key) const {
  const Json& j = require(key);
  if (!j.is_array() || j.empty() || j.size() > kMaxDim) bad(key_path(key), "expected a square matrix (list of rows)");
  const auto n = static_cast<Eigen::Index>(j.size());
  Mat m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) bad(key_path(key), "rows must match the matrix size");
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = as_number(row[static_cast<std::size_t>(c)], key_path(key));
  }
  record(key, j);
  return m;
}

void ConfigReader::set_resolved(const std::string& pointer, const Json& value) {
  resolved_[Json::json_pointer(pointer)] = value;
}

void ConfigReader::walk(const Json& j, const std::string& path) const {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string p = path + "/" + it.key();
      if (consumed_.count(p)) continue;
      if (!visited_.count(p)) throw ConfigError("unknown config key '" + dotted(p) + "'");
      walk(*it, p);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = path + "/" + std::to_string(i);
      if (visited_.count(p)) walk(j[i], p);
    }
  }
}

void ConfigReader::finish() const { walk(root_, ""); }

}  // namespace sflow::cli
