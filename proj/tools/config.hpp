#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sflow/errors.hpp"
#include "sflow/types.hpp"

namespace sflow::cli {

using Json = nlohmann::json;

/// Reads a JSON config while recording every key it touches. Defaults are
/// written into resolved(), so a run can be replayed from its own output.
/// finish() rejects keys that were never read.
class ConfigReader {
 public:
  explicit ConfigReader(Json root) : root_(std::move(root)) {
    if (!root_.is_object()) throw ConfigError("config root must be an object");
    resolved_ = Json::object();
  }

  /// Cursor into a nested table.
  class Node {
   public:
    Node(ConfigReader* owner, std::string path) : owner_(owner), path_(std::move(path)) {}

    bool has(const std::string& key) const;
    Node child(const std::string& key) const;
    /// Like child(), but a missing table reads as empty (all defaults).
    Node table(const std::string& key) const;
    /// Array of tables.
    std::vector<Node> children(const std::string& key) const;

    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key) const;
    long long integer(const std::string& key, long long fallback) const;
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::string text(const std::string& key) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<int> integers(const std::string& key) const;
    PointSet points(const std::string& key) const;
    Vec vec(const std::string& key) const;
    /// Row-major square matrix.
    Mat matrix(const std::string& key) const;

    const std::string& path() const { return path_; }
    std::string key_path(const std::string& key) const { return path_ + "/" + key; }

   private:
    const Json& require(const std::string& key) const;
    const Json* find(const std::string& key) const;
    void record(const std::string& key, const Json& value) const;

    ConfigReader* owner_;
    std::string path_;
  };

  Node root() { return Node(this, ""); }
  void set_resolved(const std::string& pointer, const Json& value);
  const Json& resolved() const { return resolved_; }
  const Json& raw() const { return root_; }

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;

 private:
  friend class Node;
  Json root_;
  Json resolved_;
  std::set<std::string> consumed_;  // leaves read as a whole
  std::set<std::string> visited_;   // tables descended into
  void walk(const Json& j, const std::string& path) const;
};

/// Human-readable key name ("basis.modes.width") for a JSON pointer path.
std::string dotted(const std::string& pointer);

}  // namespace sflow::cli
