#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "magmap/errors.hpp"

namespace magmap::cli {

/// Bad configuration: unknown key, unparsable value or value out of range.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class ValueType { Int, Double, Bool, String, IntList, DoubleList, Choice };

struct KeySpec {
  std::string name;
  ValueType type;
  std::string default_value;  // empty means unset
  std::string help;
  double min = -1e300;        // numeric lower bound (inclusive), per element for lists
  bool strictly_greater = false;
  std::vector<std::string> choices;
};

/// Every key the tool understands.
const std::vector<KeySpec>& schema();

/// key=value settings validated against schema(). Later sources override
/// earlier ones: defaults, then the config file, then command-line flags.
class RunConfig {
 public:
  RunConfig();

  /// Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path);
  /// Parses one "key=value" override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  /// Fails with ConfigError naming `key` when it has no value.
  std::string require_path(const std::string& key) const;

  /// Cross-field checks that a single key cannot express.
  void validate() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace magmap::cli
