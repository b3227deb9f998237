#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qrnn/models.h"
#include "qrnn/training.h"

namespace qrnn {

struct ConfigKey {
  std::string name;  // kebab-case, identical to the CLI flag
  std::string fallback;
  std::string help;
};

// Where a resolved value came from, lowest precedence first.
enum class ConfigLayer { kDefault, kCheckpoint, kFile, kFlag };

// Settings for one command, kept as text keyed by flag name so reports and
// config files can echo them verbatim. Later layers override earlier ones:
// flag > config file > checkpoint > built-in default.
class RunConfig {
 public:
  static const std::vector<ConfigKey>& keys();

  // Built-in defaults; data-dir comes from QRNN_DATA_DIR when it is set.
  static RunConfig defaults();

  // Unknown keys raise ConfigError.
  void set(const std::string& key, const std::string& value, ConfigLayer layer);
  void merge(const std::vector<std::pair<std::string, std::string>>& entries, ConfigLayer layer);

  const std::string& get(const std::string& key) const;
  ConfigLayer layer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  // Resolved entries in key-table order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  // Pairing and range checks; UsageError for bad (task, model) pairs.
  void validate() const;

  ModelSpec model_spec() const;
  TrainConfig train_config() const;
  QuantScheme scheme() const;
  std::string checkpoint_path() const;

 private:
  std::map<std::string, std::pair<std::string, ConfigLayer>> values_;
};

// `key = value` lines; blank lines and `#` comments are ignored.
// Malformed lines raise ParseError with the 1-based line number.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace qrnn
