#pragma once

#include <map>
#include <string>
#include <vector>

#include "hanet/training.hpp"

namespace hanet {

// Flat key=value configuration: every TrainConfig field plus the data
// directory, run directory and the lenient-annotation switch. Unknown keys
// and malformed values throw ConfigError.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::string>& keys();

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void assign(const std::string& assignment);
  // One assignment per line; blank lines and '#' comments are skipped.
  void parse(const std::string& text, const std::string& source);
  void load(const std::string& path);

  const std::string& get(const std::string& key) const;
  std::string dump() const;

  TrainConfig train_config() const;
  DatasetOptions dataset_options() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace hanet
