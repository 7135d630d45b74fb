#include "hanet/run_config.hpp"

#include <charconv>
#include <sstream>

#include "hanet/binary_io.hpp"
#include "hanet/error.hpp"

namespace hanet {

namespace {

enum class Kind { kReal, kCount, kBool, kText };

struct Field {
  const char* key;
  Kind kind;
  std::string fallback;
};

std::string real_str(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    const TrainConfig d;
    return std::vector<Field>{
        {"lr", Kind::kReal, real_str(d.lr)},
        {"batch_size", Kind::kCount, std::to_string(d.batch_size)},
        {"max_epochs", Kind::kCount, std::to_string(d.max_epochs)},
        {"patience", Kind::kCount, std::to_string(d.patience)},
        {"margin", Kind::kReal, real_str(d.margin)},
        {"lambda", Kind::kReal, real_str(d.lambda)},
        {"eta", Kind::kReal, real_str(d.eta)},
        {"mu", Kind::kReal, real_str(d.mu)},
        {"n_actions", Kind::kCount, std::to_string(d.n_actions)},
        {"n_entities", Kind::kCount, std::to_string(d.n_entities)},
        {"k_actions", Kind::kCount, std::to_string(d.k_actions)},
        {"k_entities", Kind::kCount, std::to_string(d.k_entities)},
        {"dim", Kind::kCount, std::to_string(d.dim)},
        {"seed", Kind::kCount, std::to_string(d.seed)},
        {"se_ratio", Kind::kCount, std::to_string(d.se_ratio)},
        {"role_types", Kind::kCount, std::to_string(d.role_types)},
        {"use_individual", Kind::kBool, "true"},
        {"use_local", Kind::kBool, "true"},
        {"use_global", Kind::kBool, "true"},
        {"stack_sum_normalize", Kind::kBool, "true"},
        {"lenient", Kind::kBool, "false"},
        {"data", Kind::kText, ""},
        {"out", Kind::kText, ""},
    };
  }();
  return fields;
}

const Field& field(const std::string& key) {
  for (const auto& f : schema()) {
    if (key == f.key) return f;
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& f : schema()) values_[f.key] = f.fallback;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& f : schema()) k.push_back(f.key);
    return k;
  }();
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field& f = field(key);
  switch (f.kind) {
    case Kind::kReal:
      parse_real(key, value);
      break;
    case Kind::kCount:
      parse_count(key, value);
      break;
    case Kind::kBool:
      parse_bool(key, value);
      break;
    case Kind::kText:
      break;
  }
  values_[key] = value;
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::parse(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    try {
      assign(line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load(const std::string& path) {
  std::string text;
  try {
    text = binary::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  parse(text, path);
}

const std::string& RunConfig::get(const std::string& key) const {
  field(key);
  return values_.at(key);
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& f : schema()) out += std::string(f.key) + "=" + values_.at(f.key) + "\n";
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  auto real = [&](const char* k) { return parse_real(k, values_.at(k)); };
  auto count = [&](const char* k) { return static_cast<std::size_t>(parse_count(k, values_.at(k))); };
  auto flag = [&](const char* k) { return parse_bool(k, values_.at(k)); };
  c.lr = real("lr");
  c.batch_size = count("batch_size");
  c.max_epochs = count("max_epochs");
  c.patience = count("patience");
  c.margin = real("margin");
  c.lambda = real("lambda");
  c.eta = real("eta");
  c.mu = real("mu");
  c.n_actions = count("n_actions");
  c.n_entities = count("n_entities");
  c.k_actions = count("k_actions");
  c.k_entities = count("k_entities");
  c.dim = count("dim");
  c.seed = parse_count("seed", values_.at("seed"));
  c.se_ratio = count("se_ratio");
  c.role_types = count("role_types");
  c.use_individual = flag("use_individual");
  c.use_local = flag("use_local");
  c.use_global = flag("use_global");
  c.stack_sum_normalize = flag("stack_sum_normalize");
  c.validate();
  return c;
}

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  const TrainConfig c = train_config();
  o.k_actions = c.k_actions;
  o.k_entities = c.k_entities;
  o.role_types = c.role_types;
  o.lenient = parse_bool("lenient", values_.at("lenient"));
  return o;
}

}  // namespace hanet
