#pragma once
// Config parsing, dispatch and report emission for the cflab tool.

#include <cerrno>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <boost/uuid/detail/sha1.hpp>

#include "CLI11.hpp"
#include "cflab/experiments.hpp"

namespace cflab {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ConfigErrorCode { MissingFile = 1, Syntax = 2, UnknownKey = 3, OutOfRange = 4, BadType = 5 };

struct ConfigError : std::runtime_error {
  ConfigErrorCode code;
  ConfigError(ConfigErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{"experiment", "domain", "q",     "profile", "psi",    "level",
                                             "levels",     "feet",   "t0",    "k_min",   "k_max",  "samples",
                                             "seed",       "epsilon", "out_dir", "thresholds"};
  return keys;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError(ConfigErrorCode::BadType, "config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(config_keys().begin(), config_keys().end(), k) == config_keys().end())
      throw ConfigError(ConfigErrorCode::UnknownKey, "unknown config key '" + k + "'");
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(ConfigErrorCode::BadType, std::string("wrong type for '") + key + "'");
    }
  };
  get("experiment", c.experiment);
  get("domain", c.domain);
  get("q", c.q);
  get("profile", c.profile);
  get("psi", c.psi);
  get("level", c.level);
  get("levels", c.levels);
  get("feet", c.feet);
  get("t0", c.t0);
  get("k_min", c.k_min);
  get("k_max", c.k_max);
  get("samples", c.samples);
  get("seed", c.seed);
  get("epsilon", c.epsilon);
  get("out_dir", c.out_dir);
  get("thresholds", c.thresholds);
  return c;
}

inline void validate_config(const ExperimentConfig& c) {
  try {
    c.validate();
  } catch (const InputError& e) {
    const std::string m = e.what();
    const auto code = m.rfind("unknown threshold", 0) == 0 ? ConfigErrorCode::UnknownKey : ConfigErrorCode::OutOfRange;
    throw ConfigError(code, m);
  }
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(ConfigErrorCode::Syntax, std::string("malformed config: ") + e.what());
  }
  auto c = config_from_json(j);
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigErrorCode::MissingFile, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Every field, keys sorted; the hash is taken over this text.
inline std::string canonical_config(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["domain"] = c.domain;
  j["q"] = c.q;
  j["profile"] = c.profile;
  j["psi"] = c.psi;
  j["level"] = c.level;
  j["levels"] = c.levels;
  j["feet"] = c.feet;
  j["t0"] = c.t0;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["epsilon"] = c.epsilon;
  j["thresholds"] = c.thresholds;
  return j.dump();
}

inline std::string sha1_hex(const std::string& s) {
  boost::uuids::detail::sha1 h;
  h.process_bytes(s.data(), s.size());
  boost::uuids::detail::sha1::digest_type dg;
  h.get_digest(dg);
  char buf[41];
  for (int i = 0; i < 5; ++i) std::snprintf(buf + 8 * i, 9, "%08x", dg[i]);
  return std::string(buf, 40);
}

inline std::string config_hash(const ExperimentConfig& c) { return sha1_hex(canonical_config(c)); }

inline std::filesystem::path run_directory(const ExperimentConfig& c) {
  return std::filesystem::path(c.out_dir) / (c.experiment + "-" + config_hash(c).substr(0, 12));
}

// ---------------------------------------------------------------------------
// CSV.

inline std::string csv_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  return out;
}

// Inverse of to_csv; fields that parse completely as numbers become doubles.
inline Table parse_csv(const std::string& name, const std::string& text) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  std::istringstream in(text);
  std::string line;
  Table t;
  t.name = name;
  if (!std::getline(in, line)) throw InputError("empty CSV");
  t.columns = split(line);
  while (std::getline(in, line)) {
    std::vector<Cell> row;
    for (const auto& f : split(line)) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(f.c_str(), &end);
      if (!f.empty() && end == f.c_str() + f.size() && errno == 0)
        row.emplace_back(v);
      else
        row.emplace_back(f);
    }
    t.add(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Emission.

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::string experiment;
  std::string domain;
  std::string started, finished;
  std::vector<std::string> outputs;

  nlohmann::ordered_json to_json() const {
    return {{"tool_version", tool_version}, {"config_hash", config_hash}, {"experiment", experiment},
            {"domain", domain}, {"started", started}, {"finished", finished}, {"outputs", outputs}};
  }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

inline RunManifest emit(const Report& rep, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                        const std::string& started) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.experiment = rep.experiment;
  m.domain = rep.domain;
  m.started = started;
  auto j = rep.to_json();
  j["config_hash"] = m.config_hash;
  j["config"] = nlohmann::ordered_json::parse(canonical_config(cfg));
  write_file(dir / "report.json", j.dump(2) + "\n");
  m.outputs.push_back("report.json");
  for (const auto& t : rep.tables) {
    write_file(dir / (t.name + ".csv"), to_csv(t));
    m.outputs.push_back(t.name + ".csv");
  }
  m.outputs.push_back("manifest.json");
  m.finished = utc_timestamp();
  write_file(dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

// Runs the experiment and writes the run directory. 0 pass, 2 assertion failure.
inline int dispatch(const ExperimentConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const std::string started = utc_timestamp();
  const Report rep = run_experiment(cfg);
  const auto dir = run_directory(cfg);
  emit(rep, cfg, dir, started);
  for (const auto& a : rep.assertions) out << (a.passed ? "ok    " : "FAIL  ") << a.name << "  " << a.detail << "\n";
  for (const auto& f : rep.flags) out << "flag  " << f << "\n";
  out << "report: " << (dir / "report.json").string() << "\n";
  if (rep.passed()) return 0;
  err << "failing assertions:\n";
  for (const auto& f : rep.failures()) err << "  " << f << "\n";
  return 2;
}

inline void print_order_table(std::ostream& out) {
  out << "n  family                 order  class\n";
  for (int n : {2, 3})
    for (const auto& r : order_rows(n)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-2d %-22s %-6s %s\n", n, r.family.c_str(),
                    rational_string(order_of(r.desc)).c_str(), r.cls.name().c_str());
      out << buf;
    }
}

inline int cli_main(int argc, char** argv) {
  CLI::App app{"cflab: Cauchy-Fantappie kernel lab"};
  app.require_subcommand(1);
  std::string experiment, config_path, out_dir, domain = "ball";
  int level = -1, samples = 10000;
  long long seed = -1;
  std::uint64_t cal_seed = 42;

  auto* run = app.add_subcommand("run", "run an experiment");
  run->add_option("experiment", experiment, "experiment id")->required();
  run->add_option("--config", config_path, "config JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--level", level, "quadrature level");
  run->add_option("--seed", seed, "sampling seed");

  auto* cal = app.add_subcommand("calibrate", "calibrate K for a domain");
  cal->add_option("--domain", domain, "domain id")->required();
  cal->add_option("--samples", samples, "collar pairs");
  cal->add_option("--seed", cal_seed, "sampling seed");

  app.add_subcommand("orders", "print the boundary order table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      auto cfg = parse_config(config_path);
      if (cfg.experiment != experiment) {
        std::cerr << "error: config is for '" << cfg.experiment << "', command asked for '" << experiment << "'\n";
        return 1;
      }
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (level >= 0) cfg.level = level;
      if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
      validate_config(cfg);
      return dispatch(cfg);
    }
    if (cal->parsed()) {
      const auto r = calibrate_K(DomainSpec::parse(domain), samples, cal_seed);
      nlohmann::ordered_json j{{"domain", domain}, {"K", r.K}, {"c0", r.c0}, {"samples", r.samples}, {"min_ratio", r.min_ratio}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    print_order_table(std::cout);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error (" << static_cast<int>(e.code) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cflab
