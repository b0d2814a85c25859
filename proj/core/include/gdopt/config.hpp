#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gdopt/dataset.hpp"
#include "gdopt/guidance.hpp"
#include "gdopt/objective.hpp"
#include "gdopt/optimizer.hpp"
#include "gdopt/sampler.hpp"
#include "gdopt/schedule.hpp"
#include "gdopt/score.hpp"

namespace gdopt {

/// Flat-table config format: a documented subset of the INI/TOML family.
/// Sections are [name]; entries are key = value with string ("..."),
/// number, boolean, or arrays of numbers ([1, 2.5, 3]). '#' starts a
/// comment. Errors name the offending section, key and line.
class ConfigTable {
 public:
  static ConfigTable parse_file(const std::string& path);
  static ConfigTable parse_text(const std::string& text, const std::string& origin);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  double get_number(const std::string& section, const std::string& key) const;
  double get_number_or(const std::string& section, const std::string& key,
                       double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  std::int64_t get_int_or(const std::string& section, const std::string& key,
                          std::int64_t fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key,
                   bool fallback) const;
  std::vector<double> get_array(const std::string& section, const std::string& key) const;

  const std::string& raw_text() const { return raw_; }

 private:
  struct Value {
    enum class Kind { String, Number, Bool, Array } kind;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<double> array;
    int line = 0;
  };
  const Value& lookup(const std::string& section, const std::string& key) const;
  [[noreturn]] static void fail(const std::string& origin, int line,
                                const std::string& message);

  std::string origin_;
  std::string raw_;
  std::map<std::string, std::map<std::string, Value>> sections_;
};

/// Everything a run needs, mirrored from the config sections.
struct RunConfig {
  ConfigTable table;
  std::uint64_t master_seed = 2024;
  int threads = 1;
  std::string out_dir = "out";
  std::uint64_t config_hash = 0;  // over raw text and seed
};

RunConfig load_run_config(const std::string& path);
void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     std::optional<std::string> out_dir, std::optional<int> threads);

// Builders from the mirrored sections. Validation errors name the field.
NoiseSchedule make_schedule(const RunConfig& cfg);
Dataset make_dataset(const RunConfig& cfg);
LinearScoreModel make_model(const RunConfig& cfg, const Dataset& data);
Objective make_objective(const RunConfig& cfg, const SubspaceBasis* basis);
GuidanceSpec make_guidance(const RunConfig& cfg, const LinearScoreModel& model,
                           const SubspaceBasis* basis);
SamplerConfig make_sampler_config(const RunConfig& cfg);
OptConfig make_opt_config(const RunConfig& cfg);

}  // namespace gdopt
