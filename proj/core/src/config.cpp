#include "gdopt/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gdopt/csv.hpp"

namespace gdopt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& s, double* out) {
  try {
    std::size_t used = 0;
    *out = std::stod(s, &used);
    return used == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

void ConfigTable::fail(const std::string& origin, int line, const std::string& message) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << message;
  throw std::invalid_argument(os.str());
}

ConfigTable ConfigTable::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str(), path);
}

ConfigTable ConfigTable::parse_text(const std::string& text, const std::string& origin) {
  ConfigTable t;
  t.origin_ = origin;
  t.raw_ = text;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, lineno, "empty section name");
      t.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, lineno, "expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    if (section.empty()) fail(origin, lineno, "entry before any [section]");
    if (raw.empty()) fail(origin, lineno, "missing value for key '" + key + "'");

    Value v;
    v.line = lineno;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"')
        fail(origin, lineno, "unterminated string for key '" + key + "'");
      v.kind = Value::Kind::String;
      v.str = raw.substr(1, raw.size() - 2);
    } else if (raw == "true" || raw == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = raw == "true";
    } else if (raw.front() == '[') {
      if (raw.back() != ']')
        fail(origin, lineno, "unterminated array for key '" + key + "'");
      v.kind = Value::Kind::Array;
      std::string inner = raw.substr(1, raw.size() - 2);
      std::istringstream items(inner);
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        double num = 0.0;
        if (!parse_number(item, &num))
          fail(origin, lineno, "array element '" + item + "' is not a number");
        v.array.push_back(num);
      }
    } else {
      double num = 0.0;
      if (!parse_number(raw, &num))
        fail(origin, lineno, "value '" + raw + "' for key '" + key +
                                 "' is not a number, boolean, string or array");
      v.kind = Value::Kind::Number;
      v.num = num;
    }
    t.sections_[section][key] = std::move(v);
  }
  return t;
}

bool ConfigTable::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

const ConfigTable::Value& ConfigTable::lookup(const std::string& section,
                                              const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end())
    throw std::invalid_argument(origin_ + ": missing section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end())
    throw std::invalid_argument(origin_ + ": missing key '" + key + "' in [" +
                                section + "]");
  return k->second;
}

std::string ConfigTable::get_string(const std::string& section,
                                    const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::String)
    throw std::invalid_argument(origin_ + ": [" + section + "]." + key +
                                " must be a string");
  return v.str;
}

std::string ConfigTable::get_string_or(const std::string& section,
                                       const std::string& key,
                                       const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double ConfigTable::get_number(const std::string& section, const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::Number)
    throw std::invalid_argument(origin_ + ": [" + section + "]." + key +
                                " must be a number");
  return v.num;
}

double ConfigTable::get_number_or(const std::string& section, const std::string& key,
                                  double fallback) const {
  return has(section, key) ? get_number(section, key) : fallback;
}

std::int64_t ConfigTable::get_int(const std::string& section, const std::string& key) const {
  const double v = get_number(section, key);
  const auto i = static_cast<std::int64_t>(v);
  if (static_cast<double>(i) != v)
    throw std::invalid_argument(origin_ + ": [" + section + "]." + key +
                                " must be an integer");
  return i;
}

std::int64_t ConfigTable::get_int_or(const std::string& section, const std::string& key,
                                     std::int64_t fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool ConfigTable::get_bool_or(const std::string& section, const std::string& key,
                              bool fallback) const {
  if (!has(section, key)) return fallback;
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::Bool)
    throw std::invalid_argument(origin_ + ": [" + section + "]." + key +
                                " must be true or false");
  return v.boolean;
}

std::vector<double> ConfigTable::get_array(const std::string& section,
                                           const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::Array)
    throw std::invalid_argument(origin_ + ": [" + section + "]." + key +
                                " must be an array");
  return v.array;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  cfg.table = ConfigTable::parse_file(path);
  cfg.master_seed =
      static_cast<std::uint64_t>(cfg.table.get_int_or("run", "master_seed", 2024));
  cfg.threads = static_cast<int>(cfg.table.get_int_or("run", "threads", 1));
  cfg.out_dir = cfg.table.get_string_or("output", "dir", "out");
  cfg.config_hash = fnv1a64(cfg.table.raw_text() + "#" + std::to_string(cfg.master_seed));
  return cfg;
}

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     std::optional<std::string> out_dir, std::optional<int> threads) {
  if (seed) cfg.master_seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  if (threads) cfg.threads = *threads;
  cfg.config_hash = fnv1a64(cfg.table.raw_text() + "#" + std::to_string(cfg.master_seed));
}

NoiseSchedule make_schedule(const RunConfig& cfg) {
  const auto& t = cfg.table;
  const std::string kind = t.get_string_or("schedule", "kind", "constant");
  const double horizon = t.get_number_or("schedule", "horizon", 10.0);
  if (kind == "constant")
    return NoiseSchedule::constant(t.get_number_or("schedule", "rate", 1.0), horizon);
  if (kind == "tabulated") {
    const auto times = t.get_array("schedule", "knot_t");
    const auto rates = t.get_array("schedule", "knot_q");
    if (times.size() != rates.size())
      throw std::invalid_argument("[schedule].knot_t and knot_q must have equal length");
    std::vector<std::pair<double, double>> knots;
    for (std::size_t i = 0; i < times.size(); ++i) knots.emplace_back(times[i], rates[i]);
    return NoiseSchedule::tabulated(std::move(knots), horizon);
  }
  throw std::invalid_argument("[schedule].kind must be constant or tabulated");
}

Dataset make_dataset(const RunConfig& cfg) {
  const auto& t = cfg.table;
  if (t.has("dataset", "path") && !t.get_bool_or("dataset", "generate", false))
    return load_dataset(t.get_string("dataset", "path"));
  const int dim = static_cast<int>(t.get_int_or("dataset", "D", 64));
  const int lat = static_cast<int>(t.get_int_or("dataset", "d", 16));
  const int n = static_cast<int>(t.get_int_or("dataset", "n", 65536));
  const auto seed = static_cast<std::uint64_t>(
      t.get_int_or("dataset", "seed", static_cast<std::int64_t>(cfg.master_seed)));
  if (lat <= 0 || lat >= dim) {
    // full-rank Gaussian data
    GaussianDist g{VectorXd::Zero(dim), MatrixXd::Identity(dim, dim)};
    return generate_gaussian(g, n, seed);
  }
  const SubspaceBasis basis = random_orthonormal_basis(dim, lat, seed);
  const std::string latent = t.get_string_or("dataset", "latent", "stdnormal");
  if (latent != "stdnormal")
    throw std::invalid_argument("[dataset].latent: only stdnormal is configurable");
  return generate_subspace(basis, LatentSpec::std_normal(), n, seed);
}

LinearScoreModel make_model(const RunConfig& cfg, const Dataset& data) {
  const auto& t = cfg.table;
  if (t.has("score", "model_path")) return load_model(t.get_string("score", "model_path"));
  const std::string klass = t.get_string_or("score", "class", "subspace");
  if (klass == "mean_only") return fit_mean_only(data);
  if (klass == "full_linear") return fit_full_linear(data);
  if (klass == "subspace") return fit_subspace(data);
  if (klass == "frozen_cov") return fit_frozen_cov(data);
  throw std::invalid_argument(
      "[score].class must be mean_only, full_linear, subspace or frozen_cov");
}

Objective make_objective(const RunConfig& cfg, const SubspaceBasis* basis) {
  const auto& t = cfg.table;
  const std::string kind = t.get_string_or("objective", "kind", "quad_scalar");
  const auto direction = [&](const char* explicit_key) -> VectorXd {
    if (t.has("objective", explicit_key)) {
      const auto arr = t.get_array("objective", explicit_key);
      return Eigen::Map<const VectorXd>(arr.data(), arr.size());
    }
    if (!basis)
      throw std::invalid_argument(
          std::string("[objective].") + explicit_key +
          " required when no subspace basis is available for the split recipe");
    return make_split_direction(
        *basis, t.get_number_or("objective", "on_norm", 1.0),
        t.get_number_or("objective", "off_on_ratio", 0.0),
        static_cast<std::uint64_t>(t.get_int_or("objective", "dir_seed", 3)));
  };
  if (kind == "linear") return Objective{Objective::Variant(LinearObjective{direction("g")})};
  if (kind == "quad_scalar") {
    QuadScalarObjective o;
    o.theta = direction("theta");
    o.a = t.get_number_or("objective", "a", 3.0);
    o.c = t.get_number_or("objective", "c", 10.0);
    return Objective{Objective::Variant(std::move(o))};
  }
  if (kind == "dist_norm") {
    DistNormObjective o;
    if (t.has("objective", "b")) {
      const auto arr = t.get_array("objective", "b");
      o.b = Eigen::Map<const VectorXd>(arr.data(), arr.size());
    } else {
      const int dim = static_cast<int>(t.get_int_or("dataset", "D", 64));
      o.b = VectorXd::Constant(dim, t.get_number_or("objective", "b_const", 4.0));
    }
    o.c0 = t.get_number_or("objective", "c0", 5.0);
    o.w = t.get_number_or("objective", "w", 0.5);
    return Objective{Objective::Variant(std::move(o))};
  }
  throw std::invalid_argument("[objective].kind must be linear, quad_scalar or dist_norm");
}

namespace {

BetaRule beta_rule_from(const ConfigTable& t, const std::string& section) {
  const std::string rule = t.get_string_or(section, "beta_rule", "gaussian_theory");
  if (rule == "gaussian_theory") return BetaRule::gaussian_theory();
  if (rule == "subspace_theory") return BetaRule::subspace_theory();
  if (rule == "constant")
    return BetaRule::constant(t.get_number_or(section, "beta_c", 1.0));
  throw std::invalid_argument("[" + section +
                              "].beta_rule must be gaussian_theory, subspace_theory "
                              "or constant");
}

}  // namespace

GuidanceSpec make_guidance(const RunConfig& cfg, const LinearScoreModel& model,
                           const SubspaceBasis* basis) {
  const auto& t = cfg.table;
  GuidanceSpec spec;
  const std::string kind = t.get_string_or("guidance", "kind", "none");
  if (kind == "loss") spec.kind = GuidanceKind::Loss;
  else if (kind == "naive") spec.kind = GuidanceKind::Naive;
  else if (kind == "none") spec.kind = GuidanceKind::None;
  else throw std::invalid_argument("[guidance].kind must be loss, naive or none");
  spec.sigma = t.get_number_or("guidance", "sigma", 1.0);
  spec.beta_rule = beta_rule_from(t, "guidance");
  if (spec.kind == GuidanceKind::None) return spec;

  if (t.has("guidance", "g")) {
    const auto arr = t.get_array("guidance", "g");
    spec.g = Eigen::Map<const VectorXd>(arr.data(), arr.size());
  } else if (basis) {
    spec.g = make_split_direction(
        *basis, t.get_number_or("guidance", "on_norm", 1.0),
        t.get_number_or("guidance", "off_on_ratio", 0.0),
        static_cast<std::uint64_t>(t.get_int_or("guidance", "dir_seed", 5)));
  } else {
    throw std::invalid_argument("[guidance].g required for guided sampling");
  }
  if (t.has("guidance", "y")) {
    spec.y = t.get_number("guidance", "y");
  } else {
    const double eta = t.get_number_or("guidance", "eta", 0.5);
    spec.y = target_y(model, spec.g, spec.sigma, eta);
  }
  return spec;
}

SamplerConfig make_sampler_config(const RunConfig& cfg) {
  const auto& t = cfg.table;
  SamplerConfig sc;
  sc.T = t.get_number_or("sampler", "T", 10.0);
  sc.n_steps = static_cast<int>(t.get_int_or("sampler", "steps", 200));
  sc.batch = static_cast<int>(t.get_int_or("sampler", "batch", 512));
  sc.seed = static_cast<std::uint64_t>(
      t.get_int_or("sampler", "seed", static_cast<std::int64_t>(cfg.master_seed)));
  const std::string mode = t.get_string_or("sampler", "mode", "sde");
  if (mode == "sde") sc.mode = SampleMode::Sde;
  else if (mode == "oracle") sc.mode = SampleMode::AnalyticOracle;
  else throw std::invalid_argument("[sampler].mode must be sde or oracle");
  sc.threads = cfg.threads;
  return sc;
}

OptConfig make_opt_config(const RunConfig& cfg) {
  const auto& t = cfg.table;
  OptConfig oc;
  oc.rounds = static_cast<int>(t.get_int_or("optimizer", "K", 50));
  oc.lambda = t.get_number_or("optimizer", "lambda", 2.0);
  const std::string bs = t.get_string_or("optimizer", "batch_schedule", "constant");
  if (bs == "constant") {
    oc.batch = BatchSchedule::constant_size(
        static_cast<int>(t.get_int_or("optimizer", "B", 512)));
  } else if (bs == "geometric") {
    oc.batch = BatchSchedule::geometric(
        static_cast<int>(t.get_int_or("optimizer", "B0", 256)),
        t.get_number_or("optimizer", "growth", 4.0),
        static_cast<int>(t.get_int_or("optimizer", "cap", 65536)));
  } else {
    throw std::invalid_argument("[optimizer].batch_schedule must be constant or geometric");
  }
  oc.sigma = t.get_number_or("optimizer", "sigma", 1.0);
  oc.beta_rule = beta_rule_from(t, "optimizer");
  oc.exact_mean = t.get_bool_or("optimizer", "exact_mean", false);
  const std::string mode = t.get_string_or("optimizer", "mode", "oracle");
  if (mode == "sde") oc.mode = SampleMode::Sde;
  else if (mode == "oracle") oc.mode = SampleMode::AnalyticOracle;
  else throw std::invalid_argument("[optimizer].mode must be sde or oracle");
  oc.T = t.get_number_or("sampler", "T", 10.0);
  oc.n_steps = static_cast<int>(t.get_int_or("sampler", "steps", 200));
  oc.threads = cfg.threads;

  const std::string eta_rule = t.get_string_or("optimizer", "eta_rule", "two_over_l_plus_2lambda");
  if (eta_rule == "two_over_l_plus_2lambda") {
    oc.alg2.eta_rule = Alg2Options::EtaRule::TwoOverLplus2Lambda;
  } else if (eta_rule == "explicit") {
    oc.alg2.eta_rule = Alg2Options::EtaRule::Explicit;
    oc.alg2.eta = t.get_number("optimizer", "eta");
  } else {
    throw std::invalid_argument(
        "[optimizer].eta_rule must be two_over_l_plus_2lambda or explicit");
  }
  const std::string lambda_rule = t.get_string_or("optimizer", "lambda_rule", "l_logk_over_4k");
  if (lambda_rule == "l_logk_over_4k") {
    oc.alg2.lambda_rule = Alg2Options::LambdaRule::LLogKover4K;
  } else if (lambda_rule == "explicit") {
    oc.alg2.lambda_rule = Alg2Options::LambdaRule::Explicit;
    oc.alg2.lambda = t.get_number_or("optimizer", "alg2_lambda", oc.lambda);
  } else {
    throw std::invalid_argument("[optimizer].lambda_rule must be l_logk_over_4k or explicit");
  }
  return oc;
}

}  // namespace gdopt
