#include "fewshot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "fewshot/classifier.hpp"
#include "fewshot/distributions.hpp"
#include "fewshot/features.hpp"
#include "fewshot/parallel.hpp"

#ifndef FEWSHOT_VERSION
#define FEWSHOT_VERSION "0.0.0"
#endif

namespace fewshot {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

// Reads one JSON object, rejecting unknown keys, and records every value it
// hands out (defaults included) into out().
class Fields {
 public:
  Fields(const json& in, std::string where, std::vector<std::string> allowed)
      : in_(in), where_(std::move(where)) {
    if (!in.is_object()) config_error(where_ + ": expected a JSON object");
    for (const auto& item : in.items())
      if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
        config_error(where_ + ": unknown field '" + item.key() + "'");
  }

  bool has(const std::string& key) const { return in_.contains(key); }
  const json& raw(const std::string& key) const { return in_.at(key); }
  json& out() { return out_; }
  const std::string& where() const { return where_; }
  std::string name(const std::string& key) const { return where_ + "." + key; }

  double real(const std::string& key, std::optional<double> def = std::nullopt) {
    double v;
    if (!has(key)) {
      if (!def) missing(key);
      v = *def;
    } else {
      if (!in_[key].is_number()) config_error(name(key) + ": expected a number");
      v = in_[key].get<double>();
    }
    if (!std::isfinite(v)) config_error(name(key) + ": must be finite");
    out_[key] = v;
    return v;
  }

  double positive(const std::string& key, std::optional<double> def = std::nullopt) {
    const double v = real(key, def);
    if (!(v > 0.0)) config_error(name(key) + ": must be > 0");
    return v;
  }

  long long integer(const std::string& key, std::optional<long long> def, long long lo, long long hi) {
    long long v;
    if (!has(key)) {
      if (!def) missing(key);
      v = *def;
    } else {
      v = as_integer(in_[key], name(key));
    }
    if (v < lo || v > hi)
      config_error(name(key) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out_[key] = v;
    return v;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t def) {
    std::uint64_t v = def;
    if (has(key)) {
      const json& j = in_[key];
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        config_error(name(key) + ": expected a non-negative integer");
      v = j.get<std::uint64_t>();
    }
    out_[key] = v;
    return v;
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    std::string v;
    if (!has(key)) {
      if (!def) missing(key);
      v = *def;
    } else {
      if (!in_[key].is_string()) config_error(name(key) + ": expected a string");
      v = in_[key].get<std::string>();
    }
    out_[key] = v;
    return v;
  }

  std::string choice(const std::string& key, const std::string& def, std::vector<std::string> options) {
    const std::string v = string(key, def);
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      config_error(name(key) + ": expected one of " + list);
    }
    return v;
  }

  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (has(key)) {
      if (!in_[key].is_boolean()) config_error(name(key) + ": expected true or false");
      v = in_[key].get<bool>();
    }
    out_[key] = v;
    return v;
  }

  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> def = std::nullopt) {
    std::vector<double> v;
    if (!has(key)) {
      if (!def) missing(key);
      v = *def;
    } else {
      const json& j = in_[key];
      if (!j.is_array() || j.empty()) config_error(name(key) + ": expected a non-empty array of numbers");
      for (const auto& e : j) {
        if (!e.is_number()) config_error(name(key) + ": expected a non-empty array of numbers");
        v.push_back(e.get<double>());
      }
    }
    for (double x : v)
      if (!std::isfinite(x)) config_error(name(key) + ": entries must be finite");
    out_[key] = v;
    return v;
  }

  std::vector<long long> integers(const std::string& key, std::optional<std::vector<long long>> def, long long lo,
                                  long long hi) {
    std::vector<long long> v;
    if (!has(key)) {
      if (!def) missing(key);
      v = *def;
    } else {
      const json& j = in_[key];
      if (!j.is_array() || j.empty()) config_error(name(key) + ": expected a non-empty array of integers");
      for (const auto& e : j) v.push_back(as_integer(e, name(key)));
    }
    for (long long x : v)
      if (x < lo || x > hi)
        config_error(name(key) + ": entries must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out_[key] = v;
    return v;
  }

  std::string input_path(const std::string& key) {
    const std::string p = string(key);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) config_error(name(key) + ": file not found: " + p);
    return p;
  }

 private:
  [[noreturn]] void missing(const std::string& key) const { config_error(name(key) + ": required field missing"); }

  static long long as_integer(const json& j, const std::string& what) {
    if (j.is_number_integer()) return j.get<long long>();
    if (j.is_number_float()) {
      const double d = j.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    config_error(what + ": expected an integer");
  }

  json in_;
  std::string where_;
  json out_ = json::object();
};

KernelSpec read_kernel(const json& j, const std::string& where, json& out) {
  Fields f(j, where, {"type", "degree", "bias", "sigma"});
  const std::string type = f.choice("type", "linear", {"linear", "polynomial", "gaussian"});
  try {
    KernelSpec spec = KernelSpec::linear();
    if (type == "linear") {
      if (f.has("degree") || f.has("sigma")) config_error(where + ": linear kernel takes only 'bias'");
      spec = KernelSpec::linear(f.real("bias", 0.0));
    } else if (type == "polynomial") {
      if (f.has("sigma")) config_error(where + ": polynomial kernel takes 'degree' and 'bias'");
      const auto degree = static_cast<int>(f.integer("degree", std::nullopt, 1, 64));
      spec = KernelSpec::polynomial(degree, f.real("bias", 1.0));
    } else {
      if (f.has("degree") || f.has("bias")) config_error(where + ": gaussian kernel takes only 'sigma'");
      spec = KernelSpec::gaussian(f.positive("sigma"));
    }
    out = kernel_to_json(spec);
    return spec;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    config_error(where + ": " + e.what());
  }
}

KernelSpec kernel_field(Fields& f, const std::string& key, const json& def) {
  json out;
  const KernelSpec spec = read_kernel(f.has(key) ? f.raw(key) : def, f.name(key), out);
  f.out()[key] = out;
  return spec;
}

std::vector<KernelSpec> kernel_list(Fields& f, const std::string& key, const json& def) {
  const json& list = f.has(key) ? f.raw(key) : def;
  if (!list.is_array() || list.empty()) config_error(f.name(key) + ": expected a non-empty array of kernels");
  std::vector<KernelSpec> specs;
  json out = json::array();
  for (std::size_t i = 0; i < list.size(); ++i) {
    json one;
    specs.push_back(read_kernel(list[i], f.name(key) + "[" + std::to_string(i) + "]", one));
    out.push_back(one);
  }
  f.out()[key] = out;
  return specs;
}

DomainSpec domain_field(Fields& f, const std::string& key) {
  const json def = {{"type", "unit_ball"}, {"dim", 2}};
  Fields d(f.has(key) ? f.raw(key) : def, f.name(key), {"type", "dim", "half_width"});
  const std::string type = d.choice("type", "unit_ball", {"unit_ball", "cube"});
  const auto dim = static_cast<int>(d.integer("dim", std::nullopt, 1, 100000));
  DomainSpec spec;
  if (type == "unit_ball") {
    if (d.has("half_width")) config_error(d.where() + ": unit_ball takes no 'half_width'");
    spec = DomainSpec::unit_ball(dim);
  } else {
    spec = DomainSpec::cube(dim, d.positive("half_width", 1.0 / std::sqrt(3.0)));
  }
  f.out()[key] = d.out();
  return spec;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Common {
  std::string command;
  std::uint64_t seed = 0;
};

std::vector<std::string> with_common(std::vector<std::string> keys) {
  keys.insert(keys.end(), {"schema_version", "command", "seed"});
  return keys;
}

Common read_common(Fields& f, std::string_view command) {
  const long long version = f.integer("schema_version", kSchemaVersion, 1, 1000000);
  if (version != kSchemaVersion)
    config_error("config.schema_version: unsupported version " + std::to_string(version) + " (expected " +
                 std::to_string(kSchemaVersion) + ")");
  Common c;
  c.command = f.string("command", std::string(command));
  if (c.command != command) config_error("config.command: '" + c.command + "' does not match subcommand");
  c.seed = f.seed("seed", 0);
  return c;
}

ExperimentOutput finish(Fields& f, const Common& common, json results, std::vector<ReportFile> files) {
  ExperimentOutput out;
  out.report = json::object();
  out.report["config"] = f.out();
  out.report["results"] = std::move(results);
  out.report["provenance"] = {{"seed", common.seed}, {"version", FEWSHOT_VERSION}, {"timestamp", utc_timestamp()}};
  out.files = std::move(files);
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double population_sd(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (v.size() - 1));
}

// ---------------------------------------------------------------- orthogonality

ExperimentOutput run_orthogonality(const json& config) {
  Fields f(config, "config", with_common({"kernels", "dims", "n", "domain"}));
  const Common common = read_common(f, "orthogonality");
  const auto kernels = kernel_list(f, "kernels", json::array({{{"type", "linear"}}, {{"type", "gaussian"}, {"sigma", 1.0}}}));
  const auto dims = f.integers("dims", std::vector<long long>{10, 100, 1000}, 1, 100000);
  const auto n = static_cast<std::size_t>(f.integer("n", 1000, 2, 20000));
  const std::string domain = f.choice("domain", "unit_ball", {"unit_ball", "cube"});

  json rows = json::array();
  std::ostringstream csv;
  csv << "kernel,dim,n,mean_abs_cos,std_cos,ci_half_width,mean_norm,std_norm,pairs,excluded_pairs\n";
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const int dim = static_cast<int>(dims[di]);
    const DomainSpec spec = domain == "unit_ball" ? DomainSpec::unit_ball(dim) : DomainSpec::cube(dim, 1.0);
    // One sample per dimension, shared by every kernel.
    const Sample sample = sample_domain(spec, n, derive_seed(common.seed, di));
    for (const auto& kernel : kernels) {
      const OrthogonalityStats stats = orthogonality_stats(kernel, sample);
      const double ci = kZ95 * stats.std_cos / std::sqrt(static_cast<double>(n));
      json row = to_json(stats);
      row["kernel"] = kernel_to_json(kernel);
      row["dim"] = dim;
      row["n"] = n;
      row["ci_half_width"] = ci;
      rows.push_back(row);
      csv << kernel.describe() << ',' << dim << ',' << n << ',' << format_real(stats.mean_abs_cos) << ','
          << format_real(stats.std_cos) << ',' << format_real(ci) << ',' << format_real(stats.mean_norm) << ','
          << format_real(stats.std_norm) << ',' << stats.pairs << ',' << stats.excluded_pairs << '\n';
    }
  }
  return finish(f, common, {{"rows", rows}}, {{"orthogonality.csv", csv.str()}});
}

// ---------------------------------------------------------------- volume-ratio

ExperimentOutput run_volume_ratio(const json& config) {
  Fields f(config, "config",
           with_common({"kernel", "domain", "mode", "grid", "support_size", "probes", "centre", "radius",
                        "probe_vector", "threshold_scale", "confidence"}));
  const Common common = read_common(f, "volume-ratio");
  const KernelSpec kernel = kernel_field(f, "kernel", {{"type", "linear"}});
  const DomainSpec domain = domain_field(f, "domain");
  const std::string mode = f.choice("mode", "ball", {"ball", "cap"});
  const std::vector<double> grid =
      f.reals("grid", std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  const auto support_size = static_cast<std::size_t>(f.integer("support_size", 1000, 1, 10000000));
  const auto probes = static_cast<std::size_t>(f.integer("probes", 100000, 1, 100000000));
  const std::string centre = f.choice("centre", "empirical", {"empirical", "origin"});
  const double confidence = f.real("confidence", 0.95);
  if (confidence != 0.95 && confidence != 0.99) config_error("config.confidence: expected 0.95 or 0.99");
  const double z = confidence == 0.95 ? kZ95 : kZ99;

  std::optional<double> given_radius;
  if (f.has("radius") && f.raw("radius").is_number()) {
    given_radius = f.positive("radius");
  } else {
    const std::string r = f.string("radius", std::string("support"));
    if (r != "support") config_error("config.radius: expected a positive number or \"support\"");
  }

  std::vector<double> v_point;
  std::string threshold_scale;
  if (mode == "cap") {
    std::vector<double> e1(static_cast<std::size_t>(domain.dim), 0.0);
    e1[0] = 1.0;
    v_point = f.reals("probe_vector", e1);
    if (v_point.size() != static_cast<std::size_t>(domain.dim))
      config_error("config.probe_vector: length must equal domain.dim");
    threshold_scale = f.choice("threshold_scale", "normalized", {"normalized", "absolute"});
  } else {
    if (f.has("probe_vector") || f.has("threshold_scale"))
      config_error("config: 'probe_vector' and 'threshold_scale' apply only to mode \"cap\"");
    for (double eps : grid)
      if (eps < 0.0 || eps > 1.0) config_error("config.grid: eps values must lie in [0, 1]");
  }
  const Sample support = sample_domain(domain, support_size, derive_seed(common.seed, 1));
  const Sample probe = sample_domain(domain, probes, derive_seed(common.seed, 2));
  const FeatureCombination c = centre == "empirical"
                                   ? FeatureCombination::mean(kernel, support.points)
                                   : FeatureCombination::singleton(kernel, as_data(Vector::Zero(domain.dim)));
  const double r = given_radius ? *given_radius : enclosing_radius(kernel, c, support).radius;

  json results = {{"radius", r},
                  {"radius_source", given_radius ? "given" : "sample-estimated"},
                  {"centre", centre},
                  {"centre_sq_norm", c.self_inner()}};
  std::vector<VolumeRatioEstimate> estimates;
  std::vector<double> thresholds;
  if (mode == "ball") {
    estimates = ball_ratio_sweep(kernel, c, probe, r, grid, z);
    for (double eps : grid) thresholds.push_back(eps * r);
  } else {
    const FeatureCombination v = FeatureCombination::singleton(kernel, v_point);
    const double v_norm = std::sqrt(centered_sq_norm(kernel, v_point, c));
    results["probe_vector_centered_norm"] = v_norm;
    results["threshold_scale"] = threshold_scale;
    const double scale = threshold_scale == "normalized" ? r * v_norm : 1.0;
    for (double delta : grid) thresholds.push_back(delta * scale);
    estimates = cap_ratio_sweep(kernel, c, v, probe, r, thresholds, z);
  }

  const bool analytic = mode == "ball" && kernel.kind() == KernelKind::Linear &&
                        domain.kind == DomainSpec::Kind::UnitBall && centre == "origin" && given_radius &&
                        *given_radius == 1.0;
  json rows = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    json row = to_json(estimates[i]);
    row["param"] = grid[i];
    row["threshold"] = thresholds[i];
    if (analytic) row["analytic"] = linear_ball_ratio(grid[i], domain.dim);
    rows.push_back(row);
  }
  results["rows"] = rows;
  return finish(f, common, results, {{"volume_ratio.csv", ratio_sweep_csv(grid, estimates)}});
}

// ---------------------------------------------------------------- bounds

struct TwoBalls {
  Vector x_centre;
  Vector z_centre;
  double radius;
};

Sample draw_class(const TwoBalls& tb, bool new_class, std::size_t n, std::uint64_t seed) {
  return sample_ball(as_data(new_class ? tb.x_centre : tb.z_centre), tb.radius, n, seed);
}

json bracket_json(const Bracket& b) { return {{"low", b.low}, {"high", b.high}}; }

ExperimentOutput run_bounds(const json& config) {
  Fields f(config, "config",
           with_common({"kernel", "dim", "separation", "radius", "k", "thetas", "estimate_size", "centres",
                        "centre_size", "grid", "s_grid", "monte_carlo", "geometric"}));
  const Common common = read_common(f, "bounds");
  const KernelSpec kernel = kernel_field(f, "kernel", {{"type", "linear"}});
  const auto dim = static_cast<int>(f.integer("dim", 20, 1, 100000));
  const double separation = f.positive("separation", 4.0);
  const double radius = f.positive("radius", 0.5);
  const auto k = static_cast<int>(f.integer("k", 10, 1, 1000000));
  const std::vector<double> thetas = f.reals("thetas", std::vector<double>{-1.0, 0.0});
  const auto estimate_size = static_cast<std::size_t>(f.integer("estimate_size", 2000, 2, 1000000));
  const std::string centres =
      f.choice("centres", kernel.kind() == KernelKind::Linear ? "exact" : "empirical", {"exact", "empirical"});
  if (centres == "exact" && kernel.kind() != KernelKind::Linear)
    config_error("config.centres: exact centres are available only for the linear kernel");
  const auto centre_size = static_cast<std::size_t>(f.integer("centre_size", 1000, 1, 10000000));

  Fields g(f.has("grid") ? f.raw("grid") : json::object(), "config.grid", {"points", "min", "max", "seeded"});
  const auto grid_points = static_cast<std::size_t>(g.integer("points", 12, 1, 1000));
  const double grid_min = g.positive("min", 1e-3);
  const double grid_max = g.positive("max", 1e3);
  if (grid_min > grid_max) config_error("config.grid: min exceeds max");
  const bool seeded = g.boolean("seeded", true);
  f.out()["grid"] = g.out();

  std::optional<std::vector<double>> s_values;
  if (f.has("s_grid") && f.raw("s_grid").is_array()) {
    s_values = f.reals("s_grid");
    for (double s : *s_values)
      if (!(s > 0.0)) config_error("config.s_grid: entries must be > 0");
  } else if (f.string("s_grid", std::string("auto")) != "auto") {
    config_error("config.s_grid: expected an array of numbers or \"auto\"");
  }

  Fields mc(f.has("monte_carlo") ? f.raw("monte_carlo") : json::object(), "config.monte_carlo",
            {"refits", "draws", "mean_refits"});
  const auto refits = static_cast<std::size_t>(mc.integer("refits", 200, 0, 1000000));
  const auto draws = static_cast<std::size_t>(mc.integer("draws", 10000, 1, 100000000));
  const auto mean_refits = static_cast<std::size_t>(mc.integer("mean_refits", 2000, 0, 100000000));
  f.out()["monte_carlo"] = mc.out();

  Fields geo(f.has("geometric") ? f.raw("geometric") : json::object(), "config.geometric",
             {"enabled", "density_ratio", "probes", "eps"});
  const bool geo_enabled = geo.boolean("enabled", true);
  const double density_ratio = geo.real("density_ratio", 1.0);
  if (density_ratio < 1.0) config_error("config.geometric.density_ratio: must be >= 1");
  const auto geo_probes = static_cast<std::size_t>(geo.integer("probes", 20000, 1, 100000000));
  const std::vector<double> geo_eps = geo.reals("eps", std::vector<double>{0.5, 0.8, 0.9, 0.95, 1.0});
  for (double e : geo_eps)
    if (e < 0.0 || e > 1.0) config_error("config.geometric.eps: values must lie in [0, 1]");
  f.out()["geometric"] = geo.out();

  // Class Z centred at the origin, class X at separation * e1.
  TwoBalls tb{Vector::Zero(dim), Vector::Zero(dim), radius};
  tb.x_centre(0) = separation;

  const std::uint64_t seed = common.seed;
  const FeatureCombination c_x =
      centres == "exact" ? FeatureCombination::singleton(kernel, as_data(tb.x_centre))
                         : FeatureCombination::mean(kernel, draw_class(tb, true, centre_size, derive_seed(seed, 20)).points);
  const FeatureCombination c_z =
      centres == "exact" ? FeatureCombination::singleton(kernel, as_data(tb.z_centre))
                         : FeatureCombination::mean(kernel, draw_class(tb, false, centre_size, derive_seed(seed, 21)).points);
  const double dist2 = combo_pair_stats(kernel, c_x, c_z).sq_distance;

  const Sample x_est = draw_class(tb, true, estimate_size, derive_seed(seed, 10));
  const Sample z_est = draw_class(tb, false, estimate_size, derive_seed(seed, 11));
  const ProbabilityFunctions pf = empirical_prob_functions(kernel, x_est, z_est, c_x, c_z);
  const BoundGrid grid = seeded ? BoundGrid::seeded(pf, k, grid_points, grid_min, grid_max)
                                : BoundGrid::log_spaced(grid_points, grid_min, grid_max);

  if (!s_values) {
    // Spread around the typical |mu - c_X| for k points.
    double mean_sq = 0.0;
    for (double v : pf.localisation_x.knots()) mean_sq += v * v;
    mean_sq /= static_cast<double>(pf.localisation_x.size());
    const double typical = std::sqrt(mean_sq / k);
    s_values.emplace();
    for (int i = 0; i < 10; ++i) s_values->push_back(typical * (0.4 + 0.15 * i));
    f.out()["s_grid"] = *s_values;
  }

  // Monte-Carlo success rates of the few-shot rule, one rate per refit.
  const std::size_t nt = thetas.size();
  std::vector<std::vector<double>> new_rates(nt, std::vector<double>(refits));
  std::vector<std::vector<double>> old_rates(nt, std::vector<double>(refits));
  const std::uint64_t shots_root = derive_seed(seed, 30);
  const std::uint64_t new_root = derive_seed(seed, 31);
  const std::uint64_t old_root = derive_seed(seed, 32);
  for (std::size_t r = 0; r < refits; ++r) {
    const Sample shots = draw_class(tb, true, static_cast<std::size_t>(k), derive_seed(shots_root, r));
    const FewShotModel model = fit_few_shot(kernel, shots.points, c_z);
    const Vector dv_new = model.decision_values(draw_class(tb, true, draws, derive_seed(new_root, r)).points);
    const Vector dv_old = model.decision_values(draw_class(tb, false, draws, derive_seed(old_root, r)).points);
    for (std::size_t t = 0; t < nt; ++t) {
      new_rates[t][r] = static_cast<double>((dv_new.array() >= thetas[t]).count()) / draws;
      old_rates[t][r] = static_cast<double>((dv_old.array() < thetas[t]).count()) / draws;
    }
  }

  auto mc_json = [&](const std::vector<double>& rates) -> json {
    if (rates.empty()) return nullptr;
    const double est = mean_of(rates);
    const double sigma = sample_sd(rates) / std::sqrt(static_cast<double>(rates.size()));
    return {{"estimate", est}, {"sigma", sigma}, {"refits", rates.size()}, {"draws", draws}};
  };
  auto contained = [](const BoundReport& b, const json& m) -> json {
    if (m.is_null()) return nullptr;
    const double est = m["estimate"].get<double>();
    const double sigma = m["sigma"].get<double>();
    return b.lower - 3.0 * sigma <= est && est <= b.upper + 3.0 * sigma;
  };

  json learning = json::array();
  for (std::size_t t = 0; t < nt; ++t) {
    const LearningBounds lb = combined_bounds(k, pf, dist2, thetas[t], grid);
    const json mc_new = mc_json(new_rates[t]);
    const json mc_old = mc_json(old_rates[t]);
    learning.push_back({{"theta", thetas[t]},
                        {"new_class", to_json(lb.new_class)},
                        {"old_class", to_json(lb.old_class)},
                        {"monte_carlo", {{"new_class", mc_new}, {"old_class", mc_old}}},
                        {"within_bounds", {{"new_class", contained(lb.new_class, mc_new)},
                                           {"old_class", contained(lb.old_class, mc_old)}}}});
  }

  // P(|mu - c_X| <= s) by Monte Carlo against the mean-convergence bracket.
  std::vector<double> mean_dist(mean_refits);
  const std::uint64_t mean_root = derive_seed(seed, 40);
  parallel_for(mean_refits, [&](std::size_t r) {
    const Sample shots = draw_class(tb, true, static_cast<std::size_t>(k), derive_seed(mean_root, r));
    const FeatureCombination mu = FeatureCombination::mean(kernel, shots.points);
    mean_dist[r] = std::sqrt(combo_pair_stats(kernel, mu, c_x).sq_distance);
  });
  json mean_rows = json::array();
  for (double s : *s_values) {
    const auto delta_grid = default_delta_grid(pf, s);
    const Bracket b = mean_convergence_bounds(k, s, pf, delta_grid);
    const double at_s2[] = {s * s};
    const Bracket simple = mean_convergence_bounds(k, s, pf, at_s2);
    json row = {{"s", s}, {"lower", b.low}, {"upper", b.high}, {"delta_grid_size", delta_grid.size()},
                {"at_delta_s2", bracket_json(simple)}};
    if (mean_refits > 0) {
      const auto hits = static_cast<std::size_t>(std::count_if(mean_dist.begin(), mean_dist.end(),
                                                               [s](double v) { return v <= s; }));
      const double p = static_cast<double>(hits) / mean_refits;
      const double sigma = std::sqrt(p * (1.0 - p) / mean_refits);
      row["monte_carlo"] = {{"estimate", p}, {"sigma", sigma}, {"refits", mean_refits}};
      row["within_bounds"] = b.low - 3.0 * sigma <= p && p <= b.high + 3.0 * sigma;
    }
    mean_rows.push_back(row);
  }

  json results = {{"dist2", dist2},
                  {"centres", centres},
                  {"delta_grid", "pairwise-projection quantiles with left neighbours and s^2"},
                  {"learning", learning},
                  {"mean_convergence", mean_rows}};

  if (geo_enabled) {
    // Ball pre-image ratios need the true support radius; the sample maximum
    // stands in for it, so these brackets are heuristic.
    const RadiusEstimate rx = enclosing_radius(kernel, c_x, x_est);
    const Sample probe = draw_class(tb, true, geo_probes, derive_seed(seed, 50));
    const auto ratios = ball_ratio_sweep(kernel, c_x, probe, rx.radius, geo_eps);
    json rows = json::array();
    for (std::size_t i = 0; i < geo_eps.size(); ++i) {
      const Bracket b = localisation_bracket(density_ratio, ratios[i].ratio);
      rows.push_back({{"eps", geo_eps[i]},
                      {"ball_ratio", to_json(ratios[i])},
                      {"localisation", bracket_json(b)},
                      {"empirical_localisation", pf.localisation_x(geo_eps[i] * rx.radius)}});
    }
    results["geometric"] = {{"radius", rx.radius},
                            {"density_ratio", density_ratio},
                            {"heuristic_flags", json::array({"sample-estimated radius"})},
                            {"rows", rows}};
  }

  std::ostringstream csv;
  csv << "theta,class,lower,upper,mc_estimate,mc_sigma\n";
  for (const auto& row : learning) {
    for (const char* cls : {"new_class", "old_class"}) {
      const json& m = row["monte_carlo"][cls];
      csv << format_real(row["theta"].get<double>()) << ',' << cls << ','
          << format_real(row[cls]["lower"].get<double>()) << ',' << format_real(row[cls]["upper"].get<double>())
          << ',' << (m.is_null() ? "" : format_real(m["estimate"].get<double>())) << ','
          << (m.is_null() ? "" : format_real(m["sigma"].get<double>())) << '\n';
    }
  }
  return finish(f, common, results, {{"bounds.csv", csv.str()}});
}

// ---------------------------------------------------------------- fewshot-roc

std::vector<Eigen::Index> choose_rows(Eigen::Index n, int k, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

json table_json(const FeatureTable& t) {
  return {{"source", t.source}, {"checksum", t.checksum}, {"rows", t.size()}, {"width", t.width()}};
}

ExperimentOutput run_fewshot_roc(const json& config) {
  Fields f(config, "config", with_common({"train", "test", "new_label", "k", "seeds", "repeats", "kernels", "normalize"}));
  const Common common = read_common(f, "fewshot-roc");
  const std::string train_path = f.input_path("train");
  const std::string test_path = f.input_path("test");
  const std::string new_label = f.string("new_label");
  const auto k = static_cast<int>(f.integer("k", 10, 1, 1000000));
  std::vector<std::uint64_t> seeds;
  if (f.has("seeds")) {
    if (f.has("repeats")) config_error("config: give either 'seeds' or 'repeats', not both");
    const json& list = f.raw("seeds");
    if (!list.is_array() || list.empty()) config_error("config.seeds: expected a non-empty array of integers");
    for (const auto& s : list) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        config_error("config.seeds: entries must be non-negative integers");
      seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    const auto repeats = f.integer("repeats", 20, 1, 100000);
    for (long long i = 0; i < repeats; ++i) seeds.push_back(derive_seed(common.seed, static_cast<std::uint64_t>(i)));
  }
  f.out()["seeds"] = seeds;
  const auto kernels = kernel_list(f, "kernels", json::array({{{"type", "linear"}}}));
  const bool normalize = f.boolean("normalize", true);

  const FeatureTable train = ingest_feature_csv(train_path);
  const FeatureTable test = ingest_feature_csv(test_path);
  if (train.width() != test.width())
    throw Error(ErrorCode::InputData, "train and test tables differ in width (" + std::to_string(train.width()) +
                                          " vs " + std::to_string(test.width()) + ")");
  Matrix train_new = train.select(new_label);
  Matrix train_old = train.select(new_label, true);
  Matrix test_new = test.select(new_label);
  Matrix test_old = test.select(new_label, true);
  if (train_new.rows() < k)
    throw Error(ErrorCode::InputData, train.source + ": only " + std::to_string(train_new.rows()) +
                                          " rows labelled '" + new_label + "', need k = " + std::to_string(k));
  if (train_old.rows() == 0) throw Error(ErrorCode::InputData, train.source + ": no old-class rows");
  if (test_new.rows() == 0 || test_old.rows() == 0)
    throw Error(ErrorCode::InputData, test.source + ": test table needs both new-class and old-class rows");

  json results = {{"train", table_json(train)}, {"test", table_json(test)}};
  if (normalize) {
    NormalizedTables norm = normalize_feature_table(train_old, train_new);
    train_old = std::move(norm.old_rows);
    train_new = std::move(norm.new_rows);
    test_new = norm.transform.apply(test_new);
    test_old = norm.transform.apply(test_old);
    results["normalization"] = {{"scale", norm.transform.scale}, {"mean_norm", norm.transform.mean.norm()}};
  }

  json per_kernel = json::array();
  std::vector<ReportFile> files;
  for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
    const KernelSpec& kernel = kernels[ki];
    const FeatureCombination c_z = FeatureCombination::mean(kernel, train_old);
    std::vector<double> aurocs;
    json summary;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto idx = choose_rows(train_new.rows(), k, seeds[si]);
      Matrix shots(k, train_new.cols());
      for (int i = 0; i < k; ++i) shots.row(i) = train_new.row(idx[static_cast<std::size_t>(i)]);
      const FewShotModel model = fit_few_shot(kernel, shots, c_z);
      const Vector pos = model.decision_values(test_new);
      const Vector neg = model.decision_values(test_old);
      const RocCurve curve = roc_curve({pos.data(), static_cast<std::size_t>(pos.size())},
                                       {neg.data(), static_cast<std::size_t>(neg.size())});
      aurocs.push_back(auroc(curve));
      if (si == 0) {
        summary = {{"k", k}, {"kernel", kernel_to_json(kernel)}, {"dist2", model.dist2()}, {"seed", seeds[0]}};
        files.push_back({"roc_" + std::to_string(ki) + ".csv", roc_csv(curve)});
      }
    }
    per_kernel.push_back({{"kernel", kernel_to_json(kernel)},
                          {"aurocs", aurocs},
                          {"mean_auroc", mean_of(aurocs)},
                          {"std_auroc", population_sd(aurocs)},
                          {"model", summary},
                          {"roc_file", "roc_" + std::to_string(ki) + ".csv"}});
  }
  results["kernels"] = per_kernel;
  return finish(f, common, results, std::move(files));
}

// ---------------------------------------------------------------- ingest-check

ExperimentOutput run_ingest_check(const json& config) {
  Fields f(config, "config", with_common({"input"}));
  const Common common = read_common(f, "ingest-check");
  const std::string path = f.input_path("input");
  const FeatureTable table = ingest_feature_csv(path);
  std::map<std::string, std::size_t> counts;
  for (const auto& l : table.labels) ++counts[l];
  json results = table_json(table);
  results["labels"] = counts;
  results["columns"] = table.columns;
  return finish(f, common, results, {});
}

// ---------------------------------------------------------------- synth-features

ExperimentOutput run_synth_features(const json& config) {
  Fields f(config, "config",
           with_common({"dim", "old_classes", "separation", "radius", "train_per_class", "train_new",
                        "test_per_class", "test_new", "new_label"}));
  const Common common = read_common(f, "synth-features");
  const auto dim = static_cast<int>(f.integer("dim", 50, 1, 100000));
  const auto old_classes = static_cast<int>(f.integer("old_classes", 3, 1, 100000));
  if (old_classes + 1 > dim) config_error("config.old_classes: needs dim >= old_classes + 1");
  const double separation = f.positive("separation", 4.0);
  const double radius = f.positive("radius", 1.0);
  const auto train_per_class = static_cast<std::size_t>(f.integer("train_per_class", 200, 1, 10000000));
  const auto train_new = static_cast<std::size_t>(f.integer("train_new", 50, 1, 10000000));
  const auto test_per_class = static_cast<std::size_t>(f.integer("test_per_class", 200, 1, 10000000));
  const auto test_new = static_cast<std::size_t>(f.integer("test_new", 200, 1, 10000000));
  const std::string new_label = f.string("new_label", std::string("new"));
  if (new_label.empty() || new_label.find_first_of(",\r\n\"") != std::string::npos)
    config_error("config.new_label: must be non-empty without commas, quotes or newlines");

  // Class i is a uniform ball around (separation / sqrt 2) e_i, so every pair
  // of centres is `separation` apart. The new class takes the last slot.
  auto make_table = [&](std::size_t per_class, std::size_t n_new, std::uint64_t root) {
    FeatureTable t;
    for (int j = 0; j < dim; ++j) t.columns.push_back("f" + std::to_string(j));
    std::vector<Matrix> parts;
    for (int c = 0; c <= old_classes; ++c) {
      Vector centre = Vector::Zero(dim);
      centre(c) = separation / std::sqrt(2.0);
      const std::size_t n = c == old_classes ? n_new : per_class;
      parts.push_back(sample_ball(as_data(centre), radius, n,
                                  derive_seed(root, static_cast<std::uint64_t>(c)))
                          .points);
      const std::string label = c == old_classes ? new_label : "c" + std::to_string(c);
      if (label == new_label && c != old_classes) config_error("config.new_label: clashes with an old-class label");
      t.labels.insert(t.labels.end(), n, label);
    }
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.rows();
    t.rows.resize(total, dim);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      t.rows.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return feature_csv(t);
  };
  std::string train_csv = make_table(train_per_class, train_new, derive_seed(common.seed, 1));
  std::string test_csv = make_table(test_per_class, test_new, derive_seed(common.seed, 2));
  json results = {{"train", {{"file", "train.csv"}, {"checksum", fnv1a64_hex(train_csv)}}},
                  {"test", {{"file", "test.csv"}, {"checksum", fnv1a64_hex(test_csv)}}}};
  return finish(f, common, results, {{"train.csv", std::move(train_csv)}, {"test.csv", std::move(test_csv)}});
}

}  // namespace

const char* library_version() { return FEWSHOT_VERSION; }

const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> names = {"orthogonality", "volume-ratio", "bounds",
                                                 "fewshot-roc",   "ingest-check", "synth-features"};
  return names;
}

ExperimentOutput run_experiment(std::string_view command, const nlohmann::json& config) {
  if (command == "orthogonality") return run_orthogonality(config);
  if (command == "volume-ratio") return run_volume_ratio(config);
  if (command == "bounds") return run_bounds(config);
  if (command == "fewshot-roc") return run_fewshot_roc(config);
  if (command == "ingest-check") return run_ingest_check(config);
  if (command == "synth-features") return run_synth_features(config);
  config_error("unknown command '" + std::string(command) + "'");
}

void write_experiment(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
  for (const auto& file : output.files) write_file_atomic(dir / file.name, file.contents);
  write_file_atomic(dir / "report.json", output.report.dump(2) + "\n");
}

json kernel_to_json(const KernelSpec& spec) {
  switch (spec.kind()) {
    case KernelKind::Linear:
      return {{"type", "linear"}, {"bias", spec.bias()}};
    case KernelKind::Polynomial:
      return {{"type", "polynomial"}, {"degree", spec.degree()}, {"bias", spec.bias()}};
    case KernelKind::Gaussian:
      return {{"type", "gaussian"}, {"sigma", spec.sigma()}};
  }
  return nullptr;
}

KernelSpec kernel_from_json(const json& j) {
  json out;
  return read_kernel(j, "kernel", out);
}

json to_json(const BoundReport& report) {
  const auto& p = report.argbest;
  return {{"lower", report.lower},
          {"upper", report.upper},
          {"argbest",
           {{"theta", p.theta}, {"a", p.a}, {"b", p.b}, {"beta", p.beta}, {"gamma", p.gamma}, {"epsilon", p.epsilon}}},
          {"grid_size", report.grid_size},
          {"heuristic_flags", report.heuristic_flags}};
}

json to_json(const VolumeRatioEstimate& e) {
  return {{"ratio", e.ratio}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}, {"hits", e.hits}, {"trials", e.trials}};
}

json to_json(const OrthogonalityStats& s) {
  return {{"mean_abs_cos", s.mean_abs_cos}, {"std_cos", s.std_cos},     {"mean_norm", s.mean_norm},
          {"std_norm", s.std_norm},         {"pairs", s.pairs},         {"excluded_pairs", s.excluded_pairs}};
}

}  // namespace fewshot
