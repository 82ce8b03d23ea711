// ideaflow command-line front end. Every subcommand writes <out-dir>/report.json
// and, with --svg, one or more plots next to it.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "ideaflow/ideaflow.hpp"
#include "ideaflow/io/csv.hpp"
#include "ideaflow/io/report.hpp"
#include "ideaflow/io/svg.hpp"

namespace fs = std::filesystem;
using namespace ideaflow;
using io::json;

namespace {

// ---------------------------------------------------------------------------
// Option registry: one list drives CLI11, the config echo and --config replay.

using FieldRef = std::variant<double*, std::optional<double>*, long*, std::uint64_t*, std::string*,
                              std::optional<std::string>*, bool*>;

struct Field {
  std::string key;  // config key; the flag is --key with '_' replaced by '-'
  FieldRef ref;
  CLI::Option* option = nullptr;
};

json double_to_json(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double double_from_json(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError("config key '" + key + "' must be a number");
}

class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& ref, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
      opt = app_->add_flag(flag, ref, help);
    } else {
      opt = app_->add_option(flag, ref, help);
      if constexpr (!std::is_same_v<T, std::optional<double>> && !std::is_same_v<T, std::optional<std::string>>)
        opt->capture_default_str();
    }
    fields_.push_back({key, &ref, opt});
    return opt;
  }

  json echo() const {
    json j = json::object();
    for (const auto& f : fields_) {
      std::visit(
          [&](auto* p) {
            using P = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<P, double>) {
              j[f.key] = double_to_json(*p);
            } else if constexpr (std::is_same_v<P, std::optional<double>>) {
              j[f.key] = *p ? double_to_json(**p) : json(nullptr);
            } else if constexpr (std::is_same_v<P, std::optional<std::string>>) {
              j[f.key] = *p ? json(**p) : json(nullptr);
            } else {
              j[f.key] = *p;
            }
          },
          f.ref);
    }
    return j;
  }

  // Values given on the command line win over the file.
  void apply(const json& cfg) {
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = std::find_if(fields_.begin(), fields_.end(), [&](const Field& f) { return f.key == key; });
      if (it == fields_.end()) throw ConfigError("unknown config key '" + key + "'");
      if (it->option && it->option->count() > 0) continue;
      std::visit(
          [&](auto* p) {
            using P = std::remove_pointer_t<decltype(p)>;
            try {
              if constexpr (std::is_same_v<P, double>) {
                *p = double_from_json(value, key);
              } else if constexpr (std::is_same_v<P, std::optional<double>>) {
                if (value.is_null()) p->reset();
                else *p = double_from_json(value, key);
              } else if constexpr (std::is_same_v<P, std::optional<std::string>>) {
                if (value.is_null()) p->reset();
                else *p = value.get<std::string>();
              } else if constexpr (std::is_same_v<P, std::uint64_t> || std::is_same_v<P, long>) {
                if (!value.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
                *p = value.get<P>();
              } else if constexpr (std::is_same_v<P, bool>) {
                if (!value.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
                *p = value.get<bool>();
              } else {
                if (!value.is_string()) throw ConfigError("config key '" + key + "' must be a string");
                *p = value.get<std::string>();
              }
            } catch (const json::exception& e) {
              throw ConfigError("config key '" + key + "': " + e.what());
            }
          },
          it->ref);
    }
  }

 private:
  CLI::App* app_;
  std::vector<Field> fields_;
};

// ---------------------------------------------------------------------------
// Options shared by every subcommand. Only `seed` and the registered fields
// are echoed; threads, out_dir, svg and config do not change the numbers.

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = ".";
  std::string config_file;
  bool svg = false;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::unique_ptr<Registry> registry;
  Common common;
  std::function<void(Command&)> run;

  json config_echo() const {
    json j = registry->echo();
    j["seed"] = common.seed;
    return j;
  }
};

void add_common(Command& c) {
  c.app->add_option("--seed", c.common.seed, "Root seed for every random stream")->capture_default_str();
  c.app->add_option("--threads", c.common.threads, "Worker threads (0 = machine parallelism)")->capture_default_str();
  c.app->add_option("--out-dir,-o", c.common.out_dir, "Directory for report.json and plots")->capture_default_str();
  c.app->add_option("--config", c.common.config_file,
                    "Replay: JSON config object, or a report.json whose config echo is reused");
  c.app->add_flag("--svg", c.common.svg, "Also write SVG plots");
}

void load_config(Command& c) {
  if (c.common.config_file.empty()) return;
  std::ifstream in(c.common.config_file);
  if (!in) throw ConfigError("cannot open config " + c.common.config_file);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + c.common.config_file + ": " + e.what());
  }
  if (j.contains("config") && j.contains("schema_version")) {
    if (j.value("command", c.name) != c.name)
      throw ConfigError("config was written by '" + j.value("command", std::string{}) + "', not '" + c.name + "'");
    j = j["config"];
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("seed")) {
    if (c.app->get_option("--seed")->count() == 0) {
      if (!j["seed"].is_number_unsigned()) throw ConfigError("config key 'seed' must be a nonnegative integer");
      c.common.seed = j["seed"].get<std::uint64_t>();
    }
    j.erase("seed");
  }
  c.registry->apply(j);
}

fs::path prepare_out_dir(const Common& c) {
  fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void emit(const Command& c, json report) {
  const fs::path dir = prepare_out_dir(c.common);
  io::write_text(dir / "report.json", io::dump_report(report));
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
}

void emit_svg(const Command& c, const std::string& file, const io::SvgPlot& plot) {
  if (!c.common.svg) return;
  const fs::path p = prepare_out_dir(c.common) / file;
  io::write_text(p, plot.render());
  std::cout << "wrote " << p.string() << "\n";
}

// ---------------------------------------------------------------------------
// Shared dataset options

struct Data {
  std::string inputs;
  std::string outputs;
  std::string interpolation = "loglinear";

  void add(Registry& r, bool need_outputs = true) {
    r.add("inputs", inputs, "CSV (t,value) of research inputs I");
    if (need_outputs) r.add("outputs", outputs, "CSV (t,value) of efficiency outputs A");
    r.add("interpolation", interpolation, "Interpolation of I between knots: step, linear or loglinear")
        ->check(CLI::IsMember({"step", "linear", "loglinear"}));
  }

  InputPath input_path() const {
    if (inputs.empty()) throw ConfigError("--inputs is required");
    return InputPath(io::read_csv(inputs), parse_interpolation(interpolation));
  }
  TimeSeries output_series() const {
    if (outputs.empty()) throw ConfigError("--outputs is required");
    return io::read_csv(outputs);
  }
};

struct LambdaRange {
  double lo, hi;
  int points;
};

LambdaRange parse_lambda_range(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--lambda-range: expected lo:hi or lo:hi:points, got '" + s + "'");
    }
  }
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError("--lambda-range: expected lo:hi or lo:hi:points, got '" + s + "'");
  LambdaRange r{parts[0], parts[1], parts.size() == 3 ? static_cast<int>(parts[2]) : 41};
  if (!(r.lo >= 0.0 && r.hi >= r.lo) || r.points < 1) throw ConfigError("--lambda-range: need 0 <= lo <= hi and points >= 1");
  return r;
}

std::vector<double> lambda_values(const LambdaRange& r) {
  if (r.points == 1 || r.lo == r.hi) return {r.lo};
  std::vector<double> v;
  for (int i = 0; i < r.points; ++i) v.push_back(r.lo + (r.hi - r.lo) * i / (r.points - 1));
  return v;
}

struct ModelOptions {
  std::string structure = "feller";
  std::string family = "gaussian";
  std::optional<double> fix_beta;
  std::optional<double> fix_lambda;
  long restarts = 8;

  void add(Registry& r) {
    r.add("structure", structure, "Noise structure: feller, independent-levy, synchronized, scale-invariant");
    r.add("family", family, "Noise family: gaussian, stable-max-skew, stable");
    r.add("fix_beta", fix_beta, "Hold beta at this value");
    r.add("fix_lambda", fix_lambda, "Hold lambda at this value");
    r.add("restarts", restarts, "Optimizer starting points");
  }

  ModelClass model_class() const {
    ModelClass c{parse_structure(structure), parse_family(family), fix_beta, fix_lambda};
    c.validate();
    return c;
  }

  MleOptions mle(const Common& common) const {
    if (restarts < 1) throw ConfigError("--restarts must be at least 1");
    MleOptions o;
    o.restarts = static_cast<std::size_t>(restarts);
    o.seed = common.seed;
    o.threads = common.threads;
    return o;
  }
};

io::SvgPlot trajectory_plot(const std::string& title, const TimeSeries& observed, const NoiseModel& model,
                            const InputPath& path) {
  io::SvgPlot plot(title, "year", "A", true);
  plot.add({"observed", {observed.times().begin(), observed.times().end()},
            {observed.values().begin(), observed.values().end()}, "#1f77b4", false, 3.0});
  std::vector<double> grid;
  const double t0 = observed.front_time(), t1 = observed.back_time();
  for (int i = 0; i <= 200; ++i) grid.push_back(t0 + (t1 - t0) * i / 200.0);
  try {
    const auto det = simulate_deterministic(model.jones(), observed.value(0), path, grid);
    plot.add({"deterministic law", grid, {det.values().begin(), det.values().end()}, "#d62728", true});
  } catch (const Error& e) {
    log::warn("trajectory plot: deterministic overlay skipped: ", e.what());
  }
  return plot;
}

// ---------------------------------------------------------------------------
// Subcommands

struct NaiveOpts {
  std::optional<double> ga, gi, t_start, t_end;
  Data data;
  std::optional<std::string> lambda_range;
};

void run_naive(Command& c, NaiveOpts& o) {
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  json& res = report["results"];
  double ga = 0.0, gi = 0.0;
  if (o.ga && o.gi) {
    ga = *o.ga, gi = *o.gi;
  } else {
    if (o.data.inputs.empty() || o.data.outputs.empty())
      throw ConfigError("naive: give --ga and --gi, or --inputs and --outputs");
    const auto in = io::read_csv(o.data.inputs);
    const auto out = io::read_csv(o.data.outputs);
    const double a = o.t_start.value_or(std::max(in.front_time(), out.front_time()));
    const double b = o.t_end.value_or(std::min(in.back_time(), out.back_time()));
    ga = avg_growth(out, a, b);
    gi = avg_growth(in, a, b);
    res["window"] = {{"t_start", a}, {"t_end", b}};
  }
  const double r = naive_r(ga, gi);
  res["g_a"] = io::num(ga);
  res["g_i"] = io::num(gi);
  res["r"] = io::num(r);
  std::cout << "naive r = g_A / g_I = " << ga << " / " << gi << " = " << r << "\n";

  if (o.lambda_range) {
    if (o.data.outputs.empty() || o.data.inputs.empty())
      throw ConfigError("naive --lambda-range needs --inputs and --outputs (refined estimator)");
    const auto path = o.data.input_path();
    const auto out = io::read_csv(o.data.outputs);
    const double a = o.t_start.value_or(std::max(path.t_begin(), out.front_time()));
    const double b = o.t_end.value_or(std::min(path.t_end(), out.back_time()));
    const double m = 0.5 * (a + b);
    const RefinedNaiveInput in{a, m, b, out.interpolate_log(a), out.interpolate_log(m), out.interpolate_log(b)};
    json rows = json::array();
    for (double lam : lambda_values(parse_lambda_range(*o.lambda_range))) {
      const double beta = refined_naive_beta(in, path, lam);
      rows.push_back({{"lambda", lam}, {"beta", io::num(beta)}, {"r", io::num(lam / beta)}});
    }
    res["refined"] = {{"t0", a}, {"t1", m}, {"t2", b}, {"rows", rows}};
  }
  emit(c, report);
}

struct BracketOpts {
  Data data;
  double t1 = 0.0, ts = 0.0, t2 = 0.0;
  std::optional<double> g1, gbar;
  double g1_window = 1.0;
  std::string lambda_range = "0:1:41";
};

void run_bracket(Command& c, BracketOpts& o) {
  BracketProblem pr;
  pr.path = o.data.input_path();
  pr.t1 = o.t1, pr.ts = o.ts, pr.t2 = o.t2;
  if (o.g1 && o.gbar) {
    pr.g1 = *o.g1, pr.gbar = *o.gbar;
  } else {
    const auto out = o.data.output_series();
    pr.g1 = o.g1.value_or(avg_growth(out, o.t1, o.t1 + o.g1_window));
    pr.gbar = o.gbar.value_or(avg_growth(out, o.ts, o.t2));
  }
  pr.validate();
  const auto lr = parse_lambda_range(o.lambda_range);
  const auto b = bracket_r_bounds(pr, lr.lo, lr.hi, lr.points);
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  json rows = json::array();
  for (std::size_t i = 0; i < b.lambdas.size(); ++i) rows.push_back({{"lambda", b.lambdas[i]}, {"r", io::num(b.rs[i])}});
  report["results"] = {{"g1", pr.g1},          {"gbar", pr.gbar},
                       {"r_lo", io::num(b.r_lo)}, {"r_hi", io::num(b.r_hi)},
                       {"lambda_at_r_lo", b.lambda_at_lo}, {"lambda_at_r_hi", b.lambda_at_hi},
                       {"rows", rows}};
  std::cout << "bracket r in [" << b.r_lo << ", " << b.r_hi << "] for lambda in [" << lr.lo << ", " << lr.hi << "]\n";
  emit(c, report);
  io::SvgPlot plot("Bracket estimate of r", "lambda", "r");
  plot.add({"r(lambda)", b.lambdas, b.rs, "#2ca02c", true});
  emit_svg(c, "bracket.svg", plot);
}

struct OlsOpts {
  Data data;
  bool merge = false;
};

void run_ols(Command& c, OlsOpts& o) {
  const auto path = o.data.input_path();
  const auto obs = ObservationSet::from_series(o.data.output_series());
  const auto fit = ols_fit(obs, path, {o.merge});
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = io::ols_json(fit);
  if (fit.effective_n < 10.0)
    report["warnings"].push_back("effective sample size " + std::to_string(fit.effective_n) +
                                 " after multicollinearity; standard errors are unreliable");
  std::cout << "OLS beta = " << fit.beta_hat << " (" << fit.se_beta << "), lambda = " << fit.lambda_hat << " ("
            << fit.se_lambda << "), r = " << fit.r_hat() << ", effective n = " << fit.effective_n << "\n";
  emit(c, report);
}

struct MleOpts {
  Data data;
  ModelOptions model;
  long replicates = 100;
  long boot_restarts = 1;
  double split = 0.8;
  std::string classes = "feller:gaussian,independent-levy:gaussian,scale-invariant:gaussian";
};

void print_fit(const FitResult& f) {
  const auto names = f.cls.parameter_names();
  const auto values = f.cls.natural(f.raw);
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::cout << "  " << names[i] << " = " << values[i];
    if (f.fisher_se) std::cout << "  (se " << (*f.fisher_se)[i] << ")";
    std::cout << "\n";
  }
  std::cout << "  r = " << f.r() << "  loglik = " << f.loglik << (f.converged ? "" : "  [not converged]") << "\n";
}

void run_fit_mle(Command& c, MleOpts& o) {
  const auto path = o.data.input_path();
  const auto series = o.data.output_series();
  const auto obs = ObservationSet::from_series(series);
  const auto fit = mle_fit(o.model.model_class(), obs, path, o.model.mle(c.common));
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = io::fit_json(fit);
  if (!fit.fisher_se) report["warnings"].push_back("Hessian not positive definite; Fisher standard errors unavailable");
  if (fit.model.lambda < 0.0) report["warnings"].push_back("lambda estimate is negative; r uses the raw value");
  std::cout << "MLE fit (" << o.model.structure << ", " << o.model.family << ")\n";
  print_fit(fit);
  emit(c, report);
  emit_svg(c, "trajectory.svg", trajectory_plot("Observed A and fitted deterministic law", series, fit.model, path));
}

void run_bootstrap(Command& c, MleOpts& o) {
  if (o.replicates < 2) throw ConfigError("--replicates must be at least 2");
  const auto path = o.data.input_path();
  const auto obs = ObservationSet::from_series(o.data.output_series());
  const auto fit = mle_fit(o.model.model_class(), obs, path, o.model.mle(c.common));
  BootstrapOptions bo;
  bo.replicates = static_cast<std::size_t>(o.replicates);
  bo.seed = derive_seed(c.common.seed, 0xB007);
  bo.threads = c.common.threads;
  bo.restarts = static_cast<std::size_t>(std::max(1L, o.boot_restarts));
  const auto b = parametric_bootstrap(fit, obs, path, bo);
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = {{"fit", io::fit_json(fit)}, {"bootstrap", io::bootstrap_json(b)}};
  if (b.n_lambda_negative > 0)
    report["warnings"].push_back(std::to_string(b.n_lambda_negative) +
                                 " bootstrap draws have lambda < 0; see conditional_on_lambda_positive");
  std::cout << "MLE fit\n";
  print_fit(fit);
  std::cout << "bootstrap (" << b.draws.size() << " replicates) se:";
  for (std::size_t i = 0; i < b.names.size(); ++i) std::cout << " " << b.names[i] << "=" << b.se[i];
  std::cout << "\n  r | lambda > 0: median " << b.conditional_r_median << ", se " << b.conditional_r_se << " (n = "
            << b.n_conditional << ")\n";
  emit(c, report);
  io::SvgPlot plot("Bootstrap draws of (beta, lambda)", "beta", "lambda");
  std::vector<double> bx, by;
  const auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(b.names.begin(), b.names.end(), n) - b.names.begin());
  };
  const std::size_t ib = col("beta"), il = col("lambda");
  for (const auto& row : b.draws) {
    bx.push_back(ib < row.size() ? row[ib] : fit.model.beta);
    by.push_back(il < row.size() ? row[il] : fit.model.lambda);
  }
  plot.add({"replicates", bx, by, "#1f77b4", false, 2.5});
  plot.add({"point estimate", {fit.model.beta}, {fit.model.lambda}, "#d62728", false, 5.0});
  plot.hline(0.0);
  emit_svg(c, "bootstrap_scatter.svg", plot);
}

void run_lrt(Command& c, MleOpts& o) {
  const auto path = o.data.input_path();
  const auto obs = ObservationSet::from_series(o.data.output_series());
  const auto r = lrt_lambda_zero(o.model.model_class(), obs, path, o.model.mle(c.common));
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = io::lrt_json(r);
  std::cout << "LRT lambda = 0: statistic " << r.stat << ", p = " << r.p_value << "\n";
  emit(c, report);
}

std::vector<ModelClass> parse_classes(const std::string& s) {
  std::vector<ModelClass> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    ModelClass c{parse_structure(item.substr(0, colon)),
                 colon == std::string::npos ? NoiseFamily::Gaussian : parse_family(item.substr(colon + 1)),
                 std::nullopt, std::nullopt};
    c.validate();
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("--classes: no model classes given");
  return out;
}

void run_cv(Command& c, MleOpts& o) {
  const auto path = o.data.input_path();
  const auto obs = ObservationSet::from_series(o.data.output_series());
  const auto classes = parse_classes(o.classes);
  const auto cv = cross_validate(obs, path, classes, o.split, o.model.mle(c.common));
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = io::cv_json(cv, obs);
  std::cout << "cross-validation, split at t = " << obs[cv.split_index].t << "\n";
  for (const auto& e : cv.entries)
    std::cout << "  " << to_string(e.cls.structure) << ":" << to_string(e.cls.family) << "  test loglik "
              << e.test_loglik << "  (delta " << e.delta_vs_first << ")\n";
  emit(c, report);
}

struct BayesOpts {
  Data data;
  std::optional<double> doubling;
  std::optional<double> t_start, t_end;
  long chains = 12;
  long iterations = 40000;
  double burn_in = 0.5;
};

void run_bayes(Command& c, BayesOpts& o) {
  const auto path = o.data.input_path();
  const double a = o.t_start.value_or(path.t_begin());
  const double b = o.t_end.value_or(path.t_end());
  double doubling = 0.0;
  if (o.doubling) {
    doubling = *o.doubling;
  } else if (!o.data.outputs.empty()) {
    const auto out = io::read_csv(o.data.outputs);
    const double g = avg_growth(out, a, b);
    doubling = g > 0.0 ? std::log(2.0) / g : std::numeric_limits<double>::infinity();
  } else {
    throw ConfigError("bayes: give --doubling (years) or --outputs");
  }
  if (o.chains < 1 || o.iterations < 1) throw ConfigError("bayes: chains and iterations must be positive");
  BayesOptions bo;
  bo.mcmc.chains = static_cast<std::size_t>(o.chains);
  bo.mcmc.iterations = static_cast<std::size_t>(o.iterations);
  bo.mcmc.burn_in = o.burn_in;
  bo.mcmc.seed = c.common.seed;
  bo.mcmc.threads = c.common.threads;
  const auto fit = bayes_fit(doubling, a, b, path, bo);
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = io::bayes_json(fit);
  report["results"]["doubling_time"] = io::num(doubling);
  if (fit.posterior.mcmc.warning) {
    report["warnings"].push_back(*fit.posterior.mcmc.warning);
    log::warn(*fit.posterior.mcmc.warning);
  }
  std::cout << "posterior percentiles (5, 25, 50, 75, 95):\n";
  for (const auto& row : fit.table) {
    std::cout << "  " << row.name;
    for (double v : row.values) std::cout << "  " << v;
    std::cout << "\n";
  }
  emit(c, report);
  io::SvgPlot plot("Posterior (left) and prior (right) of lambda, beta, r", "", "value", true);
  plot.set_x_categories({"lambda", "beta", "r"});
  HalfCauchyPrior prior(fit.anchors);
  Rng rng = make_rng(c.common.seed, 0x9121);
  std::vector<std::vector<double>> post(3), pri(3);
  for (const auto& d : fit.posterior.draws) post[0].push_back(d.lambda), post[1].push_back(d.beta), post[2].push_back(d.r());
  for (int i = 0; i < 20000; ++i) {
    const auto d = prior.sample(rng);
    pri[0].push_back(d.lambda), pri[1].push_back(d.beta), pri[2].push_back(d.r());
  }
  for (std::size_t k = 0; k < 3; ++k) {
    plot.violin(static_cast<double>(k) - 0.2, post[k], "#8c6bb1");
    plot.violin(static_cast<double>(k) + 0.2, pri[k], "#bbbbbb");
  }
  emit_svg(c, "posterior_violins.svg", plot);
}

struct SimOpts {
  std::string inputs;
  std::string interpolation = "loglinear";
  double input_growth = 0.03;
  double input_level = 1.0;
  std::string structure = "feller";
  std::string family = "gaussian";
  double theta = 0.02, sigma = 0.05, c = 0.03, alpha = 1.8, skew = 0.0;
  double beta = 0.5, lambda = 0.4, a0 = 1.0;
  double t_start = 0.0, t_end = 50.0, step = 1.0;
};

void run_simulate(Command& c, SimOpts& o) {
  if (!(o.step > 0.0) || !(o.t_end > o.t_start)) throw ConfigError("simulate: need step > 0 and t_end > t_start");
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((o.t_end - o.t_start) / o.step + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(o.t_start + o.step * static_cast<double>(i));
  if (grid.back() < o.t_end - 1e-9) grid.push_back(o.t_end);
  std::optional<TimeSeries> synthetic;
  InputPath path;
  if (!o.inputs.empty()) {
    path = InputPath(io::read_csv(o.inputs), parse_interpolation(o.interpolation));
  } else {
    std::vector<double> iv;
    for (double t : grid) iv.push_back(o.input_level * std::exp(o.input_growth * (t - o.t_start)));
    synthetic = TimeSeries(grid, iv);
    path = InputPath(*synthetic, parse_interpolation(o.interpolation));
  }
  const auto structure = parse_structure(o.structure);
  const auto family = parse_family(o.family);
  NoiseModel model;
  if (family == NoiseFamily::Gaussian) {
    model = structure == Structure::Feller ? NoiseModel::feller(o.theta, o.sigma, o.beta, o.lambda)
                                           : NoiseModel::drift_diffusion(structure, o.theta, o.sigma, o.beta, o.lambda);
  } else {
    const double skew = family == NoiseFamily::StableMaxSkew ? 1.0 : o.skew;
    model = NoiseModel::stable(structure, {o.alpha, skew, o.theta, o.c}, o.beta, o.lambda);
  }
  model.validate();
  Rng rng = make_rng(c.common.seed, 0);
  const auto series = simulate_path(model, o.a0, path, grid, rng);

  const fs::path dir = prepare_out_dir(c.common);
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  report["results"] = {{"model", io::model_json(model)}, {"outputs", io::series_json(series)}};
  io::write_csv(dir / "outputs.csv", series);
  std::cout << "wrote " << (dir / "outputs.csv").string() << "\n";
  if (synthetic) {
    report["results"]["inputs"] = io::series_json(*synthetic);
    io::write_csv(dir / "inputs.csv", *synthetic);
    std::cout << "wrote " << (dir / "inputs.csv").string() << "\n";
  }
  emit(c, report);
  emit_svg(c, "trajectory.svg", trajectory_plot("Simulated A and its deterministic law", series, model, path));
}

void run_prior_tables(Command& c) {
  json report = io::make_report(c.name, c.common.seed, c.config_echo());
  const std::vector<double> qs{0.05, 0.25, 0.5, 0.75, 0.95};
  json hc = json::object(), pr = json::object();
  auto key = [](double q) { return "p" + std::to_string(static_cast<int>(std::lround(q * 100))); };
  auto sig3 = [](double x) {
    std::ostringstream s;
    s << std::setprecision(3) << x;
    return s.str();
  };
  std::cout << "quantile   half-Cauchy(1)   r = product of two half-Cauchy(1)\n";
  json hc3 = json::object(), pr3 = json::object();
  for (double q : qs) {
    const double h = halfcauchy_quantile(q), r = prior_r_quantile(q);
    hc[key(q)] = h;
    pr[key(q)] = r;
    hc3[key(q)] = sig3(h);
    pr3[key(q)] = sig3(r);
    std::cout << "  " << std::setw(4) << q << "     " << std::setw(10) << sig3(h) << "       " << sig3(r) << "\n";
  }
  report["results"] = {{"halfcauchy", hc},
                       {"r_prior", pr},
                       {"rounded_3sf", {{"halfcauchy", hc3}, {"r_prior", pr3}}},
                       {"r_prior_density_at_1", prior_r_density(1.0)}};
  std::cout << "90% intervals: half-Cauchy [" << sig3(halfcauchy_quantile(0.05)) << ", "
            << sig3(halfcauchy_quantile(0.95)) << "], r [" << sig3(prior_r_quantile(0.05)) << ", "
            << sig3(prior_r_quantile(0.95)) << "]\n";
  emit(c, report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ideaflow: estimate returns to research effort from input and output time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ideaflow ") + io::kToolVersion);

  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    auto c = std::make_unique<Command>();
    c->name = name;
    c->app = app.add_subcommand(name, help);
    c->registry = std::make_unique<Registry>(c->app);
    add_common(*c);
    commands.push_back(std::move(c));
    return *commands.back();
  };

  NaiveOpts naive;
  {
    auto& c = make("naive", "Naive r = g_A / g_I, optionally the refined estimator over a lambda range");
    c.registry->add("ga", naive.ga, "Average output growth rate per year");
    c.registry->add("gi", naive.gi, "Average input growth rate per year");
    c.registry->add("t_start", naive.t_start, "Window start (default: common span)");
    c.registry->add("t_end", naive.t_end, "Window end (default: common span)");
    naive.data.add(*c.registry);
    c.registry->add("lambda_range", naive.lambda_range, "lo:hi[:points] for the refined estimator");
    c.run = [&](Command& self) { run_naive(self, naive); };
  }
  BracketOpts bracket;
  {
    auto& c = make("bracket", "Bracket estimator: bounds on r over a lambda range");
    bracket.data.add(*c.registry);
    c.registry->add("t1", bracket.t1, "Time of the initial growth rate")->required();
    c.registry->add("ts", bracket.ts, "Start of the averaging window")->required();
    c.registry->add("t2", bracket.t2, "End of the averaging window")->required();
    c.registry->add("g1", bracket.g1, "Growth rate of A at t1 (default: from --outputs)");
    c.registry->add("gbar", bracket.gbar, "Average growth of A over [ts, t2] (default: from --outputs)");
    c.registry->add("g1_window", bracket.g1_window, "Years after t1 used to estimate g1 from --outputs");
    c.registry->add("lambda_range", bracket.lambda_range, "lo:hi[:points]");
    c.run = [&](Command& self) { run_bracket(self, bracket); };
  }
  OlsOpts ols;
  {
    auto& c = make("fit-ols", "Approximate log-linear OLS fit of (theta, beta, lambda)");
    ols.data.add(*c.registry);
    c.registry->add("merge_nonincreasing", ols.merge, "Merge windows where A does not increase");
    c.run = [&](Command& self) { run_ols(self, ols); };
  }
  MleOpts mle, boot, lrt, cv;
  {
    auto& c = make("fit-mle", "Maximum-likelihood fit of a stochastic law of motion");
    mle.data.add(*c.registry);
    mle.model.add(*c.registry);
    c.run = [&](Command& self) { run_fit_mle(self, mle); };
  }
  {
    auto& c = make("bootstrap", "MLE fit plus parametric bootstrap standard errors");
    boot.data.add(*c.registry);
    boot.model.add(*c.registry);
    c.registry->add("replicates", boot.replicates, "Bootstrap replicates");
    c.registry->add("boot_restarts", boot.boot_restarts, "Optimizer starts per replicate (the first is warm)");
    c.run = [&](Command& self) { run_bootstrap(self, boot); };
  }
  {
    auto& c = make("lrt", "Likelihood-ratio test of lambda = 0");
    lrt.data.add(*c.registry);
    lrt.model.add(*c.registry);
    c.run = [&](Command& self) { run_lrt(self, lrt); };
  }
  {
    auto& c = make("cv", "Chronological train/test comparison of model classes");
    cv.data.add(*c.registry);
    cv.model.restarts = 4;
    c.registry->add("restarts", cv.model.restarts, "Optimizer starting points");
    c.registry->add("split", cv.split, "Fraction of observations in the training part");
    c.registry->add("classes", cv.classes, "Comma-separated structure:family list");
    c.run = [&](Command& self) { run_cv(self, cv); };
  }
  BayesOpts bayes;
  {
    auto& c = make("bayes", "Single-observation Bayesian fit with half-Cauchy priors");
    bayes.data.add(*c.registry);
    c.registry->add("doubling", bayes.doubling, "Doubling time of A in years (inf for flat A)");
    c.registry->add("t_start", bayes.t_start, "Period start (default: first input time)");
    c.registry->add("t_end", bayes.t_end, "Period end (default: last input time)");
    c.registry->add("chains", bayes.chains, "DE-Metropolis chains");
    c.registry->add("iterations", bayes.iterations, "Iterations per chain");
    c.registry->add("burn_in", bayes.burn_in, "Fraction of iterations discarded");
    c.run = [&](Command& self) { run_bayes(self, bayes); };
  }
  SimOpts sim;
  {
    auto& c = make("simulate", "Simulate A on a time grid from a stochastic law of motion");
    auto& r = *c.registry;
    r.add("inputs", sim.inputs, "CSV of inputs I (default: exponential inputs)");
    r.add("interpolation", sim.interpolation, "step, linear or loglinear")->check(CLI::IsMember({"step", "linear", "loglinear"}));
    r.add("input_growth", sim.input_growth, "Growth rate of the synthetic inputs");
    r.add("input_level", sim.input_level, "Level of the synthetic inputs at t_start");
    r.add("structure", sim.structure, "Noise structure");
    r.add("family", sim.family, "Noise family");
    r.add("theta", sim.theta, "Drift constant (stable families: rate)");
    r.add("sigma", sim.sigma, "Gaussian noise scale");
    r.add("c", sim.c, "Stable noise scale");
    r.add("alpha", sim.alpha, "Stable index");
    r.add("skew", sim.skew, "Stable skewness (family stable)");
    r.add("beta", sim.beta, "beta");
    r.add("lambda", sim.lambda, "lambda");
    r.add("a0", sim.a0, "A at t_start");
    r.add("t_start", sim.t_start, "First grid time");
    r.add("t_end", sim.t_end, "Last grid time");
    r.add("step", sim.step, "Grid spacing in years");
    c.run = [&](Command& self) { run_simulate(self, sim); };
  }
  {
    auto& c = make("prior-tables", "Quantiles of the half-Cauchy prior and of the implied prior of r");
    c.run = [](Command& self) { run_prior_tables(self); };
  }

  try {
    log::init_from_env();
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every other parse failure is a usage error.
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (auto& c : commands) {
    if (!c->app->parsed()) continue;
    try {
      load_config(*c);
      c->run(*c);
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: unexpected failure: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}
