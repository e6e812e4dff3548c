// smoothcb command-line driver: run, sweep, diagnose, lowerbound.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smoothcb/smoothcb.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace smoothcb;

namespace {

struct Options {
  std::string alg = "exp4";
  std::string env = "discontinuous";
  std::uint64_t T = 1000;
  std::vector<double> h{0.1};
  std::vector<std::uint64_t> Ts;
  double L = 1.0;
  double beta = 1.0;
  std::size_t seeds = 1;
  std::uint64_t seed = 1;
  std::string out;
  std::string pc = "default";
  std::string noise;
  std::vector<double> eps_grid{0.00625, 0.0125, 0.025, 0.05, 0.1};
  std::vector<double> bandwidths;
  double eta = 0.0;
  double batch_constant = 320.0;
  std::size_t n_ctx = 2000;
  std::size_t per_octave = 2;
  std::size_t threads = 0;
  std::string family = "h";
  double R = 10.0;
  std::size_t d = 1;
};

std::shared_ptr<const PolicyClass> policy_class(const std::string& spec, const Environment& env) {
  if (spec == "default") {
    if (!env.default_policy_class()) throw ConfigError("environment has no default policy class");
    return std::make_shared<const PolicyClass>(*env.default_policy_class());
  }
  if (spec.rfind("grid:", 0) == 0) {
    std::size_t n = 0;
    try {
      n = std::stoul(spec.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad policy class '" + spec + "'");
    }
    return std::make_shared<const PolicyClass>(constant_grid_class(env.space(), n));
  }
  if (spec.rfind("csv:", 0) == 0) return std::make_shared<const PolicyClass>(load_tabular_csv(spec.substr(4)));
  throw ConfigError("unknown policy class '" + spec + "' (default, grid:N or csv:PATH)");
}

ExperimentConfig experiment_config(const Options& o, double h, std::uint64_t T) {
  ExperimentConfig c;
  c.algorithm = parse_algorithm(o.alg);
  c.env = o.env;
  c.T = T;
  c.h = h;
  c.L = o.L;
  c.beta = o.beta;
  c.seeds = o.seeds;
  c.seed = o.seed;
  if (o.eta > 0.0) c.eta = o.eta;
  c.bandwidths = o.bandwidths;
  c.per_octave = o.per_octave;
  c.n_ctx = o.n_ctx;
  c.batch_constant = o.batch_constant;
  c.noise = o.noise;
  c.threads = o.threads;
  return c;
}

json config_json(const ExperimentConfig& c, const std::string& pc) {
  return {{"algorithm", algorithm_name(c.algorithm)},
          {"env", c.env},
          {"policy_class", pc},
          {"T", c.T},
          {"h", c.h},
          {"L", c.L},
          {"beta", c.beta},
          {"seeds", c.seeds},
          {"seed", c.seed},
          {"eta", c.eta ? json(*c.eta) : json(nullptr)},
          {"bandwidths", c.bandwidths},
          {"batch_constant", c.batch_constant},
          {"n_ctx", c.n_ctx},
          {"noise", c.noise}};
}

json summary_json(const ExperimentResult& r, const std::string& pc) {
  json seeds = json::array();
  for (const auto& t : r.traces)
    seeds.push_back({{"seed", t.seed},
                     {"regret", t.regret},
                     {"realized_regret", t.realized_regret},
                     {"cumloss", t.cumloss},
                     {"restarts", t.restarts},
                     {"epochs", t.epochs.size()},
                     {"seconds", t.wall_seconds}});
  return {{"config", config_json(r.config, pc)},
          {"benchmark", {{"value", r.benchmark.value}, {"policy", r.benchmark.policy}, {"h", r.benchmark_h}}},
          {"regret", {{"mean", r.mean_regret}, {"std", r.std_regret}}},
          {"runs", seeds},
          {"runtime_seconds", r.wall_seconds}};
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

void write_outputs(const ExperimentResult& r, const fs::path& dir, const std::string& pc) {
  fs::create_directories(dir);
  bool any_epochs = false;
  for (const auto& t : r.traces) {
    auto f = open_out(dir / ("trace_seed" + std::to_string(t.seed) + ".csv"));
    write_trace_csv(f, t);
    if (r.config.algorithm == Algorithm::CorralUniformH || r.config.algorithm == Algorithm::CorralLipschitz) {
      auto c = open_out(dir / ("corral_seed" + std::to_string(t.seed) + ".csv"));
      write_corral_csv(c, t);
    }
    any_epochs = any_epochs || !t.epochs.empty();
  }
  if (any_epochs) {
    auto f = open_out(dir / "epochs.csv");
    f << "seed,";
    bool header = true;
    for (const auto& t : r.traces) {
      std::ostringstream s;
      write_epochs_csv(s, t);
      std::istringstream in(s.str());
      std::string line;
      std::getline(in, line);
      if (header) f << line << '\n';
      header = false;
      while (std::getline(in, line)) f << t.seed << ',' << line << '\n';
    }
  }
  auto f = open_out(dir / "summary.json");
  f << summary_json(r, pc).dump(2) << '\n';
}

int cmd_run(const Options& o) {
  if (o.h.size() != 1) throw ConfigError("run takes a single --h");
  const ExperimentConfig cfg = experiment_config(o, o.h.front(), o.T);
  const Environment env = build_environment(cfg);
  const auto res = run_experiment(cfg, env, policy_class(o.pc, env));
  if (!o.out.empty()) write_outputs(res, o.out, o.pc);
  std::cout << summary_json(res, o.pc)["regret"].dump() << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  const Algorithm alg = parse_algorithm(o.alg);
  std::vector<std::uint64_t> Ts = o.Ts.empty() ? std::vector<std::uint64_t>{o.T} : o.Ts;
  json table = json::array();
  std::ostringstream csv;
  for (std::uint64_t T : Ts) {
    if (alg == Algorithm::CorralUniformH) {
      // One run per seed, evaluated against every requested bandwidth.
      ExperimentConfig cfg = experiment_config(o, o.h.front(), T);
      const Environment env = build_environment(cfg);
      const auto pc = policy_class(o.pc, env);
      const auto res = run_experiment(cfg, env, pc);
      std::vector<std::vector<UniformHRow>> per_seed;
      for (const auto& tr : res.traces) per_seed.push_back(uniform_h_regret_suite(tr, env, *pc, T, o.beta, o.h, o.n_ctx));
      for (std::size_t k = 0; k < o.h.size(); ++k) {
        double mean = 0.0;
        for (const auto& rows : per_seed) mean += rows[k].regret;
        mean /= static_cast<double>(per_seed.size());
        const auto& r0 = per_seed.front()[k];
        table.push_back({{"T", T}, {"h", r0.h}, {"snapped_h", r0.snapped_h}, {"benchmark", r0.benchmark},
                         {"mean_regret", mean}, {"regret_bound", mean + 1.0}, {"rate", r0.rate}});
        csv << T << ',' << format_double(r0.h) << ',' << format_double(r0.snapped_h) << ','
            << format_double(r0.benchmark) << ',' << format_double(mean) << ',' << format_double(r0.rate) << '\n';
      }
      continue;
    }
    for (double h : o.h) {
      ExperimentConfig cfg = experiment_config(o, h, T);
      const Environment env = build_environment(cfg);
      const auto res = run_experiment(cfg, env, policy_class(o.pc, env));
      table.push_back({{"T", T}, {"h", h}, {"benchmark", res.benchmark.value}, {"mean_regret", res.mean_regret},
                       {"std_regret", res.std_regret}});
      csv << T << ',' << format_double(h) << ',' << format_double(h) << ',' << format_double(res.benchmark.value)
          << ',' << format_double(res.mean_regret) << ",\n";
      if (!o.out.empty())
        write_outputs(res, fs::path(o.out) / ("T" + std::to_string(T) + "_h" + format_double(h)), o.pc);
    }
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    auto f = open_out(fs::path(o.out) / "sweep.csv");
    f << "T,h,snapped_h,benchmark,mean_regret,rate\n" << csv.str();
    auto j = open_out(fs::path(o.out) / "sweep.json");
    j << table.dump(2) << '\n';
  }
  std::cout << table.dump(2) << '\n';
  return 0;
}

int cmd_diagnose(const Options& o) {
  if (o.h.size() != 1) throw ConfigError("diagnose takes a single --h");
  auto [name, params] = parse_spec(o.env);
  if (!o.noise.empty() && !params.has("noise")) params.set("noise", o.noise);
  const Environment env = make_named_instance(name, params);
  const auto pc = policy_class(o.pc, env);
  std::optional<double> L;
  if (env.lipschitz()) L = o.L;
  const auto rep = diagnose(env, *pc, o.h.front(), L, o.eps_grid, o.n_ctx);
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"eps", r.eps},
                    {"near_optimal", r.near_optimal},
                    {"M_h", r.M_h},
                    {"M_h_12eps", r.M_h_12},
                    {"M_0", std::isnan(r.M_0) ? json(nullptr) : json(r.M_0)}});
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  const json out = {{"env", o.env},
                    {"h", rep.h},
                    {"L", L ? json(*L) : json(nullptr)},
                    {"benchmark_h", rep.benchmark},
                    {"rows", rows},
                    {"theta_h", rep.theta},
                    {"psi_L", num(rep.psi)},
                    {"zooming_exponent", num(rep.zoom_exponent)},
                    {"zooming_fit_residual", num(rep.zoom_residual)},
                    {"alpha_unif", rep.alpha_unif}};
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    auto f = open_out(fs::path(o.out) / "diagnostics.json");
    f << out.dump(2) << '\n';
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_lowerbound(const Options& o) {
  if (o.h.size() != 1) throw ConfigError("lowerbound takes a single --h");
  json out = json::object();
  for (const std::string which : {"phi_0", "phi_i"}) {
    std::string env;
    const std::string sel = which == "phi_0" ? "i=0" : "i=random,seed=" + std::to_string(o.seed);
    if (o.family == "h")
      env = "needle_h:d=" + std::to_string(o.d) + ",h=" + format_double(o.h.front()) + ",R=" + format_double(o.R) + "," + sel;
    else if (o.family == "L")
      env = "needle_L:d=" + std::to_string(o.d) + ",L=" + format_double(o.L) + ",R=" + format_double(o.R) + "," + sel;
    else
      throw ConfigError("--family must be h or L");
    Options oo = o;
    oo.env = env;
    ExperimentConfig cfg = experiment_config(oo, o.h.front(), o.T);
    const Environment e = build_environment(cfg);
    const auto res = run_experiment(cfg, e, policy_class("default", e));
    const auto& lb = *e.lower_bound();
    out[which] = {{"env", env},
                  {"selected", lb.selected},
                  {"gap", lb.gap},
                  {"cells", lb.cells},
                  {"benchmark", res.benchmark.value},
                  {"mean_regret", res.mean_regret},
                  {"std_regret", res.std_regret}};
    if (!o.out.empty()) write_outputs(res, fs::path(o.out) / which, "default");
  }
  if (!o.out.empty()) {
    auto f = open_out(fs::path(o.out) / "lowerbound.json");
    f << out.dump(2) << '\n';
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

void common_flags(CLI::App* c, Options& o) {
  c->set_help_flag("--help", "print this help and exit");
  c->add_option("--alg", o.alg, "exp4, pe-s, pe-l, corral-uniform-h or corral-lipschitz");
  c->add_option("--env", o.env, "instance, e.g. discontinuous:ap=0.7");
  c->add_option("--T", o.T, "horizon");
  c->add_option("--h", o.h, "bandwidth(s)")->delimiter(',');
  c->add_option("--L", o.L, "Lipschitz constant");
  c->add_option("--beta", o.beta, "adaptivity exponent in [0,1]");
  c->add_option("--seeds", o.seeds, "number of seeds");
  c->add_option("--seed", o.seed, "first seed");
  c->add_option("--out", o.out, "output directory");
  c->add_option("--pc", o.pc, "policy class: default, grid:N or csv:PATH");
  c->add_option("--noise", o.noise, "bernoulli, gaussian or det");
  c->add_option("--eta", o.eta, "learning rate override");
  c->add_option("--bandwidths", o.bandwidths, "explicit Corral kernel family")->delimiter(',');
  c->add_option("--batch-constant", o.batch_constant, "elimination batch-size constant");
  c->add_option("--n-ctx", o.n_ctx, "context panel size");
  c->add_option("--per-octave", o.per_octave, "uniform-h Corral bandwidths per halving");
  c->add_option("--threads", o.threads, "worker threads (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothed contextual bandits: experiments and diagnostics"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_config("--config", "", "read flags from an INI or TOML file; options go under [run], [sweep], ...");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "run one algorithm over seeds");
  auto* sweep = app.add_subcommand("sweep", "grid over h or T");
  auto* diag = app.add_subcommand("diagnose", "packing numbers and coefficients");
  auto* lower = app.add_subcommand("lowerbound", "needle instances phi_0 and a random phi_i");
  for (auto* c : {run, sweep, diag, lower}) {
    common_flags(c, o);
    c->fallthrough();
  }
  sweep->add_option("--Ts", o.Ts, "horizons")->delimiter(',');
  diag->add_option("--eps-grid", o.eps_grid, "epsilon grid")->delimiter(',');
  lower->add_option("--family", o.family, "h or L");
  lower->add_option("--R", o.R, "regret budget of the construction");
  lower->add_option("--d", o.d, "dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*diag) return cmd_diagnose(o);
    if (*lower) return cmd_lowerbound(o);
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << " (achieved " << e.achieved() << ", target " << e.target() << ")\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "out of range: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
