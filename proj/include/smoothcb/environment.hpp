#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "loss.hpp"
#include "policy.hpp"
#include "random.hpp"

namespace smoothcb {

enum class NoiseKind { Deterministic, Bernoulli, TruncatedGaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::Bernoulli;
  double sigma = 0.1;
};

// One round's loss function, kept lazy: it stores the mean loss and the
// round's noise variate, and evaluates l_t(a) on demand.
//
// Bernoulli: l_t(a) = 1{u < lambda(a)} with one u per round, so every l_t(a)
// is Bernoulli(lambda(a)) and the realized function is piecewise with the
// mean's breakpoints plus level crossings.
// TruncatedGaussian: l_t(a) = lambda(a) + clamp(sigma z, -m(a), m(a)) with
// m(a) = min(lambda(a), 1 - lambda(a)); the symmetric clamp keeps the mean.
class RealizedLoss {
 public:
  RealizedLoss() = default;
  RealizedLoss(std::shared_ptr<const LossFunction> mean, NoiseModel noise, double variate)
      : mean_(std::move(mean)), noise_(noise), variate_(variate) {}

  double operator()(const Action& a) const {
    const double m = (*mean_)(a);
    switch (noise_.kind) {
      case NoiseKind::Deterministic: return m;
      case NoiseKind::Bernoulli: return variate_ < m ? 1.0 : 0.0;
      case NoiseKind::TruncatedGaussian: {
        const double cap = std::min(m, 1.0 - m);
        return std::clamp(m + std::clamp(noise_.sigma * variate_, -cap, cap), 0.0, 1.0);
      }
    }
    return m;
  }

  double mean(const Action& a) const { return (*mean_)(a); }
  const LossFunction& mean_function() const { return *mean_; }

  // The whole realized function; exact (piecewise) for Bernoulli noise on
  // piecewise means.
  LossFunction materialize() const {
    switch (noise_.kind) {
      case NoiseKind::Deterministic: return *mean_;
      case NoiseKind::Bernoulli:
        if (const auto* p = mean_->as_piecewise()) return LossFunction::piecewise(p->threshold(variate_));
        if (const auto c = mean_->as_constant()) return LossFunction::constant(variate_ < *c ? 1.0 : 0.0);
        break;
      case NoiseKind::TruncatedGaussian: break;
    }
    auto self = *this;
    return LossFunction::callable([self](const Action& a) { return self(a); }, 1);
  }

 private:
  std::shared_ptr<const LossFunction> mean_;
  NoiseModel noise_;
  double variate_ = 0.0;
};

struct Round {
  Context x;
  RealizedLoss loss;
};

// Metadata of the adaptive lower-bound constructions.
struct LowerBoundInstance {
  enum class Kind { Smoothed, Lipschitz } kind = Kind::Smoothed;
  std::size_t d = 1;
  double h = 0.0;       // smoothed construction
  double L = 1.0;       // Lipschitz construction
  double gap = 0.0;     // Delta
  std::size_t cells = 0;  // N
  double cell_radius = 0.0;  // radius of the regions H_i
  std::vector<Action> centers;  // c_0, c_1, ..., c_N
  std::size_t selected = 0;     // i: phi_i is the mean loss
  double regret_budget = 0.0;   // R_target
};

// Stochastic contextual environment: (x, l) ~ D with known conditional mean
// loss lambda(.|x).
class Environment {
 public:
  using MeanLoss = std::function<std::shared_ptr<const LossFunction>(const Context&)>;
  using Sampler = std::function<Context(Rng&)>;

  // Finite contexts with weights; mean losses given per context.
  Environment(std::string name, ActionSpace space, ContextPanel contexts,
              std::vector<std::shared_ptr<const LossFunction>> losses, NoiseModel noise)
      : name_(std::move(name)), space_(space), finite_(std::move(contexts)), noise_(noise) {
    if (finite_->size() == 0 || finite_->size() != losses.size())
      throw InvalidInput("Environment: need one mean loss per context");
    auto table = std::make_shared<std::vector<std::shared_ptr<const LossFunction>>>(std::move(losses));
    mean_ = [table](const Context& x) { return table->at(x.index); };
    double total = 0.0;
    for (double w : finite_->weights) total += w;
    for (double& w : finite_->weights) w /= total;
  }

  // Contexts drawn from a sampler; expectations use Monte Carlo panels.
  Environment(std::string name, ActionSpace space, Sampler sampler, MeanLoss mean, NoiseModel noise)
      : name_(std::move(name)), space_(space), sampler_(std::move(sampler)), mean_(std::move(mean)), noise_(noise) {}

  const std::string& name() const noexcept { return name_; }
  const ActionSpace& space() const noexcept { return space_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  bool finite_contexts() const noexcept { return finite_.has_value(); }

  std::optional<double> lipschitz() const noexcept { return lipschitz_; }
  void set_lipschitz(double L) { lipschitz_ = L; }

  const std::optional<LowerBoundInstance>& lower_bound() const noexcept { return lower_bound_; }
  void set_lower_bound(LowerBoundInstance lb) { lower_bound_ = std::move(lb); }

  const std::optional<PolicyClass>& default_policy_class() const noexcept { return default_class_; }
  void set_default_policy_class(PolicyClass pc) { default_class_ = std::move(pc); }

  void set_noise(NoiseModel noise) { noise_ = noise; }

  std::shared_ptr<const LossFunction> mean_loss(const Context& x) const { return mean_(x); }

  Context draw_context(Rng& rng) const {
    if (finite_) return finite_->contexts[finite_->size() == 1 ? 0 : rng.categorical(finite_->weights)];
    return sampler_(rng);
  }

  Round draw_round(Rng& rng) const {
    Context x = draw_context(rng);
    auto mean = mean_(x);
    double variate = 0.0;
    if (noise_.kind == NoiseKind::Bernoulli) variate = rng.uniform();
    if (noise_.kind == NoiseKind::TruncatedGaussian) variate = rng.normal();
    return Round{std::move(x), RealizedLoss(std::move(mean), noise_, variate)};
  }

  // Exact context set when finite; otherwise n_ctx contexts drawn from `rng`.
  ContextPanel panel(Rng& rng, std::size_t n_ctx = 2000) const {
    if (finite_) return *finite_;
    ContextPanel p;
    for (std::size_t i = 0; i < n_ctx; ++i) p.contexts.push_back(sampler_(rng));
    p.weights.assign(n_ctx, 1.0 / static_cast<double>(n_ctx));
    return p;
  }

  // Panel with a fixed seed, used for benchmarks and diagnostics.
  ContextPanel reference_panel(std::size_t n_ctx = 2000) const {
    Rng rng(derive_seed(0x9a7e1, static_cast<std::uint64_t>(Stream::Panel)));
    return panel(rng, n_ctx);
  }

  // lambda_h(pi) over a context panel; h = 0 gives the unsmoothed loss.
  double smoothed_policy_loss(const PolicyClass& pc, std::size_t policy, double h, const ContextPanel& panel) const {
    const RectKernel k(space_, h);
    double s = 0.0;
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const Context& x = panel.contexts[i];
      s += panel.weights[i] * k.smoothed_loss(pc.act(policy, x), *mean_(x));
    }
    return s;
  }

 private:
  std::string name_;
  ActionSpace space_;
  std::optional<ContextPanel> finite_;
  Sampler sampler_;
  MeanLoss mean_;
  NoiseModel noise_;
  std::optional<double> lipschitz_;
  std::optional<LowerBoundInstance> lower_bound_;
  std::optional<PolicyClass> default_class_;
};

struct Benchmark {
  double value = 0.0;
  std::size_t policy = 0;
};

// bench(Pi_h) = min over the class of lambda_h(pi); ties go to the lowest index.
inline Benchmark smoothed_benchmark(const Environment& env, const PolicyClass& pc, double h,
                                    const ContextPanel& panel) {
  Benchmark best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double v = env.smoothed_policy_loss(pc, i, h, panel);
    if (v < best.value) best = {v, i};
  }
  return best;
}

inline Benchmark smoothed_benchmark(const Environment& env, const PolicyClass& pc, double h) {
  return smoothed_benchmark(env, pc, h, env.reference_panel());
}

// Counts pairs violating |lambda(a|x) - lambda(a'|x)| <= L rho(a, a') among
// `pairs` random (x, a, a') triples.
inline std::size_t lipschitz_violations(const Environment& env, double L, std::size_t pairs, Rng& rng) {
  std::size_t bad = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Context x = env.draw_context(rng);
    const auto mean = env.mean_loss(x);
    const Action a = env.space().sample_uniform(rng);
    const Action b = env.space().sample_uniform(rng);
    if (std::fabs((*mean)(a) - (*mean)(b)) > L * env.space().distance(a, b) + 1e-12) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Named instances.

// key=value parameters of an instance specification; unknown keys are errors.
class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& k) const { return kv_.count(k) != 0; }
  void set(const std::string& k, const std::string& v) { kv_[k] = v; }

  double number(const std::string& k, double fallback) const {
    used_.insert(k);
    const auto it = kv_.find(k);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("parameter '" + k + "' is not a number: " + it->second);
    }
  }
  std::size_t integer(const std::string& k, std::size_t fallback) const {
    const double v = number(k, static_cast<double>(fallback));
    if (v < 0.0 || v != std::floor(v)) throw ConfigError("parameter '" + k + "' must be a nonnegative integer");
    return static_cast<std::size_t>(v);
  }
  std::string text(const std::string& k, const std::string& fallback) const {
    used_.insert(k);
    const auto it = kv_.find(k);
    return it == kv_.end() ? fallback : it->second;
  }

  void reject_unused(const std::string& where) const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw ConfigError(where + ": unknown parameter '" + k + "'");
  }

  const std::map<std::string, std::string>& values() const noexcept { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

// "name:k=v,k=v" -> (name, params).
inline std::pair<std::string, Params> parse_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("malformed parameter '" + item + "' in '" + spec + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  if (name.empty()) throw ConfigError("empty instance name in '" + spec + "'");
  return {name, Params(std::move(kv))};
}

inline NoiseModel parse_noise(const Params& p, NoiseKind fallback) {
  NoiseModel n;
  n.kind = fallback;
  const std::string s = p.text("noise", "");
  if (s == "bernoulli") n.kind = NoiseKind::Bernoulli;
  else if (s == "gaussian") n.kind = NoiseKind::TruncatedGaussian;
  else if (s == "det" || s == "deterministic") n.kind = NoiseKind::Deterministic;
  else if (!s.empty()) throw ConfigError("unknown noise model '" + s + "'");
  n.sigma = p.number("sigma", 0.1);
  return n;
}

// Constant policies on a grid of the space: i/n on the ring, i/(n-1) on the
// interval (so both endpoints and, for odd n, the midpoint are included), the
// grid points themselves on a finite grid.
inline PolicyClass constant_grid_class(const ActionSpace& space, std::size_t n) {
  if (n == 0) throw InvalidInput("constant_grid_class: n must be positive");
  std::vector<Action> acts;
  switch (space.kind()) {
    case SpaceKind::Ring:
      for (std::size_t i = 0; i < n; ++i) acts.emplace_back(static_cast<double>(i) / static_cast<double>(n));
      break;
    case SpaceKind::FiniteGrid: acts = space.grid_actions(); break;
    case SpaceKind::Cube: {
      if (space.dim() != 1) throw InvalidInput("constant_grid_class: only one-dimensional spaces");
      for (std::size_t i = 0; i < n; ++i)
        acts.emplace_back(n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1));
      break;
    }
  }
  return PolicyClass::constant(std::move(acts));
}

inline ActionSpace parse_space(const std::string& s) {
  if (s == "ring") return ActionSpace::ring();
  if (s == "interval") return ActionSpace::interval();
  if (s.rfind("grid", 0) == 0) return ActionSpace::finite_grid(std::stoul(s.substr(4)));
  if (s.rfind("cube", 0) == 0) return ActionSpace::cube(std::stoul(s.substr(4)));
  throw ConfigError("unknown action space '" + s + "'");
}

namespace detail {

inline Environment single_context_env(std::string name, ActionSpace space, LossFunction mean, NoiseModel noise) {
  return Environment(std::move(name), space, ContextPanel::single(),
                     {std::make_shared<const LossFunction>(std::move(mean))}, noise);
}

// rho(a, center) on the ring as a piecewise-linear function.
inline PiecewiseLinear ring_distance_loss(double center, double offset, double slope) {
  // Kinks at center and at the antipode center +- 1/2.
  std::vector<double> xs{0.0, 1.0, center};
  const double anti = center < 0.5 ? center + 0.5 : center - 0.5;
  xs.push_back(anti);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> ys;
  for (double x : xs) {
    const double diff = std::fabs(x - center);
    ys.push_back(offset + slope * std::min(diff, 1.0 - diff));
  }
  return PiecewiseLinear::interpolate(xs, ys);
}

inline Environment make_discontinuous(const Params& p) {
  const double ap = p.number("ap", 0.7);
  if (ap < 0.0 || ap >= 1.0) throw ConfigError("discontinuous: ap must lie in [0,1)");
  const std::size_t n = p.integer("n", 100);
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  PiecewiseLinear pl = ring_distance_loss(0.5, 0.25, 1.5);
  pl.set_point(ap, 0.1);
  Environment env = single_context_env("discontinuous", ActionSpace::ring(), LossFunction::piecewise(pl), noise);
  env.set_default_policy_class(constant_grid_class(env.space(), n));
  return env;
}

inline Environment make_absolute(const Params& p) {
  const double astar = p.number("astar", 0.5);
  const std::string sp = p.text("space", "interval");
  const std::size_t n = p.integer("n", 101);
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  if (p.has("h")) {
    const double h = p.number("h", 0.0);
    if (astar < 2.0 * h || astar > 1.0 - 2.0 * h) throw ConfigError("absolute: a* must lie in [2h, 1-2h]");
  }
  if (astar < 0.0 || astar > 1.0) throw ConfigError("absolute: a* must lie in [0,1]");
  if (sp != "ring" && sp != "interval") throw ConfigError("absolute: space must be ring or interval");
  const ActionSpace space = sp == "ring" ? ActionSpace::ring() : ActionSpace::interval();
  const PiecewiseLinear pl = [&] {
    if (sp == "ring") return ring_distance_loss(astar, 0.0, 1.0);
    std::vector<double> xs{0.0, astar, 1.0};
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> ys;
    for (double x : xs) ys.push_back(std::fabs(x - astar));
    return PiecewiseLinear::interpolate(xs, ys);
  }();
  Environment env = single_context_env("absolute", space, LossFunction::piecewise(pl), noise);
  env.set_lipschitz(1.0);
  env.set_default_policy_class(constant_grid_class(space, n));
  return env;
}

inline std::vector<double> random_unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// f(z) = min(1, 1/4 + L0 |z| + (L - L0)(|z| - 1/4)_+): L-Lipschitz with
// f(z) - f(0) >= L0 |z|.
inline double local_abs_link(double z, double L, double L0) {
  const double az = std::fabs(z);
  return std::min(1.0, 0.25 + L0 * az + (L - L0) * std::max(0.0, az - 0.25));
}

inline Environment make_linear_sphere(const Params& p) {
  const std::size_t dctx = p.integer("dctx", 3);
  const double L = p.number("L", 2.0);
  const double L0 = p.number("L0", 1.0);
  const std::size_t n = p.integer("n", 64);
  const auto wseed = static_cast<std::uint64_t>(p.integer("wseed", 1));
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  if (dctx < 1) throw ConfigError("linear_sphere: dctx must be >= 1");
  if (!(L >= 1.0) || !(L0 > 0.0) || L0 > L) throw ConfigError("linear_sphere: need L >= 1 and 0 < L0 <= L");
  if (n < 1) throw ConfigError("linear_sphere: n must be >= 1");

  Rng rng(wseed);
  std::vector<std::vector<double>> ws;
  for (std::size_t i = 0; i < n; ++i) ws.push_back(random_unit_vector(dctx, rng));
  const std::vector<double> wstar = ws.front();

  auto sampler = [dctx](Rng& r) {
    Context x;
    x.features = random_unit_vector(dctx, r);
    return x;
  };
  // Knots of f in z: 0, +-1/4 and the saturation points.
  double zsat = 0.0;
  if (0.25 + 0.25 * L0 >= 1.0) zsat = 0.75 / L0;
  else zsat = 0.25 + (0.75 - 0.25 * L0) / L;
  auto mean = [wstar, L, L0, zsat](const Context& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < wstar.size(); ++i) s += wstar[i] * x.features[i];
    s = std::clamp(s, -1.0, 1.0);
    std::vector<double> xs{0.0, 1.0};
    for (double z : {0.0, 0.25, -0.25, zsat, -zsat}) {
      const double a = 0.5 * (s + z + 1.0);
      if (a > 0.0 && a < 1.0) xs.push_back(a);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> ys;
    for (double a : xs) ys.push_back(local_abs_link(2.0 * a - 1.0 - s, L, L0));
    return std::make_shared<const LossFunction>(LossFunction::piecewise(PiecewiseLinear::interpolate(xs, ys)));
  };
  Environment env("linear_sphere", ActionSpace::interval(), sampler, mean, noise);
  // Actions a = (s + 1) / 2, so the link's slope doubles in action units.
  env.set_lipschitz(2.0 * L);
  env.set_default_policy_class(PolicyClass::linear_sphere(std::move(ws)));
  return env;
}

inline std::vector<Action> lattice_centers(std::size_t d, std::size_t per_axis, double spacing_unit) {
  // c_s = unit * (2 s - 1) for s in [per_axis]^d.
  std::vector<Action> out;
  std::vector<std::size_t> idx(d, 1);
  while (true) {
    Action c;
    std::array<double, kMaxActionDim> xs{};
    for (std::size_t i = 0; i < d; ++i) xs[i] = spacing_unit * (2.0 * static_cast<double>(idx[i]) - 1.0);
    c = Action::from({xs.data(), d});
    out.push_back(c);
    std::size_t k = 0;
    while (k < d && ++idx[k] > per_axis) idx[k++] = 1;
    if (k == d) break;
  }
  return out;
}

inline std::size_t pick_needle(const Params& p, std::size_t cells) {
  const std::string sel = p.text("i", "0");
  if (sel == "random") {
    Rng rng(derive_seed(p.integer("seed", 1), 0x1d));
    return 1 + rng.index(cells);
  }
  std::size_t i = 0;
  try {
    i = std::stoul(sel);
  } catch (const std::exception&) {
    throw ConfigError("needle: i must be an index or 'random'");
  }
  if (i > cells) throw ConfigError("needle: i exceeds the number of cells");
  return i;
}

inline Box make_box(const Action& c, double r) {
  Box b{c, c};
  for (std::size_t i = 0; i < c.dim(); ++i) {
    b.lo[i] = std::max(0.0, c[i] - r);
    b.hi[i] = std::min(1.0, c[i] + r);
  }
  return b;
}

inline Environment make_needle_h(const Params& p) {
  const std::size_t d = p.integer("d", 1);
  const double h = p.number("h", 1.0 / 32.0);
  const double R = p.number("R", 10.0);
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  if (!(h > 0.0) || h > 0.125) throw ConfigError("needle_h: h must lie in (0, 1/8]");
  if (!(R > 0.0)) throw ConfigError("needle_h: R must be positive");
  const auto per_axis = static_cast<std::size_t>(std::floor(1.0 / (4.0 * h) + 1e-9));
  const double cells = std::pow(static_cast<double>(per_axis), static_cast<double>(d));
  const double gap = std::min(cells / (40.0 * R), 0.25);

  LowerBoundInstance lb;
  lb.kind = LowerBoundInstance::Kind::Smoothed;
  lb.d = d;
  lb.h = h;
  lb.gap = gap;
  lb.cells = static_cast<std::size_t>(cells);
  lb.cell_radius = h;
  lb.regret_budget = R;
  std::array<double, kMaxActionDim> c0{};
  std::fill(c0.begin(), c0.begin() + static_cast<std::ptrdiff_t>(d), 0.75);
  lb.centers.push_back(Action::from({c0.data(), d}));
  for (const Action& c : lattice_centers(d, per_axis, h)) lb.centers.push_back(c);
  lb.selected = pick_needle(p, lb.cells);

  std::vector<BoxPiece> pieces;
  pieces.push_back(BoxPiece{make_box(lb.centers[0], 0.25), 0.5 - gap / 2.0, 0.0, 0.0, lb.centers[0]});
  if (lb.selected > 0)
    pieces.push_back(BoxPiece{make_box(lb.centers[lb.selected], h), 0.5 - gap, 0.0, 0.0, lb.centers[lb.selected]});
  Environment env = single_context_env("needle_h", ActionSpace::cube(d),
                                       LossFunction::boxes(BoxField(d, 0.5, std::move(pieces))), noise);
  env.set_default_policy_class(PolicyClass::constant(lb.centers));
  env.set_lower_bound(std::move(lb));
  return env;
}

inline Environment make_needle_L(const Params& p) {
  const std::size_t d = p.integer("d", 1);
  const double L = p.number("L", 1.0);
  const double R = p.number("R", 10.0);
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  if (!(L >= 1.0)) throw ConfigError("needle_L: L must be >= 1");
  if (!(R > 0.0)) throw ConfigError("needle_L: R must be positive");
  const double dd = static_cast<double>(d);
  const double gap = std::min(std::pow(std::pow(L, dd) / (40.0 * R * std::pow(8.0, dd)), 1.0 / (dd + 1.0)), 0.125);
  const auto per_axis = static_cast<std::size_t>(std::floor(L / (4.0 * gap) + 1e-9));

  LowerBoundInstance lb;
  lb.kind = LowerBoundInstance::Kind::Lipschitz;
  lb.d = d;
  lb.L = L;
  lb.gap = gap;
  lb.cells = static_cast<std::size_t>(std::pow(static_cast<double>(per_axis), dd));
  lb.cell_radius = gap / L;
  lb.regret_budget = R;
  std::array<double, kMaxActionDim> c0{};
  std::fill(c0.begin(), c0.begin() + static_cast<std::ptrdiff_t>(d), 0.75);
  lb.centers.push_back(Action::from({c0.data(), d}));
  for (const Action& c : lattice_centers(d, per_axis, gap / L)) lb.centers.push_back(c);
  lb.selected = pick_needle(p, lb.cells);

  std::vector<BoxPiece> pieces;
  pieces.push_back(BoxPiece{make_box(lb.centers[0], 0.25), 0.5, gap / 2.0, 1.0, lb.centers[0]});
  if (lb.selected > 0)
    pieces.push_back(
        BoxPiece{make_box(lb.centers[lb.selected], gap / L), 0.5, gap, L, lb.centers[lb.selected]});
  Environment env = single_context_env("needle_L", ActionSpace::cube(d),
                                       LossFunction::boxes(BoxField(d, 0.5, std::move(pieces))), noise);
  env.set_lipschitz(lb.selected > 0 ? L : 1.0);
  env.set_default_policy_class(PolicyClass::constant(lb.centers));
  env.set_lower_bound(std::move(lb));
  return env;
}

inline Environment make_constant(const Params& p) {
  const double c = p.number("c", 0.5);
  const ActionSpace space = parse_space(p.text("space", "ring"));
  const std::size_t n = p.integer("n", 64);
  const NoiseModel noise = parse_noise(p, NoiseKind::Deterministic);
  if (c < 0.0 || c > 1.0) throw ConfigError("constant: c must lie in [0,1]");
  Environment env = single_context_env("constant", space, LossFunction::constant(c), noise);
  env.set_lipschitz(1.0);
  if (space.one_dimensional()) env.set_default_policy_class(constant_grid_class(space, n));
  return env;
}

// Random piecewise-constant mean losses on the ring, one per context.
inline Environment make_piecewise(const Params& p) {
  const std::size_t contexts = p.integer("contexts", 1);
  const std::size_t pieces = p.integer("pieces", 8);
  const auto seed = static_cast<std::uint64_t>(p.integer("seed", 1));
  const double lo = p.number("lo", 0.1);
  const double hi = p.number("hi", 0.9);
  const std::size_t n = p.integer("n", 64);
  const NoiseModel noise = parse_noise(p, NoiseKind::Bernoulli);
  if (contexts == 0 || pieces == 0) throw ConfigError("piecewise: contexts and pieces must be positive");
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("piecewise: need 0 <= lo <= hi <= 1");
  Rng rng(seed);
  ContextPanel panel;
  std::vector<std::shared_ptr<const LossFunction>> losses;
  for (std::size_t c = 0; c < contexts; ++c) {
    std::vector<double> xs{0.0, 1.0};
    for (std::size_t k = 1; k < pieces; ++k) xs.push_back(rng.uniform());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> vals;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) vals.push_back(rng.uniform(lo, hi));
    losses.push_back(std::make_shared<const LossFunction>(LossFunction::piecewise(PiecewiseLinear::step(xs, vals))));
    panel.contexts.push_back(Context{c, {}});
    panel.weights.push_back(1.0);
  }
  Environment env("piecewise", ActionSpace::ring(), std::move(panel), std::move(losses), noise);
  if (contexts == 1) {
    env.set_default_policy_class(constant_grid_class(env.space(), n));
  } else {
    std::vector<Action> table;
    for (std::size_t c = 0; c < contexts; ++c)
      for (std::size_t i = 0; i < n; ++i) table.emplace_back(static_cast<double>(i) / static_cast<double>(n));
    // Policy i plays grid point (i + c * stride) mod n on context c.
    Rng prng(derive_seed(seed, 7));
    std::vector<std::size_t> stride(n);
    for (auto& s : stride) s = prng.index(n);
    for (std::size_t c = 0; c < contexts; ++c)
      for (std::size_t i = 0; i < n; ++i)
        table[c * n + i] = Action(static_cast<double>((i + c * stride[i]) % n) / static_cast<double>(n));
    env.set_default_policy_class(PolicyClass::tabular(contexts, n, std::move(table)));
  }
  return env;
}

}  // namespace detail

// Builds a named instance. Every instance carries a default policy class.
//
//   discontinuous   ap, n, noise               ring, point discontinuity at ap
//   absolute        astar, space, h, n, noise  |a - a*| (interval or ring)
//   linear_sphere   dctx, L, L0, n, wseed      linear policies, local |.| link
//   needle_h        d, h, R, i, seed           smoothed lower-bound family
//   needle_L        d, L, R, i, seed           Lipschitz lower-bound family
//   constant        c, space, n                constant loss
//   piecewise       contexts, pieces, seed, lo, hi, n  random step losses
inline Environment make_named_instance(const std::string& name, const Params& params) {
  Environment env = [&] {
    if (name == "discontinuous") return detail::make_discontinuous(params);
    if (name == "absolute") return detail::make_absolute(params);
    if (name == "linear_sphere") return detail::make_linear_sphere(params);
    if (name == "needle_h") return detail::make_needle_h(params);
    if (name == "needle_L") return detail::make_needle_L(params);
    if (name == "constant") return detail::make_constant(params);
    if (name == "piecewise") return detail::make_piecewise(params);
    throw ConfigError("unknown environment '" + name + "'");
  }();
  params.reject_unused("environment " + name);
  return env;
}

inline Environment make_named_instance(const std::string& spec) {
  auto [name, params] = parse_spec(spec);
  return make_named_instance(name, params);
}

}  // namespace smoothcb
