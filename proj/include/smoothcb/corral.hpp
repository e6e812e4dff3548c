#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "exp4.hpp"
#include "kernel.hpp"
#include "policy.hpp"
#include "random.hpp"

namespace smoothcb {

// Bandwidths grouped by ceil(log2 kappa): bucket b holds kernels with
// kappa in (2^(b-1), 2^b].
struct KernelBuckets {
  std::vector<int> ids;
  std::vector<std::vector<double>> bandwidths;
  std::vector<double> kappa;  // max kappa per bucket

  std::size_t size() const noexcept { return ids.size(); }
};

inline int kappa_bucket(double kappa) {
  int b = static_cast<int>(std::ceil(std::log2(kappa)));
  // Guard exact powers of two against rounding in log2.
  if (std::ldexp(1.0, b - 1) >= kappa) --b;
  if (std::ldexp(1.0, b) < kappa) ++b;
  return b;
}

inline KernelBuckets make_kernel_buckets(const ActionSpace& space, std::vector<double> bandwidths) {
  if (bandwidths.empty()) throw InvalidInput("make_kernel_buckets: empty kernel family");
  std::sort(bandwidths.begin(), bandwidths.end(), std::greater<>());
  bandwidths.erase(std::unique(bandwidths.begin(), bandwidths.end()), bandwidths.end());
  std::map<int, std::vector<double>> groups;
  std::map<int, double> kmax;
  for (double h : bandwidths) {
    const double k = RectKernel(space, h).kappa();
    const int b = kappa_bucket(k);
    groups[b].push_back(h);
    kmax[b] = std::max(kmax[b], k);
  }
  KernelBuckets out;
  for (auto& [b, hs] : groups) {
    out.ids.push_back(b);
    out.bandwidths.push_back(std::move(hs));
    out.kappa.push_back(kmax[b]);
  }
  return out;
}

enum class CorralMode { Generic, UniformH, LipschitzAdaptive };

struct CorralConfig {
  CorralMode mode = CorralMode::UniformH;
  std::uint64_t T = 1;
  double beta = 1.0;
  std::optional<double> eta;           // master rate; required for Generic
  std::vector<double> bandwidths;      // Generic kernel family
  std::size_t per_octave = 2;          // UniformH: bandwidths per halving of h
  std::optional<double> gamma;         // uniform mixing, default 1/T
  std::optional<double> growth;        // learning-rate growth, default e^(1/ln T)
};

// Master rate of the uniform-bandwidth parametrization.
inline double corral_eta_uniform_h(std::uint64_t T, std::size_t policies, std::size_t d, double beta) {
  const double t = static_cast<double>(T);
  const double lg = std::log(static_cast<double>(policies) * static_cast<double>(d) * t);
  return std::pow(t, -1.0 / (1.0 + beta)) * std::pow(lg, -beta / (1.0 + beta));
}

// Master rate of the Lipschitz-adaptive parametrization.
inline double corral_eta_lipschitz(std::uint64_t T, std::size_t policies, std::size_t d, double beta) {
  const double t = static_cast<double>(T);
  const double dd = static_cast<double>(d);
  const double lg = std::log(static_cast<double>(policies) * dd * t);
  const double den = 1.0 + (dd + 1.0) * beta;
  return std::pow(t, -(1.0 + dd * beta) / den) * std::pow(lg, -beta / den);
}

// Snapped bandwidths h = 2^(-j/per_octave), j >= 0, down to T^(-1/d).
inline std::vector<double> uniform_h_family(std::size_t d, std::uint64_t T, std::size_t per_octave) {
  if (per_octave == 0) throw InvalidInput("uniform_h_family: per_octave must be positive");
  const BandwidthGrid grid(d, T);
  const double lowest = std::pow(static_cast<double>(T), -1.0 / static_cast<double>(d));
  std::vector<double> out;
  for (std::size_t j = 0;; ++j) {
    const double h = std::exp2(-static_cast<double>(j) / static_cast<double>(per_octave));
    if (h < lowest) break;
    out.push_back(grid.snap(h));
  }
  return out;
}

// h_i = (eta ln(|Pi| log2 T))^(beta/(d beta + 1)) 2^(-i/(d beta + 1)), i = 1..ceil(log2 T),
// restricted to (0, 1].
inline std::vector<double> lipschitz_family(std::size_t d, std::uint64_t T, std::size_t policies, double beta,
                                            double eta) {
  const double dd = static_cast<double>(d);
  const double scale =
      std::pow(eta * std::log(static_cast<double>(policies) * std::log2(static_cast<double>(T))), beta / (dd * beta + 1.0));
  std::vector<double> out;
  const int n = std::max(1, ceil_log2(T));
  for (int i = 1; i <= n; ++i) {
    const double h = scale * std::exp2(-static_cast<double>(i) / (dd * beta + 1.0));
    if (h > 0.0 && h <= 1.0) out.push_back(h);
  }
  if (out.empty()) out.push_back(1.0);
  return out;
}

struct CorralRecord {
  std::size_t sub = 0;
  double prob = 1.0;
  double propensity = 0.0;
};

// Corral over kappa-bucketed StableExp4 learners with a log-barrier master.
class CorralMaster {
 public:
  CorralMaster(const ActionSpace& space, std::shared_ptr<const PolicyClass> pc, CorralConfig cfg) : cfg_(cfg) {
    if (!pc || pc->size() == 0) throw InvalidInput("CorralMaster: empty policy class");
    if (cfg_.T < 2) throw InvalidInput("CorralMaster: T must be at least 2");
    if (!(cfg_.beta >= 0.0 && cfg_.beta <= 1.0)) throw InvalidInput("CorralMaster: beta must lie in [0,1]");
    const std::size_t d = space.dim();
    std::vector<double> family;
    switch (cfg_.mode) {
      case CorralMode::Generic:
        if (!cfg_.eta) throw InvalidInput("CorralMaster: generic mode needs a master learning rate");
        eta_ = *cfg_.eta;
        family = cfg_.bandwidths;
        break;
      case CorralMode::UniformH:
        eta_ = cfg_.eta.value_or(corral_eta_uniform_h(cfg_.T, pc->size(), d, cfg_.beta));
        family = cfg_.bandwidths.empty() ? uniform_h_family(d, cfg_.T, cfg_.per_octave) : cfg_.bandwidths;
        break;
      case CorralMode::LipschitzAdaptive:
        eta_ = cfg_.eta.value_or(corral_eta_lipschitz(cfg_.T, pc->size(), d, cfg_.beta));
        family = cfg_.bandwidths.empty() ? lipschitz_family(d, cfg_.T, pc->size(), cfg_.beta, eta_) : cfg_.bandwidths;
        break;
    }
    if (!(eta_ > 0.0)) throw InvalidInput("CorralMaster: master learning rate must be positive");
    buckets_ = make_kernel_buckets(space, family);
    const std::size_t M = buckets_.size();
    for (std::size_t b = 0; b < M; ++b) {
      auto xi = std::make_shared<const StochasticClass>(StochasticClass::product(space, pc, buckets_.bandwidths[b]));
      subs_.emplace_back(std::move(xi), cfg_.T, static_cast<double>(M));
    }
    const double m = static_cast<double>(M);
    p_.assign(M, 1.0 / m);
    etas_.assign(M, eta_);
    rho_.assign(M, 2.0 * m);
    gamma_ = cfg_.gamma.value_or(1.0 / static_cast<double>(cfg_.T));
    growth_ = cfg_.growth.value_or(std::exp(1.0 / std::log(static_cast<double>(cfg_.T))));
  }

  std::size_t size() const noexcept { return subs_.size(); }
  double eta() const noexcept { return eta_; }
  const KernelBuckets& buckets() const noexcept { return buckets_; }
  const std::vector<double>& weights() const noexcept { return p_; }
  const std::vector<double>& rates() const noexcept { return etas_; }
  const std::vector<double>& thresholds() const noexcept { return rho_; }
  const StableExp4& sub(std::size_t b) const { return subs_.at(b); }
  const CorralRecord& last() const noexcept { return rec_; }

  // Sampling distribution with uniform mixing.
  std::vector<double> sampling() const {
    const double m = static_cast<double>(p_.size());
    if (p_.size() == 1) return {1.0};
    std::vector<double> out(p_.size());
    for (std::size_t i = 0; i < p_.size(); ++i) out[i] = (1.0 - gamma_) * p_[i] + gamma_ / m;
    return out;
  }

  Action act(const Context& x, Rng& rng) {
    if (pending_) throw StateError("CorralMaster: act called with an observation pending");
    pbar_ = sampling();
    // With one sub no draw is made, so the stream matches the sub alone.
    const std::size_t b = subs_.size() == 1 ? 0 : rng.categorical(pbar_);
    const Exp4Step s = subs_[b].step(x, rng);
    rec_ = CorralRecord{b, pbar_[b], s.propensity};
    pending_ = true;
    return s.action;
  }

  void observe(double loss) {
    if (!pending_) throw StateError("CorralMaster: observe without act");
    pending_ = false;
    const std::size_t b = rec_.sub;
    const std::size_t M = subs_.size();
    for (std::size_t i = 0; i < M; ++i) subs_[i].stable_update(i == b ? loss / pbar_[i] : 0.0, pbar_[i]);
    if (M == 1) return;
    std::vector<double> est(M, 0.0);
    est[b] = loss / pbar_[b];
    p_ = log_barrier_step(p_, est, etas_);
    const auto pb = sampling();
    for (std::size_t i = 0; i < M; ++i) {
      if (1.0 / pb[i] > rho_[i]) {
        rho_[i] = 2.0 / pb[i];
        etas_[i] *= growth_;
      }
    }
  }

  std::vector<std::size_t> restarts() const {
    std::vector<std::size_t> r;
    for (const auto& s : subs_) r.push_back(s.restarts());
    return r;
  }

  // argmin_p <p, loss> + sum_i (1/eta_i) D_barrier(p, prev): the solution
  // has 1/p_i = 1/prev_i + eta_i (loss_i - lambda) with lambda set so that p
  // sums to one.
  static std::vector<double> log_barrier_step(const std::vector<double>& prev, const std::vector<double>& loss,
                                              const std::vector<double>& etas) {
    const std::size_t M = prev.size();
    auto mass = [&](double lambda) {
      double s = 0.0;
      for (std::size_t i = 0; i < M; ++i) s += 1.0 / (1.0 / prev[i] + etas[i] * (loss[i] - lambda));
      return s;
    };
    // mass(min loss) <= sum prev = 1 and mass(max loss) >= 1; the pole
    // below which every denominator stays positive caps the bracket.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double pole = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M; ++i) {
      lo = std::min(lo, loss[i]);
      hi = std::max(hi, loss[i]);
      pole = std::min(pole, loss[i] + 1.0 / (prev[i] * etas[i]));
    }
    hi = std::min(hi, pole);
    for (int it = 0; it < 200 && lo < hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (mass(mid) > 1.0) hi = mid;
      else lo = mid;
    }
    std::vector<double> p(M);
    double z = 0.0;
    for (std::size_t i = 0; i < M; ++i) z += p[i] = 1.0 / (1.0 / prev[i] + etas[i] * (loss[i] - lo));
    for (double& v : p) v /= z;
    return p;
  }

 private:
  CorralConfig cfg_;
  double eta_ = 0.0;
  KernelBuckets buckets_;
  std::vector<StableExp4> subs_;
  std::vector<double> p_;
  std::vector<double> etas_;
  std::vector<double> rho_;
  std::vector<double> pbar_;
  double gamma_ = 0.0;
  double growth_ = 1.0;
  CorralRecord rec_;
  bool pending_ = false;
};

}  // namespace smoothcb
