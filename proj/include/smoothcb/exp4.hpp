#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "policy.hpp"
#include "random.hpp"

namespace smoothcb {

// A finite class of stochastic policies xi(.|x) = K_h(pi(x)).
class StochasticClass {
 public:
  struct Member {
    std::size_t policy = 0;
    double h = 0.0;
  };

  StochasticClass(ActionSpace space, std::shared_ptr<const PolicyClass> pc, std::vector<Member> members)
      : space_(space), pc_(std::move(pc)), members_(std::move(members)) {
    if (!pc_) throw InvalidInput("StochasticClass: null policy class");
    if (members_.empty()) throw InvalidInput("StochasticClass: empty class");
    for (const Member& m : members_) {
      if (m.policy >= pc_->size()) throw OutOfRange("StochasticClass: policy index out of range");
      if (!(m.h > 0.0) || m.h > 1.0) throw InvalidInput("StochasticClass: bandwidths must lie in (0,1]");
      kappa_ = std::max(kappa_, RectKernel(space_, m.h).kappa());
    }
  }

  // Every policy of `pc` smoothed at every bandwidth, bandwidth-major.
  static StochasticClass product(ActionSpace space, std::shared_ptr<const PolicyClass> pc,
                                 const std::vector<double>& bandwidths) {
    std::vector<Member> members;
    for (double h : bandwidths)
      for (std::size_t i = 0; i < pc->size(); ++i) members.push_back({i, h});
    return StochasticClass(space, std::move(pc), std::move(members));
  }

  const ActionSpace& space() const noexcept { return space_; }
  const PolicyClass& policies() const noexcept { return *pc_; }
  std::size_t size() const noexcept { return members_.size(); }
  const Member& member(std::size_t i) const { return members_.at(i); }
  double kappa() const noexcept { return kappa_; }

  double density(std::size_t i, const Context& x, const Action& a) const {
    const Member& m = members_.at(i);
    const Action c = pc_->act(m.policy, x);
    if (space_.distance(c, a) > m.h) return 0.0;
    return 1.0 / space_.ball_volume(c, m.h);
  }

  void densities(const Context& x, const Action& a, std::vector<double>& out) const {
    out.resize(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) out[i] = density(i, x, a);
  }

  Action sample(std::size_t i, const Context& x, Rng& rng) const {
    const Member& m = members_.at(i);
    return space_.sample_ball(pc_->act(m.policy, x), m.h, rng);
  }

 private:
  ActionSpace space_;
  std::shared_ptr<const PolicyClass> pc_;
  std::vector<Member> members_;
  double kappa_ = 0.0;
};

struct Exp4Step {
  Action action;
  double propensity = 0.0;
  std::size_t member = 0;
};

inline double exp4_default_eta(std::size_t size, std::uint64_t horizon, double kappa, double rho = 1.0) {
  return std::sqrt(2.0 * std::log(static_cast<double>(size)) / (static_cast<double>(horizon) * kappa * rho));
}

// Exponential weights over a stochastic policy class, with log-domain weights.
class Exp4State {
 public:
  Exp4State(std::shared_ptr<const StochasticClass> xi, std::uint64_t horizon, std::optional<double> eta = {})
      : xi_(std::move(xi)), horizon_(horizon) {
    if (!xi_) throw InvalidInput("Exp4State: null policy class");
    if (horizon == 0) throw InvalidInput("Exp4State: horizon must be positive");
    eta_ = eta ? *eta : exp4_default_eta(xi_->size(), horizon, xi_->kappa());
    if (!(eta_ >= 0.0) || !std::isfinite(eta_)) throw InvalidInput("Exp4State: eta must be finite and nonnegative");
    log_w_.assign(xi_->size(), 0.0);
  }

  const StochasticClass& policy_class() const noexcept { return *xi_; }
  double eta() const noexcept { return eta_; }
  double kappa() const noexcept { return xi_->kappa(); }
  std::uint64_t t() const noexcept { return t_; }
  std::uint64_t horizon() const noexcept { return horizon_; }
  bool pending() const noexcept { return pending_; }
  const std::vector<double>& log_weights() const noexcept { return log_w_; }
  const std::vector<double>& last_estimates() const noexcept { return estimates_; }

  std::vector<double> probabilities() const {
    std::vector<double> p(log_w_.size());
    const double top = *std::max_element(log_w_.begin(), log_w_.end());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(log_w_[i] - top);
    for (double& v : p) v /= z;
    return p;
  }

  Exp4Step step(const Context& x, Rng& rng) {
    if (pending_) throw StateError("Exp4State: step called with an update pending");
    if (t_ >= horizon_) throw StateError("Exp4State: horizon exhausted");
    const std::vector<double> p = probabilities();
    const std::size_t k = p.size() == 1 ? 0 : rng.categorical(p);
    Exp4Step s;
    s.member = k;
    s.action = xi_->sample(k, x, rng);
    xi_->densities(x, s.action, dens_);
    double q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) q += p[i] * dens_[i];
    s.propensity = q;
    propensity_ = q;
    pending_ = true;
    return s;
  }

  // Applies l_hat(xi) = xi(a|x) * loss / p(a|x) for the pending step. `loss`
  // may be an importance-weighted value above 1.
  void update(double loss) {
    if (!pending_) throw StateError("Exp4State: update without a preceding step");
    if (!(loss >= 0.0) || !std::isfinite(loss)) throw InvalidInput("Exp4State: loss must be finite and nonnegative");
    estimates_.resize(dens_.size());
    for (std::size_t i = 0; i < dens_.size(); ++i) {
      estimates_[i] = dens_[i] * loss / propensity_;
      log_w_[i] -= eta_ * estimates_[i];
    }
    const double top = *std::max_element(log_w_.begin(), log_w_.end());
    for (double& w : log_w_) w -= top;
    pending_ = false;
    ++t_;
  }

  // Takes over another state's pending step (same class), e.g. after a restart.
  void adopt_pending(const Exp4State& other) {
    if (!other.pending_) throw StateError("Exp4State: nothing pending to adopt");
    dens_ = other.dens_;
    propensity_ = other.propensity_;
    t_ = other.t_;
    pending_ = true;
  }

  void set_round(std::uint64_t t) noexcept { t_ = t; }

 private:
  std::shared_ptr<const StochasticClass> xi_;
  std::uint64_t horizon_;
  double eta_ = 0.0;
  std::vector<double> log_w_;
  std::vector<double> dens_;
  std::vector<double> estimates_;
  double propensity_ = 1.0;
  std::uint64_t t_ = 0;
  bool pending_ = false;
};

// Exp4 that restarts with a doubled range guess whenever the revealing
// probability falls below 1 / rho_hat.
class StableExp4 {
 public:
  StableExp4(std::shared_ptr<const StochasticClass> xi, std::uint64_t horizon, double rho_hat = 1.0)
      : xi_(std::move(xi)), horizon_(horizon), rho_hat_(rho_hat), inner_(make_inner()) {
    if (!(rho_hat >= 1.0)) throw InvalidInput("StableExp4: rho_hat must be >= 1");
  }

  double rho_hat() const noexcept { return rho_hat_; }
  std::size_t restarts() const noexcept { return restarts_; }
  const Exp4State& inner() const noexcept { return inner_; }

  Exp4Step step(const Context& x, Rng& rng) { return inner_.step(x, rng); }

  // Feeds the importance-weighted loss of the round with revealing
  // probability p. Without a pending step the loss must be zero and only the
  // restart check runs.
  void stable_update(double iw_loss, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("stable_update: revealing probability must lie in (0,1]");
    if (1.0 / p > rho_hat_) {
      while (1.0 / p > rho_hat_) rho_hat_ *= 2.0;
      Exp4State fresh = make_inner();
      if (inner_.pending()) fresh.adopt_pending(inner_);
      else fresh.set_round(inner_.t());
      inner_ = std::move(fresh);
      ++restarts_;
    }
    if (inner_.pending()) inner_.update(iw_loss);
    else if (iw_loss != 0.0) throw StateError("stable_update: nonzero loss without a preceding step");
  }

 private:
  Exp4State make_inner() const {
    return Exp4State(xi_, horizon_, exp4_default_eta(xi_->size(), horizon_, xi_->kappa(), rho_hat_));
  }

  std::shared_ptr<const StochasticClass> xi_;
  std::uint64_t horizon_;
  double rho_hat_;
  std::size_t restarts_ = 0;
  Exp4State inner_;
};

}  // namespace smoothcb
