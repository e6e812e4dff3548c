#pragma once

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace smoothcb {

// A context is either an index into a finite context set or a feature vector.
struct Context {
  std::size_t index = 0;
  std::vector<double> features;
};

// Contexts with probability weights; expectations over x are weighted sums.
// Finite context sets give exact expectations; sampled panels give Monte
// Carlo ones.
struct ContextPanel {
  std::vector<Context> contexts;
  std::vector<double> weights;

  std::size_t size() const noexcept { return contexts.size(); }

  static ContextPanel single() { return ContextPanel{{Context{}}, {1.0}}; }
};

// Finite policy class: tabular, constant (non-contextual) or linear on the
// sphere. Linear policies score s = <w, x> in [-1, 1] and act at (s + 1) / 2,
// the affine image of [-1, 1] in the unit interval.
class PolicyClass {
 public:
  struct Tabular {
    std::size_t contexts = 0;
    std::vector<Action> table;  // row-major: contexts x policies
  };
  struct Constant {
    std::vector<Action> actions;
  };
  struct LinearSphere {
    std::vector<std::vector<double>> weights;
  };

  static PolicyClass constant(std::vector<Action> actions) {
    if (actions.empty()) throw InvalidInput("PolicyClass: empty class");
    return PolicyClass(Constant{std::move(actions)}, 0);
  }

  // n evenly spaced constant policies at (i + 1/2) / n.
  static PolicyClass constant_grid(std::size_t n) {
    std::vector<Action> acts;
    for (std::size_t i = 0; i < n; ++i) acts.emplace_back((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    return constant(std::move(acts));
  }

  static PolicyClass tabular(std::size_t contexts, std::size_t policies, std::vector<Action> table) {
    if (contexts == 0 || policies == 0) throw InvalidInput("PolicyClass: empty tabular class");
    if (table.size() != contexts * policies) throw InvalidInput("PolicyClass: table size mismatch");
    return PolicyClass(Tabular{contexts, std::move(table)}, policies);
  }

  static PolicyClass linear_sphere(std::vector<std::vector<double>> weights) {
    if (weights.empty()) throw InvalidInput("PolicyClass: empty class");
    for (const auto& w : weights) {
      const double n = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (std::fabs(n - 1.0) > 1e-9) throw InvalidInput("PolicyClass: linear weights must have unit norm");
      if (w.size() != weights.front().size()) throw InvalidInput("PolicyClass: ragged weight vectors");
    }
    return PolicyClass(LinearSphere{std::move(weights)}, 0);
  }

  std::size_t size() const noexcept {
    return std::visit(
        [this](const auto& r) -> std::size_t {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Constant>) return r.actions.size();
          else if constexpr (std::is_same_v<T, LinearSphere>) return r.weights.size();
          else return policies_;
        },
        rep_);
  }

  Action act(std::size_t policy, const Context& x) const {
    if (policy >= size()) throw OutOfRange("PolicyClass::act: policy index out of range");
    if (const auto* c = std::get_if<Constant>(&rep_)) return c->actions[policy];
    if (const auto* t = std::get_if<Tabular>(&rep_)) {
      if (x.index >= t->contexts) throw OutOfRange("PolicyClass::act: context index out of range");
      return t->table[x.index * policies_ + policy];
    }
    return Action(0.5 * (score(policy, x) + 1.0));
  }

  // <w, x> for linear policies, clipped to [-1, 1].
  double score(std::size_t policy, const Context& x) const {
    const auto* l = std::get_if<LinearSphere>(&rep_);
    if (l == nullptr) throw InvalidInput("PolicyClass::score: not a linear class");
    const auto& w = l->weights.at(policy);
    if (x.features.size() != w.size()) throw InvalidInput("PolicyClass::score: context dimension mismatch");
    const double s = std::inner_product(w.begin(), w.end(), x.features.begin(), 0.0);
    return std::clamp(s, -1.0, 1.0);
  }

  bool is_constant() const noexcept { return std::holds_alternative<Constant>(rep_); }
  bool is_linear() const noexcept { return std::holds_alternative<LinearSphere>(rep_); }
  const std::vector<std::vector<double>>& linear_weights() const { return std::get<LinearSphere>(rep_).weights; }

 private:
  using Rep = std::variant<Tabular, Constant, LinearSphere>;
  PolicyClass(Rep rep, std::size_t policies) : rep_(std::move(rep)), policies_(policies) {}

  Rep rep_;
  std::size_t policies_;
};

// Surviving subset of a policy class.
class VersionSpace {
 public:
  explicit VersionSpace(std::size_t n, std::size_t epoch = 1) : members_(n, true), epoch_(epoch) {
    if (n == 0) throw InvalidInput("VersionSpace: empty class");
  }
  VersionSpace(std::size_t n, const std::vector<std::size_t>& indices, std::size_t epoch = 1)
      : members_(n, false), epoch_(epoch) {
    for (std::size_t i : indices) members_.at(i) = true;
    if (indices.empty()) throw InvalidInput("VersionSpace: must be nonempty");
  }

  std::size_t universe() const noexcept { return members_.size(); }
  std::size_t epoch() const noexcept { return epoch_; }
  bool contains(std::size_t i) const { return members_.at(i); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), true)); }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i]) out.push_back(i);
    return out;
  }

  // Next epoch's space: the members of this one for which keep(i) is true.
  template <class Pred>
  VersionSpace restrict(Pred keep) const {
    std::vector<std::size_t> kept;
    for (std::size_t i : indices())
      if (keep(i)) kept.push_back(i);
    return VersionSpace(members_.size(), kept, epoch_ + 1);
  }

  bool subset_of(const VersionSpace& other) const {
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i] && !other.members_.at(i)) return false;
    return true;
  }

 private:
  std::vector<bool> members_;
  std::size_t epoch_;
};

// Pi'(x): distinct actions of the subset at x, sorted lexicographically.
inline std::vector<Action> projected_actions(const PolicyClass& pc, const VersionSpace& subset, const Context& x) {
  std::vector<Action> out;
  for (std::size_t i : subset.indices()) out.push_back(pc.act(i, x));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Greedy delta-packing in lexicographic order: a point is kept when it is at
// distance >= delta (up to 1e-12 rounding) from every point kept so far. The
// result is maximal.
inline std::vector<Action> greedy_packing(const ActionSpace& space, std::vector<Action> points, double delta) {
  if (!(delta > 0.0)) throw InvalidInput("packing: delta must be positive");
  std::sort(points.begin(), points.end());
  std::vector<Action> kept;
  for (const Action& p : points) {
    bool ok = true;
    for (const Action& q : kept)
      if (space.distance(p, q) < delta - 1e-12) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(p);
  }
  return kept;
}

inline std::size_t packing_number(const ActionSpace& space, const std::vector<Action>& points, double delta) {
  return greedy_packing(space, points, delta).size();
}

// Exact maximum packing by subset enumeration; at most 20 points.
inline std::size_t max_packing_bruteforce(const ActionSpace& space, const std::vector<Action>& points, double delta) {
  if (!(delta > 0.0)) throw InvalidInput("packing: delta must be positive");
  const std::size_t n = points.size();
  if (n > 20) throw InvalidInput("max_packing_bruteforce: at most 20 points");
  std::vector<std::uint32_t> conflict(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && space.distance(points[i], points[j]) < delta - 1e-12) conflict[i] |= (1u << j);
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto c = static_cast<std::size_t>(std::popcount(mask));
    if (c <= best) continue;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      if ((mask >> i & 1u) && (conflict[i] & mask)) ok = false;
    if (ok) best = c;
  }
  return best;
}

struct VolumeEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// nu of the union of balls B(a, h) over the given actions. Exact on
// one-dimensional spaces; Monte Carlo with `mc_draws` uniform points (fixed
// seed) on cubes of dimension >= 2.
inline VolumeEstimate union_ball_volume(const ActionSpace& space, const std::vector<Action>& actions, double h,
                                        std::size_t mc_draws = 100000, std::uint64_t seed = 0x5eed) {
  if (!(h > 0.0)) throw InvalidInput("union_ball_volume: h must be positive");
  if (actions.empty()) return {};
  if (space.one_dimensional()) {
    std::vector<Interval> ivs;
    for (const Action& a : actions)
      for (const Interval& iv : space.segments(a, h)) ivs.push_back(iv);
    std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    double total = 0.0;
    double cur_lo = ivs.front().lo, cur_hi = ivs.front().hi;
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i].lo <= cur_hi) {
        cur_hi = std::max(cur_hi, ivs[i].hi);
      } else {
        total += cur_hi - cur_lo;
        cur_lo = ivs[i].lo;
        cur_hi = ivs[i].hi;
      }
    }
    total += cur_hi - cur_lo;
    return {std::min(1.0, total), 0.0};
  }
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < mc_draws; ++k) {
    const Action p = space.sample_uniform(rng);
    for (const Action& a : actions)
      if (space.distance(p, a) <= h) {
        ++hits;
        break;
      }
  }
  const double n = static_cast<double>(mc_draws);
  const double v = static_cast<double>(hits) / n;
  return {v, std::sqrt(v * (1.0 - v) / n)};
}

inline VolumeEstimate union_ball_volume(const ActionSpace& space, const PolicyClass& pc, const VersionSpace& subset,
                                        const Context& x, double h) {
  return union_ball_volume(space, projected_actions(pc, subset, x), h);
}

// Characteristic volume V(Pi', h) = E_x nu(union of B(pi(x), h)).
inline double characteristic_volume(const ActionSpace& space, const PolicyClass& pc, const VersionSpace& subset,
                                    const ContextPanel& panel, double h) {
  double v = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i)
    v += panel.weights[i] * union_ball_volume(space, pc, subset, panel.contexts[i], h).value;
  return v;
}

// Tabular class from CSV: one row per context, one column per policy, each
// cell an action; multi-dimensional actions separate coordinates with ';'.
// Lines starting with '#' are skipped.
inline PolicyClass load_tabular_csv(std::istream& in) {
  std::vector<Action> table;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      std::vector<double> coords;
      std::stringstream cs(cell);
      std::string part;
      while (std::getline(cs, part, ';')) {
        try {
          coords.push_back(std::stod(part));
        } catch (const std::exception&) {
          throw InvalidInput("tabular CSV: cannot parse cell '" + cell + "'");
        }
      }
      table.push_back(Action::from(coords));
      ++c;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw InvalidInput("tabular CSV: ragged rows");
    ++rows;
  }
  if (rows == 0) throw InvalidInput("tabular CSV: no rows");
  return PolicyClass::tabular(rows, cols, std::move(table));
}

inline PolicyClass load_tabular_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return load_tabular_csv(in);
}

}  // namespace smoothcb
