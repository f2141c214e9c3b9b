#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// Dense probability vector over a product state space. Entries are
/// non-negative and sum to 1 within 1e-12; both are checked at
/// construction. Immutable afterwards.
class JointTable {
 public:
  JointTable(StateSpace space, std::vector<double> probs)
      : space_(std::move(space)), probs_(std::move(probs)) {
    if (probs_.size() != space_.total_states())
      throw InputError("probability vector length does not match state space");
    long double sum = 0.0L;
    for (double v : probs_) {
      if (!(v >= 0.0)) throw InputError("negative or NaN probability entry");
      sum += v;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-12)
      throw InputError("probabilities do not sum to 1");
  }

  static JointTable uniform(StateSpace space) {
    const std::size_t total = space.total_states();
    return JointTable(std::move(space),
                      std::vector<double>(total, 1.0 / static_cast<double>(total)));
  }

  static JointTable point_mass(StateSpace space, std::span<const int> state) {
    if (state.size() != static_cast<std::size_t>(space.size()))
      throw InputError("state length does not match space");
    for (int j = 0; j < space.size(); ++j)
      if (state[static_cast<std::size_t>(j)] < 0 ||
          state[static_cast<std::size_t>(j)] >= space.card(j))
        throw InputError("state value out of range");
    std::vector<double> p(space.total_states(), 0.0);
    p[space.encode(state)] = 1.0;
    return JointTable(std::move(space), std::move(p));
  }

  /// Normalizes a non-negative weight vector with positive total mass.
  static JointTable from_unnormalized(StateSpace space, std::vector<double> weights) {
    long double sum = 0.0L;
    for (double v : weights) {
      if (!(v >= 0.0)) throw InputError("negative or NaN weight entry");
      sum += v;
    }
    if (!(sum > 0.0L)) throw InputError("weights have zero total mass");
    for (double& v : weights) v = static_cast<double>(v / sum);
    return JointTable(std::move(space), std::move(weights));
  }

  const StateSpace& space() const { return space_; }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t idx) const { return probs_[idx]; }
  std::size_t size() const { return probs_.size(); }

 private:
  StateSpace space_;
  std::vector<double> probs_;
};

/// L1 distance between two tables on the same space.
inline double l1_distance(const JointTable& a, const JointTable& b) {
  if (!a.space().same_as(b.space())) throw InputError("state space mismatch");
  long double s = 0.0L;
  for (std::size_t x = 0; x < a.size(); ++x) s += std::fabs(a[x] - b[x]);
  return static_cast<double>(s);
}

inline double linf_distance(const JointTable& a, const JointTable& b) {
  if (!a.space().same_as(b.space())) throw InputError("state space mismatch");
  double m = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) m = std::max(m, std::fabs(a[x] - b[x]));
  return m;
}

/// Total variation distance = half the L1 distance.
inline double tv_distance(const JointTable& a, const JointTable& b) {
  return 0.5 * l1_distance(a, b);
}

}  // namespace fpn
