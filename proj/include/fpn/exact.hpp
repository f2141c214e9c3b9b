#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/dist_ops.hpp"
#include "fpn/engine.hpp"
#include "fpn/model.hpp"

namespace fpn {

namespace detail {

/// out(x) = (sum over the target fiber of p) * theta(x_i | y_i(x)).
inline void apply_node_kernel(const StateSpace& sp, const CondTable& theta,
                              std::span<const double> p, std::span<double> out, double weight) {
  const int i = theta.spec().target;
  const std::size_t stride = sp.stride(i);
  const std::size_t card = static_cast<std::size_t>(sp.card(i));
  const std::size_t block = stride * card;
  for (std::size_t head = 0; head < sp.total_states(); head += block) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      const std::size_t base = head + inner;
      double fiber = 0.0;
      for (std::size_t v = 0; v < card; ++v) fiber += p[base + v * stride];
      if (fiber == 0.0) continue;
      const auto row = theta.effective_row(theta.row_index_of_state(sp, base));
      for (std::size_t v = 0; v < card; ++v)
        out[base + v * stride] += weight * fiber * row[v];
    }
  }
}

}  // namespace detail

/// Row-stochastic transition operator of a firing process: a weighted sum
/// of single-node firing kernels. Application is matrix-free, so operators
/// over large state spaces stay usable; the dense matrix can be
/// materialized on demand for small spaces.
class TransitionOp {
 public:
  static TransitionOp identity(StateSpace space) {
    TransitionOp op(std::move(space));
    op.identity_ = true;
    return op;
  }

  const StateSpace& space() const { return space_; }

  void add_kernel(CondTable theta, double weight) {
    kernels_.push_back(std::move(theta));
    weights_.push_back(weight);
  }

  std::vector<double> apply(std::span<const double> p) const {
    if (p.size() != space_.total_states())
      throw InputError("distribution length does not match operator space");
    if (identity_) return {p.begin(), p.end()};
    std::vector<double> out(p.size(), 0.0);
    for (std::size_t k = 0; k < kernels_.size(); ++k)
      if (weights_[k] != 0.0)
        detail::apply_node_kernel(space_, kernels_[k], p, out, weights_[k]);
    return out;
  }

  JointTable apply(const JointTable& p) const {
    if (!p.space().same_as(space_)) throw InputError("state space mismatch");
    return JointTable(space_, apply(p.probs()));
  }

  /// Dense row-stochastic matrix, row-major, size total_states^2.
  std::vector<double> dense_matrix(std::size_t max_states = std::size_t{1} << 13) const {
    const std::size_t total = space_.total_states();
    if (total > max_states)
      throw CapacityError("state space too large to materialize the transition matrix");
    std::vector<double> m(total * total, 0.0);
    if (identity_) {
      for (std::size_t x = 0; x < total; ++x) m[x * total + x] = 1.0;
      return m;
    }
    for (std::size_t k = 0; k < kernels_.size(); ++k) {
      const CondTable& theta = kernels_[k];
      const int i = theta.spec().target;
      const std::size_t stride = space_.stride(i);
      const std::size_t card = static_cast<std::size_t>(space_.card(i));
      for (std::size_t x = 0; x < total; ++x) {
        const auto row = theta.effective_row(theta.row_index_of_state(space_, x));
        const std::size_t base = x - static_cast<std::size_t>(space_.coord(x, i)) * stride;
        for (std::size_t v = 0; v < card; ++v)
          m[x * total + base + v * stride] += weights_[k] * row[v];
      }
    }
    return m;
  }

 private:
  explicit TransitionOp(StateSpace space) : space_(std::move(space)) {}

  StateSpace space_;
  std::vector<CondTable> kernels_;
  std::vector<double> weights_;
  bool identity_ = false;

  friend TransitionOp build_w_i(const FpnModel&, int, std::size_t);
  friend TransitionOp build_w_random(const FpnModel&, std::span<const double>, std::size_t);
};

/// Single-node firing operator W_i. Acting on a table reproduces the
/// m-projection onto that node's conditional-part manifold.
inline TransitionOp build_w_i(const FpnModel& model, int i,
                              std::size_t dense_limit = kDenseStateLimit) {
  if (i < 0 || i >= model.n_vars()) throw InputError("node index out of range");
  StateSpace space(model.schema);
  if (space.total_states() > dense_limit)
    throw CapacityError("state space too large for exact analysis");
  TransitionOp op(std::move(space));
  op.add_kernel(model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema), 1.0);
  return op;
}

/// Random-process operator W = sum_i c(i) W_i. An empty c uses the model's
/// stored node-selection distribution.
inline TransitionOp build_w_random(const FpnModel& model, std::span<const double> c = {},
                                   std::size_t dense_limit = kDenseStateLimit) {
  StateSpace space(model.schema);
  if (space.total_states() > dense_limit)
    throw CapacityError("state space too large for exact analysis");
  const std::vector<double> own(c.begin(), c.end());
  const std::vector<double>& sel = own.empty() ? model.c : own;
  detail::check_selection_dist(sel, model.n_vars());
  TransitionOp op(std::move(space));
  for (int i = 0; i < model.n_vars(); ++i)
    op.add_kernel(model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema),
                  sel[static_cast<std::size_t>(i)]);
  return op;
}

struct StationaryResult {
  JointTable dist;
  std::uint64_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Stationary distribution by power iteration from the uniform start,
/// stopping when the L1 step difference drops to tol. Periodic chains can
/// legitimately fail to converge; that is reported through the flag, not
/// an exception. iterations is the 0-based index of the accepting step, so
/// an operator that fixes the start reports 0.
inline StationaryResult stationary(const TransitionOp& op, double tol = 1e-12,
                                   std::uint64_t max_iter = 1'000'000) {
  std::vector<double> p(op.space().total_states(),
                        1.0 / static_cast<double>(op.space().total_states()));
  std::uint64_t it = 0;
  double residual = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> next = op.apply(p);
    long double diff = 0.0L;
    for (std::size_t x = 0; x < p.size(); ++x) diff += std::fabs(next[x] - p[x]);
    residual = static_cast<double>(diff);
    p = std::move(next);
    if (residual <= tol)
      return {JointTable(op.space(), std::move(p)), it, residual, true};
    if (++it >= max_iter) break;
  }
  return {JointTable(op.space(), std::move(p)), it, residual, false};
}

struct SeqStationaryResult {
  StationaryResult combined;          // uniform mixture of the phase stationaries
  std::vector<JointTable> phases;     // stationary of each W_{i -> i-1}
  double phase_shift_residual = 0.0;  // max_i L1(phase_i W_i, phase_{i+1})
};

/// Sequential-process analysis: for each phase i, the cyclic product
/// W_i ... W_{n-1} W_0 ... W_{i-1} is applied node by node (the products
/// are never materialized) and its stationary found by power iteration;
/// the limiting distribution of the process is the uniform mixture of the
/// phase stationaries. Firing the phase-i stationary once must reproduce
/// phase i+1; the largest such deviation is reported.
inline SeqStationaryResult stationary_sequential(const FpnModel& model, double tol = 1e-12,
                                                 std::uint64_t max_iter = 1'000'000,
                                                 std::size_t dense_limit = kDenseStateLimit) {
  model.validate();
  const int n = model.n_vars();
  StateSpace space(model.schema);
  if (space.total_states() > dense_limit)
    throw CapacityError("state space too large for exact analysis");

  std::vector<CondTable> thetas;
  thetas.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    thetas.push_back(model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema));

  auto apply_cycle = [&](int first, const std::vector<double>& p) {
    std::vector<double> cur(p);
    std::vector<double> next(p.size());
    for (int k = 0; k < n; ++k) {
      const int i = (first + k) % n;
      std::fill(next.begin(), next.end(), 0.0);
      detail::apply_node_kernel(space, thetas[static_cast<std::size_t>(i)], cur, next, 1.0);
      std::swap(cur, next);
    }
    return cur;
  };

  SeqStationaryResult result{
      {JointTable::uniform(space), 0, 0.0, true}, {}, 0.0};
  std::uint64_t worst_iters = 0;
  double worst_residual = 0.0;
  bool all_converged = true;

  for (int i = 0; i < n; ++i) {
    std::vector<double> p(space.total_states(),
                          1.0 / static_cast<double>(space.total_states()));
    std::uint64_t it = 0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    while (true) {
      std::vector<double> next = apply_cycle(i, p);
      long double diff = 0.0L;
      for (std::size_t x = 0; x < p.size(); ++x) diff += std::fabs(next[x] - p[x]);
      residual = static_cast<double>(diff);
      p = std::move(next);
      if (residual <= tol) {
        converged = true;
        break;
      }
      if (++it >= max_iter) break;
    }
    worst_iters = std::max(worst_iters, it);
    worst_residual = std::max(worst_residual, residual);
    all_converged = all_converged && converged;
    result.phases.emplace_back(space, std::move(p));
  }

  std::vector<double> mix(space.total_states(), 0.0);
  for (const auto& phase : result.phases)
    for (std::size_t x = 0; x < mix.size(); ++x)
      mix[x] += phase[x] / static_cast<double>(n);
  result.combined =
      StationaryResult{JointTable(space, std::move(mix)), worst_iters, worst_residual,
                       all_converged};

  for (int i = 0; i < n; ++i) {
    std::vector<double> shifted(space.total_states(), 0.0);
    detail::apply_node_kernel(space, thetas[static_cast<std::size_t>(i)],
                              result.phases[static_cast<std::size_t>(i)].probs(), shifted, 1.0);
    const auto& target = result.phases[static_cast<std::size_t>((i + 1) % n)];
    long double diff = 0.0L;
    for (std::size_t x = 0; x < shifted.size(); ++x) diff += std::fabs(shifted[x] - target[x]);
    result.phase_shift_residual =
        std::max(result.phase_shift_residual, static_cast<double>(diff));
  }
  return result;
}

/// Divergence-budget report for the random process around a reference
/// distribution pi: per-node divergences KL(pi || E(theta_i)), their
/// c-weighted sum (an upper bound on the full-conditional divergence), the
/// full-conditional divergence FCD(pi || pi'), the Jensen gap J, and the
/// residual of the exact identity FCD + J = sum_i c(i) KL(pi || E(theta_i)).
struct FcdBoundReport {
  double kl_pi_piprime = 0.0;
  double fcd = 0.0;
  double bound_rhs = 0.0;
  double jensen_gap = 0.0;
  double identity_residual = 0.0;
  std::vector<double> per_node_kl;
  StationaryResult stat;
};

inline FcdBoundReport fcd_bound_report(const FpnModel& model, const JointTable& pi,
                                       double tol = 1e-12, std::uint64_t max_iter = 1'000'000,
                                       std::size_t dense_limit = kDenseStateLimit) {
  model.validate();
  if (!(pi.space().schema() == model.schema))
    throw InputError("reference distribution does not match the model schema");
  const int n = model.n_vars();
  const auto inf = std::numeric_limits<double>::infinity();

  TransitionOp w = build_w_random(model, {}, dense_limit);
  StationaryResult stat = stationary(w, tol, max_iter);
  const JointTable& pi_prime = stat.dist;

  const double kl_pi_piprime = kl(pi, pi_prime);
  const double fcd_value = fcd(pi, pi_prime, model.c);

  std::vector<double> per_node_kl;
  long double bound = 0.0L;
  bool bound_inf = false;
  for (int i = 0; i < n; ++i) {
    const double d =
        kl_to_cond_manifold(pi, model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema));
    per_node_kl.push_back(d);
    if (model.c[static_cast<std::size_t>(i)] == 0.0) continue;
    if (std::isinf(d))
      bound_inf = true;
    else
      bound += static_cast<long double>(model.c[static_cast<std::size_t>(i)]) * d;
  }
  const double bound_rhs = bound_inf ? inf : static_cast<double>(bound);

  // Jensen gap of the mixture pi' = sum_i c(i) pi'_i under pi,
  // with pi'_i = pi' W_i.
  std::vector<std::vector<double>> pi_i;
  pi_i.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(pi_prime.size(), 0.0);
    detail::apply_node_kernel(w.space(),
                              model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema),
                              pi_prime.probs(), v, 1.0);
    pi_i.push_back(std::move(v));
  }
  long double j = 0.0L;
  bool j_inf = false;
  for (std::size_t x = 0; x < pi.size() && !j_inf; ++x) {
    if (pi[x] == 0.0) continue;
    double mixture = 0.0;
    for (int i = 0; i < n; ++i)
      mixture += model.c[static_cast<std::size_t>(i)] * pi_i[static_cast<std::size_t>(i)][x];
    if (mixture == 0.0) {
      j_inf = true;
      break;
    }
    j += static_cast<long double>(pi[x]) * std::log(mixture);
    for (int i = 0; i < n; ++i) {
      const double ci = model.c[static_cast<std::size_t>(i)];
      if (ci == 0.0) continue;
      const double q = pi_i[static_cast<std::size_t>(i)][x];
      if (q == 0.0) {
        j_inf = true;
        break;
      }
      j -= static_cast<long double>(pi[x]) * ci * std::log(q);
    }
  }
  const double jensen_gap = j_inf ? inf : static_cast<double>(j);

  const double identity_residual =
      std::isfinite(fcd_value) && std::isfinite(jensen_gap) && std::isfinite(bound_rhs)
          ? std::fabs(fcd_value + jensen_gap - bound_rhs)
          : std::numeric_limits<double>::quiet_NaN();
  return FcdBoundReport{kl_pi_piprime, fcd_value,        bound_rhs,
                        jensen_gap,    identity_residual, std::move(per_node_kl),
                        std::move(stat)};
}

/// Both sides of the posterior decomposition of one node's divergence:
/// averaging the sliced divergence KL(pi(X_free|x_f) || E(theta_i sliced))
/// over the evidence marginal reproduces KL(pi || E(theta_i)).
struct PosteriorCheckEntry {
  int node = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct PosteriorCheckReport {
  std::vector<PosteriorCheckEntry> entries;
  double max_residual = 0.0;
};

inline PosteriorCheckReport posterior_decomposition_check(const FpnModel& model,
                                                          const JointTable& pi,
                                                          std::span<const int> evidence_vars) {
  model.validate();
  if (!(pi.space().schema() == model.schema))
    throw InputError("reference distribution does not match the model schema");
  const StateSpace& sp = pi.space();
  const int n = model.n_vars();

  std::vector<int> f(evidence_vars.begin(), evidence_vars.end());
  std::sort(f.begin(), f.end());
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f[k] < 0 || f[k] >= n) throw InputError("evidence variable out of range");
    if (k > 0 && f[k] == f[k - 1]) throw InputError("duplicate evidence variable");
  }

  std::vector<int> free_vars;
  for (int j = 0; j < n; ++j)
    if (!std::binary_search(f.begin(), f.end(), j)) free_vars.push_back(j);
  if (free_vars.empty()) throw InputError("all variables are fixed by evidence");

  PosteriorCheckReport report;
  if (f.empty()) {
    for (int i = 0; i < n; ++i) {
      const double d =
          kl_to_cond_manifold(pi, model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema));
      report.entries.push_back({i, d, d, 0.0});
    }
    return report;
  }

  StateSpace free_space = sp.sub_space(free_vars);

  // enumerate evidence configurations
  std::vector<int> f_cards;
  for (int v : f) f_cards.push_back(sp.card(v));
  std::size_t n_configs = 1;
  for (int c : f_cards) n_configs *= static_cast<std::size_t>(c);

  std::vector<long double> rhs(static_cast<std::size_t>(n), 0.0L);
  std::vector<bool> rhs_inf(static_cast<std::size_t>(n), false);

  std::vector<int> xf(f.size(), 0);
  for (std::size_t cfg = 0; cfg < n_configs; ++cfg) {
    // slice pi at this evidence configuration
    std::vector<double> slice(free_space.total_states(), 0.0);
    long double mass = 0.0L;
    for (std::size_t x = 0; x < pi.size(); ++x) {
      if (pi[x] == 0.0) continue;
      bool match = true;
      for (std::size_t k = 0; k < f.size(); ++k)
        if (sp.coord(x, f[k]) != xf[k]) {
          match = false;
          break;
        }
      if (!match) continue;
      std::size_t idx = 0;
      for (std::size_t k = 0; k < free_vars.size(); ++k)
        idx += free_space.stride(static_cast<int>(k)) *
               static_cast<std::size_t>(sp.coord(x, free_vars[k]));
      slice[idx] += pi[x];
      mass += pi[x];
    }
    if (mass > 0.0L) {
      for (double& v : slice) v = static_cast<double>(v / mass);
      std::map<int, int> evidence;
      for (std::size_t k = 0; k < f.size(); ++k) evidence[f[k]] = xf[k];
      const FpnModel reduced = reduce_model(model, evidence);
      const JointTable sliced_pi(free_space, std::move(slice));
      for (std::size_t ni = 0; ni < free_vars.size(); ++ni) {
        const double d =
            kl_to_cond_manifold(sliced_pi, reduced.nodes[ni].to_dense(reduced.schema));
        if (std::isinf(d))
          rhs_inf[static_cast<std::size_t>(free_vars[ni])] = true;
        else
          rhs[static_cast<std::size_t>(free_vars[ni])] += mass * static_cast<long double>(d);
      }
    }
    for (int k = static_cast<int>(f.size()) - 1; k >= 0; --k) {
      if (++xf[static_cast<std::size_t>(k)] < f_cards[static_cast<std::size_t>(k)]) break;
      xf[static_cast<std::size_t>(k)] = 0;
    }
  }

  for (int i : free_vars) {
    const double lhs =
        kl_to_cond_manifold(pi, model.nodes[static_cast<std::size_t>(i)].to_dense(model.schema));
    const double r = rhs_inf[static_cast<std::size_t>(i)]
                         ? std::numeric_limits<double>::infinity()
                         : static_cast<double>(rhs[static_cast<std::size_t>(i)]);
    double residual;
    if (std::isinf(lhs) && std::isinf(r))
      residual = 0.0;
    else
      residual = std::fabs(lhs - r);
    report.entries.push_back({i, lhs, r, residual});
    report.max_residual = std::max(report.max_residual, residual);
  }
  return report;
}

/// (KL(pi||pi'), KL(pi||pi_real), KL(pi'||pi_real)) for experiment reports.
inline std::array<double, 3> kl_triple(const JointTable& pi, const JointTable& pi_prime,
                                       const JointTable& pi_real) {
  return {kl(pi, pi_prime), kl(pi, pi_real), kl(pi_prime, pi_real)};
}

}  // namespace fpn
