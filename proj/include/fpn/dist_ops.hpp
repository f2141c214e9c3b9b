#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/cond_table.hpp"
#include "fpn/joint_table.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// Marginal of p over the given variables (any order, duplicates rejected);
/// the result space lists them in ascending index order.
inline JointTable marginal(const JointTable& p, std::span<const int> vars) {
  if (vars.empty()) throw InputError("empty marginal");
  std::vector<int> sel(vars.begin(), vars.end());
  std::sort(sel.begin(), sel.end());
  for (std::size_t k = 0; k < sel.size(); ++k) {
    if (sel[k] < 0 || sel[k] >= p.space().size())
      throw InputError("marginal variable out of range");
    if (k > 0 && sel[k] == sel[k - 1]) throw InputError("duplicate marginal variable");
  }

  StateSpace sub = p.space().sub_space(sel);
  std::vector<double> out(sub.total_states(), 0.0);
  const StateSpace& sp = p.space();
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] == 0.0) continue;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < sel.size(); ++k)
      idx += sub.stride(static_cast<int>(k)) * static_cast<std::size_t>(sp.coord(x, sel[k]));
    out[idx] += p[x];
  }
  return JointTable(std::move(sub), std::move(out));
}

/// Conditional table p(X_target | X_sources). Rows whose source
/// configuration carries zero mass stay undefined.
inline CondTable conditional(const JointTable& p, const CondSpec& spec) {
  spec.check_against(p.space().schema());
  const StateSpace& sp = p.space();
  std::vector<int> src_cards;
  for (int s : spec.sources) src_cards.push_back(sp.card(s));
  CondTable table(spec, std::move(src_cards), sp.card(spec.target));

  const std::size_t rows = table.n_rows();
  const int tc = table.target_card();
  std::vector<double> acc(rows * static_cast<std::size_t>(tc), 0.0);
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] == 0.0) continue;
    const std::size_t r = table.row_index_of_state(sp, x);
    acc[r * static_cast<std::size_t>(tc) + static_cast<std::size_t>(sp.coord(x, spec.target))] += p[x];
  }
  std::vector<double> row(static_cast<std::size_t>(tc));
  for (std::size_t r = 0; r < rows; ++r) {
    long double mass = 0.0L;
    for (int v = 0; v < tc; ++v) mass += acc[r * static_cast<std::size_t>(tc) + v];
    if (mass <= 0.0L) continue;
    for (int v = 0; v < tc; ++v)
      row[static_cast<std::size_t>(v)] =
          static_cast<double>(acc[r * static_cast<std::size_t>(tc) + v] / mass);
    table.set_row(r, row);
  }
  return table;
}

/// KL(p||q) in nats with the 0 log 0 = 0 convention; +inf when p has mass
/// where q has none.
inline double kl(const JointTable& p, const JointTable& q) {
  if (!p.space().same_as(q.space())) throw InputError("state space mismatch");
  long double sum = 0.0L;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] == 0.0) continue;
    if (q[x] == 0.0) return std::numeric_limits<double>::infinity();
    sum += static_cast<long double>(p[x]) * std::log(p[x] / q[x]);
  }
  return std::max(0.0, static_cast<double>(sum));
}

/// Shannon entropy of a table in nats.
inline double entropy(const JointTable& p) {
  long double h = 0.0L;
  for (std::size_t x = 0; x < p.size(); ++x)
    if (p[x] > 0.0) h -= static_cast<long double>(p[x]) * std::log(p[x]);
  return std::max(0.0, static_cast<double>(h));
}

/// Conditional entropy H_p(X_target | X_sources) in nats; empty sources
/// give the marginal entropy of the target.
inline double cond_entropy(const JointTable& p, const CondSpec& spec) {
  spec.check_against(p.space().schema());
  std::vector<int> joint_vars(spec.sources);
  joint_vars.push_back(spec.target);
  std::sort(joint_vars.begin(), joint_vars.end());
  const double h_joint = entropy(marginal(p, joint_vars));
  if (spec.sources.empty()) return h_joint;
  const double h_sources = entropy(marginal(p, spec.sources));
  return std::max(0.0, h_joint - h_sources);
}

/// m-projection of p onto the manifold of distributions whose full
/// conditional at the target equals theta: out(x) = p(x_-i) theta(x_i|y_i).
/// The marginal over the non-target variables is preserved.
inline JointTable m_project_conditional(const JointTable& p, const CondTable& theta) {
  const StateSpace& sp = p.space();
  theta.spec().check_against(sp.schema());
  const int i = theta.spec().target;
  if (theta.target_card() != sp.card(i))
    throw InputError("conditional table target cardinality mismatch");

  const std::size_t stride = sp.stride(i);
  const std::size_t card = static_cast<std::size_t>(sp.card(i));
  const std::size_t block = stride * card;
  const std::size_t total = sp.total_states();

  std::vector<double> out(total, 0.0);
  for (std::size_t head = 0; head < total; head += block) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      const std::size_t base = head + inner;  // state with x_i = 0
      double fiber = 0.0;
      for (std::size_t v = 0; v < card; ++v) fiber += p[base + v * stride];
      if (fiber == 0.0) continue;
      const auto row = theta.effective_row(theta.row_index_of_state(sp, base));
      for (std::size_t v = 0; v < card; ++v) out[base + v * stride] = fiber * row[v];
    }
  }
  return JointTable(sp, std::move(out));
}

/// KL divergence from p to the conditional-part manifold E(theta),
/// realized as KL(p || m-projection of p onto E(theta)).
inline double kl_to_cond_manifold(const JointTable& p, const CondTable& theta) {
  return kl(p, m_project_conditional(p, theta));
}

namespace detail {

inline void check_selection_dist(std::span<const double> c, int n) {
  if (static_cast<int>(c.size()) != n)
    throw InputError("node-selection distribution length mismatch");
  long double sum = 0.0L;
  for (double v : c) {
    if (!(v >= 0.0)) throw InputError("node-selection distribution has negative entry");
    sum += v;
  }
  if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-9)
    throw InputError("node-selection distribution does not sum to 1");
}

}  // namespace detail

/// Full-conditional divergence
///   FCD(p||q) = sum_i c(i) < log p(X_i|X_-i) - log q(X_i|X_-i) >_p,
/// a Bregman divergence with potential -sum_i c(i) H_p(X_i|X_-i).
/// Returns +inf when a q-conditional vanishes (or is undefined) somewhere
/// p has mass.
inline double fcd(const JointTable& p, const JointTable& q, std::span<const double> c) {
  if (!p.space().same_as(q.space())) throw InputError("state space mismatch");
  const StateSpace& sp = p.space();
  const int n = sp.size();
  detail::check_selection_dist(c, n);

  long double total = 0.0L;
  for (int i = 0; i < n; ++i) {
    if (c[i] == 0.0) continue;
    const std::size_t stride = sp.stride(i);
    const std::size_t card = static_cast<std::size_t>(sp.card(i));
    const std::size_t block = stride * card;
    long double term = 0.0L;
    for (std::size_t head = 0; head < sp.total_states(); head += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t base = head + inner;
        double pf = 0.0, qf = 0.0;
        for (std::size_t v = 0; v < card; ++v) {
          pf += p[base + v * stride];
          qf += q[base + v * stride];
        }
        if (pf == 0.0) continue;
        for (std::size_t v = 0; v < card; ++v) {
          const double px = p[base + v * stride];
          if (px == 0.0) continue;
          const double qx = q[base + v * stride];
          if (qf == 0.0 || qx == 0.0) return std::numeric_limits<double>::infinity();
          term += static_cast<long double>(px) * (std::log(px / pf) - std::log(qx / qf));
        }
      }
    }
    total += static_cast<long double>(c[i]) * term;
  }
  return static_cast<double>(total);
}

}  // namespace fpn
