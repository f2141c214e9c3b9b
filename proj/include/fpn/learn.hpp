#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/dataset.hpp"
#include "fpn/dist_ops.hpp"
#include "fpn/model.hpp"

namespace fpn {

/// Number of free parameters of a conditional table:
/// (product of source cardinalities) * (target cardinality - 1).
inline std::uint64_t free_params(const CondSpec& spec, const Schema& schema) {
  spec.check_against(schema);
  std::uint64_t k = 1;
  for (int s : spec.sources) {
    const auto card = static_cast<std::uint64_t>(schema.cards[static_cast<std::size_t>(s)]);
    if (k > std::numeric_limits<std::uint64_t>::max() / card)
      throw CapacityError("free-parameter count overflows");
    k *= card;
  }
  return k * static_cast<std::uint64_t>(schema.cards[static_cast<std::size_t>(spec.target)] - 1);
}

/// Node-by-node information criterion, in nats:
///   mdl: N H(X_i|Y_i) + k log(N) / 2
///   aic: N H(X_i|Y_i) + k
inline double score(const Dataset& d, const CondSpec& spec, Criterion crit) {
  if (d.n() == 0) throw InputError("empty dataset");
  const double n = static_cast<double>(d.n());
  const double h = cond_entropy_counts(d, spec);
  const double k = static_cast<double>(free_params(spec, d.schema()));
  const double penalty = crit == Criterion::mdl ? k * std::log(n) / 2.0 : k;
  return n * h + penalty;
}

/// Accepted-step record of one greedy source selection.
struct SelectTrace {
  std::vector<double> scores;  // score of the empty set, then after each accepted step
  int steps = 0;               // accepted additions + removals
};

namespace detail {

inline bool strictly_better(double candidate, double current) {
  return current - candidate > 1e-12 * std::max(1.0, std::fabs(current));
}

}  // namespace detail

/// Greedy forward-backward selection of the information source of node i:
/// starting from the empty set, repeatedly take the single best addition
/// while it strictly improves the criterion, otherwise the single best
/// removal, otherwise stop. Ties go to the smallest variable index.
inline CondSpec select_sources(const Dataset& d, int i, Criterion crit,
                               SelectTrace* trace = nullptr) {
  if (i < 0 || i >= d.schema().size()) throw InputError("node index out of range");
  const int n = d.schema().size();

  std::vector<int> current;  // kept sorted
  double current_score = score(d, CondSpec(i, {}), crit);
  if (trace) {
    trace->scores = {current_score};
    trace->steps = 0;
  }

  const int max_steps = n * n;
  int steps = 0;
  while (true) {
    if (steps > max_steps)
      throw std::logic_error("source selection failed to terminate");

    auto contains = [&](int j) {
      return std::binary_search(current.begin(), current.end(), j);
    };

    // best single addition
    int best_add = -1;
    double best_add_score = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i || contains(j)) continue;
      std::vector<int> cand(current);
      cand.insert(std::lower_bound(cand.begin(), cand.end(), j), j);
      const double s = score(d, CondSpec(i, std::move(cand)), crit);
      if (s < best_add_score) {
        best_add_score = s;
        best_add = j;
      }
    }
    if (best_add >= 0 && detail::strictly_better(best_add_score, current_score)) {
      current.insert(std::lower_bound(current.begin(), current.end(), best_add), best_add);
      current_score = best_add_score;
      ++steps;
      if (trace) {
        trace->scores.push_back(current_score);
        trace->steps = steps;
      }
      continue;
    }

    // best single removal
    int best_rm = -1;
    double best_rm_score = std::numeric_limits<double>::infinity();
    for (int j : current) {
      std::vector<int> cand;
      cand.reserve(current.size() - 1);
      for (int v : current)
        if (v != j) cand.push_back(v);
      const double s = score(d, CondSpec(i, std::move(cand)), crit);
      if (s < best_rm_score) {
        best_rm_score = s;
        best_rm = j;
      }
    }
    if (best_rm >= 0 && detail::strictly_better(best_rm_score, current_score)) {
      current.erase(std::find(current.begin(), current.end(), best_rm));
      current_score = best_rm_score;
      ++steps;
      if (trace) {
        trace->scores.push_back(current_score);
        trace->steps = steps;
      }
      continue;
    }
    break;
  }
  return CondSpec(i, std::move(current));
}

/// Parameter learning with a fixed structure: one empirical conditional
/// table per node.
inline FpnModel learn_with_specs(const Dataset& d, const std::vector<CondSpec>& specs,
                                 Criterion crit, FallbackPolicy policy) {
  if (specs.size() != static_cast<std::size_t>(d.schema().size()))
    throw InputError("one spec per variable required");
  FpnModel model;
  model.schema = d.schema();
  model.criterion = crit;
  model.n_train = d.n();
  model.c = FpnModel::uniform_selection(d.schema().size());
  for (int i = 0; i < d.schema().size(); ++i) {
    if (specs[static_cast<std::size_t>(i)].target != i)
      throw InputError("spec target must equal node index");
    model.nodes.push_back(empirical_cpt(d, specs[static_cast<std::size_t>(i)], policy));
  }
  model.validate();
  return model;
}

/// Full learning pipeline: per-node greedy structure selection followed by
/// empirical parameter estimation. Nodes are independent computations.
inline FpnModel learn_model(const Dataset& d, Criterion crit, FallbackPolicy policy) {
  std::vector<CondSpec> specs;
  specs.reserve(static_cast<std::size_t>(d.schema().size()));
  for (int i = 0; i < d.schema().size(); ++i)
    specs.push_back(select_sources(d, i, crit));
  return learn_with_specs(d, specs, crit, policy);
}

/// Analytic counterpart of parameter learning: conditional tables read off
/// an exact joint distribution instead of counts.
inline FpnModel model_from_table(const JointTable& pi, const std::vector<CondSpec>& specs,
                                 FallbackPolicy policy) {
  const Schema& schema = pi.space().schema();
  if (specs.size() != static_cast<std::size_t>(schema.size()))
    throw InputError("one spec per variable required");
  FpnModel model;
  model.schema = schema;
  model.criterion = Criterion::mdl;
  model.n_train = 0;
  model.c = FpnModel::uniform_selection(schema.size());
  for (int i = 0; i < schema.size(); ++i) {
    const CondSpec& spec = specs[static_cast<std::size_t>(i)];
    if (spec.target != i) throw InputError("spec target must equal node index");
    std::vector<double> fb;
    if (policy == FallbackPolicy::uniform) {
      fb.assign(static_cast<std::size_t>(schema.cards[static_cast<std::size_t>(i)]),
                1.0 / schema.cards[static_cast<std::size_t>(i)]);
    } else {
      const auto marg = marginal(pi, std::vector<int>{i});
      fb.assign(marg.probs().begin(), marg.probs().end());
    }
    model.nodes.push_back(cpt_from_cond_table(conditional(pi, spec), std::move(fb), policy));
  }
  model.validate();
  return model;
}

}  // namespace fpn
