#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/cond_table.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// Row served when a source configuration was never observed.
enum class FallbackPolicy { marginal, uniform };

inline std::string to_string(FallbackPolicy p) {
  return p == FallbackPolicy::marginal ? "marginal" : "uniform";
}

inline FallbackPolicy fallback_policy_from_string(const std::string& s) {
  if (s == "marginal") return FallbackPolicy::marginal;
  if (s == "uniform") return FallbackPolicy::uniform;
  throw InputError("unknown fallback policy: " + s);
}

/// Conditional probability table of one node: sparse rows keyed by the
/// observed source configurations (values in spec order) plus a fallback
/// row for everything unobserved.
struct Cpt {
  CondSpec spec;
  std::map<std::vector<int>, std::vector<double>> rows;
  std::vector<double> fallback;
  FallbackPolicy policy = FallbackPolicy::marginal;

  int target_card() const { return static_cast<int>(fallback.size()); }

  std::span<const double> row_or_fallback(const std::vector<int>& y,
                                          bool* used_fallback = nullptr) const {
    auto it = rows.find(y);
    if (it != rows.end()) {
      if (used_fallback) *used_fallback = false;
      return it->second;
    }
    if (used_fallback) *used_fallback = true;
    return fallback;
  }

  void validate(const Schema& schema) const {
    spec.check_against(schema);
    auto check_row = [&](std::span<const double> r, const char* what) {
      if (r.size() != static_cast<std::size_t>(schema.cards[spec.target]))
        throw InputError(std::string(what) + " has wrong length");
      long double sum = 0.0L;
      for (double v : r) {
        if (!(v >= 0.0)) throw InputError(std::string(what) + " has negative entry");
        sum += v;
      }
      if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-12)
        throw InputError(std::string(what) + " does not sum to 1");
    };
    check_row(fallback, "cpt fallback row");
    for (const auto& [key, row] : rows) {
      if (key.size() != spec.sources.size())
        throw InputError("cpt row key length mismatch");
      for (std::size_t k = 0; k < key.size(); ++k)
        if (key[k] < 0 || key[k] >= schema.cards[spec.sources[k]])
          throw InputError("cpt row key value out of range");
      check_row(row, "cpt row");
    }
  }

  /// Dense view over the full source configuration space; unobserved rows
  /// stay undefined but the fallback is attached, so projections and
  /// transition operators treat them as covered.
  CondTable to_dense(const Schema& schema) const {
    std::vector<int> src_cards;
    for (int s : spec.sources) src_cards.push_back(schema.cards[s]);
    CondTable table(spec, std::move(src_cards), schema.cards[spec.target]);
    for (const auto& [key, row] : rows) table.set_row(table.row_index(key), row);
    table.set_fallback(fallback);
    return table;
  }
};

/// Cpt from a dense conditional table: defined rows are copied, undefined
/// rows are left to the fallback.
inline Cpt cpt_from_cond_table(const CondTable& table, std::vector<double> fallback,
                               FallbackPolicy policy) {
  Cpt cpt;
  cpt.spec = table.spec();
  cpt.policy = policy;
  cpt.fallback = std::move(fallback);
  const auto& cards = table.source_cards();
  std::vector<int> key(cards.size(), 0);
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (table.row_defined(r)) {
      auto row = table.row(r);
      cpt.rows.emplace(key, std::vector<double>(row.begin(), row.end()));
    }
    for (int k = static_cast<int>(cards.size()) - 1; k >= 0; --k) {
      if (++key[static_cast<std::size_t>(k)] < cards[static_cast<std::size_t>(k)]) break;
      key[static_cast<std::size_t>(k)] = 0;
    }
  }
  return cpt;
}

}  // namespace fpn
