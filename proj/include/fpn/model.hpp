#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/cpt.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// Structure-selection criterion.
enum class Criterion { mdl, aic };

inline std::string to_string(Criterion c) { return c == Criterion::mdl ? "mdl" : "aic"; }

inline Criterion criterion_from_string(const std::string& s) {
  if (s == "mdl") return Criterion::mdl;
  if (s == "aic") return Criterion::aic;
  throw InputError("unknown criterion: " + s);
}

/// A learned firing process network: one conditional probability table per
/// variable, each conditioned on that node's information sources. The
/// implied directed graph may freely contain cycles and one-way edges.
struct FpnModel {
  Schema schema;
  std::vector<Cpt> nodes;  // nodes[i].spec.target == i
  Criterion criterion = Criterion::mdl;
  std::uint64_t n_train = 0;
  std::vector<double> c;  // node-selection distribution of the random process

  int n_vars() const { return schema.size(); }

  const std::vector<int>& sources(int i) const {
    return nodes[static_cast<std::size_t>(i)].spec.sources;
  }

  static std::vector<double> uniform_selection(int n) {
    return std::vector<double>(static_cast<std::size_t>(n),
                               1.0 / static_cast<double>(n));
  }

  void validate() const {
    schema.validate();
    if (nodes.size() != static_cast<std::size_t>(schema.size()))
      throw InputError("model must have one node per schema variable");
    for (int i = 0; i < schema.size(); ++i) {
      const Cpt& cpt = nodes[static_cast<std::size_t>(i)];
      if (cpt.spec.target != i) throw InputError("node target index mismatch");
      cpt.validate(schema);
    }
    if (c.size() != static_cast<std::size_t>(schema.size()))
      throw InputError("node-selection distribution length mismatch");
    long double sum = 0.0L;
    for (double v : c) {
      if (!(v >= 0.0)) throw InputError("node-selection distribution has negative entry");
      sum += v;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-9)
      throw InputError("node-selection distribution does not sum to 1");
  }
};

}  // namespace fpn
