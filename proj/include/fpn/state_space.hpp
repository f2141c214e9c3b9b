#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fpn/common.hpp"

namespace fpn {

/// Variable names and per-variable cardinalities. A schema makes no
/// promise that the product of cardinalities is representable; that is
/// checked only when a dense StateSpace is built from it.
struct Schema {
  std::vector<std::string> names;
  std::vector<int> cards;

  Schema() = default;
  Schema(std::vector<std::string> names_, std::vector<int> cards_)
      : names(std::move(names_)), cards(std::move(cards_)) {
    validate();
  }

  int size() const { return static_cast<int>(names.size()); }

  int var_index(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<int>(j);
    throw InputError("unknown variable name: " + std::string(name));
  }

  void validate() const {
    if (names.empty()) throw InputError("schema has no variables");
    if (names.size() != cards.size())
      throw InputError("schema names/cards length mismatch");
    std::unordered_set<std::string_view> seen;
    for (const auto& nm : names) {
      if (nm.empty()) throw InputError("empty variable name");
      if (!seen.insert(nm).second)
        throw InputError("duplicate variable name: " + nm);
    }
    for (int c : cards)
      if (c < 1) throw InputError("cardinality must be >= 1");
  }

  bool operator==(const Schema&) const = default;
};

/// Dense product state space over a schema, row-major with variable 0
/// slowest. This layout is shared by every module that touches joint
/// tables or transition operators.
class StateSpace {
 public:
  explicit StateSpace(Schema schema) : schema_(std::move(schema)) {
    schema_.validate();
    const int n = schema_.size();
    strides_.assign(n, 1);
    std::size_t total = 1;
    for (int j = n - 1; j >= 0; --j) {
      strides_[j] = total;
      const auto card = static_cast<std::size_t>(schema_.cards[j]);
      if (total > std::numeric_limits<std::size_t>::max() / card)
        throw CapacityError("state space does not fit the index range");
      total *= card;
    }
    total_ = total;
  }

  const Schema& schema() const { return schema_; }
  int size() const { return schema_.size(); }
  int card(int var) const { return schema_.cards[var]; }
  const std::vector<std::string>& names() const { return schema_.names; }
  std::size_t total_states() const { return total_; }
  std::size_t stride(int var) const { return strides_[var]; }

  std::size_t encode(std::span<const int> x) const {
    std::size_t idx = 0;
    for (int j = 0; j < size(); ++j) idx += strides_[j] * static_cast<std::size_t>(x[j]);
    return idx;
  }

  void decode(std::size_t idx, std::span<int> out) const {
    for (int j = 0; j < size(); ++j)
      out[j] = static_cast<int>(idx / strides_[j] % static_cast<std::size_t>(schema_.cards[j]));
  }

  /// Value of one coordinate of the state with the given index.
  int coord(std::size_t idx, int var) const {
    return static_cast<int>(idx / strides_[var] % static_cast<std::size_t>(schema_.cards[var]));
  }

  /// Space over a subset of variables, in ascending index order.
  StateSpace sub_space(std::span<const int> vars) const {
    std::vector<std::string> nm;
    std::vector<int> cd;
    for (int v : vars) {
      nm.push_back(schema_.names[v]);
      cd.push_back(schema_.cards[v]);
    }
    return StateSpace(Schema(std::move(nm), std::move(cd)));
  }

  bool same_as(const StateSpace& other) const { return schema_ == other.schema_; }

 private:
  Schema schema_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

/// Target variable plus the sorted set of variables conditioning it.
struct CondSpec {
  int target = 0;
  std::vector<int> sources;

  CondSpec() = default;
  CondSpec(int target_, std::vector<int> sources_)
      : target(target_), sources(std::move(sources_)) {
    std::sort(sources.begin(), sources.end());
    if (target < 0) throw InputError("negative target index");
    for (std::size_t k = 0; k < sources.size(); ++k) {
      if (sources[k] < 0) throw InputError("negative source index");
      if (sources[k] == target)
        throw InputError("target cannot be its own source");
      if (k > 0 && sources[k] == sources[k - 1])
        throw InputError("duplicate source index");
    }
  }

  /// Conditioning set = all variables except the target.
  static CondSpec full(int target, int n_vars) {
    std::vector<int> src;
    src.reserve(n_vars - 1);
    for (int j = 0; j < n_vars; ++j)
      if (j != target) src.push_back(j);
    return CondSpec(target, std::move(src));
  }

  void check_against(const Schema& schema) const {
    if (target >= schema.size()) throw InputError("target index out of range");
    for (int s : sources)
      if (s >= schema.size()) throw InputError("source index out of range");
  }

  bool operator==(const CondSpec&) const = default;
};

}  // namespace fpn
