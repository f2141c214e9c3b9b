#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// Dense conditional table p(X_target | X_sources): one probability row per
/// source configuration, row-major over the sorted source variables.
/// Rows with zero parent mass are undefined, which is a first-class state
/// rather than an error; an optional fallback row can stand in for them.
class CondTable {
 public:
  CondTable(CondSpec spec, std::vector<int> source_cards, int target_card)
      : spec_(std::move(spec)),
        source_cards_(std::move(source_cards)),
        target_card_(target_card) {
    if (target_card_ < 1) throw InputError("target cardinality must be >= 1");
    src_strides_.assign(source_cards_.size(), 1);
    std::size_t rows = 1;
    for (int k = static_cast<int>(source_cards_.size()) - 1; k >= 0; --k) {
      if (source_cards_[k] < 1) throw InputError("source cardinality must be >= 1");
      src_strides_[k] = rows;
      rows *= static_cast<std::size_t>(source_cards_[k]);
    }
    n_rows_ = rows;
    probs_.assign(n_rows_ * static_cast<std::size_t>(target_card_), 0.0);
    defined_.assign(n_rows_, 0);
  }

  const CondSpec& spec() const { return spec_; }
  std::size_t n_rows() const { return n_rows_; }
  int target_card() const { return target_card_; }
  const std::vector<int>& source_cards() const { return source_cards_; }

  bool row_defined(std::size_t r) const { return defined_[r] != 0; }

  std::span<const double> row(std::size_t r) const {
    return {probs_.data() + r * static_cast<std::size_t>(target_card_),
            static_cast<std::size_t>(target_card_)};
  }

  /// Defined row, else fallback, else an error: the projection this table
  /// is driving has reached a parent configuration nothing covers.
  std::span<const double> effective_row(std::size_t r) const {
    if (defined_[r]) return row(r);
    if (!fallback_.empty()) return fallback_;
    throw InputError("uncovered parent configuration");
  }

  void set_row(std::size_t r, std::span<const double> values) {
    long double sum = 0.0L;
    for (double v : values) {
      if (!(v >= 0.0)) throw InputError("negative or NaN conditional entry");
      sum += v;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-12)
      throw InputError("conditional row does not sum to 1");
    std::copy(values.begin(), values.end(),
              probs_.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(target_card_)));
    defined_[r] = 1;
  }

  void set_fallback(std::vector<double> values) {
    if (values.size() != static_cast<std::size_t>(target_card_))
      throw InputError("fallback row length mismatch");
    long double sum = 0.0L;
    for (double v : values) {
      if (!(v >= 0.0)) throw InputError("negative or NaN fallback entry");
      sum += v;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-12)
      throw InputError("fallback row does not sum to 1");
    fallback_ = std::move(values);
  }

  bool has_fallback() const { return !fallback_.empty(); }
  std::span<const double> fallback() const { return fallback_; }

  std::size_t row_index(std::span<const int> source_values) const {
    std::size_t r = 0;
    for (std::size_t k = 0; k < source_cards_.size(); ++k)
      r += src_strides_[k] * static_cast<std::size_t>(source_values[k]);
    return r;
  }

  /// Row index for the source sub-configuration of a full-space state.
  std::size_t row_index_of_state(const StateSpace& space, std::size_t state_idx) const {
    std::size_t r = 0;
    for (std::size_t k = 0; k < spec_.sources.size(); ++k)
      r += src_strides_[k] * static_cast<std::size_t>(space.coord(state_idx, spec_.sources[k]));
    return r;
  }

 private:
  CondSpec spec_;
  std::vector<int> source_cards_;
  int target_card_;
  std::vector<std::size_t> src_strides_;
  std::size_t n_rows_ = 1;
  std::vector<double> probs_;
  std::vector<char> defined_;
  std::vector<double> fallback_;
};

}  // namespace fpn
