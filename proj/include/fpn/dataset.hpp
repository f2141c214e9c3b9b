#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/cpt.hpp"
#include "fpn/joint_table.hpp"
#include "fpn/state_space.hpp"

namespace fpn {

/// N records of integer codes under a schema. Rows are stored flat,
/// immutable after construction. Empty datasets are permitted; operations
/// that need data reject them individually.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<int> flat)
      : schema_(std::move(schema)), data_(std::move(flat)) {
    const auto n_vars = static_cast<std::size_t>(schema_.size());
    if (n_vars == 0 || data_.size() % n_vars != 0)
      throw InputError("dataset row length does not match schema");
    n_rows_ = data_.size() / n_vars;
    for (std::size_t r = 0; r < n_rows_; ++r)
      for (std::size_t j = 0; j < n_vars; ++j) {
        const int v = data_[r * n_vars + j];
        if (v < 0 || v >= schema_.cards[j])
          throw InputError("dataset value out of range for variable " + schema_.names[j]);
      }
  }

  static Dataset from_rows(Schema schema, const std::vector<std::vector<int>>& rows) {
    std::vector<int> flat;
    flat.reserve(rows.size() * static_cast<std::size_t>(schema.size()));
    for (const auto& r : rows) {
      if (r.size() != static_cast<std::size_t>(schema.size()))
        throw InputError("dataset row length does not match schema");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return Dataset(std::move(schema), std::move(flat));
  }

  const Schema& schema() const { return schema_; }
  std::size_t n() const { return n_rows_; }
  int n_vars() const { return schema_.size(); }

  std::span<const int> row(std::size_t r) const {
    return {data_.data() + r * static_cast<std::size_t>(schema_.size()),
            static_cast<std::size_t>(schema_.size())};
  }

  int value(std::size_t r, int var) const {
    return data_[r * static_cast<std::size_t>(schema_.size()) + static_cast<std::size_t>(var)];
  }

 private:
  Schema schema_;
  std::vector<int> data_;
  std::size_t n_rows_ = 0;
};

namespace detail {

inline int parse_cell(const std::string& cell, std::size_t line_no) {
  std::size_t b = 0, e = cell.size();
  while (b < e && (cell[b] == ' ' || cell[b] == '\t')) ++b;
  while (e > b && (cell[e - 1] == ' ' || cell[e - 1] == '\t' || cell[e - 1] == '\r')) --e;
  int value = 0;
  auto [ptr, ec] = std::from_chars(cell.data() + b, cell.data() + e, value);
  if (ec != std::errc() || ptr != cell.data() + e || b == e)
    throw InputError("line " + std::to_string(line_no) + ": not a non-negative integer: '" +
                     cell.substr(b, e - b) + "'");
  if (value < 0)
    throw InputError("line " + std::to_string(line_no) + ": negative value");
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

/// Loads a CSV of integer codes. The first line is the header. With a
/// schema, header names must match in order and values are bound-checked
/// against the declared cardinalities; without one, cardinalities are
/// inferred as 1 + the largest observed value per column.
inline Dataset load_csv(const std::filesystem::path& path,
                        const std::optional<Schema>& schema = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty file: " + path.string());
  line = detail::strip_cr(line);
  std::vector<std::string> names;
  for (auto& cell : detail::split_csv_line(line)) {
    std::string nm = detail::strip_cr(cell);
    while (!nm.empty() && (nm.front() == ' ' || nm.front() == '\t')) nm.erase(nm.begin());
    while (!nm.empty() && (nm.back() == ' ' || nm.back() == '\t')) nm.pop_back();
    names.push_back(std::move(nm));
  }
  const std::size_t n_vars = names.size();
  if (schema) {
    if (schema->names != names)
      throw InputError("header does not match schema variable names");
  }

  std::vector<int> flat;
  std::vector<int> max_seen(n_vars, -1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != n_vars)
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(n_vars) + " cells, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < n_vars; ++j) {
      const int v = detail::parse_cell(cells[j], line_no);
      if (schema && v >= schema->cards[j])
        throw InputError("line " + std::to_string(line_no) + ": value " + std::to_string(v) +
                         " exceeds cardinality of " + names[j]);
      max_seen[j] = std::max(max_seen[j], v);
      flat.push_back(v);
    }
  }

  if (schema) return Dataset(*schema, std::move(flat));
  if (flat.empty())
    throw InputError("cannot infer cardinalities from a data-free file: " + path.string());
  std::vector<int> cards;
  cards.reserve(n_vars);
  for (int m : max_seen) cards.push_back(m + 1);
  return Dataset(Schema(std::move(names), std::move(cards)), std::move(flat));
}

/// Writes a dataset as CSV (atomically: temp file + rename).
inline void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + tmp.string());
    for (int j = 0; j < d.n_vars(); ++j)
      out << (j ? "," : "") << d.schema().names[static_cast<std::size_t>(j)];
    out << '\n';
    for (std::size_t r = 0; r < d.n(); ++r) {
      auto row = d.row(r);
      for (int j = 0; j < d.n_vars(); ++j) out << (j ? "," : "") << row[static_cast<std::size_t>(j)];
      out << '\n';
    }
    if (!out) throw InputError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Empirical joint distribution of the dataset as a dense table.
inline JointTable empirical_joint(const Dataset& d, std::size_t dense_limit = kDenseStateLimit) {
  if (d.n() == 0) throw InputError("empty dataset");
  StateSpace space(d.schema());
  if (space.total_states() > dense_limit)
    throw CapacityError("state space too large for dense table");
  std::vector<double> probs(space.total_states(), 0.0);
  const double w = 1.0 / static_cast<double>(d.n());
  for (std::size_t r = 0; r < d.n(); ++r) probs[space.encode(d.row(r))] += w;
  return JointTable(std::move(space), std::move(probs));
}

namespace detail {

/// Counts of (source configuration, target value) pairs, grouped by the
/// source configuration. One pass over the data; hashed grouping keeps
/// memory proportional to the number of observed configurations.
inline std::map<std::vector<int>, std::vector<std::int64_t>> group_counts(const Dataset& d,
                                                                          const CondSpec& spec) {
  spec.check_against(d.schema());
  const int tc = d.schema().cards[static_cast<std::size_t>(spec.target)];
  std::map<std::vector<int>, std::vector<std::int64_t>> groups;
  std::vector<int> key(spec.sources.size());
  for (std::size_t r = 0; r < d.n(); ++r) {
    for (std::size_t k = 0; k < spec.sources.size(); ++k)
      key[k] = d.value(r, spec.sources[k]);
    auto [it, inserted] = groups.try_emplace(key, static_cast<std::size_t>(tc), 0);
    ++it->second[static_cast<std::size_t>(d.value(r, spec.target))];
  }
  return groups;
}

}  // namespace detail

/// Empirical conditional probability table: row = count(x_i, y) / count(y)
/// for each observed source configuration y; the fallback row serves
/// everything unobserved.
inline Cpt empirical_cpt(const Dataset& d, const CondSpec& spec, FallbackPolicy policy) {
  if (d.n() == 0) throw InputError("empty dataset");
  const int tc = d.schema().cards[static_cast<std::size_t>(spec.target)];

  Cpt cpt;
  cpt.spec = spec;
  cpt.policy = policy;
  if (policy == FallbackPolicy::uniform) {
    cpt.fallback.assign(static_cast<std::size_t>(tc), 1.0 / tc);
  } else {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(tc), 0);
    for (std::size_t r = 0; r < d.n(); ++r)
      ++counts[static_cast<std::size_t>(d.value(r, spec.target))];
    cpt.fallback.resize(static_cast<std::size_t>(tc));
    for (int v = 0; v < tc; ++v)
      cpt.fallback[static_cast<std::size_t>(v)] =
          static_cast<double>(counts[static_cast<std::size_t>(v)]) / static_cast<double>(d.n());
  }

  for (auto& [key, counts] : detail::group_counts(d, spec)) {
    std::int64_t total = 0;
    for (auto cnt : counts) total += cnt;
    std::vector<double> row(static_cast<std::size_t>(tc));
    for (int v = 0; v < tc; ++v)
      row[static_cast<std::size_t>(v)] =
          static_cast<double>(counts[static_cast<std::size_t>(v)]) / static_cast<double>(total);
    cpt.rows.emplace(key, std::move(row));
  }
  return cpt;
}

namespace detail {

inline double entropy_from_grouped_counts(std::span<const std::int64_t> counts, int target_card,
                                          std::size_t n_groups, std::size_t n_rows) {
  long double h = 0.0L;
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::int64_t total = 0;
    for (int v = 0; v < target_card; ++v)
      total += counts[g * static_cast<std::size_t>(target_card) + static_cast<std::size_t>(v)];
    for (int v = 0; v < target_card; ++v) {
      const std::int64_t cnt =
          counts[g * static_cast<std::size_t>(target_card) + static_cast<std::size_t>(v)];
      if (cnt > 0)
        h -= static_cast<long double>(cnt) *
             std::log(static_cast<double>(cnt) / static_cast<double>(total));
    }
  }
  return std::max(0.0, static_cast<double>(h / static_cast<long double>(n_rows)));
}

}  // namespace detail

/// H_pi(X_target | X_sources) straight from counts, in one pass and
/// without materializing any joint table. Source configurations that fit a
/// 64-bit mixed-radix code are grouped through a flat hash; wider ones fall
/// back to ordered vector keys.
inline double cond_entropy_counts(const Dataset& d, const CondSpec& spec) {
  if (d.n() == 0) throw InputError("empty dataset");
  spec.check_against(d.schema());
  const int tc = d.schema().cards[static_cast<std::size_t>(spec.target)];

  std::vector<std::uint64_t> strides(spec.sources.size());
  std::uint64_t radix = 1;
  bool fits = true;
  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    const auto card = static_cast<std::uint64_t>(
        d.schema().cards[static_cast<std::size_t>(spec.sources[k])]);
    if (radix > std::numeric_limits<std::uint64_t>::max() / card) {
      fits = false;
      break;
    }
    strides[k] = radix;
    radix *= card;
  }

  if (!fits) {
    std::vector<std::int64_t> counts;
    std::size_t n_groups = 0;
    for (const auto& [key, group] : detail::group_counts(d, spec)) {
      counts.insert(counts.end(), group.begin(), group.end());
      ++n_groups;
    }
    return detail::entropy_from_grouped_counts(counts, tc, n_groups, d.n());
  }

  std::unordered_map<std::uint64_t, std::uint32_t> slot_of;
  slot_of.reserve(std::min<std::size_t>(d.n(), 4096));
  std::vector<std::int64_t> counts;
  for (std::size_t r = 0; r < d.n(); ++r) {
    std::uint64_t key = 0;
    for (std::size_t k = 0; k < strides.size(); ++k)
      key += strides[k] * static_cast<std::uint64_t>(d.value(r, spec.sources[k]));
    auto [it, inserted] =
        slot_of.try_emplace(key, static_cast<std::uint32_t>(slot_of.size()));
    if (inserted) counts.resize(counts.size() + static_cast<std::size_t>(tc), 0);
    ++counts[static_cast<std::size_t>(it->second) * static_cast<std::size_t>(tc) +
             static_cast<std::size_t>(d.value(r, spec.target))];
  }
  return detail::entropy_from_grouped_counts(counts, tc, slot_of.size(), d.n());
}

}  // namespace fpn
