#pragma once

#include <cassert>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fpn/common.hpp"
#include "fpn/model.hpp"
#include "fpn/rng.hpp"

namespace fpn {

enum class ProcessKind { sequential, random };

inline std::string to_string(ProcessKind p) {
  return p == ProcessKind::sequential ? "sequential" : "random";
}

inline ProcessKind process_from_string(const std::string& s) {
  if (s == "sequential") return ProcessKind::sequential;
  if (s == "random") return ProcessKind::random;
  throw InputError("unknown process kind: " + s);
}

/// How a chain is driven: which process, how long, and which variables are
/// clamped as evidence. burn_in defaults to 1000*n firings and thin to n
/// (one sweep length) when left unset.
struct FiringConfig {
  ProcessKind process = ProcessKind::random;
  std::vector<double> c;  // random process only; empty = use the model's
  std::optional<std::uint64_t> burn_in;
  std::optional<std::uint64_t> thin;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::map<int, int> evidence;
};

/// Full variable assignment plus the firing counter.
struct ChainState {
  std::vector<int> assignment;
  std::uint64_t step = 0;
};

/// Resolved run parameters and diagnostics, reported with every stream.
struct RunStats {
  std::uint64_t seed = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
  std::uint64_t steps = 0;
  std::uint64_t fallback_firings = 0;
};

/// Fires node i once: draws a fresh value for X_i from its conditional row
/// given the current information-source values. Only coordinate i changes.
inline ChainState fire_node(const ChainState& state, int i, const FpnModel& model, Rng& rng) {
  const Cpt& cpt = model.nodes[static_cast<std::size_t>(i)];
  std::vector<int> key(cpt.spec.sources.size());
  for (std::size_t k = 0; k < key.size(); ++k)
    key[k] = state.assignment[static_cast<std::size_t>(cpt.spec.sources[k])];
  const auto row = cpt.row_or_fallback(key);
  ChainState next = state;
  next.assignment[static_cast<std::size_t>(i)] = rng.draw(row);
  next.step = state.step + 1;
  return next;
}

namespace detail {

/// Per-node sampling tables resolved up front. Small source spaces are
/// flattened into dense arrays; large ones fall back to map lookups with a
/// reusable key buffer.
struct CompiledNode {
  const Cpt* cpt = nullptr;
  int target_card = 0;
  bool dense = false;
  std::vector<std::size_t> strides;   // dense: per source variable
  std::vector<double> table;          // dense: n_rows * target_card
  std::vector<char> from_fallback;    // dense: per row
  mutable std::vector<int> key;       // sparse lookup buffer
};

inline constexpr std::size_t kCompiledDenseLimit = std::size_t{1} << 22;

inline CompiledNode compile_node(const Cpt& cpt, const Schema& schema) {
  CompiledNode node;
  node.cpt = &cpt;
  node.target_card = cpt.target_card();
  node.key.resize(cpt.spec.sources.size());

  std::size_t rows = 1;
  bool fits = true;
  for (int s : cpt.spec.sources) {
    const auto card = static_cast<std::size_t>(schema.cards[static_cast<std::size_t>(s)]);
    if (rows > kCompiledDenseLimit / card) {
      fits = false;
      break;
    }
    rows *= card;
  }
  if (!fits || rows * static_cast<std::size_t>(node.target_card) > kCompiledDenseLimit)
    return node;

  node.dense = true;
  node.strides.assign(cpt.spec.sources.size(), 1);
  std::size_t acc = 1;
  for (int k = static_cast<int>(cpt.spec.sources.size()) - 1; k >= 0; --k) {
    node.strides[static_cast<std::size_t>(k)] = acc;
    acc *= static_cast<std::size_t>(
        schema.cards[static_cast<std::size_t>(cpt.spec.sources[static_cast<std::size_t>(k)])]);
  }
  node.table.resize(rows * static_cast<std::size_t>(node.target_card));
  node.from_fallback.assign(rows, 0);
  std::vector<int> key(cpt.spec.sources.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    bool fb = false;
    const auto row = cpt.row_or_fallback(key, &fb);
    node.from_fallback[r] = fb ? 1 : 0;
    std::copy(row.begin(), row.end(),
              node.table.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(node.target_card)));
    for (int k = static_cast<int>(key.size()) - 1; k >= 0; --k) {
      const int s = cpt.spec.sources[static_cast<std::size_t>(k)];
      if (++key[static_cast<std::size_t>(k)] < schema.cards[static_cast<std::size_t>(s)]) break;
      key[static_cast<std::size_t>(k)] = 0;
    }
  }
  return node;
}

inline int fire_compiled(const CompiledNode& node, std::span<const int> assignment, Rng& rng,
                         std::uint64_t* fallback_count) {
  const auto& sources = node.cpt->spec.sources;
  if (node.dense) {
    std::size_t r = 0;
    for (std::size_t k = 0; k < sources.size(); ++k)
      r += node.strides[k] * static_cast<std::size_t>(assignment[static_cast<std::size_t>(sources[k])]);
    if (node.from_fallback[r]) ++*fallback_count;
    return rng.draw({node.table.data() + r * static_cast<std::size_t>(node.target_card),
                     static_cast<std::size_t>(node.target_card)});
  }
  for (std::size_t k = 0; k < sources.size(); ++k)
    node.key[k] = assignment[static_cast<std::size_t>(sources[k])];
  bool fb = false;
  const auto row = node.cpt->row_or_fallback(node.key, &fb);
  if (fb) ++*fallback_count;
  return rng.draw(row);
}

}  // namespace detail

/// Runs one firing process and hands every kept state to the sink. The
/// stream is a deterministic function of (model, cfg): initial values of
/// the non-evidence variables are drawn uniformly, burn-in firings are
/// applied, then every thin-th state is emitted, steps times. Evidence
/// variables stay clamped and are included in the emitted records.
inline RunStats run_chain_visit(const FpnModel& model, const FiringConfig& cfg,
                                const std::function<void(std::span<const int>)>& sink) {
  model.validate();
  const int n = model.n_vars();

  for (const auto& [var, value] : cfg.evidence) {
    if (var < 0 || var >= n) throw InputError("evidence variable out of range");
    if (value < 0 || value >= model.schema.cards[static_cast<std::size_t>(var)])
      throw InputError("evidence value out of range for " +
                       model.schema.names[static_cast<std::size_t>(var)]);
  }
  std::vector<int> free_nodes;
  for (int i = 0; i < n; ++i)
    if (!cfg.evidence.count(i)) free_nodes.push_back(i);
  if (free_nodes.empty()) throw InputError("all variables are fixed by evidence");

  RunStats stats;
  stats.seed = cfg.seed;
  stats.burn_in = cfg.burn_in.value_or(1000ull * static_cast<std::uint64_t>(n));
  stats.thin = cfg.thin.value_or(static_cast<std::uint64_t>(n));
  stats.steps = cfg.steps;
  if (stats.thin < 1) throw InputError("thin must be >= 1");

  // node-choice cumulative weights for the random process
  std::vector<double> cum;
  if (cfg.process == ProcessKind::random) {
    const std::vector<double>& base = cfg.c.empty() ? model.c : cfg.c;
    if (base.size() != static_cast<std::size_t>(n))
      throw InputError("node-selection distribution length mismatch");
    double total = 0.0;
    for (int i : free_nodes) {
      const double w = base[static_cast<std::size_t>(i)];
      if (!(w >= 0.0)) throw InputError("node-selection distribution has negative entry");
      total += w;
    }
    if (!(total > 0.0))
      throw InputError("node-selection distribution puts no mass on free nodes");
    double acc = 0.0;
    for (int i : free_nodes) {
      acc += base[static_cast<std::size_t>(i)] / total;
      cum.push_back(acc);
    }
    cum.back() = 1.0;
  }

  std::vector<detail::CompiledNode> compiled;
  compiled.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    compiled.push_back(detail::compile_node(model.nodes[static_cast<std::size_t>(i)], model.schema));

  Rng rng(cfg.seed);
  std::vector<int> state(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    auto it = cfg.evidence.find(j);
    state[static_cast<std::size_t>(j)] =
        it != cfg.evidence.end()
            ? it->second
            : rng.uniform_int(model.schema.cards[static_cast<std::size_t>(j)]);
  }

  std::size_t seq_pos = 0;
  auto fire_once = [&] {
    int i;
    if (cfg.process == ProcessKind::sequential) {
      i = free_nodes[seq_pos];
      seq_pos = (seq_pos + 1) % free_nodes.size();
    } else {
      const double u = rng.uniform01();
      std::size_t lo = 0;
      while (u >= cum[lo]) ++lo;
      i = free_nodes[lo];
    }
#ifndef NDEBUG
    std::vector<int> before(state);
#endif
    state[static_cast<std::size_t>(i)] =
        detail::fire_compiled(compiled[static_cast<std::size_t>(i)], state, rng,
                              &stats.fallback_firings);
#ifndef NDEBUG
    for (int j = 0; j < n; ++j)
      assert(j == i || before[static_cast<std::size_t>(j)] == state[static_cast<std::size_t>(j)]);
    assert(!cfg.evidence.count(i));
#endif
  };

  for (std::uint64_t t = 0; t < stats.burn_in; ++t) fire_once();
  for (std::uint64_t s = 0; s < stats.steps; ++s) {
    for (std::uint64_t t = 0; t < stats.thin; ++t) fire_once();
    sink(state);
  }
  return stats;
}

struct SampleRun {
  std::vector<std::vector<int>> samples;
  RunStats stats;
};

/// Materialized variant of run_chain_visit.
inline SampleRun run_chain(const FpnModel& model, const FiringConfig& cfg) {
  SampleRun run;
  run.samples.reserve(cfg.steps);
  run.stats = run_chain_visit(model, cfg, [&](std::span<const int> s) {
    run.samples.emplace_back(s.begin(), s.end());
  });
  return run;
}

/// Conditions a network on evidence by construction: evidence variables are
/// removed, each remaining node keeps the sources that stay free, and its
/// rows are sliced at the evidence values. Running the plain firing process
/// on the result is distribution-identical to partial sampling on the
/// original network.
inline FpnModel reduce_model(const FpnModel& model, const std::map<int, int>& evidence) {
  model.validate();
  if (evidence.empty()) throw InputError("evidence must be nonempty");
  const int n = model.n_vars();
  for (const auto& [var, value] : evidence) {
    if (var < 0 || var >= n) throw InputError("evidence variable out of range");
    if (value < 0 || value >= model.schema.cards[static_cast<std::size_t>(var)])
      throw InputError("evidence value out of range for " +
                       model.schema.names[static_cast<std::size_t>(var)]);
  }

  std::vector<int> free_vars;
  std::vector<int> new_index(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    if (!evidence.count(j)) {
      new_index[static_cast<std::size_t>(j)] = static_cast<int>(free_vars.size());
      free_vars.push_back(j);
    }
  if (free_vars.empty()) throw InputError("all variables are fixed by evidence");

  FpnModel reduced;
  {
    std::vector<std::string> names;
    std::vector<int> cards;
    for (int j : free_vars) {
      names.push_back(model.schema.names[static_cast<std::size_t>(j)]);
      cards.push_back(model.schema.cards[static_cast<std::size_t>(j)]);
    }
    reduced.schema = Schema(std::move(names), std::move(cards));
  }
  reduced.criterion = model.criterion;
  reduced.n_train = model.n_train;

  double c_total = 0.0;
  for (int j : free_vars) c_total += model.c[static_cast<std::size_t>(j)];
  if (!(c_total > 0.0))
    throw InputError("node-selection distribution puts no mass on free nodes");
  for (int j : free_vars) reduced.c.push_back(model.c[static_cast<std::size_t>(j)] / c_total);

  for (int i : free_vars) {
    const Cpt& old = model.nodes[static_cast<std::size_t>(i)];
    Cpt sliced;
    sliced.policy = old.policy;
    sliced.fallback = old.fallback;

    std::vector<int> kept_positions;        // positions within the old key
    std::vector<int> new_sources;
    std::vector<std::pair<std::size_t, int>> fixed;  // (position, required value)
    for (std::size_t k = 0; k < old.spec.sources.size(); ++k) {
      const int s = old.spec.sources[k];
      auto it = evidence.find(s);
      if (it == evidence.end()) {
        kept_positions.push_back(static_cast<int>(k));
        new_sources.push_back(new_index[static_cast<std::size_t>(s)]);
      } else {
        fixed.emplace_back(k, it->second);
      }
    }
    sliced.spec = CondSpec(new_index[static_cast<std::size_t>(i)], std::move(new_sources));

    for (const auto& [key, row] : old.rows) {
      bool match = true;
      for (const auto& [pos, value] : fixed)
        if (key[pos] != value) {
          match = false;
          break;
        }
      if (!match) continue;
      std::vector<int> new_key;
      new_key.reserve(kept_positions.size());
      for (int pos : kept_positions) new_key.push_back(key[static_cast<std::size_t>(pos)]);
      sliced.rows.emplace(std::move(new_key), row);
    }
    reduced.nodes.push_back(std::move(sliced));
  }
  reduced.validate();
  return reduced;
}

}  // namespace fpn
