#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpn/common.hpp"
#include "fpn/joint_table.hpp"
#include "fpn/model.hpp"

namespace fpn {

using json = nlohmann::ordered_json;

/// Non-finite divergences are legal report values; JSON has no literal for
/// them, so they are rendered as strings.
inline json json_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json json_real_vector(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(json_real(v));
  return arr;
}

/// Writes text atomically: temp file in the same directory, then rename.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + tmp.string());
    out << text;
    if (!out) throw InputError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline json schema_to_json(const Schema& schema) {
  return json{{"names", schema.names}, {"cards", schema.cards}};
}

inline Schema schema_from_json(const json& j) {
  try {
    return Schema(j.at("names").get<std::vector<std::string>>(),
                  j.at("cards").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid schema JSON: ") + e.what());
  }
}

inline json joint_table_to_json(const JointTable& table) {
  json j;
  j["format_version"] = kFormatVersion;
  j["names"] = table.space().names();
  j["cards"] = table.space().schema().cards;
  j["probs"] = std::vector<double>(table.probs().begin(), table.probs().end());
  return j;
}

inline JointTable joint_table_from_json(const json& j) {
  try {
    Schema schema(j.at("names").get<std::vector<std::string>>(),
                  j.at("cards").get<std::vector<int>>());
    return JointTable(StateSpace(std::move(schema)),
                      j.at("probs").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid distribution JSON: ") + e.what());
  }
}

namespace detail {

inline std::string row_key_string(const std::vector<int>& key) {
  std::string s;
  for (std::size_t k = 0; k < key.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(key[k]);
  }
  return s;
}

inline std::vector<int> row_key_parse(const std::string& s, std::size_t expected) {
  std::vector<int> key;
  if (!s.empty()) {
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) key.push_back(std::stoi(cell));
  }
  if (key.size() != expected) throw InputError("cpt row key '" + s + "' has wrong arity");
  return key;
}

}  // namespace detail

/// Canonical model serialization. Field order is fixed and row keys are the
/// comma-joined source values in spec order (the empty key names the single
/// row of a sourceless node), so identical models serialize byte-identically.
inline json model_to_json(const FpnModel& model) {
  json j;
  j["format_version"] = kFormatVersion;
  j["schema"] = schema_to_json(model.schema);
  j["criterion"] = to_string(model.criterion);
  j["n_train"] = model.n_train;
  j["c"] = model.c;
  json nodes = json::array();
  for (const Cpt& cpt : model.nodes) {
    json rows = json::object();
    for (const auto& [key, row] : cpt.rows) rows[detail::row_key_string(key)] = row;
    nodes.push_back(json{{"target", cpt.spec.target},
                         {"sources", cpt.spec.sources},
                         {"cpt",
                          json{{"rows", std::move(rows)},
                               {"fallback", cpt.fallback},
                               {"fallback_policy", to_string(cpt.policy)}}}});
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline FpnModel model_from_json(const json& j) {
  FpnModel model;
  try {
    model.schema = schema_from_json(j.at("schema"));
    model.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    model.n_train = j.at("n_train").get<std::uint64_t>();
    model.c = j.at("c").get<std::vector<double>>();
    model.nodes.resize(static_cast<std::size_t>(model.schema.size()));
    std::vector<bool> seen(static_cast<std::size_t>(model.schema.size()), false);
    for (const auto& node : j.at("nodes")) {
      Cpt cpt;
      const int target = node.at("target").get<int>();
      if (target < 0 || target >= model.schema.size())
        throw InputError("node target out of range");
      cpt.spec = CondSpec(target, node.at("sources").get<std::vector<int>>());
      const auto& cj = node.at("cpt");
      cpt.fallback = cj.at("fallback").get<std::vector<double>>();
      cpt.policy = fallback_policy_from_string(cj.at("fallback_policy").get<std::string>());
      for (const auto& [key, row] : cj.at("rows").items())
        cpt.rows.emplace(detail::row_key_parse(key, cpt.spec.sources.size()),
                         row.get<std::vector<double>>());
      seen[static_cast<std::size_t>(target)] = true;
      model.nodes[static_cast<std::size_t>(target)] = std::move(cpt);
    }
    for (bool s : seen)
      if (!s) throw InputError("model is missing a node entry");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid model JSON: ") + e.what());
  }
  model.validate();
  return model;
}

inline void save_model(const FpnModel& model, const std::filesystem::path& path) {
  write_json_file(path, model_to_json(model));
}

inline FpnModel load_model(const std::filesystem::path& path) {
  return model_from_json(load_json_file(path));
}

}  // namespace fpn
