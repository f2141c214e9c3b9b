// fpn: learn firing process networks from discrete data, draw (posterior)
// samples from them, and run exact analyses on small state spaces.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpn/fpn.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitNoConvergence = 4;

std::map<int, int> parse_evidence(const std::string& text, const fpn::Schema& schema) {
  std::map<int, int> evidence;
  if (text.empty()) return evidence;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw fpn::InputError("evidence item '" + item + "' is not name=value");
    const std::string name = item.substr(0, eq);
    const int var = schema.var_index(name);
    int value = 0;
    try {
      value = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw fpn::InputError("evidence value for '" + name + "' is not an integer");
    }
    if (value < 0 || value >= schema.cards[static_cast<std::size_t>(var)])
      throw fpn::InputError("evidence value out of range for " + name);
    if (!evidence.emplace(var, value).second)
      throw fpn::InputError("duplicate evidence for " + name);
  }
  return evidence;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw fpn::InputError("empty list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto v : parse_u64_list(text)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

std::string dot_from_model(const fpn::FpnModel& model) {
  std::ostringstream out;
  out << "digraph fpn {\n";
  for (int i = 0; i < model.n_vars(); ++i)
    out << "  n" << i << " [label=\"" << model.schema.names[static_cast<std::size_t>(i)]
        << "\"];\n";
  for (int i = 0; i < model.n_vars(); ++i)
    for (int j : model.sources(i)) out << "  n" << j << " -> n" << i << ";\n";
  out << "}\n";
  return out.str();
}

int cmd_gen_ising(int rows, int cols, double coupling, double field, std::uint64_t n,
                  std::uint64_t seed, const std::string& out_path) {
  fpn::IsingSpec spec{rows, cols, coupling, {}};
  if (field != 0.0) spec.field.assign(static_cast<std::size_t>(spec.sites()), field);
  const fpn::Dataset data = fpn::ising_sample(spec, n, seed);
  fpn::write_csv(data, out_path);
  std::cout << "wrote " << data.n() << " samples to " << out_path << "\n";
  return kExitOk;
}

int cmd_learn(const std::string& data_path, const std::string& schema_path,
              const std::string& criterion, const std::string& fallback,
              const std::string& out_path) {
  std::optional<fpn::Schema> schema;
  if (!schema_path.empty())
    schema = fpn::schema_from_json(fpn::load_json_file(schema_path));
  const fpn::Dataset data = fpn::load_csv(data_path, schema);
  const auto crit = fpn::criterion_from_string(criterion);
  const auto policy = fpn::fallback_policy_from_string(fallback);

  fpn::FpnModel model;
  model.schema = data.schema();
  model.criterion = crit;
  model.n_train = data.n();
  model.c = fpn::FpnModel::uniform_selection(data.schema().size());
  for (int i = 0; i < data.schema().size(); ++i) {
    const fpn::CondSpec spec = fpn::select_sources(data, i, crit);
    const double final_score = fpn::score(data, spec, crit);
    std::cout << "node " << i << " (" << data.schema().names[static_cast<std::size_t>(i)]
              << "): sources = [";
    for (std::size_t k = 0; k < spec.sources.size(); ++k)
      std::cout << (k ? ", " : "")
                << data.schema().names[static_cast<std::size_t>(spec.sources[k])];
    std::cout << "], score = " << final_score << "\n";
    model.nodes.push_back(fpn::empirical_cpt(data, spec, policy));
  }
  model.validate();
  fpn::save_model(model, out_path);
  std::cout << "wrote model to " << out_path << "\n";
  return kExitOk;
}

int cmd_sample(const std::string& model_path, const std::string& process, std::uint64_t steps,
               std::optional<std::uint64_t> burn_in, std::optional<std::uint64_t> thin,
               std::uint64_t seed, const std::string& evidence_text, const std::string& out_path,
               std::string meta_path) {
  const fpn::FpnModel model = fpn::load_model(model_path);
  fpn::FiringConfig cfg;
  cfg.process = fpn::process_from_string(process);
  cfg.steps = steps;
  cfg.burn_in = burn_in;
  cfg.thin = thin;
  cfg.seed = seed;
  cfg.evidence = parse_evidence(evidence_text, model.schema);

  const fpn::SampleRun run = fpn::run_chain(model, cfg);
  fpn::Dataset out(model.schema, [&] {
    std::vector<int> flat;
    flat.reserve(run.samples.size() * static_cast<std::size_t>(model.n_vars()));
    for (const auto& s : run.samples) flat.insert(flat.end(), s.begin(), s.end());
    return flat;
  }());
  fpn::write_csv(out, out_path);

  if (meta_path.empty()) meta_path = out_path + ".meta.json";
  fpn::json meta;
  meta["format_version"] = fpn::kFormatVersion;
  meta["process"] = process;
  meta["seed"] = run.stats.seed;
  meta["burn_in"] = run.stats.burn_in;
  meta["thin"] = run.stats.thin;
  meta["steps"] = run.stats.steps;
  meta["fallback_firings"] = run.stats.fallback_firings;
  fpn::json ev = fpn::json::object();
  for (const auto& [var, value] : cfg.evidence)
    ev[model.schema.names[static_cast<std::size_t>(var)]] = value;
  meta["evidence"] = std::move(ev);
  fpn::write_json_file(meta_path, meta);
  std::cout << "wrote " << run.samples.size() << " samples to " << out_path << "\n";
  return kExitOk;
}

int cmd_stationary(const std::string& model_path, double tol, std::uint64_t max_iter,
                   std::size_t dense_limit, const std::string& out_path) {
  const fpn::FpnModel model = fpn::load_model(model_path);
  const fpn::TransitionOp w = fpn::build_w_random(model, {}, dense_limit);
  const fpn::StationaryResult result = fpn::stationary(w, tol, max_iter);

  fpn::json j = fpn::joint_table_to_json(result.dist);
  j["convergence"] = fpn::json{{"iterations", result.iterations},
                               {"residual", result.residual},
                               {"converged", result.converged}};
  fpn::write_json_file(out_path, j);
  if (!result.converged) {
    std::cerr << "power iteration did not converge; residual = " << result.residual << "\n";
    return kExitNoConvergence;
  }
  std::cout << "wrote stationary distribution to " << out_path << " (iterations = "
            << result.iterations << ", residual = " << result.residual << ")\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& real_path, bool evidence_check, std::size_t dense_limit) {
  const fpn::FpnModel model = fpn::load_model(model_path);
  const fpn::Dataset data = fpn::load_csv(data_path, model.schema);
  const fpn::JointTable pi = fpn::empirical_joint(data, dense_limit);
  const fpn::FcdBoundReport report = fpn::fcd_bound_report(model, pi, 1e-12, 1'000'000,
                                                           dense_limit);

  fpn::json j;
  j["format_version"] = fpn::kFormatVersion;
  j["kl_pi_piprime"] = fpn::json_real(report.kl_pi_piprime);
  j["fcd"] = fpn::json_real(report.fcd);
  j["bound_rhs"] = fpn::json_real(report.bound_rhs);
  j["jensen_gap"] = fpn::json_real(report.jensen_gap);
  j["identity_residual"] = fpn::json_real(report.identity_residual);
  j["per_node"] = fpn::json_real_vector(report.per_node_kl);
  j["stationary_converged"] = report.stat.converged;

  if (!real_path.empty()) {
    const fpn::JointTable pi_real = fpn::joint_table_from_json(fpn::load_json_file(real_path));
    const auto triple = fpn::kl_triple(pi, report.stat.dist, pi_real);
    j["kl_triple"] = fpn::json{{"kl_pi_piprime", fpn::json_real(triple[0])},
                               {"kl_pi_pireal", fpn::json_real(triple[1])},
                               {"kl_piprime_pireal", fpn::json_real(triple[2])}};
  }

  if (evidence_check) {
    fpn::json checks = fpn::json::array();
    double max_residual = 0.0;
    for (int f = 0; f < model.n_vars(); ++f) {
      const int fv[] = {f};
      const fpn::PosteriorCheckReport pc = fpn::posterior_decomposition_check(model, pi, fv);
      checks.push_back(
          fpn::json{{"evidence", model.schema.names[static_cast<std::size_t>(f)]},
                    {"max_residual", fpn::json_real(pc.max_residual)}});
      max_residual = std::max(max_residual, pc.max_residual);
    }
    j["posterior_check"] = fpn::json{{"max_residual", fpn::json_real(max_residual)},
                                     {"per_evidence", std::move(checks)}};
  }

  std::cout << j.dump(2) << "\n";
  if (!report.stat.converged) {
    std::cerr << "power iteration did not converge; residual = " << report.stat.residual
              << "\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_export_dot(const std::string& model_path, const std::string& out_path) {
  const fpn::FpnModel model = fpn::load_model(model_path);
  fpn::atomic_write_text(out_path, dot_from_model(model));
  std::cout << "wrote graph to " << out_path << "\n";
  return kExitOk;
}

int cmd_experiment(const std::string& kind, double coupling, const std::string& seeds_text,
                   const std::string& n_list_text, const std::string& criterion,
                   const std::string& fallback, const std::string& out_path,
                   const std::string& dot_dir) {
  const auto seeds = parse_u64_list(seeds_text);
  const auto n_list = parse_size_list(n_list_text);
  const auto crit = fpn::criterion_from_string(criterion);
  const auto policy = fpn::fallback_policy_from_string(fallback);

  fpn::ModelSink sink;
  if (!dot_dir.empty()) {
    std::filesystem::create_directories(dot_dir);
    sink = [&](std::uint64_t seed, std::size_t n, const fpn::FpnModel& model) {
      const auto path = std::filesystem::path(dot_dir) /
                        ("graph_seed" + std::to_string(seed) + "_n" + std::to_string(n) + ".dot");
      fpn::atomic_write_text(path, dot_from_model(model));
    };
  }

  std::vector<fpn::json> records;
  if (kind == "3x3")
    records = fpn::experiment_3x3(coupling, seeds, n_list, crit, policy, sink);
  else if (kind == "5x5")
    records = fpn::experiment_5x5(coupling, seeds, n_list, crit, policy, sink);
  else
    throw fpn::InputError("unknown experiment kind: " + kind);

  std::string lines;
  for (const auto& rec : records) lines += rec.dump() + "\n";
  fpn::atomic_write_text(out_path, lines);
  std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"firing process networks: structure/parameter learning, sampling, exact analysis"};
  app.require_subcommand(1);

  // gen-ising
  auto* gen = app.add_subcommand("gen-ising", "draw i.i.d. samples from a grid Ising model");
  int rows = 3, cols = 3;
  double coupling = 0.4, field = 0.0;
  std::uint64_t gen_n = 1024, gen_seed = 0;
  std::string gen_out;
  gen->add_option("--rows", rows, "grid rows")->required();
  gen->add_option("--cols", cols, "grid columns")->required();
  gen->add_option("--coupling", coupling, "pairwise coupling strength");
  gen->add_option("--field", field, "uniform external field");
  gen->add_option("--n", gen_n, "number of samples")->required();
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("-o,--out", gen_out, "output CSV path")->required();

  // learn
  auto* learn = app.add_subcommand("learn", "learn a model from a CSV dataset");
  std::string learn_data, learn_schema, learn_crit = "mdl", learn_fallback = "marginal",
              learn_out;
  learn->add_option("--data", learn_data, "input CSV path")->required();
  learn->add_option("--schema", learn_schema, "schema JSON path (optional)");
  learn->add_option("--criterion", learn_crit, "mdl|aic")
      ->check(CLI::IsMember({"mdl", "aic"}));
  learn->add_option("--fallback", learn_fallback, "marginal|uniform")
      ->check(CLI::IsMember({"marginal", "uniform"}));
  learn->add_option("-o,--out", learn_out, "output model JSON path")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw samples from a learned model");
  std::string sample_model, sample_process = "random", sample_evidence, sample_out,
              sample_meta;
  std::uint64_t sample_steps = 0, sample_seed = 0;
  std::optional<std::uint64_t> sample_burn_in, sample_thin;
  sample->add_option("--model", sample_model, "model JSON path")->required();
  sample->add_option("--process", sample_process, "random|sequential")
      ->check(CLI::IsMember({"random", "sequential"}));
  sample->add_option("--steps", sample_steps, "number of kept samples")->required();
  sample->add_option("--burn-in", sample_burn_in, "burn-in firings (default 1000*n)");
  sample->add_option("--thin", sample_thin, "firings between kept samples (default n)");
  sample->add_option("--seed", sample_seed, "random seed");
  sample->add_option("--evidence", sample_evidence, "clamped variables, e.g. \"a=1,b=0\"");
  sample->add_option("-o,--out", sample_out, "output CSV path")->required();
  sample->add_option("--meta", sample_meta, "metadata JSON path (default <out>.meta.json)");

  // stationary
  auto* stat = app.add_subcommand("stationary", "exact stationary distribution of a model");
  std::string stat_model, stat_out;
  double stat_tol = 1e-12;
  std::uint64_t stat_max_iter = 1'000'000;
  std::size_t stat_limit = fpn::kDenseStateLimit;
  stat->add_option("--model", stat_model, "model JSON path")->required();
  stat->add_option("--tol", stat_tol, "L1 convergence tolerance");
  stat->add_option("--max-iter", stat_max_iter, "power iteration cap");
  stat->add_option("--dense-limit", stat_limit, "max dense state-space size");
  stat->add_option("-o,--out", stat_out, "output distribution JSON path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "divergence diagnostics of a model against data");
  std::string eval_model, eval_data, eval_real;
  bool eval_evidence_check = false;
  std::size_t eval_limit = fpn::kDenseStateLimit;
  eval->add_option("--model", eval_model, "model JSON path")->required();
  eval->add_option("--data", eval_data, "training/evaluation CSV path")->required();
  eval->add_option("--real", eval_real, "ground-truth distribution JSON (optional)");
  eval->add_flag("--evidence-check", eval_evidence_check,
                 "verify the posterior decomposition for every single-variable evidence set");
  eval->add_option("--dense-limit", eval_limit, "max dense state-space size");

  // export-dot
  auto* dot = app.add_subcommand("export-dot", "write the model graph in DOT format");
  std::string dot_model, dot_out;
  dot->add_option("--model", dot_model, "model JSON path")->required();
  dot->add_option("-o,--out", dot_out, "output DOT path")->required();

  // experiment
  auto* exp = app.add_subcommand("experiment", "grid-recovery experiment sweeps");
  std::string exp_kind = "3x3", exp_seeds = "0,1,2,3", exp_n_list, exp_crit = "mdl",
              exp_fallback = "marginal", exp_out, exp_dot_dir;
  double exp_coupling = 0.4;
  exp->add_option("--kind", exp_kind, "3x3|5x5")->check(CLI::IsMember({"3x3", "5x5"}));
  exp->add_option("--coupling", exp_coupling, "pairwise coupling strength");
  exp->add_option("--seeds", exp_seeds, "comma-separated seeds");
  exp->add_option("--n-list", exp_n_list, "comma-separated sample counts");
  exp->add_option("--criterion", exp_crit, "mdl|aic")->check(CLI::IsMember({"mdl", "aic"}));
  exp->add_option("--fallback", exp_fallback, "marginal|uniform")
      ->check(CLI::IsMember({"marginal", "uniform"}));
  exp->add_option("-o,--out", exp_out, "output JSONL path")->required();
  exp->add_option("--dot-dir", exp_dot_dir, "directory for per-run DOT files (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion")
      return app.exit(e);
    app.exit(e);
    return kExitInput;
  }

  try {
    if (gen->parsed())
      return cmd_gen_ising(rows, cols, coupling, field, gen_n, gen_seed, gen_out);
    if (learn->parsed())
      return cmd_learn(learn_data, learn_schema, learn_crit, learn_fallback, learn_out);
    if (sample->parsed())
      return cmd_sample(sample_model, sample_process, sample_steps, sample_burn_in, sample_thin,
                        sample_seed, sample_evidence, sample_out, sample_meta);
    if (stat->parsed())
      return cmd_stationary(stat_model, stat_tol, stat_max_iter, stat_limit, stat_out);
    if (eval->parsed())
      return cmd_eval(eval_model, eval_data, eval_real, eval_evidence_check, eval_limit);
    if (dot->parsed()) return cmd_export_dot(dot_model, dot_out);
    if (exp->parsed())
      return cmd_experiment(exp_kind, exp_coupling, exp_seeds,
                            exp_n_list.empty()
                                ? (exp_kind == "3x3" ? "8192" : "256,1024,4096,16384")
                                : exp_n_list,
                            exp_crit, exp_fallback, exp_out, exp_dot_dir);
  } catch (const fpn::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const fpn::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
