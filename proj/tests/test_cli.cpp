#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fpn/fpn.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = FPN_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fpn_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("gen-ising writes deterministic CSV", "[cli]") {
  TempDir dir;
  const auto a = dir / "a.csv";
  const auto b = dir / "b.csv";
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.4 --n 100 --seed 3 -o " + q(a)) == 0);
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.4 --n 100 --seed 3 -o " + q(b)) == 0);
  REQUIRE(slurp(a) == slurp(b));
  REQUIRE(slurp(a).substr(0, 19) == "s0_0,s0_1,s1_0,s1_1");

  SECTION("single site") {
    const auto c = dir / "c.csv";
    REQUIRE(run("gen-ising --rows 1 --cols 1 --n 5 --seed 1 -o " + q(c)) == 0);
    const fpn::Dataset d = fpn::load_csv(c, fpn::Schema({"s0_0"}, {2}));
    REQUIRE(d.n() == 5);
  }
  SECTION("zero samples give a header-only file") {
    const auto c = dir / "empty.csv";
    REQUIRE(run("gen-ising --rows 2 --cols 2 --n 0 --seed 1 -o " + q(c)) == 0);
    REQUIRE(slurp(c) == "s0_0,s0_1,s1_0,s1_1\n");
  }
  SECTION("invalid dimensions exit 2") {
    REQUIRE(run("gen-ising --rows 0 --cols 2 --n 5 --seed 1 -o " + q(dir / "x.csv")) == 2);
  }
}

TEST_CASE("learn produces canonical model files", "[cli]") {
  TempDir dir;
  const auto data = dir / "d.csv";
  {
    // two perfectly correlated binary columns
    std::ofstream out(data);
    out << "a,b\n";
    std::mt19937_64 rng(1);
    for (int r = 0; r < 400; ++r) {
      const int v = static_cast<int>(rng() % 2);
      out << v << "," << v << "\n";
    }
  }
  const auto m1 = dir / "m1.json";
  const auto m2 = dir / "m2.json";
  REQUIRE(run("learn --data " + q(data) + " -o " + q(m1)) == 0);
  REQUIRE(run("learn --data " + q(data) + " -o " + q(m2)) == 0);
  REQUIRE(slurp(m1) == slurp(m2));

  const fpn::FpnModel model = fpn::load_model(m1);
  REQUIRE(model.sources(0) == std::vector<int>{1});
  REQUIRE(model.sources(1) == std::vector<int>{0});
  REQUIRE(model.criterion == fpn::Criterion::mdl);

  SECTION("aic selects a superset of mdl's sources at small N") {
    const auto ma = dir / "ma.json";
    REQUIRE(run("learn --data " + q(data) + " --criterion aic -o " + q(ma)) == 0);
    const fpn::FpnModel aic = fpn::load_model(ma);
    for (int i = 0; i < 2; ++i)
      for (int s : model.sources(i))
        REQUIRE(std::find(aic.sources(i).begin(), aic.sources(i).end(), s) !=
                aic.sources(i).end());
  }
  SECTION("missing data file exits 2") {
    REQUIRE(run("learn --data " + q(dir / "nope.csv") + " -o " + q(dir / "m.json")) == 2);
  }
  SECTION("a schema file widens the declared cardinalities") {
    const auto spath = dir / "schema.json";
    fpn::write_json_file(spath, fpn::json{{"names", {"a", "b"}}, {"cards", {3, 2}}});
    const auto ms = dir / "ms.json";
    REQUIRE(run("learn --data " + q(data) + " --schema " + q(spath) + " -o " + q(ms)) == 0);
    REQUIRE(fpn::load_model(ms).schema.cards == std::vector<int>{3, 2});
  }
}

TEST_CASE("sample writes CSV plus metadata deterministically", "[cli]") {
  TempDir dir;
  const auto data = dir / "d.csv";
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.4 --n 500 --seed 5 -o " + q(data)) == 0);
  const auto model = dir / "m.json";
  REQUIRE(run("learn --data " + q(data) + " -o " + q(model)) == 0);

  const auto s1 = dir / "s1.csv";
  const auto s2 = dir / "s2.csv";
  REQUIRE(run("sample --model " + q(model) + " --steps 50 --seed 4 -o " + q(s1)) == 0);
  REQUIRE(run("sample --model " + q(model) + " --steps 50 --seed 4 -o " + q(s2)) == 0);
  REQUIRE(slurp(s1) == slurp(s2));
  REQUIRE(slurp(fs::path(s1.string() + ".meta.json")) ==
          slurp(fs::path(s2.string() + ".meta.json")));

  const fpn::Dataset samples = fpn::load_csv(s1, fpn::load_model(model).schema);
  REQUIRE(samples.n() == 50);

  SECTION("zero steps give a header-only file") {
    const auto s0 = dir / "s0.csv";
    REQUIRE(run("sample --model " + q(model) + " --steps 0 --seed 4 -o " + q(s0)) == 0);
    REQUIRE(slurp(s0) == "s0_0,s0_1,s1_0,s1_1\n");
  }
  SECTION("evidence clamps the named variable") {
    const auto se = dir / "se.csv";
    REQUIRE(run("sample --model " + q(model) + " --steps 40 --seed 4 --evidence s0_1=1 -o " +
                q(se)) == 0);
    const fpn::Dataset d = fpn::load_csv(se, fpn::load_model(model).schema);
    for (std::size_t r = 0; r < d.n(); ++r) REQUIRE(d.value(r, 1) == 1);
  }
  SECTION("evidence fixing everything exits 2") {
    REQUIRE(run("sample --model " + q(model) +
                " --steps 5 --evidence s0_0=0,s0_1=0,s1_0=0,s1_1=0 -o " + q(dir / "x.csv")) == 2);
  }
  SECTION("unknown evidence variable exits 2") {
    REQUIRE(run("sample --model " + q(model) + " --steps 5 --evidence zz=0 -o " +
                q(dir / "x.csv")) == 2);
  }
}

TEST_CASE("stationary distribution output", "[cli]") {
  TempDir dir;
  const auto data = dir / "d.csv";
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.3 --n 800 --seed 2 -o " + q(data)) == 0);
  const auto model = dir / "m.json";
  REQUIRE(run("learn --data " + q(data) + " -o " + q(model)) == 0);

  const auto out = dir / "pi.json";
  REQUIRE(run("stationary --model " + q(model) + " -o " + q(out)) == 0);
  const auto j = fpn::load_json_file(out);
  REQUIRE(j.at("format_version") == 1);
  REQUIRE(j.at("convergence").at("converged") == true);
  const fpn::JointTable dist = fpn::joint_table_from_json(j);
  REQUIRE(dist.space().total_states() == 16);

  SECTION("edgeless models give the product of marginals") {
    fpn::FpnModel m = fpn::load_model(model);
    const fpn::Dataset d = fpn::load_csv(data, m.schema);
    const auto pi = fpn::empirical_joint(d);
    fpn::FpnModel edgeless;
    edgeless.schema = m.schema;
    edgeless.criterion = m.criterion;
    edgeless.n_train = m.n_train;
    edgeless.c = m.c;
    for (int i = 0; i < m.n_vars(); ++i)
      edgeless.nodes.push_back(
          fpn::empirical_cpt(d, fpn::CondSpec(i, {}), fpn::FallbackPolicy::marginal));
    const auto epath = dir / "edgeless.json";
    fpn::save_model(edgeless, epath);
    const auto spath = dir / "pi_edgeless.json";
    REQUIRE(run("stationary --model " + q(epath) + " -o " + q(spath)) == 0);
    const auto got = fpn::joint_table_from_json(fpn::load_json_file(spath));
    std::vector<double> expected(16, 1.0);
    const fpn::StateSpace& sp = got.space();
    for (std::size_t x = 0; x < 16; ++x)
      for (int v = 0; v < 4; ++v) {
        const auto mv = fpn::marginal(pi, std::vector<int>{v});
        expected[x] *= mv[static_cast<std::size_t>(sp.coord(x, v))];
      }
    REQUIRE(fpn::l1_distance(got, fpn::JointTable(sp, std::move(expected))) < 1e-9);
  }

  SECTION("complete-graph models reproduce the training distribution") {
    fpn::FpnModel m = fpn::load_model(model);
    const fpn::Dataset d = fpn::load_csv(data, m.schema);
    std::vector<fpn::CondSpec> specs;
    for (int i = 0; i < 4; ++i) specs.push_back(fpn::CondSpec::full(i, 4));
    const fpn::FpnModel complete =
        fpn::learn_with_specs(d, specs, fpn::Criterion::mdl, fpn::FallbackPolicy::marginal);
    const auto cpath = dir / "complete.json";
    fpn::save_model(complete, cpath);
    const auto spath = dir / "pi_complete.json";
    REQUIRE(run("stationary --model " + q(cpath) + " --tol 1e-13 -o " + q(spath)) == 0);
    const auto got = fpn::joint_table_from_json(fpn::load_json_file(spath));
    REQUIRE(fpn::l1_distance(got, fpn::empirical_joint(d)) < 1e-9);
  }

  SECTION("an unreachable tolerance exits 4 and still reports the residual") {
    REQUIRE(run("stationary --model " + q(model) + " --tol 1e-30 --max-iter 5 -o " +
                q(dir / "nc.json")) == 4);
    const auto nc = fpn::load_json_file(dir / "nc.json");
    REQUIRE(nc.at("convergence").at("converged") == false);
  }

  SECTION("a 26-variable model is over the dense limit and exits 3") {
    std::vector<std::string> names;
    for (int j26 = 0; j26 < 26; ++j26) names.push_back("v" + std::to_string(j26));
    fpn::FpnModel wide;
    wide.schema = fpn::Schema(names, std::vector<int>(26, 2));
    wide.criterion = fpn::Criterion::mdl;
    wide.n_train = 1;
    wide.c = fpn::FpnModel::uniform_selection(26);
    for (int i = 0; i < 26; ++i) {
      fpn::Cpt cpt;
      cpt.spec = fpn::CondSpec(i, {});
      cpt.rows[{}] = {0.5, 0.5};
      cpt.fallback = {0.5, 0.5};
      wide.nodes.push_back(std::move(cpt));
    }
    const auto wpath = dir / "wide.json";
    fpn::save_model(wide, wpath);
    REQUIRE(run("stationary --model " + q(wpath) + " -o " + q(dir / "out.json")) == 3);
  }
}

TEST_CASE("eval reports the divergence budget", "[cli]") {
  TempDir dir;
  const auto data = dir / "d.csv";
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.4 --n 600 --seed 9 -o " + q(data)) == 0);
  const auto model = dir / "m.json";
  REQUIRE(run("learn --data " + q(data) + " -o " + q(model)) == 0);
  const auto real = dir / "real.json";
  fpn::write_json_file(real,
                       fpn::joint_table_to_json(fpn::ising_exact(fpn::IsingSpec{2, 2, 0.4, {}})));

  const std::string cmd = kCli + " eval --model " + q(model) + " --data " + q(data) +
                          " --real " + q(real) + " --evidence-check > " +
                          q(dir / "eval.json") + " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const auto j = fpn::load_json_file(dir / "eval.json");
  REQUIRE(j.at("fcd").is_number());
  REQUIRE(j.at("bound_rhs").get<double>() + 1e-12 >= j.at("fcd").get<double>());
  REQUIRE(j.at("identity_residual").get<double>() <= 1e-8);
  REQUIRE(j.at("per_node").size() == 4);
  REQUIRE(j.at("kl_triple").contains("kl_piprime_pireal"));
  REQUIRE(j.at("posterior_check").at("max_residual").get<double>() <= 1e-9);
}

TEST_CASE("export-dot emits a parseable deterministic graph", "[cli]") {
  TempDir dir;
  const auto data = dir / "d.csv";
  REQUIRE(run("gen-ising --rows 2 --cols 2 --coupling 0.5 --n 1500 --seed 6 -o " + q(data)) == 0);
  const auto model = dir / "m.json";
  REQUIRE(run("learn --data " + q(data) + " -o " + q(model)) == 0);
  const auto dot = dir / "g.dot";
  REQUIRE(run("export-dot --model " + q(model) + " -o " + q(dot)) == 0);

  const std::string text = slurp(dot);
  REQUIRE(text.rfind("digraph", 0) == 0);
  // node count round-trips through a light parse
  int labels = 0, arrow = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("[label=") != std::string::npos) ++labels;
    if (line.find("->") != std::string::npos) ++arrow;
  }
  const fpn::FpnModel m = fpn::load_model(model);
  REQUIRE(labels == m.n_vars());
  int arcs = 0;
  for (int i = 0; i < m.n_vars(); ++i) arcs += static_cast<int>(m.sources(i).size());
  REQUIRE(arrow == arcs);

  SECTION("edgeless model: nodes only") {
    fpn::FpnModel edgeless = m;
    for (auto& node : edgeless.nodes) {
      node.spec = fpn::CondSpec(node.spec.target, {});
      node.rows.clear();
      node.rows[{}] = node.fallback;
    }
    const auto epath = dir / "e.json";
    fpn::save_model(edgeless, epath);
    const auto edot = dir / "e.dot";
    REQUIRE(run("export-dot --model " + q(epath) + " -o " + q(edot)) == 0);
    REQUIRE(slurp(edot).find("->") == std::string::npos);
  }
}

TEST_CASE("experiment command writes JSONL records", "[cli]") {
  TempDir dir;
  const auto out = dir / "report.jsonl";
  const auto dots = dir / "dots";
  REQUIRE(run("experiment --kind 3x3 --coupling 0.4 --seeds 1 --n-list 256 -o " + q(out) +
              " --dot-dir " + q(dots)) == 0);
  const std::string text = slurp(out);
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 1);
  const auto rec = fpn::json::parse(text.substr(0, text.find('\n')));
  REQUIRE(rec.at("n") == 256);
  REQUIRE(rec.contains("recall"));
  REQUIRE(fs::exists(dots / "graph_seed1_n256.dot"));
}

TEST_CASE("unknown flags are rejected", "[cli]") {
  REQUIRE(run("learn --data x.csv --bogus -o m.json") == 2);
  REQUIRE(run("frobnicate") == 2);
}
