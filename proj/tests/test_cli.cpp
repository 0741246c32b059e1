#include "mthin/cli.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mthin;
using namespace mthin::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mthin_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kBase = R"({
  "processes": [{"name": "s1", "family": "isotropic_stable", "alpha": 1.0, "dim": 2},
                {"name": "local", "family": "isotropic_stable", "alpha": 1.0, "dim": 2, "global": null}],
  "domains": [{"name": "H", "type": "half_space", "dim": 2}],
  "sets": [{"name": "cusp", "type": "power_cusp", "p": 0.5},
           {"name": "nothing", "type": "empty"}],
  "jobs": []
})";

// two processes are declared, so jobs default to "s1" here explicitly
Json base_with(Json jobs) {
  Json j = Json::parse(kBase);
  for (auto& job : jobs)
    if (!job.contains("process")) job["process"] = "s1";
  j["jobs"] = std::move(jobs);
  return j;
}

int error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.exit_code();
  }
  return 0;
}

}  // namespace

TEST_CASE("config defaults are filled in") {
  const RunConfig cfg = parse_config(base_with(Json::array({{{"name", "g"}, {"command", "criterion"}, {"method", "graph"}, {"set", "cusp"}}})));
  REQUIRE(cfg.jobs.size() == 1);
  const Json& job = cfg.jobs[0];
  CHECK(job["domain"] == "H");  // the only declared domain
  CHECK(job["mode"] == "finite");
  CHECK(job["seed"] == 1);
  CHECK(job["n_range"] == Json::array({3, 24}));
}

TEST_CASE("config errors map to exit code 2") {
  TempDir tmp;
  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << "{\"jobs\": [ {\"name\": 1 ";
  CHECK(error_code([&] { load_config(bad.string()); }) == 2);
  CHECK(error_code([&] { load_config((tmp.path / "missing.json").string()); }) == 2);

  const Json dup = base_with(Json::array({{{"name", "a"}, {"command", "criterion"}, {"method", "graph"}, {"set", "cusp"}},
                                          {{"name", "a"}, {"command", "criterion"}, {"method", "graph"}, {"set", "cusp"}}}));
  CHECK(error_code([&] { parse_config(dup); }) == 2);

  const Json unknown = base_with(Json::array({{{"name", "a"}, {"command", "criterion"}, {"method", "graph"}, {"set", "nope"}}}));
  CHECK(error_code([&] { parse_config(unknown); }) == 2);

  const Json no_method = base_with(Json::array({{{"name", "a"}, {"command", "criterion"}, {"set", "cusp"}}}));
  CHECK(error_code([&] { parse_config(no_method); }) == 2);

  Json ambiguous = Json::parse(kBase);
  ambiguous["jobs"] = Json::array({{{"name", "a"}, {"command", "criterion"}, {"method", "graph"}, {"set", "cusp"}}});
  CHECK(error_code([&] { parse_config(ambiguous); }) == 2);

  const Json bad_cmd = base_with(Json::array({{{"name", "a"}, {"command", "plot"}}}));
  CHECK(error_code([&] { parse_config(bad_cmd); }) == 2);
}

TEST_CASE("declarations build library objects") {
  const auto P = make_profile(Json::parse(R"({"name": "m", "family": "stable_mixture", "dim": 3,
      "components": [{"alpha": 0.5, "weight": 1}, {"alpha": 1.5, "weight": 2}]})"));
  CHECK(P.dimension() == 3);
  CHECK(psi(P, 4.0) == doctest::Approx(2.0 + 16.0));
  const auto D = make_domain(Json::parse(R"({"name": "g", "type": "graph", "dim": 2, "h": {"type": "sinusoid", "amplitude": 0.3}})"));
  CHECK(D.kind() == DomainKind::Graph);
  CHECK(error_code([] { make_profile(Json::parse(R"({"name": "x", "family": "stable", "alpha": 1})")); }) == 2);
}

TEST_CASE("jobs run and write reports") {
  TempDir tmp;
  const Json root = base_with(Json::array({
      {{"name", "dec"}, {"command", "decompose"}, {"window", {{"lo", {0, 0}}, {"hi", {1, 1}}}}, {"side_min", 0.125}},
      {{"name", "dec_empty"}, {"command", "decompose"}, {"window", {{"lo", {0, 0}}, {"hi", {0, 1}}}}},
      {{"name", "g"}, {"command", "criterion"}, {"method", "graph"}, {"mode", "infinity"}, {"set", "cusp"}},
      {{"name", "i"}, {"command", "criterion"}, {"method", "integral"}, {"mode", "infinity"}, {"set", "cusp"}},
      {{"name", "h2"}, {"command", "criterion"}, {"method", "integral"}, {"mode", "infinity"}, {"set", "cusp"}, {"process", "local"}},
      {{"name", "e"}, {"command", "criterion"}, {"method", "integral"}, {"mode", "infinity"}, {"set", "nothing"}, {"n_range", {1, 10}}},
  }));
  const RunConfig cfg = parse_config(root);
  RunOptions opt;
  opt.output_dir = tmp.path.string();
  opt.timestamp = false;
  const auto out = run_jobs(cfg, opt);
  REQUIRE(out.size() == 6);

  CHECK(out[0].exit_code == 0);
  const std::string csv = slurp(tmp.path / "dec.csv");
  CHECK(csv.rfind("index,exponent,side,dist_boundary,diam,center_0,center_1,lattice_0,lattice_1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') > 5);

  CHECK(out[1].exit_code == 0);
  const std::string empty_csv = slurp(tmp.path / "dec_empty.csv");
  CHECK(std::count(empty_csv.begin(), empty_csv.end(), '\n') == 1);

  CHECK(out[2].report["result"]["verdict"] == "Convergent");
  CHECK(out[3].report["result"]["verdict"] == "Convergent");
  CHECK(out[4].exit_code == 3);
  CHECK(out[5].report["result"]["verdict"] == "Convergent");
  CHECK(exit_code(out) == 3);

  const Json report = Json::parse(slurp(tmp.path / "i.json"));
  CHECK_FALSE(report.contains("generated_at"));
  CHECK(report["config"]["process"]["alpha"] == 1.0);
  CHECK(report["config"]["job"]["n_range"] == Json::array({1, 20}));
  CHECK(report["hypotheses"]["weak_scaling_global"] == true);
  const std::string terms = slurp(tmp.path / "i.csv");
  CHECK(terms.rfind("index,term,partial_sum\n", 0) == 0);

  const auto lines = consistency_lines(out);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].find("agree") != std::string::npos);
  CHECK(lines[0].find("disagree") == std::string::npos);
  for (const auto& entry : fs::directory_iterator(tmp.path)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("job and command filters") {
  TempDir tmp;
  const RunConfig cfg = parse_config(base_with(Json::array({
      {{"name", "g"}, {"command", "criterion"}, {"method", "graph"}, {"mode", "infinity"}, {"set", "cusp"}},
      {{"name", "s"}, {"command", "scaling_check"}},
  })));
  RunOptions opt;
  opt.output_dir = tmp.path.string();
  opt.commands = {"scaling_check"};
  const auto a = run_jobs(cfg, opt);
  REQUIRE(a.size() == 1);
  CHECK(a[0].name == "s");
  CHECK(a[0].report.contains("generated_at"));
  opt.commands.clear();
  opt.job = "g";
  const auto b = run_jobs(cfg, opt);
  REQUIRE(b.size() == 1);
  CHECK(b[0].name == "g");
}

TEST_CASE("timestamp stripping and atomic writes") {
  TempDir tmp;
  const std::string a = R"({"job": "x", "generated_at": "2026-01-01T00:00:00Z", "result": {"v": 1}})";
  const std::string b = R"({"job": "x", "generated_at": "2027-05-05T12:00:00Z", "result": {"v": 1}})";
  CHECK(strip_timestamp(a) == strip_timestamp(b));
  CHECK(strip_timestamp(a).find("generated_at") == std::string::npos);

  const fs::path p = tmp.path / "sub" / "out.txt";
  fs::create_directories(p.parent_path());
  write_atomic(p.string(), "first");
  write_atomic(p.string(), "second");
  CHECK(slurp(p) == "second");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}
