#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "yamabe/error.hpp"
#include "yamabe/experiment.hpp"

using namespace yamabe;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("yamabe_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmallVerify = R"(
[experiment]
kind = verify-model
[cone]
n = 3
d = 1
h = 1
[mesh]
n_radial = 8
n_angular = 8
omega0 = 0.1
levels = 3
[coefficients]
mode = model
)";

}  // namespace

TEST_CASE("shipped configs parse") {
  for (const char* name : {"curvature", "solve", "verify_model", "dichotomy", "eigen"}) {
    const auto cfg = load_config(std::string(YAMABE_SOURCE_DIR) + "/configs/" + name + ".ini");
    CHECK(cfg.kind_set);
  }
  const auto d = load_config(std::string(YAMABE_SOURCE_DIR) + "/configs/dichotomy.ini");
  REQUIRE(d.dichotomy.cases.size() == 4);
  CHECK(d.dichotomy.cases[3].n == 4);
  CHECK(d.dichotomy.cases[3].d == 1);
  CHECK(d.dichotomy.cases[3].truncations == 18);
  CHECK(d.mesh.spacing == AngularSpacing::kGeometric);
  CHECK(code_of([] { load_config("/nonexistent/file.ini"); }) == ErrorCode::kConfig);
}

TEST_CASE("parsed values and echo") {
  const auto c = parse_config_text(kSmallVerify);
  CHECK(c.kind == ExperimentKind::kVerifyModel);
  CHECK(c.cone.n == 3);
  CHECK(c.mesh.n_radial == 8);
  CHECK(c.mesh.omega0 == 0.1);
  CHECK(c.coefficients.mode == CoefficientMode::kModel);
  REQUIRE(!c.echo.empty());
  CHECK(c.echo.front().first == "experiment.kind");
  CHECK(c.echo.front().second == "verify-model");
  // the default curvature table holds 20 cases
  CHECK(c.curvature.cases.size() == 20);
}

TEST_CASE("unknown keys, sections and bad values are rejected") {
  auto bad = [](const std::string& text) { return code_of([&] { parse_config_text(text); }); };
  CHECK(bad("[experiment]\nkind = solve\nbogus = 1\n") == ErrorCode::kConfig);
  CHECK(bad("[nonsense]\nx = 1\n") == ErrorCode::kConfig);
  CHECK(bad("x = 1\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment]\nkind = flow\n") == ErrorCode::kConfig);
  CHECK(bad("[cone]\nn = 3.5\n") == ErrorCode::kConfig);
  CHECK(bad("[cone]\nn = 4\nd = 4\n") == ErrorCode::kConfig);
  CHECK(bad("[cone]\nh = -1\n") == ErrorCode::kConfig);
  CHECK(bad("[mesh]\nn_radial = 3\n") == ErrorCode::kConfig);
  CHECK(bad("[mesh]\nomega0 = 1.0\n") == ErrorCode::kConfig);
  CHECK(bad("[mesh]\nspacing = random\n") == ErrorCode::kConfig);
  CHECK(bad("[solver]\ntol = 0\n") == ErrorCode::kConfig);
  CHECK(bad("[coefficients]\nc0 = -1\n") == ErrorCode::kConfig);
  CHECK(bad("[dichotomy]\ncases = 4:5\n") == ErrorCode::kConfig);
  CHECK(bad("[exhaustion]\nenabled = maybe\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment\nkind = solve\n") == ErrorCode::kConfig);
}

TEST_CASE("kind-specific rules") {
  auto bad = [](const std::string& text) { return code_of([&] { parse_config_text(text); }); };
  // model coefficients need c0* > 0
  CHECK(bad("[experiment]\nkind = solve\n[cone]\nn = 4\nd = 1\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment]\nkind = verify-model\n[coefficients]\nmode = constant\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment]\nkind = dichotomy\n[dichotomy]\ncases = 3:1\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment]\nkind = dichotomy\n[coefficients]\nmode = constant\n") == ErrorCode::kConfig);
  CHECK(bad("[experiment]\nkind = eigen\n") == ErrorCode::kConfig);
  CHECK_NOTHROW(parse_config_text("[experiment]\nkind = eigen\n[eigen]\ndenominator = volume+boundary\n"));
}

TEST_CASE("dichotomy data range grows with the truncation depth") {
  ExhaustionSettings e;
  CHECK(dichotomy_data_sequence({3, 1, 1}, e).size() == 17);
  CHECK(dichotomy_data_sequence({3, 1, 14}, e).back() == std::ldexp(1.0, 16 + 7));
  CHECK(dichotomy_data_sequence({4, 1, 18}, e).back() == std::ldexp(1.0, 16 + 17));
  CHECK(dichotomy_data_sequence({6, 1, 40}, e).back() == std::ldexp(1.0, 38));
  e.data_doublings = 5;
  CHECK(dichotomy_data_sequence({4, 1, 18}, e).back() == 32.0);
}

TEST_CASE("curvature run reproduces the closed-form table") {
  auto cfg = parse_config_text("[experiment]\nkind = curvature\n[curvature]\ncases = 3:1:1, 4:2:1\n");
  const fs::path dir = scratch("curvature");
  RunOptions o;
  o.out_dir = dir.string();
  const auto r = run_experiment(cfg, o);
  CHECK(r.exit_code == 0);
  const std::string csv = read_file(dir / "curvature.csv");
  std::istringstream in(csv);
  std::string header, row1;
  std::getline(in, header);
  std::getline(in, row1);
  CHECK(header.rfind("n,d,h,theta,product_R,model_H", 0) == 0);
  CHECK(row1.rfind("3,1,1,0.7853981634,-2,-0.7071067812", 0) == 0);
  const auto s = nlohmann::json::parse(read_file(dir / "summary.json"));
  CHECK(s["kind"] == "curvature");
  CHECK(s["curvature"]["conformal_cross_check_error"].get<double>() <= 1e-12);
  CHECK(s["status"]["exit_code"] == 0);
}

TEST_CASE("verify-model run: error table with order near 2") {
  const auto cfg = parse_config_text(kSmallVerify);
  RunOptions o;
  o.write_files = false;
  const auto r = run_experiment(cfg, o);
  REQUIRE(r.exit_code == 0);
  CHECK(r.files.empty());
  const auto& orders = r.summary["verify_model"]["observed_orders"];
  REQUIRE(orders.size() == 2);
  for (const auto& v : orders) CHECK(v.get<double>() == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("outputs are bit-identical across runs") {
  auto cfg = parse_config_text(kSmallVerify);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunOptions o;
  o.out_dir = a.string();
  REQUIRE(run_experiment(cfg, o).exit_code == 0);
  o.out_dir = b.string();
  REQUIRE(run_experiment(cfg, o).exit_code == 0);
  for (const char* f : {"convergence.csv", "convergence.svg"}) CHECK(read_file(a / f) == read_file(b / f));
}

TEST_CASE("eigen and solve runs") {
  auto eig = parse_config_text(
      "[experiment]\nkind = eigen\n[mesh]\nn_radial = 8\nn_angular = 8\n[eigen]\ndenominator = volume\n");
  RunOptions o;
  o.write_files = false;
  const auto re = run_experiment(eig, o);
  CHECK(re.exit_code == 0);
  CHECK(re.summary["eigen"]["value"].get<double>() > 0.0);
  CHECK(re.summary["eigen"]["min_free_component"].get<double>() > 0.0);

  auto sol = parse_config_text(
      "[experiment]\nkind = solve\n[cone]\nn = 4\nd = 2\n[mesh]\nn_radial = 12\nn_angular = 12\n"
      "[coefficients]\nmode = target\ntarget_R = -6\ntarget_H = -1\ndata = constant\ndata_value = 2\n");
  const auto rs = run_experiment(sol, o);
  CHECK(rs.exit_code == 0);
  CHECK(rs.summary["solve"]["report"]["converged"] == true);
  CHECK(rs.summary["solve"]["mmatrix_certificate"]["ok"] == true);
}

TEST_CASE("solver failures map to exit code 2") {
  auto cfg = parse_config_text(
      "[experiment]\nkind = solve\n[mesh]\nn_radial = 8\nn_angular = 8\n[solver]\nmax_iter = 1\ntol = 1e-14\n");
  RunOptions o;
  o.write_files = false;
  const auto r = run_experiment(cfg, o);
  CHECK(r.exit_code == 2);
  CHECK(r.message.find("NON_CONVERGENCE") != std::string::npos);
}
