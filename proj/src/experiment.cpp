#include "yamabe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "yamabe/error.hpp"
#include "yamabe/plot.hpp"

namespace yamabe {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::kCurvature: return "curvature";
    case ExperimentKind::kSolve: return "solve";
    case ExperimentKind::kVerifyModel: return "verify-model";
    case ExperimentKind::kDichotomy: return "dichotomy";
    case ExperimentKind::kEigen: return "eigen";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (auto k : {ExperimentKind::kCurvature, ExperimentKind::kSolve, ExperimentKind::kVerifyModel,
                 ExperimentKind::kDichotomy, ExperimentKind::kEigen})
    if (text == to_string(k)) return k;
  fail(ErrorCode::kConfig, "unknown experiment kind '" + text + "'");
}

double RadialTable::operator()(double rho) const {
  if (points.empty()) fail(ErrorCode::kConfig, "empty radial table");
  if (rho <= points.front().first) return points.front().second;
  if (rho >= points.back().first) return points.back().second;
  const auto it = std::lower_bound(points.begin(), points.end(), rho,
                                   [](const auto& p, double r) { return p.first < r; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double t = (rho - a.first) / (b.first - a.first);
  return a.second + t * (b.second - a.second);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kConfig, key + ": '" + v + "' is not a number");
  }
  if (used != v.size() || !std::isfinite(x)) fail(ErrorCode::kConfig, key + ": '" + v + "' is not a finite number");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long x = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kConfig, key + ": '" + v + "' is not an integer");
  }
  if (used != v.size() || x < -1000000 || x > 1000000) fail(ErrorCode::kConfig, key + ": '" + v + "' is not an integer");
  return int(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  fail(ErrorCode::kConfig, key + ": '" + v + "' is not a boolean");
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) fail(ErrorCode::kConfig, key + " " + what);
}

RadialTable to_table(const std::string& key, const std::string& v) {
  RadialTable t;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    require(parts.size() == 2, key, "entries must be rho:value");
    t.points.emplace_back(to_double(key, parts[0]), to_double(key, parts[1]));
  }
  require(!t.points.empty(), key, "must list at least one rho:value pair");
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    require(t.points[i].first >= 0.0, key, "rho must be >= 0");
    require(i == 0 || t.points[i].first > t.points[i - 1].first, key, "rho must increase");
  }
  return t;
}

struct Context {
  ExperimentConfig& c;
  bool cone_n = false, cone_d = false, cone_h = false;
  int n = 3, d = 1;
  double h = 1.0;
};

using Setter = std::function<void(Context&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& registry() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"experiment",
       {{"kind", [](Context& x, const std::string&, const std::string& v) {
           x.c.kind = parse_experiment_kind(v);
           x.c.kind_set = true;
         }},
        {"output", [](Context& x, const std::string&, const std::string& v) { x.c.output = v; }}}},
      {"cone",
       {{"n", [](Context& x, const std::string& k, const std::string& v) { x.n = to_int(k, v); x.cone_n = true; }},
        {"d", [](Context& x, const std::string& k, const std::string& v) { x.d = to_int(k, v); x.cone_d = true; }},
        {"h", [](Context& x, const std::string& k, const std::string& v) { x.h = to_double(k, v); x.cone_h = true; }}}},
      {"mesh",
       {{"n_radial", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.n_radial = to_int(k, v); }},
        {"n_angular", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.n_angular = to_int(k, v); }},
        {"spacing",
         [](Context& x, const std::string& k, const std::string& v) {
           if (v == "power") x.c.mesh.spacing = AngularSpacing::kPower;
           else if (v == "geometric") x.c.mesh.spacing = AngularSpacing::kGeometric;
           else fail(ErrorCode::kConfig, k + ": expected power or geometric");
         }},
        {"grading", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.grading = to_double(k, v); }},
        {"omega0", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.omega0 = to_double(k, v); }},
        {"varrho0", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.varrho0 = to_double(k, v); }},
        {"varrho1", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.varrho1 = to_double(k, v); }},
        {"levels", [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.levels = to_int(k, v); }},
        {"inner_layer_nodes",
         [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.inner_layer_nodes = to_int(k, v); }},
        {"inner_layer_ratio",
         [](Context& x, const std::string& k, const std::string& v) { x.c.mesh.inner_layer_ratio = to_double(k, v); }}}},
      {"coefficients",
       {{"mode",
         [](Context& x, const std::string& k, const std::string& v) {
           auto& m = x.c.coefficients.mode;
           if (v == "model") m = CoefficientMode::kModel;
           else if (v == "constant") m = CoefficientMode::kConstant;
           else if (v == "target") m = CoefficientMode::kTarget;
           else if (v == "table") m = CoefficientMode::kTable;
           else fail(ErrorCode::kConfig, k + ": expected model, constant, target or table");
         }},
        {"c0", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.c0 = to_double(k, v); }},
        {"c1", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.c1 = to_double(k, v); }},
        {"target_R", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.target_R = to_double(k, v); }},
        {"target_H", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.target_H = to_double(k, v); }},
        {"c0_table", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.c0_table = to_table(k, v); }},
        {"c1_table", [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.c1_table = to_table(k, v); }},
        {"data",
         [](Context& x, const std::string& k, const std::string& v) {
           if (v == "model") x.c.coefficients.data = DataMode::kModel;
           else if (v == "constant") x.c.coefficients.data = DataMode::kConstant;
           else fail(ErrorCode::kConfig, k + ": expected model or constant");
         }},
        {"data_value",
         [](Context& x, const std::string& k, const std::string& v) { x.c.coefficients.data_value = to_double(k, v); }}}},
      {"solver",
       {{"tol", [](Context& x, const std::string& k, const std::string& v) { x.c.solver.tol = to_double(k, v); }},
        {"max_iter", [](Context& x, const std::string& k, const std::string& v) { x.c.solver.max_iter = to_int(k, v); }},
        {"ordering_tol", [](Context& x, const std::string& k, const std::string& v) { x.c.solver.ordering_tol = to_double(k, v); }},
        {"shift",
         [](Context& x, const std::string& k, const std::string& v) {
           if (v == "adaptive") x.c.solver.shift = ShiftPolicy::kAdaptive;
           else if (v == "cap-power") x.c.solver.shift = ShiftPolicy::kCapPower;
           else fail(ErrorCode::kConfig, k + ": expected adaptive or cap-power");
         }},
        {"linear",
         [](Context& x, const std::string& k, const std::string& v) {
           if (v == "auto") x.c.solver.linear = LinearSolverKind::kAuto;
           else if (v == "direct") x.c.solver.linear = LinearSolverKind::kDirect;
           else if (v == "krylov") x.c.solver.linear = LinearSolverKind::kKrylov;
           else fail(ErrorCode::kConfig, k + ": expected auto, direct or krylov");
         }},
        {"linear_tol", [](Context& x, const std::string& k, const std::string& v) { x.c.solver.linear_tol = to_double(k, v); }}}},
      {"exhaustion",
       {{"enabled", [](Context& x, const std::string& k, const std::string& v) { x.c.exhaustion.enabled = to_bool(k, v); }},
        {"data_doublings",
         [](Context& x, const std::string& k, const std::string& v) { x.c.exhaustion.data_doublings = to_int(k, v); }},
        {"stabilization_tol",
         [](Context& x, const std::string& k, const std::string& v) { x.c.exhaustion.stabilization_tol = to_double(k, v); }}}},
      {"dichotomy",
       {{"cases",
         [](Context& x, const std::string& k, const std::string& v) {
           x.c.dichotomy.cases.clear();
           for (const auto& item : split(v, ',')) {
             const auto parts = split(item, ':');
             require(parts.size() == 2 || parts.size() == 3, k, "entries must be n:d or n:d:truncations");
             DichotomyCase dc;
             dc.n = to_int(k, parts[0]);
             dc.d = to_int(k, parts[1]);
             if (parts.size() == 3) dc.truncations = to_int(k, parts[2]);
             x.c.dichotomy.cases.push_back(dc);
           }
         }},
        {"truncations",
         [](Context& x, const std::string& k, const std::string& v) {
           const int t = to_int(k, v);
           for (auto& dc : x.c.dichotomy.cases) dc.truncations = t;
         }},
        {"rho_lo", [](Context& x, const std::string& k, const std::string& v) { x.c.dichotomy.rho_lo = to_double(k, v); }},
        {"rho_hi", [](Context& x, const std::string& k, const std::string& v) { x.c.dichotomy.rho_hi = to_double(k, v); }},
        {"complete_fraction",
         [](Context& x, const std::string& k, const std::string& v) { x.c.dichotomy.verdict.complete_fraction = to_double(k, v); }},
        {"bounded_fraction",
         [](Context& x, const std::string& k, const std::string& v) { x.c.dichotomy.verdict.bounded_fraction = to_double(k, v); }},
        {"completeness_stability",
         [](Context& x, const std::string& k, const std::string& v) {
           x.c.dichotomy.verdict.completeness_stability = to_double(k, v);
         }},
        {"sup_stability",
         [](Context& x, const std::string& k, const std::string& v) { x.c.dichotomy.verdict.sup_stability = to_double(k, v); }}}},
      {"eigen",
       {{"denominator",
         [](Context& x, const std::string& k, const std::string& v) {
           if (v == "volume") x.c.eigen.denominator = EigenDenominator::kVolume;
           else if (v == "volume+boundary") x.c.eigen.denominator = EigenDenominator::kVolumePlusBoundary;
           else fail(ErrorCode::kConfig, k + ": expected volume or volume+boundary");
           x.c.eigen.denominator_set = true;
         }},
        {"c", [](Context& x, const std::string& k, const std::string& v) { x.c.eigen.c = to_double(k, v); }},
        {"c2_extra", [](Context& x, const std::string& k, const std::string& v) { x.c.eigen.c2_extra = to_double(k, v); }},
        {"tol", [](Context& x, const std::string& k, const std::string& v) { x.c.eigen.tol = to_double(k, v); }}}},
      {"curvature",
       {{"cases",
         [](Context& x, const std::string& k, const std::string& v) {
           x.c.curvature.cases.clear();
           for (const auto& item : split(v, ',')) {
             const auto parts = split(item, ':');
             require(parts.size() == 3, k, "entries must be n:d:h");
             x.c.curvature.cases.push_back({to_int(k, parts[0]), to_int(k, parts[1]), to_double(k, parts[2])});
           }
         }},
        {"t", [](Context& x, const std::string& k, const std::string& v) { x.c.curvature.t = to_double(k, v); }}}},
  };
  return table;
}

// Default curvature table (20 cases): every (n, d) with 3 <= n <= 6, cycling
// the slopes 1, 1/2, 2, plus extra slopes and three cases with n = 7.
std::vector<CurvatureCase> default_curvature_cases() {
  std::vector<CurvatureCase> cases;
  const double slopes[] = {1.0, 0.5, 2.0};
  int s = 0;
  for (int n = 3; n <= 6; ++n)
    for (int d = 1; d <= n - 1; ++d) cases.push_back({n, d, slopes[s++ % 3]});
  cases.push_back({3, 1, 0.25});
  cases.push_back({4, 2, 4.0});
  cases.push_back({5, 2, std::sqrt(3.0)});
  cases.push_back({7, 1, 1.0});
  cases.push_back({7, 3, 0.5});
  cases.push_back({7, 6, 2.0});
  return cases;
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& m = mesh;
  require(m.n_radial >= 4 && m.n_radial <= 4096, "mesh.n_radial", "must lie in [4, 4096]");
  require(m.n_angular >= 4 && m.n_angular <= 4096, "mesh.n_angular", "must lie in [4, 4096]");
  require(m.grading >= 1.0 && m.grading <= 8.0, "mesh.grading", "must lie in [1, 8]");
  require(m.omega0 > 0.0 && m.omega0 < cone.theta, "mesh.omega0", "must lie in (0, theta)");
  require(m.varrho0 > 0.0 && m.varrho1 > m.varrho0, "mesh.varrho0/varrho1", "must satisfy 0 < varrho0 < varrho1");
  require(m.levels >= 1 && m.levels <= 6, "mesh.levels", "must lie in [1, 6]");
  require(m.inner_layer_nodes >= 0 && m.inner_layer_nodes <= 64, "mesh.inner_layer_nodes", "must lie in [0, 64]");
  require(m.inner_layer_ratio > 1.0 && m.inner_layer_ratio <= 16.0, "mesh.inner_layer_ratio", "must lie in (1, 16]");

  const auto& co = coefficients;
  require(co.c0 > 0.0, "coefficients.c0", "must be > 0");
  require(co.c1 > 0.0, "coefficients.c1", "must be > 0");
  require(co.target_R < 0.0, "coefficients.target_R", "must be < 0");
  require(co.target_H < 0.0, "coefficients.target_H", "must be < 0");
  require(co.data_value >= 0.0, "coefficients.data_value", "must be >= 0");
  if (co.mode == CoefficientMode::kTable) {
    require(!co.c0_table.points.empty() && !co.c1_table.points.empty(), "coefficients.c0_table/c1_table",
            "are required in table mode");
    for (const auto& p : co.c0_table.points) require(p.second > 0.0, "coefficients.c0_table", "values must be > 0");
    for (const auto& p : co.c1_table.points) require(p.second > 0.0, "coefficients.c1_table", "values must be > 0");
  }

  const auto& s = solver;
  require(s.tol > 0.0 && s.tol < 1.0, "solver.tol", "must lie in (0, 1)");
  require(s.max_iter >= 1 && s.max_iter <= 100000, "solver.max_iter", "must lie in [1, 100000]");
  require(s.ordering_tol >= 0.0 && s.ordering_tol < 1.0, "solver.ordering_tol", "must lie in [0, 1)");
  require(s.linear_tol > 0.0 && s.linear_tol < 1.0, "solver.linear_tol", "must lie in (0, 1)");

  require(exhaustion.data_doublings >= -1 && exhaustion.data_doublings <= 38, "exhaustion.data_doublings",
          "must lie in [0, 38] (or -1 for the default)");
  require(exhaustion.stabilization_tol > 0.0, "exhaustion.stabilization_tol", "must be > 0");

  const auto& dc = dichotomy;
  require(dc.rho_lo > 0.0 && dc.rho_hi > dc.rho_lo, "dichotomy.rho_lo/rho_hi", "must satisfy 0 < rho_lo < rho_hi");
  require(dc.verdict.complete_fraction > dc.verdict.bounded_fraction && dc.verdict.bounded_fraction >= 0.0,
          "dichotomy.complete_fraction/bounded_fraction", "must satisfy 0 <= bounded < complete");
  require(dc.verdict.completeness_stability > 0.0 && dc.verdict.sup_stability > 0.0,
          "dichotomy.completeness_stability/sup_stability", "must be > 0");
  for (const auto& c : dc.cases) {
    require(c.n >= 3 && c.n <= 12 && c.d >= 1 && c.d <= c.n - 1, "dichotomy.cases",
            "need 3 <= n <= 12 and 1 <= d <= n-1");
    require(c.truncations >= 2 && c.truncations <= 40, "dichotomy.cases", "truncations must lie in [2, 40]");
  }
  require(eigen.tol > 0.0 && eigen.tol < 1e-3, "eigen.tol", "must lie in (0, 1e-3)");
  require(curvature.t > 0.0, "curvature.t", "must be > 0");
  for (const auto& c : curvature.cases)
    require(c.n >= 3 && c.n <= 64 && c.d >= 1 && c.d <= c.n - 1 && c.h > 0.0, "curvature.cases",
            "need n >= 3, 1 <= d <= n-1, h > 0");

  switch (kind) {
    case ExperimentKind::kVerifyModel:
      require(coefficients.mode == CoefficientMode::kModel, "coefficients.mode", "must be model for verify-model");
      [[fallthrough]];
    case ExperimentKind::kSolve:
      if (coefficients.mode == CoefficientMode::kModel)
        require(!exact_model_solution(cone).no_complete_solution, "coefficients.mode",
                "model needs c0* > 0, i.e. d > (n-2)/2");
      break;
    case ExperimentKind::kDichotomy:
      require(!dichotomy.cases.empty(), "dichotomy.cases", "must list at least one case");
      require(coefficients.mode != CoefficientMode::kModel, "coefficients.mode",
              "must not be model for dichotomy (c0* vanishes for d <= (n-2)/2)");
      break;
    case ExperimentKind::kEigen:
      require(eigen.denominator_set, "eigen.denominator", "must be given explicitly");
      break;
    case ExperimentKind::kCurvature:
      break;
  }
}

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfig, std::string("syntax error: ") + e.what());
  }
  ExperimentConfig cfg;
  Context ctx{cfg};
  const auto& reg = registry();
  for (const auto& [section, body] : tree) {
    const auto sit = reg.find(section);
    if (sit == reg.end()) {
      if (body.empty()) fail(ErrorCode::kConfig, "key '" + section + "' outside a section");
      fail(ErrorCode::kConfig, "unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const auto kit = sit->second.find(key);
      if (kit == sit->second.end()) fail(ErrorCode::kConfig, "unknown key " + name);
      if (!node.empty()) fail(ErrorCode::kConfig, name + " must be a plain value");
      const std::string value = trim(node.data());
      require(!value.empty(), name, "is empty");
      kit->second(ctx, name, value);
      cfg.echo.emplace_back(name, value);
    }
  }
  try {
    cfg.cone = ConeModel::make(ctx.n, ctx.d, ctx.h);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("cone: ") + e.what());
  }
  if (cfg.curvature.cases.empty()) cfg.curvature.cases = default_curvature_cases();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot open config file " + path);
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Builders

MeshPtr build_mesh(const ReducedDomain& domain, const MeshSettings& s) {
  MeshPtr mesh = s.spacing == AngularSpacing::kGeometric
                     ? Mesh::build_geometric(domain, s.n_radial, s.n_angular)
                     : Mesh::build(domain, s.n_radial, s.n_angular, s.grading);
  if (s.inner_layer_nodes > 0) mesh = mesh->with_inner_layer(s.inner_layer_nodes, s.inner_layer_ratio);
  return mesh;
}

NonlinearProblem build_problem(const MeshPtr& mesh, const CoefficientSettings& co) {
  const ConeModel& cone = mesh->cone();
  const ModelSolution ms = exact_model_solution(cone);
  if (co.mode == CoefficientMode::kModel) {
    NonlinearProblem pb = NonlinearProblem::model(mesh);
    if (co.data == DataMode::kConstant) pb.dirichlet_data = Field(mesh, co.data_value);
    return pb;
  }
  Field data = co.data == DataMode::kModel
                   ? Field::from_function(mesh, [&](double v, double w) { return ms.value(v * std::sin(w)); })
                   : Field(mesh, co.data_value);
  double c0 = co.c0, c1 = co.c1;
  if (co.mode == CoefficientMode::kTarget) {
    c0 = target_R_to_c0(cone.n, co.target_R);
    c1 = target_H_to_c1(cone.n, co.target_H);
  }
  NonlinearProblem pb = NonlinearProblem::flat(mesh, c0, c1, std::move(data));
  if (co.mode == CoefficientMode::kTable) {
    pb.c0 = Field::from_function(mesh, [&](double v, double w) { return co.c0_table(v * std::sin(w)); });
    pb.c1 = Field::from_function(mesh, [&](double v, double w) { return co.c1_table(v * std::sin(w)); });
  }
  return pb;
}

MonotoneOptions monotone_options(const SolverSettings& s, bool strict) {
  MonotoneOptions o;
  o.tol = s.tol;
  o.max_iter = s.max_iter;
  o.policy = s.shift;
  o.ordering_tol = s.ordering_tol;
  o.linear.kind = s.linear;
  o.linear.tol = s.linear_tol;
  o.strict_mmatrix = strict;
  return o;
}

std::vector<double> dichotomy_data_sequence(const DichotomyCase& c, const ExhaustionSettings& e) {
  if (e.data_doublings >= 0) return geometric_data_sequence(e.data_doublings);
  const int extra = int(std::ceil(0.5 * (c.n - 2) * (c.truncations - 1) - 1e-9));
  return geometric_data_sequence(std::min(16 + extra, 38));
}

// ---------------------------------------------------------------------------
// Running

namespace {

// Failure of an internal acceptance check (exit code 3).
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Writer {
  fs::path dir;
  bool enabled = true;
  std::vector<std::string>* files;

  void csv(const std::string& name, const Csv& table) {
    if (!enabled) return;
    table.write(dir / name);
    files->push_back((dir / name).string());
  }
  void svg(const std::string& name, const Plot& plot) {
    if (!enabled) return;
    std::ofstream out(dir / name);
    if (!out) fail(ErrorCode::kIo, "cannot write " + (dir / name).string());
    plot.write_svg(out);
    files->push_back((dir / name).string());
  }
};

double residual_bound(const SolverSettings& s, double S, const ConeModel& cone) {
  return 10.0 * s.tol * (1.0 + std::pow(S, cone.interior_power()));
}

json report_digest(const SolverReport& r) {
  json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_increment"] = r.final_increment;
  j["residual_sup"] = r.residual_sup;
  j["cap"] = r.cap;
  j["max_ordering_defect"] = r.max_ordering_defect;
  if (r.fitted_exponent) j["fitted_exponent"] = *r.fitted_exponent;
  j["completeness_indicator"] = r.completeness_indicator;
  j["verdict"] = to_string(r.verdict);
  j["solution_min"] = r.solution.min();
  j["solution_max"] = r.solution.max();
  return j;
}

// Mid-radial slice of a solution: (log10 rho, log10 u) for u > 0.
Series slice_series(const std::string& name, const Field& u) {
  const Mesh& m = u.mesh();
  Series s{name, {}, {}};
  const std::size_t i = m.mid_radial_index();
  for (std::size_t j = 0; j < m.angular_count(); ++j) {
    const std::size_t k = m.index(i, j);
    if (u[k] > 0.0) {
      s.x.push_back(std::log10(m.rho(k)));
      s.y.push_back(std::log10(u[k]));
    }
  }
  return s;
}

void check_report(const SolverReport& r, const SolverSettings& s, const ConeModel& cone, const std::string& what) {
  if (!r.converged) throw CheckFailure(what + ": not converged");
  const double bound = residual_bound(s, r.cap, cone);
  if (!(r.residual_sup <= bound))
    throw CheckFailure(what + ": residual " + fmt(r.residual_sup) + " above " + fmt(bound));
  if (r.max_ordering_defect > s.ordering_tol)
    throw CheckFailure(what + ": bracket ordering defect " + fmt(r.max_ordering_defect));
  if (r.solution.min() < 0.0) throw CheckFailure(what + ": negative solution value");
}

ReducedDomain domain_of(const ExperimentConfig& c, const ConeModel& cone) {
  return ReducedDomain{cone, c.mesh.varrho0, c.mesh.varrho1, c.mesh.omega0};
}

// -- curvature ---------------------------------------------------------------

void run_curvature(const ExperimentConfig& cfg, Writer& w, RunResult& res) {
  Csv table({"n", "d", "h", "theta", "product_R", "model_H", "euclidean_H", "grad_rho_nu", "rho_H",
             "rho_lap_rho", "conformal_R", "conformal_H", "c0_star", "c1_star"});
  double worst = 0.0;
  json rows = json::array();
  for (const auto& c : cfg.curvature.cases) {
    const ConeModel cone = ConeModel::make(c.n, c.d, c.h);
    const double R = product_scalar_curvature(c.n, c.d);
    const double H = model_boundary_mean_curvature(c.d, c.h);
    const double He = euclidean_boundary_mean_curvature(c.n, c.d, c.h, cfg.curvature.t);
    const VertexAsymptotics va = vertex_asymptotics(cone);
    const CurvatureReport conf = conformal_rho2_curvatures(c.n, 0.0, va.rho_lap_rho, va.rho_H, va.grad_rho_nu);
    const ModelSolution ms = exact_model_solution(cone);
    worst = std::max({worst, std::abs(conf.scalar - R), std::abs(conf.mean - H)});
    table.row({std::to_string(c.n), std::to_string(c.d), fmt(c.h), fmt(cone.theta), fmt(R), fmt(H), fmt(He),
               fmt(va.grad_rho_nu), fmt(va.rho_H), fmt(va.rho_lap_rho), fmt(conf.scalar), fmt(conf.mean),
               fmt(ms.c0_star), fmt(ms.c1_star)});
    rows.push_back({{"n", c.n}, {"d", c.d}, {"h", c.h}, {"product_R", R}, {"model_H", H}});
  }
  w.csv("curvature.csv", table);
  res.summary["curvature"] = {{"cases", rows}, {"conformal_cross_check_error", worst}};
  if (worst > 1e-12) throw CheckFailure("conformal cross-check differs by " + fmt(worst));
}

// -- solve -------------------------------------------------------------------

void write_solution(Writer& w, const std::string& name, const NonlinearProblem& pb, const Field& u) {
  const Mesh& m = *pb.mesh;
  const Field r = discrete_residual(pb, u);
  Csv t({"i", "j", "varrho", "omega", "rho", "tag", "u", "residual"});
  for (std::size_t k = 0; k < m.node_count(); ++k)
    t.row({std::to_string(m.radial_index(k)), std::to_string(m.angular_index(k)), fmt(m.varrho(k)), fmt(m.omega(k)),
           fmt(m.rho(k)), to_string(m.tag(k)), fmt(u[k]), fmt(r[k])});
  w.csv(name, t);
}

void write_trace(Writer& w, const std::string& name, const SolverReport& r) {
  Csv t({"iteration", "lower_increment", "upper_increment", "gap", "ordering_defect", "linear_residual"});
  for (const auto& rec : r.trace)
    t.row({std::to_string(rec.iteration), fmt(rec.lower_increment), fmt(rec.upper_increment), fmt(rec.gap),
           fmt(rec.ordering_defect), fmt(rec.linear_residual)});
  w.csv(name, t);
}

void run_solve(const ExperimentConfig& cfg, const RunOptions& opt, Writer& w, RunResult& res) {
  const MeshPtr mesh = build_mesh(domain_of(cfg, cfg.cone), cfg.mesh);
  const NonlinearProblem pb = build_problem(mesh, cfg.coefficients);
  const MonotoneOptions mo = monotone_options(cfg.solver, opt.strict);
  const auto cert = OperatorAssembly(mesh, pb.c, pb.c2_lin).certificate();
  json j;
  j["nodes"] = mesh->node_count();
  j["mmatrix_certificate"] = {{"ok", cert.ok}, {"max_offdiagonal", cert.max_offdiagonal},
                              {"min_row_sum", cert.min_row_sum}, {"violating_rows", cert.violating_rows}};
  if (!cert.ok) {
    if (opt.strict) fail(ErrorCode::kMMatrixViolation, "operator fails the M-matrix sign conditions");
    res.summary["warnings"].push_back("operator fails the M-matrix sign conditions");
  }
  SolverReport report;
  Plot plot("log10 u against log10 rho (mid-radial slice)", "log10 rho", "log10 u");
  if (cfg.exhaustion.enabled) {
    ExhaustionOptions eo;
    eo.monotone = mo;
    eo.stabilization_tol = cfg.exhaustion.stabilization_tol;
    const auto seq = geometric_data_sequence(cfg.exhaustion.data_doublings >= 0 ? cfg.exhaustion.data_doublings : 16);
    const ExhaustionResult ex = exhaustion_blowup_solve(pb, seq, eo);
    Csv t({"data", "iterations", "probe_change", "residual_sup"});
    for (std::size_t i = 0; i < ex.runs.size(); ++i) {
      t.row({fmt(ex.data_values[i]), std::to_string(ex.runs[i].iterations),
             i == 0 ? "" : fmt(ex.probe_change[i - 1]), fmt(ex.runs[i].residual_sup)});
      if (i % 4 == 0 || i + 1 == ex.runs.size()) plot.add(slice_series("m=" + fmt(ex.data_values[i]), ex.runs[i].solution));
    }
    w.csv("exhaustion.csv", t);
    j["exhaustion"] = {{"stabilized", ex.stabilized}, {"monotonicity_defect", ex.monotonicity_defect},
                       {"final_probe_change", ex.probe_change.empty() ? 0.0 : ex.probe_change.back()}};
    report = ex.last();
  } else {
    const double S = pick_cap(pb);
    report = monotone_iterate(pb, Field(mesh, 0.0), S, mo).report;
    check_report(report, cfg.solver, cfg.cone, "solve");
    plot.add(slice_series("solution", report.solution));
  }
  const BarrierFit bf = barrier_psi_fit(pb);
  j["barrier"] = {{"feasible", bf.feasible}, {"lhs_interior", bf.lhs_interior}, {"lhs_boundary", bf.lhs_boundary},
                  {"c_star", bf.c_star}, {"band_rho", bf.band_rho}};
  if (bf.feasible) j["barrier"]["psi_lower_bound_margin"] = psi_lower_bound_margin(bf, pb, report.solution);
  write_solution(w, "solution.csv", pb, report.solution);
  write_trace(w, "trace.csv", report);
  w.svg("profile.svg", plot);
  j["report"] = report_digest(report);
  res.summary["solve"] = j;
}

// -- verify-model --------------------------------------------------------------

void run_verify_model(const ExperimentConfig& cfg, const RunOptions& opt, Writer& w, RunResult& res) {
  MeshPtr mesh = build_mesh(domain_of(cfg, cfg.cone), cfg.mesh);
  const MonotoneOptions mo = monotone_options(cfg.solver, opt.strict);
  Csv t({"n_radial", "n_angular", "nodes", "linf_error", "observed_order", "iterations", "residual_sup",
         "residual_bound", "max_ordering_defect"});
  json levels = json::array();
  Plot plot("max error against mesh size", "log10 N", "log10 error");
  Series err_series{"L-infinity error", {}, {}};
  double prev = 0.0;
  std::vector<double> orders;
  for (int level = 0; level < cfg.mesh.levels; ++level) {
    if (level > 0) mesh = mesh->refine();
    const NonlinearProblem pb = build_problem(mesh, cfg.coefficients);
    const auto t0 = std::chrono::steady_clock::now();
    const double S = pick_cap(pb);
    const SolverReport r = monotone_iterate(pb, Field(mesh, 0.0), S, mo).report;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check_report(r, cfg.solver, cfg.cone, "verify-model level " + std::to_string(level));
    double err = 0.0;
    for (std::size_t k = 0; k < mesh->node_count(); ++k)
      err = std::max(err, std::abs(r.solution[k] - pb.dirichlet_data[k]));
    const double order = prev > 0.0 ? std::log2(prev / err) : 0.0;
    if (prev > 0.0) orders.push_back(order);
    t.row({std::to_string(mesh->n_radial()), std::to_string(mesh->n_angular()), std::to_string(mesh->node_count()),
           fmt(err), prev > 0.0 ? fmt(order) : "", std::to_string(r.iterations), fmt(r.residual_sup),
           fmt(residual_bound(cfg.solver, S, cfg.cone)), fmt(r.max_ordering_defect)});
    levels.push_back({{"n_radial", mesh->n_radial()}, {"n_angular", mesh->n_angular()}, {"error", err},
                      {"observed_order", prev > 0.0 ? json(order) : json()}, {"seconds", secs},
                      {"report", report_digest(r)}});
    err_series.x.push_back(std::log10(double(mesh->n_radial())));
    err_series.y.push_back(std::log10(err));
    if (prev > 0.0 && !(err < prev)) throw CheckFailure("error did not decrease under refinement");
    prev = err;
  }
  plot.add(err_series);
  w.csv("convergence.csv", t);
  w.svg("convergence.svg", plot);
  res.summary["verify_model"] = {{"levels", levels}, {"observed_orders", orders}};
}

// -- dichotomy -----------------------------------------------------------------

struct CaseOutcome {
  DichotomyCase spec;
  std::optional<MaximalResult> result;
  std::string error;
  ErrorCode code = ErrorCode::kNonConvergence;
  double seconds = 0.0;
  json extra;
};

CaseOutcome run_case(const ExperimentConfig& cfg, const DichotomyCase& dc, const RunOptions& opt) {
  CaseOutcome out;
  out.spec = dc;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ConeModel cone = ConeModel::make(dc.n, dc.d, cfg.cone.h);
    MeshSettings base_settings = cfg.mesh;
    base_settings.inner_layer_nodes = 0;  // every truncation gets its own layer
    const MeshPtr base = build_mesh(domain_of(cfg, cone), base_settings);
    MaximalOptions mo;
    mo.exhaustion.monotone = monotone_options(cfg.solver, opt.strict);
    mo.exhaustion.stabilization_tol = cfg.exhaustion.stabilization_tol;
    mo.exhaustion.stop_when_stable = false;
    mo.data_sequence = dichotomy_data_sequence(dc, cfg.exhaustion);
    mo.rho_lo = cfg.dichotomy.rho_lo;
    mo.rho_hi = cfg.dichotomy.rho_hi;
    mo.verdict = cfg.dichotomy.verdict;
    mo.inner_layer_nodes = cfg.mesh.inner_layer_nodes;
    mo.inner_layer_ratio = cfg.mesh.inner_layer_ratio;
    const CoefficientSettings co = cfg.coefficients;
    out.result = maximal_solution([&](const MeshPtr& m) { return build_problem(m, co); }, base, dc.truncations,
                                  base->natural_nodes_per_halving(), mo);
    const MaximalResult& r = *out.result;
    const NonlinearProblem pb = build_problem(r.runs.back().mesh, co);
    const BarrierFit bf = barrier_psi_fit(pb);
    out.extra["barrier"] = {{"feasible", bf.feasible}, {"c_star", bf.c_star}, {"band_rho", bf.band_rho}};
    const UpperBarrierReport ub = upper_barrier_check(r.report.solution, pb);
    out.extra["upper_barrier"] = {{"c1", ub.c1}, {"c3", ub.c3}, {"worst_ratio", ub.worst_ratio},
                                  {"balls", ub.balls}, {"failure_nodes", ub.failure_nodes.size()}};
    out.extra["data_max"] = mo.data_sequence.back();
  } catch (const Error& e) {
    out.error = e.what();
    out.code = e.code();
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void run_dichotomy(const ExperimentConfig& cfg, const RunOptions& opt, Writer& w, RunResult& res) {
  const auto& cases = cfg.dichotomy.cases;
  std::vector<CaseOutcome> outcomes(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) outcomes[i] = run_case(cfg, cases[i], opt);
  };
  const int threads = std::max(1, std::min<int>(opt.threads, int(cases.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // single collector
  Csv trunc({"n", "d", "truncation", "omega_min", "nodes", "data_max", "final_probe_change", "alpha", "r2",
             "completeness", "window_sup"});
  Csv verdicts({"n", "d", "truncations", "alpha", "completeness", "sup_variation", "completeness_variation",
                "monotonicity_defect", "verdict"});
  Csv profiles({"n", "d", "rho", "u", "u_rho_a"});
  Plot plot("maximal solutions, mid-radial slice", "log10 rho", "log10 u");
  json jcases = json::array();
  const ErrorCode* first_error = nullptr;
  std::string first_message;
  for (const auto& o : outcomes) {
    const std::string n = std::to_string(o.spec.n), d = std::to_string(o.spec.d);
    json jc{{"n", o.spec.n}, {"d", o.spec.d}, {"truncations", o.spec.truncations}, {"seconds", o.seconds}};
    if (!o.result) {
      jc["error"] = o.error;
      jcases.push_back(jc);
      if (!first_error) {
        first_error = &o.code;
        first_message = o.error;
      }
      continue;
    }
    const MaximalResult& r = *o.result;
    for (std::size_t t = 0; t < r.runs.size(); ++t) {
      const auto& run = r.runs[t];
      trunc.row({n, d, std::to_string(t), fmt(run.omega_min), std::to_string(run.mesh->node_count()),
                 fmt(run.exhaustion.data_values.back()),
                 run.exhaustion.probe_change.empty() ? "" : fmt(run.exhaustion.probe_change.back()),
                 run.fit ? fmt(run.fit->alpha) : "", run.fit ? fmt(run.fit->r2) : "",
                 run.fit ? fmt(run.fit->completeness) : "", run.fit ? fmt(run.fit->sup) : ""});
    }
    const std::string verdict = to_string(r.report.verdict);
    verdicts.row({n, d, std::to_string(o.spec.truncations), fmt(*r.report.fitted_exponent),
                  fmt(r.report.completeness_indicator), fmt(r.sup_variation), fmt(r.completeness_variation),
                  fmt(r.monotonicity_defect), verdict});
    const Field& u = r.report.solution;
    const Mesh& m = u.mesh();
    const double a = m.cone().exponent();
    const std::size_t i = m.mid_radial_index();
    for (std::size_t j = 0; j < m.angular_count(); ++j) {
      const std::size_t k = m.index(i, j);
      profiles.row({n, d, fmt(m.rho(k)), fmt(u[k]), fmt(u[k] * std::pow(m.rho(k), a))});
    }
    Series s = slice_series("n=" + n + ", d=" + d, u);
    plot.add(s);
    jc["report"] = report_digest(r.report);
    jc["sup_variation"] = r.sup_variation;
    jc["completeness_variation"] = r.completeness_variation;
    jc["monotonicity_defect"] = r.monotonicity_defect;
    jc["verdict"] = verdict;
    jc.update(o.extra);
    jcases.push_back(jc);
    res.verdicts.push_back(n + ":" + d + " " + verdict);
  }
  w.csv("truncations.csv", trunc);
  w.csv("verdicts.csv", verdicts);
  w.csv("profiles.csv", profiles);
  w.svg("profiles.svg", plot);
  res.summary["dichotomy"] = {{"cases", jcases}};
  if (first_error) throw Error(*first_error, first_message);
}

// -- eigen -------------------------------------------------------------------

void run_eigen(const ExperimentConfig& cfg, const RunOptions& opt, Writer& w, RunResult& res) {
  const MeshPtr mesh = build_mesh(domain_of(cfg, cfg.cone), cfg.mesh);
  const Field c(mesh, cfg.eigen.c);
  const Field c2 = Field::from_function(
      mesh, [&](double v, double) { return flat_robin_potential(cfg.cone, v) + cfg.eigen.c2_extra; });
  const OperatorAssembly op(mesh, c, c2);
  const auto cert = op.certificate();
  if (!cert.ok) {
    if (opt.strict) fail(ErrorCode::kMMatrixViolation, "operator fails the M-matrix sign conditions");
    res.summary["warnings"].push_back("operator fails the M-matrix sign conditions");
  }
  EigenOptions eo;
  eo.tol = cfg.eigen.tol;
  const EigenResult e = principal_eigen(op, cfg.eigen.denominator, eo);
  const double rq = rayleigh_quotient(op, e.vector, cfg.eigen.denominator);
  const Shift shift = find_admissible_shift(mesh, c, c2);
  Csv t({"denominator", "eigenvalue", "rayleigh_quotient", "iterations", "residual", "min_component",
         "admissible_shift"});
  const std::string den = cfg.eigen.denominator == EigenDenominator::kVolume ? "volume" : "volume+boundary";
  double min_free = 1e300;
  for (std::size_t k = 0; k < mesh->node_count(); ++k)
    if (!mesh->dirichlet(k)) min_free = std::min(min_free, e.vector[k]);
  t.row({den, fmt(e.value), fmt(rq), std::to_string(e.iterations), fmt(e.residual), fmt(min_free),
         fmt(shift.interior)});
  w.csv("eigen.csv", t);
  Csv v({"i", "j", "varrho", "omega", "rho", "phi"});
  for (std::size_t k = 0; k < mesh->node_count(); ++k)
    v.row({std::to_string(mesh->radial_index(k)), std::to_string(mesh->angular_index(k)), fmt(mesh->varrho(k)),
           fmt(mesh->omega(k)), fmt(mesh->rho(k)), fmt(e.vector[k])});
  w.csv("eigenvector.csv", v);
  res.summary["eigen"] = {{"denominator", den},
                          {"value", e.value},
                          {"rayleigh_quotient", rq},
                          {"iterations", e.iterations},
                          {"residual", e.residual},
                          {"min_free_component", min_free},
                          {"admissible_shift", shift.interior},
                          {"mmatrix_ok", cert.ok}};
  if (std::abs(rq - e.value) > 1e-8 * std::max(1.0, std::abs(e.value)))
    throw CheckFailure("Rayleigh quotient of the ground state differs from the eigenvalue");
  if (!(min_free > 0.0)) throw CheckFailure("ground state is not positive on the free nodes");
}

json config_echo(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.echo) j[k] = v;
  return j;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  RunResult res;
  res.summary = json::object();
  res.summary["kind"] = to_string(config.kind);
  res.summary["config"] = config_echo(config);
  res.summary["warnings"] = json::array();
  const auto t0 = std::chrono::steady_clock::now();
  Writer w;
  w.enabled = options.write_files;
  w.files = &res.files;
  w.dir = options.out_dir.empty() ? fs::path(config.output.empty() ? "out" : config.output) : fs::path(options.out_dir);
  try {
    config.validate();
    if (w.enabled) {
      std::error_code ec;
      fs::create_directories(w.dir, ec);
      if (ec) fail(ErrorCode::kIo, "cannot create output directory " + w.dir.string());
    }
    switch (config.kind) {
      case ExperimentKind::kCurvature: run_curvature(config, w, res); break;
      case ExperimentKind::kSolve: run_solve(config, options, w, res); break;
      case ExperimentKind::kVerifyModel: run_verify_model(config, options, w, res); break;
      case ExperimentKind::kDichotomy: run_dichotomy(config, options, w, res); break;
      case ExperimentKind::kEigen: run_eigen(config, options, w, res); break;
    }
    res.exit_code = 0;
    res.message = "ok";
  } catch (const CheckFailure& e) {
    res.exit_code = 3;
    res.message = std::string("acceptance check failed: ") + e.what();
  } catch (const Error& e) {
    res.exit_code = e.code() == ErrorCode::kConfig ? 1 : 2;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = 2;
    res.message = e.what();
  }
  res.summary["status"] = {{"exit_code", res.exit_code}, {"message", res.message}};
  res.summary["verdicts"] = res.verdicts;
  res.summary["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (w.enabled && res.exit_code != 1) {
    std::ofstream out(w.dir / "summary.json");
    if (out) {
      out << res.summary.dump(2) << '\n';
      res.files.push_back((w.dir / "summary.json").string());
    }
  }
  return res;
}

}  // namespace yamabe
