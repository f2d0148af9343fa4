#pragma once

// Experiment configuration and orchestration.
//
// Configuration files are flat `key = value` text grouped in [sections]; the
// full key list is documented in README.md.  Every key is validated before
// any computation and unknown sections or keys are rejected.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "yamabe/cone_geometry.hpp"
#include "yamabe/elliptic.hpp"
#include "yamabe/mesh.hpp"
#include "yamabe/yamabe_solver.hpp"

namespace yamabe {

enum class ExperimentKind { kCurvature, kSolve, kVerifyModel, kDichotomy, kEigen };
const char* to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_experiment_kind(const std::string& text);

struct MeshSettings {
  int n_radial = 32;
  int n_angular = 32;
  AngularSpacing spacing = AngularSpacing::kPower;
  double grading = 2.0;
  double omega0 = 0.05;
  double varrho0 = 0.5;
  double varrho1 = 2.0;
  int levels = 3;  // verify-model: meshes N, 2N, 4N, ...
  int inner_layer_nodes = 0;
  double inner_layer_ratio = 4.0;
};

enum class CoefficientMode { kModel, kConstant, kTarget, kTable };
enum class DataMode { kModel, kConstant };

// Piecewise-linear profile in rho, constant beyond the end points.
struct RadialTable {
  std::vector<std::pair<double, double>> points;  // (rho, value), rho increasing
  double operator()(double rho) const;
};

struct CoefficientSettings {
  CoefficientMode mode = CoefficientMode::kModel;
  double c0 = 1.0;
  double c1 = 0.5;
  double target_R = -1.0;
  double target_H = -1.0;
  RadialTable c0_table;
  RadialTable c1_table;
  DataMode data = DataMode::kModel;
  double data_value = 1.0;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 500;
  double ordering_tol = 1e-12;
  ShiftPolicy shift = ShiftPolicy::kAdaptive;
  LinearSolverKind linear = LinearSolverKind::kAuto;
  double linear_tol = 1e-10;
};

struct ExhaustionSettings {
  bool enabled = false;  // solve: run the exhaustion instead of a single solve
  int data_doublings = -1;  // -1: 16, plus the truncation depth for dichotomy
  double stabilization_tol = 1e-3;
};

struct DichotomyCase {
  int n = 3;
  int d = 1;
  int truncations = 14;
};

struct DichotomySettings {
  std::vector<DichotomyCase> cases;
  double rho_lo = 0.01;
  double rho_hi = 0.1;
  VerdictRule verdict{};
};

struct EigenSettings {
  EigenDenominator denominator = EigenDenominator::kVolume;
  bool denominator_set = false;
  double c = 0.0;         // interior potential
  double c2_extra = 0.0;  // added to the flat Robin potential
  double tol = 1e-13;
};

struct CurvatureCase {
  int n = 3;
  int d = 1;
  double h = 1.0;
};

struct CurvatureSettings {
  std::vector<CurvatureCase> cases;
  double t = 1.0;  // distance to Gamma for the Euclidean mean curvature
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSolve;
  bool kind_set = false;
  std::string output;
  ConeModel cone = ConeModel::make(3, 1, 1.0);
  MeshSettings mesh;
  CoefficientSettings coefficients;
  SolverSettings solver;
  ExhaustionSettings exhaustion;
  DichotomySettings dichotomy;
  EigenSettings eigen;
  CurvatureSettings curvature;
  // Parsed key/value pairs in file order ("section.key", value).
  std::vector<std::pair<std::string, std::string>> echo;

  // Cross-field checks that depend on the experiment kind.
  void validate() const;
};

// Throws Error(kConfig) on syntax errors, unknown keys and out-of-range values.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct RunOptions {
  std::string out_dir;  // empty: config output, else "out"
  int threads = 1;
  bool strict = false;  // M-matrix sign violations become errors
  bool write_files = true;
};

// Builders shared by the experiment kinds and the tests.
MeshPtr build_mesh(const ReducedDomain& domain, const MeshSettings& mesh);
NonlinearProblem build_problem(const MeshPtr& mesh, const CoefficientSettings& coefficients);
MonotoneOptions monotone_options(const SolverSettings& solver, bool strict);
// Data range of a dichotomy case: 2^0 .. 2^(16 + ceil((n-2)/2 (T-1))) unless
// data_doublings is set; the last truncation then sees the same data relative
// to its natural scale omega_0^{-(n-2)/2} as the first one.
std::vector<double> dichotomy_data_sequence(const DichotomyCase& c, const ExhaustionSettings& e);

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 config error, 2 solver failure, 3 acceptance check
  std::string message;
  std::vector<std::string> verdicts;
  std::vector<std::string> files;
  nlohmann::json summary;
};

// Runs the experiment, writes the tables, summary.json and plots into the
// output directory and maps failures to exit codes.  Never throws.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

}  // namespace yamabe
