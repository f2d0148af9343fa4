#pragma once

// Nonlinear boundary-value problem
//
//   -Laplacian(u) + c u + c0 u^p = 0                  (p = (n+2)/(n-2))
//   du/dnu + c2 u + c1 u^q      = 0   on the cone    (q = n/(n-2))
//   u = data                          on Dirichlet faces
//
// solved by monotone sub/supersolution iteration, blow-up exhaustion on the
// inner face and the limit over shrinking truncations omega_0 -> 0.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "yamabe/elliptic.hpp"
#include "yamabe/mesh.hpp"

namespace yamabe {

struct NonlinearProblem {
  MeshPtr mesh;
  Field c0;              // coefficient of u^p, all nodes
  Field c1;              // coefficient of u^q, read on ROBIN_CONE nodes
  Field c;               // linear interior potential
  Field c2_lin;          // linear Robin potential, read on ROBIN_CONE nodes
  Field dirichlet_data;  // read on Dirichlet nodes

  const ConeModel& cone() const { return mesh->cone(); }

  // Flat background: c = 0 and c2_lin = Euclidean cone curvature term.
  static NonlinearProblem flat(const MeshPtr& mesh, double c0, double c1, Field data);
  // Flat background with the closed-form coefficients and data u*.
  static NonlinearProblem model(const MeshPtr& mesh);

  // Field sizes and finiteness.
  void validate() const;
  // Minimum of c0 over all nodes and of c1 over ROBIN_CONE nodes.
  double c0_min() const;
  double c1_min() const;
};

// Builds the problem for a given mesh; used for the truncation family.
using ProblemFactory = std::function<NonlinearProblem(const MeshPtr&)>;

// Interior shift of the linearized step.
//  kCapPower: the constant S^p (Robin S^q) from the cap.
//  kAdaptive: nodewise max(c + p c0 (u+)^{p-1}, 0) from the current upper
//             iterate, i.e. a Newton step for the upper branch.
enum class ShiftPolicy { kAdaptive, kCapPower };

enum class Verdict { kCompleteType, kBoundedType, kInconclusive };
const char* to_string(Verdict v) noexcept;

struct IterationRecord {
  int iteration = 0;
  double lower_increment = 0.0;
  double upper_increment = 0.0;
  double gap = 0.0;               // sup (u+ - u-)
  double ordering_defect = 0.0;   // worst bracket violation this step (relative)
  double linear_residual = 0.0;
};

struct BracketState {
  Field sub;
  Field super;
  double S = 0.0;
  int iteration = 0;
};

struct SolverReport {
  Field solution;
  bool converged = false;
  double final_increment = 0.0;
  int iterations = 0;
  double residual_sup = 0.0;
  double cap = 0.0;
  double max_ordering_defect = 0.0;
  std::optional<double> fitted_exponent;
  double completeness_indicator = 0.0;
  Verdict verdict = Verdict::kInconclusive;
  std::vector<IterationRecord> trace;
};

struct MonotoneOptions {
  double tol = 1e-8;
  int max_iter = 500;
  ShiftPolicy policy = ShiftPolicy::kAdaptive;
  LinearSolveOptions linear{};
  // Relative tolerance of the nodewise bracket checks.
  double ordering_tol = 1e-12;
  bool strict_mmatrix = false;
};

struct MonotoneResult {
  SolverReport report;
  BracketState bracket;
};

// Smallest S >= max(data) (found by doubling) such that S is a constant
// supersolution and t -> (S^p - c) t - c0 t^p, t -> (S^q - c2) t - c1 t^q
// are nondecreasing on [0, S].  OVERFLOW above 1e12.
double pick_cap(const NonlinearProblem& problem);

// Iterates the lower branch from sub0 and the upper branch from super0 (the
// constant S when null).  Stops when both increments fall below
// tol * max(1, sup u).  The lower-branch limit is returned as the solution.
MonotoneResult monotone_iterate(const NonlinearProblem& problem, const Field& sub0, double S,
                                const MonotoneOptions& options = {},
                                const Field* super0 = nullptr);

enum class Side { kSub, kSuper };

struct SubSuperReport {
  double margin = 0.0;  // <= 0 means admissible
  double interior_margin = 0.0;
  double robin_margin = 0.0;
  double dirichlet_margin = 0.0;
  // Worst violation divided by the magnitude of the terms in its row (for
  // Dirichlet nodes, by max(1, |data|)); separates rounding from real defects.
  double relative_margin = 0.0;
  std::size_t worst_node = 0;
  bool admissible() const { return margin <= 0.0; }
  bool admissible_to(double rel_tol) const { return relative_margin <= rel_tol; }
};

// Worst violation of the discrete inequalities N(u) <= 0 (sub) or >= 0
// (super), with N the strong-form residual below, and of the Dirichlet
// comparison.
SubSuperReport check_sub_super(const NonlinearProblem& problem, const Field& candidate, Side side);

// Strong-form residual per node: row of the weighted discrete equation divided
// by the volume weight (interior) or the surface weight (Robin); zero on
// Dirichlet nodes.
Field discrete_residual(const NonlinearProblem& problem, const Field& u);
double residual_sup(const NonlinearProblem& problem, const Field& u);

struct ExhaustionOptions {
  MonotoneOptions monotone{};
  // Interior stabilization threshold, relative to the probe-set sup.
  double stabilization_tol = 1e-6;
  bool stop_when_stable = true;
};

struct ExhaustionResult {
  std::vector<double> data_values;
  std::vector<SolverReport> runs;
  std::vector<double> probe_change;  // sup over the probe set of w_{i+1} - w_i
  std::vector<std::size_t> probe_nodes;
  double monotonicity_defect = 0.0;  // worst decrease w_{i+1} < w_i (relative)
  bool stabilized = false;
  const SolverReport& last() const { return runs.back(); }
};

// Probe set: non-Dirichlet nodes with rho at or above the median that are not
// neighbours of the inner face (or inside its boundary layer).
std::vector<std::size_t> interior_probe_nodes(const Mesh& mesh);

// Solves with data m_i on the inner angular face (the radial faces keep the
// problem's data), warm-starting from the previous solution.
// NO_STABILIZATION if the probe values have not settled at the end.
ExhaustionResult exhaustion_blowup_solve(const NonlinearProblem& problem,
                                         const std::vector<double>& data_sequence,
                                         const ExhaustionOptions& options = {});

// 1, 2, 4, ..., 2^k.
std::vector<double> geometric_data_sequence(int k);

struct BlowupFit {
  double alpha = 0.0;
  double r2 = 0.0;
  double completeness = 0.0;  // min u rho^{(n-2)/2} over the window
  double sup = 0.0;           // max u over the window
  std::size_t samples = 0;
};

// Least-squares slope of log u against -log rho on the mid-radial slice,
// nodes with rho in [lo, hi].  DEGENERATE_WINDOW with fewer than 4 samples.
BlowupFit fit_blowup_exponent(const Field& solution, double rho_lo, double rho_hi);

struct VerdictRule {
  double complete_fraction = 0.8;  // alpha >= fraction * (n-2)/2
  double bounded_fraction = 0.2;   // alpha <= fraction * (n-2)/2
  // Relative change between the last two truncations.
  double completeness_stability = 0.01;
  double sup_stability = 0.05;
};

struct TruncationRun {
  double omega_min = 0.0;
  MeshPtr mesh;
  ExhaustionResult exhaustion;
  std::optional<BlowupFit> fit;  // empty while the window lies inside the truncation
};

struct MaximalOptions {
  ExhaustionOptions exhaustion{};
  std::vector<double> data_sequence = geometric_data_sequence(16);
  double rho_lo = 0.0;
  double rho_hi = 0.0;
  VerdictRule verdict{};
  // Boundary-layer lines added at each truncation's inner face.
  int inner_layer_nodes = 0;
  double inner_layer_ratio = 4.0;
  // Allowed increase between successive truncations on the common nodes,
  // relative to the local value.
  double monotonicity_tol = 1e-6;
};

struct MaximalResult {
  std::vector<TruncationRun> runs;
  double monotonicity_defect = 0.0;
  double sup_variation = 0.0;           // last two truncations, fit window
  double completeness_variation = 0.0;  // last two truncations
  SolverReport report;                  // last truncation, with fit and verdict
};

// Runs the exhaustion on base, base extended by one halving of omega_0, two
// halvings, ... (`truncations` meshes in total; each one keeps all nodes of
// the previous one and gets its own inner layer) and checks that the solutions
// decrease on the common nodes (MONOTONICITY_VIOLATION otherwise).
MaximalResult maximal_solution(const ProblemFactory& factory, const MeshPtr& base, int truncations,
                               int nodes_per_halving, const MaximalOptions& options);

Verdict classify(const ConeModel& cone, const BlowupFit& fit, double sup_variation,
                 double completeness_variation, const VerdictRule& rule);

struct BarrierFit {
  bool feasible = false;
  double lhs_interior = 0.0;  // sup over the band of rho Lap rho - n/2 + |R| rho^2/(n-1)
  double lhs_boundary = 0.0;  // sup over the band of -<grad rho, nu> + rho H/(n-1)
  double c1_margin = 0.0;     // -max(lhs_interior, lhs_boundary)
  double c_star = 0.0;        // largest C with C rho^{-(n-2)/2} a subsolution on the band
  double band_rho = 0.0;      // outer edge of the near-Gamma band
};

// Barrier psi = C_* rho^{-(n-2)/2} on the band rho <= band_rho (default: the
// lower quarter of the mesh's rho range).  Not an error when infeasible.
BarrierFit barrier_psi_fit(const NonlinearProblem& problem, double band_rho = 0.0);

// min over band nodes of u - (psi - psi(band_rho)); >= 0 when the solution
// dominates the barrier.
double psi_lower_bound_margin(const BarrierFit& fit, const NonlinearProblem& problem, const Field& u);

struct UpperBarrierReport {
  double c1 = 0.0;           // coefficient of the ball barrier
  double c3 = 0.0;           // implied bound u <= C3 rho^{-(n-2)/2}
  double worst_ratio = 0.0;  // max of u / w over all ball nodes
  std::size_t balls = 0;
  std::vector<std::size_t> failure_nodes;
};

// Balls of radius k rho(x0) around nodes x0 of the mid-radial slice that stay
// inside the domain; w = C1 (k rho0)^a / ((k rho0)^2 - |x - x0|^2)^a.
UpperBarrierReport upper_barrier_check(const Field& solution, const NonlinearProblem& problem,
                                       double k = 0.75);

}  // namespace yamabe
