#pragma once

// Discrete mixed Dirichlet/Robin problem for
//
//   L u = -Laplacian(u) + (c + mu_1) u            in the reduced domain
//   B u = du/dnu + (c2 + mu_2) u                  on the cone face omega = theta
//   u   = data                                    on the Dirichlet faces
//
// in self-adjoint weighted divergence form, W = varrho^{n-d} sin^{n-d-1}(omega):
//
//   Laplacian(u) = (1/W) [ d_varrho(W d_varrho u) + d_omega(W d_omega u / varrho^2) ].
//
// The assembled matrix A_w is the vertex-centred finite-volume stiffness
// matrix over all nodes (half cells on the boundary) plus the lumped reaction
// terms V (c + mu_1) + s (c2 + mu_2), where V and s are the mesh volume and
// surface weights.  A_w is symmetric with non-positive off-diagonals.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "yamabe/linalg.hpp"
#include "yamabe/mesh.hpp"

namespace yamabe {

struct Shift {
  double interior = 0.0;  // mu_1
  double robin = 0.0;     // mu_2
};

// Sign conditions for the discrete maximum principle.
struct MMatrixCertificate {
  bool ok = true;
  double max_offdiagonal = 0.0;  // must be <= 0
  double min_row_sum = 0.0;      // over non-Dirichlet rows, must be >= 0
  std::size_t violating_rows = 0;
};

class OperatorAssembly {
 public:
  // c lives on all nodes (used on non-Dirichlet ones), c2 on ROBIN_CONE nodes
  // (other entries ignored).
  OperatorAssembly(MeshPtr mesh, Field c, Field c2, Shift shift = {});

  static OperatorAssembly laplacian(const MeshPtr& mesh);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const Field& c() const { return c_; }
  const Field& c2() const { return c2_; }
  Shift shift() const { return shift_; }

  // Conductances of the edges to the +radial and +angular neighbours (zero on
  // the last radial / angular line).
  double radial_conductance(std::size_t k) const { return gr_[k]; }
  double angular_conductance(std::size_t k) const { return ga_[k]; }
  // Lumped reaction term of row k.
  double reaction(std::size_t k) const { return reaction_[k]; }

  // y = A_w u over all nodes.
  void apply_weighted(std::span<const double> u, std::span<double> y) const;
  // Strong form: (A_w u)_k divided by the volume weight, or by the surface
  // weight on ROBIN_CONE nodes (where it approximates B u).
  Field apply(const Field& u) const;
  // v^T A_w u.
  double bilinear(const Field& u, const Field& v) const;

  MMatrixCertificate certificate() const;

  // Rows/columns of the non-Dirichlet nodes, optionally minus sigma * diag(mass).
  linalg::SymmetricCsr reduced_matrix(std::span<const double> mass = {}, double sigma = 0.0) const;
  // Row sums of reduced_matrix(mass, sigma), accumulated from the reaction,
  // the shift and the eliminated Dirichlet couplings (no cancellation).
  std::vector<double> reduced_row_sums(std::span<const double> mass = {}, double sigma = 0.0) const;
  // Non-Dirichlet nodes in reduced order, and the inverse map (-1 on Dirichlet nodes).
  const std::vector<std::size_t>& free_nodes() const { return free_; }
  const std::vector<long>& reduced_index() const { return reduced_index_; }

  // Coordinate-list dump "row col value" of the full symmetric matrix A_w.
  void write_coo(std::ostream& out) const;

 private:
  MeshPtr mesh_;
  Field c_;
  Field c2_;
  Shift shift_;
  std::vector<double> gr_;
  std::vector<double> ga_;
  std::vector<double> reaction_;
  std::vector<std::size_t> free_;
  std::vector<long> reduced_index_;
};

enum class LinearSolverKind { kAuto, kDirect, kKrylov };

struct LinearSolveOptions {
  double tol = 1e-10;
  LinearSolverKind kind = LinearSolverKind::kAuto;
  int max_iter = 50000;
};

struct LinearSolveReport {
  Field solution;
  double relative_residual = 0.0;
  int iterations = 0;
};

// Factorizes (or prepares) the reduced operator once for repeated solves
// with different right-hand sides.
class MixedSolver {
 public:
  MixedSolver(const OperatorAssembly& op, LinearSolveOptions options = {});

  // Solves L u = f in the interior, B u = g on ROBIN_CONE (g may be null for
  // g = 0), u = data on Dirichlet nodes.
  LinearSolveReport solve(const Field& volume_rhs, const Field* boundary_rhs,
                          const Field& dirichlet_data) const;

  // Solves the reduced system with a right-hand side already in weighted form
  // (entry per non-Dirichlet node, Dirichlet coupling not included).
  void solve_reduced(std::span<double> b) const;

  const OperatorAssembly& op() const { return *op_; }

 private:
  const OperatorAssembly* op_;
  LinearSolveOptions options_;
  linalg::SymmetricCsr matrix_;
  // At most one of the two is set; both empty for Krylov.
  std::vector<linalg::MMatrixLdl> mfactor_;
  std::vector<linalg::BandedCholesky> factor_;
};

LinearSolveReport solve_mixed(const OperatorAssembly& op, const Field& rhs,
                              const Field& dirichlet_data, double tol = 1e-10);
LinearSolveReport solve_mixed(const OperatorAssembly& op, const Field& volume_rhs,
                              const Field* boundary_rhs, const Field& dirichlet_data,
                              const LinearSolveOptions& options);

// Smallest shift pair (0, 0), (1, 1), (2, 2), (4, 4), ... for which the
// reduced operator is positive definite.
Shift find_admissible_shift(const MeshPtr& mesh, const Field& c, const Field& c2,
                            double max_shift = 1e12);

enum class EigenDenominator { kVolume, kVolumePlusBoundary };

// (zeta^T A_w zeta) / (sum V zeta^2 [+ sum s zeta^2]); zeta must vanish on
// Dirichlet nodes.
double rayleigh_quotient(const OperatorAssembly& op, const Field& zeta,
                         EigenDenominator variant = EigenDenominator::kVolume);

struct EigenOptions {
  double tol = 1e-13;
  int max_iter = 20000;
};

struct EigenResult {
  double value = 0.0;
  Field vector;  // sup-normalized, zero on Dirichlet nodes
  int iterations = 0;
  double residual = 0.0;
};

// Smallest eigenvalue and ground state of A_w x = lambda M x on the
// non-Dirichlet nodes by shifted inverse power iteration.
EigenResult principal_eigen(const OperatorAssembly& op, EigenDenominator variant,
                            const EigenOptions& options = {});

// Mass vector (per reduced node) of the chosen denominator.
std::vector<double> reduced_mass(const OperatorAssembly& op, EigenDenominator variant);

}  // namespace yamabe
