#include "yamabe/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <iomanip>
#include <limits>
#include <string>

#include "yamabe/error.hpp"

namespace yamabe {

OperatorAssembly::OperatorAssembly(MeshPtr mesh, Field c, Field c2, Shift shift)
    : mesh_(std::move(mesh)), c_(std::move(c)), c2_(std::move(c2)), shift_(shift) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "operator needs a mesh");
  const Mesh& m = *mesh_;
  c_.require_on(m, "interior potential c");
  c2_.require_on(m, "Robin potential c2");
  if (!c_.all_finite() || !c2_.all_finite())
    fail(ErrorCode::kInvalidArgument, "potentials must be finite");

  const std::size_t nr = m.radial_count(), na = m.angular_count();
  const ConeModel& cone = m.cone();
  auto rad = m.radial_nodes();
  auto ang = m.angular_nodes();
  gr_.assign(m.node_count(), 0.0);
  ga_.assign(m.node_count(), 0.0);
  reaction_.assign(m.node_count(), 0.0);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const std::size_t k = m.index(i, j);
      if (i + 1 < nr) {
        const double mid = 0.5 * (rad[i] + rad[i + 1]);
        gr_[k] = volume_density(cone, mid, ang[j]) * m.angular_dual(j) / (rad[i + 1] - rad[i]);
      }
      if (j + 1 < na) {
        const double mid = 0.5 * (ang[j] + ang[j + 1]);
        ga_[k] = volume_density(cone, rad[i], mid) / (rad[i] * rad[i]) * m.radial_dual(i) /
                 (ang[j + 1] - ang[j]);
      }
      reaction_[k] = m.weight(k) * (c_[k] + shift_.interior);
      if (m.tag(k) == BoundaryTag::kRobinCone)
        reaction_[k] += m.surface_weight(k) * (c2_[k] + shift_.robin);
    }
  }
  // Number the free nodes along the shorter grid direction first so that the
  // reduced matrix has the smaller bandwidth.
  reduced_index_.assign(m.node_count(), -1);
  const bool angular_major = na > nr;
  const std::size_t outer = angular_major ? na : nr, inner = angular_major ? nr : na;
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t k = angular_major ? b * na + a : a * na + b;
      if (!m.dirichlet(k)) {
        reduced_index_[k] = long(free_.size());
        free_.push_back(k);
      }
    }
  }
}

OperatorAssembly OperatorAssembly::laplacian(const MeshPtr& mesh) {
  return OperatorAssembly(mesh, Field(mesh, 0.0), Field(mesh, 0.0));
}

void OperatorAssembly::apply_weighted(std::span<const double> u, std::span<double> y) const {
  const Mesh& m = *mesh_;
  const std::size_t na = m.angular_count();
  for (std::size_t k = 0; k < m.node_count(); ++k) y[k] = reaction_[k] * u[k];
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (gr_[k] != 0.0) {
      const double f = gr_[k] * (u[k] - u[k + na]);
      y[k] += f;
      y[k + na] -= f;
    }
    if (ga_[k] != 0.0) {
      const double f = ga_[k] * (u[k] - u[k + 1]);
      y[k] += f;
      y[k + 1] -= f;
    }
  }
}

Field OperatorAssembly::apply(const Field& u) const {
  u.require_on(*mesh_, "argument");
  const Mesh& m = *mesh_;
  std::vector<double> y(m.node_count());
  apply_weighted(u.values(), y);
  for (std::size_t k = 0; k < y.size(); ++k)
    y[k] /= m.tag(k) == BoundaryTag::kRobinCone ? m.surface_weight(k) : m.weight(k);
  return Field(mesh_, std::move(y));
}

double OperatorAssembly::bilinear(const Field& u, const Field& v) const {
  u.require_on(*mesh_, "u");
  v.require_on(*mesh_, "v");
  std::vector<double> y(mesh_->node_count());
  apply_weighted(u.values(), y);
  return linalg::dot(y, v.values());
}

MMatrixCertificate OperatorAssembly::certificate() const {
  const Mesh& m = *mesh_;
  const std::size_t na = m.angular_count();
  MMatrixCertificate cert;
  cert.min_row_sum = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    cert.max_offdiagonal = std::max({cert.max_offdiagonal, -gr_[k], -ga_[k]});
    if (m.dirichlet(k)) continue;
    // row sum of the full matrix is the reaction term; eliminated Dirichlet
    // neighbours only add to it
    double extra = 0.0;
    const std::size_t i = m.radial_index(k), j = m.angular_index(k);
    if (m.dirichlet(k + na)) extra += gr_[k];
    if (i > 0 && m.dirichlet(k - na)) extra += gr_[k - na];
    if (j + 1 < na && m.dirichlet(k + 1)) extra += ga_[k];
    if (j > 0 && m.dirichlet(k - 1)) extra += ga_[k - 1];
    const double row = reaction_[k] + extra;
    cert.min_row_sum = std::min(cert.min_row_sum, row);
    if (row < 0.0) ++cert.violating_rows;
  }
  if (free_.empty()) cert.min_row_sum = 0.0;
  cert.ok = cert.violating_rows == 0 && cert.max_offdiagonal <= 0.0;
  return cert;
}

linalg::SymmetricCsr OperatorAssembly::reduced_matrix(std::span<const double> mass, double sigma) const {
  const Mesh& m = *mesh_;
  const std::size_t na = m.angular_count(), nr = m.radial_count();
  linalg::SymmetricCsr a;
  a.n = free_.size();
  a.row_start.reserve(a.n + 1);
  a.row_start.push_back(0);
  a.col.reserve(5 * a.n);
  a.val.reserve(5 * a.n);
  for (std::size_t r = 0; r < free_.size(); ++r) {
    const std::size_t k = free_[r];
    const std::size_t i = m.radial_index(k), j = m.angular_index(k);
    double diag = reaction_[k] - (mass.empty() ? 0.0 : sigma * mass[r]);
    auto couple = [&](std::size_t nb, double g) {
      diag += g;
      if (reduced_index_[nb] >= 0) {
        a.col.push_back(std::size_t(reduced_index_[nb]));
        a.val.push_back(-g);
      }
    };
    const std::size_t row_begin = a.col.size();
    a.col.push_back(r);
    a.val.push_back(0.0);
    if (i > 0) couple(k - na, gr_[k - na]);
    if (j > 0) couple(k - 1, ga_[k - 1]);
    if (j + 1 < na) couple(k + 1, ga_[k]);
    if (i + 1 < nr) couple(k + na, gr_[k]);
    a.val[row_begin] = diag;
    // sorted columns
    std::vector<std::pair<std::size_t, double>> entries;
    for (std::size_t p = row_begin; p < a.col.size(); ++p) entries.emplace_back(a.col[p], a.val[p]);
    std::sort(entries.begin(), entries.end());
    for (std::size_t p = 0; p < entries.size(); ++p) {
      a.col[row_begin + p] = entries[p].first;
      a.val[row_begin + p] = entries[p].second;
    }
    a.row_start.push_back(a.col.size());
  }
  return a;
}

std::vector<double> OperatorAssembly::reduced_row_sums(std::span<const double> mass, double sigma) const {
  const Mesh& m = *mesh_;
  const std::size_t na = m.angular_count(), nr = m.radial_count();
  std::vector<double> sums(free_.size());
  for (std::size_t r = 0; r < free_.size(); ++r) {
    const std::size_t k = free_[r];
    const std::size_t i = m.radial_index(k), j = m.angular_index(k);
    double s = reaction_[k] - (mass.empty() ? 0.0 : sigma * mass[r]);
    if (i > 0 && reduced_index_[k - na] < 0) s += gr_[k - na];
    if (j > 0 && reduced_index_[k - 1] < 0) s += ga_[k - 1];
    if (j + 1 < na && reduced_index_[k + 1] < 0) s += ga_[k];
    if (i + 1 < nr && reduced_index_[k + na] < 0) s += gr_[k];
    sums[r] = s;
  }
  return sums;
}

void OperatorAssembly::write_coo(std::ostream& out) const {
  const Mesh& m = *mesh_;
  const std::size_t na = m.angular_count();
  std::vector<double> diag(reaction_);
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (gr_[k] != 0.0) {
      diag[k] += gr_[k];
      diag[k + na] += gr_[k];
    }
    if (ga_[k] != 0.0) {
      diag[k] += ga_[k];
      diag[k + 1] += ga_[k];
    }
  }
  out << "# row col value (symmetric weighted operator, all nodes)\n" << std::setprecision(17);
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (k >= na && gr_[k - na] != 0.0) out << k << ' ' << k - na << ' ' << -gr_[k - na] << '\n';
    if (m.angular_index(k) > 0 && ga_[k - 1] != 0.0) out << k << ' ' << k - 1 << ' ' << -ga_[k - 1] << '\n';
    out << k << ' ' << k << ' ' << diag[k] << '\n';
    if (ga_[k] != 0.0) out << k << ' ' << k + 1 << ' ' << -ga_[k] << '\n';
    if (gr_[k] != 0.0) out << k << ' ' << k + na << ' ' << -gr_[k] << '\n';
  }
}

MixedSolver::MixedSolver(const OperatorAssembly& op, LinearSolveOptions options)
    : op_(&op), options_(options), matrix_(op.reduced_matrix()) {
  if (!(options_.tol > 0.0)) fail(ErrorCode::kInvalidArgument, "solver tolerance must be > 0");
  if (options_.kind == LinearSolverKind::kKrylov || matrix_.n == 0) return;
  const auto sums = op.reduced_row_sums();
  if (std::all_of(sums.begin(), sums.end(), [](double v) { return v >= 0.0; }))
    mfactor_.emplace_back(matrix_, sums);
  else
    factor_.emplace_back(matrix_);
}

void MixedSolver::solve_reduced(std::span<double> b) const {
  if (matrix_.n == 0) return;
  if (!mfactor_.empty()) {
    mfactor_.front().solve(b);
    return;
  }
  if (!factor_.empty()) {
    factor_.front().solve(b);
    return;
  }
  std::vector<double> x(b.size(), 0.0);
  const auto res = linalg::preconditioned_cg(matrix_, b, x, options_.tol, options_.max_iter);
  if (!res.converged)
    fail(ErrorCode::kNonConvergence, "conjugate gradients stalled at relative residual " +
                                         num(res.relative_residual));
  std::copy(x.begin(), x.end(), b.begin());
}

LinearSolveReport MixedSolver::solve(const Field& volume_rhs, const Field* boundary_rhs,
                                     const Field& dirichlet_data) const {
  const OperatorAssembly& op = *op_;
  const Mesh& m = op.mesh();
  volume_rhs.require_on(m, "right-hand side");
  dirichlet_data.require_on(m, "Dirichlet data");
  if (boundary_rhs) boundary_rhs->require_on(m, "boundary right-hand side");
  const auto& free = op.free_nodes();
  const auto& ridx = op.reduced_index();
  const std::size_t na = m.angular_count();

  std::vector<double> b(free.size());
  for (std::size_t r = 0; r < free.size(); ++r) {
    const std::size_t k = free[r];
    double v = m.weight(k) * volume_rhs[k];
    if (boundary_rhs && m.tag(k) == BoundaryTag::kRobinCone) v += m.surface_weight(k) * (*boundary_rhs)[k];
    const std::size_t i = m.radial_index(k), j = m.angular_index(k);
    if (ridx[k + na] < 0) v += op.radial_conductance(k) * dirichlet_data[k + na];
    if (i > 0 && ridx[k - na] < 0) v += op.radial_conductance(k - na) * dirichlet_data[k - na];
    if (j + 1 < na && ridx[k + 1] < 0) v += op.angular_conductance(k) * dirichlet_data[k + 1];
    if (j > 0 && ridx[k - 1] < 0) v += op.angular_conductance(k - 1) * dirichlet_data[k - 1];
    b[r] = v;
  }

  LinearSolveReport report;
  std::vector<double> x(b);
  if (!mfactor_.empty() || !factor_.empty() || matrix_.n == 0) {
    solve_reduced(x);
    report.iterations = 1;
    // iterative refinement for the plain Cholesky path (the M-matrix
    // factorization is already accurate componentwise)
    std::vector<double> r(b.size());
    for (int step = 0; step < 2 && !factor_.empty(); ++step) {
      matrix_.multiply(x, r);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
      solve_reduced(r);
      for (std::size_t i = 0; i < r.size(); ++i) x[i] += r[i];
      ++report.iterations;
    }
  } else {
    std::fill(x.begin(), x.end(), 0.0);
    const auto res = linalg::preconditioned_cg(matrix_, b, x, options_.tol, options_.max_iter);
    if (!res.converged)
      fail(ErrorCode::kNonConvergence, "conjugate gradients stalled at relative residual " +
                                           num(res.relative_residual));
    report.iterations = res.iterations;
  }

  std::vector<double> ax(b.size());
  matrix_.multiply(x, ax);
  double rn = 0.0;
  for (std::size_t r = 0; r < b.size(); ++r) rn += (b[r] - ax[r]) * (b[r] - ax[r]);
  const double bn = linalg::norm2(b);
  report.relative_residual = bn > 0.0 ? std::sqrt(rn) / bn : std::sqrt(rn);

  std::vector<double> u(m.node_count());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = ridx[k] < 0 ? dirichlet_data[k] : x[std::size_t(ridx[k])];
  report.solution = Field(op.mesh_ptr(), std::move(u));
  return report;
}

LinearSolveReport solve_mixed(const OperatorAssembly& op, const Field& rhs, const Field& dirichlet_data,
                              double tol) {
  LinearSolveOptions opt;
  opt.tol = tol;
  return solve_mixed(op, rhs, nullptr, dirichlet_data, opt);
}

LinearSolveReport solve_mixed(const OperatorAssembly& op, const Field& volume_rhs,
                              const Field* boundary_rhs, const Field& dirichlet_data,
                              const LinearSolveOptions& options) {
  MixedSolver solver(op, options);
  auto report = solver.solve(volume_rhs, boundary_rhs, dirichlet_data);
  if (report.relative_residual > options.tol)
    fail(ErrorCode::kNonConvergence,
         "relative residual " + num(report.relative_residual) + " above tolerance");
  return report;
}

Shift find_admissible_shift(const MeshPtr& mesh, const Field& c, const Field& c2, double max_shift) {
  double mu = 0.0;
  while (true) {
    try {
      OperatorAssembly op(mesh, c, c2, Shift{mu, mu});
      linalg::BandedCholesky chol(op.reduced_matrix());
      return Shift{mu, mu};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kIndefiniteOperator) throw;
    }
    mu = mu == 0.0 ? 1.0 : 2.0 * mu;
    if (mu > max_shift) fail(ErrorCode::kOverflow, "no admissible shift below " + num(max_shift));
  }
}

std::vector<double> reduced_mass(const OperatorAssembly& op, EigenDenominator variant) {
  const Mesh& m = op.mesh();
  std::vector<double> mass(op.free_nodes().size());
  for (std::size_t r = 0; r < mass.size(); ++r) {
    const std::size_t k = op.free_nodes()[r];
    mass[r] = m.weight(k);
    if (variant == EigenDenominator::kVolumePlusBoundary) mass[r] += m.surface_weight(k);
  }
  return mass;
}

double rayleigh_quotient(const OperatorAssembly& op, const Field& zeta, EigenDenominator variant) {
  const Mesh& m = op.mesh();
  zeta.require_on(m, "test function");
  double den = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (m.dirichlet(k)) {
      if (zeta[k] != 0.0) fail(ErrorCode::kInvalidArgument, "test function must vanish on Dirichlet nodes");
      continue;
    }
    double w = m.weight(k);
    if (variant == EigenDenominator::kVolumePlusBoundary) w += m.surface_weight(k);
    den += w * zeta[k] * zeta[k];
  }
  if (!(den > 0.0)) fail(ErrorCode::kDomain, "test function has zero norm");
  return op.bilinear(zeta, zeta) / den;
}

EigenResult principal_eigen(const OperatorAssembly& op, EigenDenominator variant, const EigenOptions& options) {
  const Mesh& m = op.mesh();
  const std::vector<double> mass = reduced_mass(op, variant);
  const linalg::SymmetricCsr a = op.reduced_matrix();
  const std::size_t n = a.n;
  if (n == 0) fail(ErrorCode::kInvalidArgument, "operator has no free nodes");

  // Gershgorin lower bound of the generalized spectrum.
  double lower = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    double d = 0.0, off = 0.0;
    for (std::size_t p = a.row_start[r]; p < a.row_start[r + 1]; ++p) {
      if (a.col[p] == r) d += a.val[p];
      else off += std::abs(a.val[p]);
    }
    lower = std::min(lower, (d - off) / mass[r]);
  }
  const double sigma = lower - 0.1 * std::max(1.0, std::abs(lower));
  const linalg::BandedCholesky chol(op.reduced_matrix(mass, sigma));

  std::vector<double> x(n, 1.0), y(n), ax(n);
  auto m_norm = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += mass[r] * v[r] * v[r];
    return std::sqrt(s);
  };
  double lambda = 0.0, residual = 0.0;
  int it = 0;
  bool converged = false;
  for (it = 1; it <= options.max_iter; ++it) {
    for (std::size_t r = 0; r < n; ++r) y[r] = mass[r] * x[r];
    chol.solve(y);
    const double nrm = m_norm(y);
    for (std::size_t r = 0; r < n; ++r) x[r] = y[r] / nrm;
    a.multiply(x, ax);
    lambda = linalg::dot(ax, x);  // x is M-normalized
    double rs = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double e = ax[r] - lambda * mass[r] * x[r];
      rs += e * e / mass[r];
    }
    residual = std::sqrt(rs);
    if (residual <= options.tol * std::max(1.0, std::abs(lambda))) {
      converged = true;
      break;
    }
  }
  if (!converged)
    fail(ErrorCode::kNonConvergence, "inverse iteration residual " + num(residual));

  double sup = 0.0;
  for (double v : x) sup = std::abs(v) > std::abs(sup) ? v : sup;
  std::vector<double> full(m.node_count(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = x[r] / sup;
    if (!(v > 0.0)) {
      if (v < -1e-10)
        fail(ErrorCode::kNegativeEigenvectorComponent,
             "ground state component " + num(v) + " at node " + std::to_string(op.free_nodes()[r]));
    }
    full[op.free_nodes()[r]] = std::max(v, 0.0);
  }
  EigenResult res;
  res.value = lambda;
  res.vector = Field(op.mesh_ptr(), std::move(full));
  res.iterations = it;
  res.residual = residual;
  return res;
}

}  // namespace yamabe
