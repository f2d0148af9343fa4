#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "yamabe/elliptic.hpp"
#include "yamabe/error.hpp"

using namespace yamabe;

namespace {

MeshPtr mesh(int n, int d, double h, int N, double w0 = 0.1, double grading = 2.0) {
  return Mesh::build(ReducedDomain{ConeModel::make(n, d, h), 0.5, 2.0, w0}, N, N, grading);
}

Field flat_c2(const MeshPtr& m) {
  return Field::from_function(m, [&](double v, double) { return flat_robin_potential(m->cone(), v); });
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

// Dense weighted operator extracted column by column through apply_weighted
// (matrix-free, independent of the reduced sparse assembly), restricted to
// the non-Dirichlet nodes, and the matching diagonal mass.
struct Dense {
  Eigen::MatrixXd A;
  Eigen::VectorXd M;
  std::vector<std::size_t> nodes;
};

Dense dense_operator(const OperatorAssembly& op, EigenDenominator variant) {
  const Mesh& m = op.mesh();
  Dense out;
  for (std::size_t k = 0; k < m.node_count(); ++k)
    if (!m.dirichlet(k)) out.nodes.push_back(k);
  const int n = int(out.nodes.size());
  out.A.resize(n, n);
  out.M.resize(n);
  std::vector<double> e(m.node_count(), 0.0), y(m.node_count());
  for (int c = 0; c < n; ++c) {
    e[out.nodes[c]] = 1.0;
    op.apply_weighted(e, y);
    e[out.nodes[c]] = 0.0;
    for (int r = 0; r < n; ++r) out.A(r, c) = y[out.nodes[r]];
    const std::size_t k = out.nodes[c];
    out.M[c] = m.weight(k) + (variant == EigenDenominator::kVolumePlusBoundary ? m.surface_weight(k) : 0.0);
  }
  return out;
}

double smallest_generalized_eigenvalue(const Dense& d) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(d.A, Eigen::MatrixXd(d.M.asDiagonal()));
  REQUIRE(es.info() == Eigen::Success);
  return es.eigenvalues().minCoeff();
}

// Max error over the nodes of the coarsest mesh (every mesh in the sequence
// contains them) and the observed orders between levels.
std::vector<double> orders(const std::vector<double>& err) {
  std::vector<double> o;
  for (std::size_t i = 1; i < err.size(); ++i) o.push_back(std::log2(err[i - 1] / err[i]));
  return o;
}

}  // namespace

TEST_CASE("constants are harmonic and flux-free") {
  const auto m = mesh(4, 2, 1.0, 12);
  const auto op = OperatorAssembly::laplacian(m);
  const Field r = op.apply(Field(m, 3.7));
  for (std::size_t k = 0; k < m->node_count(); ++k)
    if (!m->dirichlet(k)) CHECK(r[k] == 0.0);
}

TEST_CASE("Laplacian of varrho is (n-d)/varrho to second order") {
  // Delta varrho = (1/W) d_varrho W = (n-d)/varrho in the reduced weight.
  for (auto [n, d] : {std::pair{3, 1}, std::pair{5, 2}}) {
    std::vector<double> err;
    auto m = mesh(n, d, 1.0, 8, 0.1, 1.0);
    for (int level = 0; level < 3; ++level, m = m->refine()) {
      const auto op = OperatorAssembly::laplacian(m);
      const Field r = op.apply(Field::from_function(m, [](double v, double) { return v; }));
      double e = 0;
      for (std::size_t k = 0; k < m->node_count(); ++k)
        if (m->tag(k) == BoundaryTag::kInterior) e = std::max(e, std::abs(r[k] + (n - d) / m->varrho(k)));
      err.push_back(e);
    }
    for (double o : orders(err)) CHECK(o >= 1.7);
  }
}

TEST_CASE("discrete Laplacian of the exact profile converges with order near 2") {
  // n = 3, d = 1: Delta rho^{-1/2} = c0* rho^{-5/2} with c0* = 1/4.
  const auto m0 = mesh(3, 1, 1.0, 8, 0.1, 1.0);
  std::vector<double> err;
  auto m = m0;
  for (int level = 0; level < 3; ++level, m = m->refine()) {
    const auto op = OperatorAssembly::laplacian(m);
    const Field u = Field::from_function(m, [](double v, double w) { return std::pow(v * std::sin(w), -0.5); });
    const Field r = op.apply(u);
    const int s = 1 << level;
    double e = 0;
    for (std::size_t i = 1; i + 1 < m0->radial_count(); ++i)
      for (std::size_t j = 1; j + 1 < m0->angular_count(); ++j) {
        const std::size_t k = m->index(i * s, j * s);
        e = std::max(e, std::abs(-r[k] - 0.25 * std::pow(m->rho(k), -2.5)));
      }
    err.push_back(e);
  }
  for (double o : orders(err)) CHECK(o >= 1.8);
}

TEST_CASE("assembled operator is symmetric and passes the M-matrix certificate") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const auto m = mesh(4, 1, 0.7, 10);
  Field c(m, 0.0), c2 = flat_c2(m);
  for (std::size_t k = 0; k < m->node_count(); ++k) c[k] = 1 + U(rng);
  const OperatorAssembly op(m, c, c2, Shift{0.5, 0.25});
  const auto cert = op.certificate();
  CHECK(cert.ok);
  CHECK(cert.max_offdiagonal <= 0.0);
  CHECK(cert.min_row_sum >= 0.0);
  for (int t = 0; t < 20; ++t) {
    Field u(m, 0.0), v(m, 0.0);
    for (std::size_t k = 0; k < m->node_count(); ++k) {
      u[k] = U(rng);
      v[k] = U(rng);
    }
    double nu = 0, nv = 0;
    for (std::size_t k = 0; k < m->node_count(); ++k) {
      nu += u[k] * u[k];
      nv += v[k] * v[k];
    }
    CHECK(std::abs(op.bilinear(u, v) - op.bilinear(v, u)) <= 1e-12 * std::sqrt(nu * nv));
  }
  // strongly negative potential breaks the row-sum condition
  const OperatorAssembly bad(m, Field(m, -1e3), c2);
  const auto cb = bad.certificate();
  CHECK_FALSE(cb.ok);
  CHECK(cb.violating_rows > 0);
  CHECK(code_of([&] { OperatorAssembly(m, Field(mesh(3, 1, 1.0, 4), 0.0), c2); }) == ErrorCode::kFieldMismatch);
}

TEST_CASE("reduced matrix and row sums match the dense operator") {
  const auto m = mesh(3, 2, 1.5, 7);
  const OperatorAssembly op(m, Field(m, 0.3), flat_c2(m));
  const Dense dn = dense_operator(op, EigenDenominator::kVolume);
  const auto a = op.reduced_matrix();
  const auto sums = op.reduced_row_sums();
  REQUIRE(a.n == dn.nodes.size());
  for (std::size_t r = 0; r < a.n; ++r) {
    const int dr = int(std::find(dn.nodes.begin(), dn.nodes.end(), op.free_nodes()[r]) - dn.nodes.begin());
    double s = 0;
    for (std::size_t p = a.row_start[r]; p < a.row_start[r + 1]; ++p) {
      const int dc = int(std::find(dn.nodes.begin(), dn.nodes.end(), op.free_nodes()[a.col[p]]) - dn.nodes.begin());
      CHECK(a.val[p] == doctest::Approx(dn.A(dr, dc)).epsilon(1e-13));
      s += a.val[p];
    }
    CHECK(sums[r] == doctest::Approx(s).epsilon(1e-9).scale(a.diagonal(r)));
  }
  std::stringstream coo;
  op.write_coo(coo);
  std::string line;
  std::getline(coo, line);
  std::size_t entries = 0;
  std::size_t row, col;
  double val;
  while (coo >> row >> col >> val) {
    std::vector<double> e(m->node_count(), 0.0), y(m->node_count());
    e[col] = 1.0;
    op.apply_weighted(e, y);
    CHECK(val == doctest::Approx(y[row]).epsilon(1e-14));
    ++entries;
  }
  CHECK(entries > m->node_count());
}

TEST_CASE("constant Dirichlet data extends to a constant") {
  const auto m = mesh(3, 1, 1.0, 16);
  const auto r = solve_mixed(OperatorAssembly::laplacian(m), Field(m, 0.0), Field(m, 2.5));
  for (std::size_t k = 0; k < m->node_count(); ++k) CHECK(r.solution[k] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(r.relative_residual <= 1e-10);
}

TEST_CASE("manufactured solution x_1 converges with order in [1.7, 2.3]") {
  // u = varrho cos(omega) is harmonic; on the cone face du/dnu = -sin(theta).
  for (auto kind : {LinearSolverKind::kDirect, LinearSolverKind::kKrylov}) {
    std::vector<double> err;
    auto m = mesh(4, 2, 1.0, 8, 0.1, 1.0);
    const auto m0 = m;
    for (int level = 0; level < 3; ++level, m = m->refine()) {
      const Field exact = Field::from_function(m, [](double v, double w) { return v * std::cos(w); });
      const Field g(m, -m->cone().sin_theta());
      LinearSolveOptions o;
      o.kind = kind;
      o.tol = 1e-13;
      const auto r = solve_mixed(OperatorAssembly::laplacian(m), Field(m, 0.0), &g, exact, o);
      CHECK(r.relative_residual <= 1e-12);
      double e = 0;
      for (std::size_t k = 0; k < m->node_count(); ++k) e = std::max(e, std::abs(r.solution[k] - exact[k]));
      err.push_back(e);
    }
    for (double o : orders(err)) {
      CHECK(o >= 1.7);
      CHECK(o <= 2.3);
    }
  }
}

TEST_CASE("linear comparison principle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto m = mesh(5, 3, 0.8, 10);
  for (int t = 0; t < 10; ++t) {
    Field c(m, 0.0), f1(m, 0.0), f2(m, 0.0), g1(m, 0.0), g2(m, 0.0), b1(m, 0.0), b2(m, 0.0);
    for (std::size_t k = 0; k < m->node_count(); ++k) {
      c[k] = 2 * U(rng);
      f1[k] = U(rng) - 0.5;
      f2[k] = f1[k] + U(rng);
      g1[k] = U(rng) - 0.5;
      g2[k] = g1[k] + U(rng) * (t % 2);
      b1[k] = U(rng);
      b2[k] = b1[k] + U(rng) * (t % 3 == 0);
    }
    const OperatorAssembly op(m, c, flat_c2(m));
    REQUIRE(op.certificate().ok);
    const LinearSolveOptions o;
    const auto u1 = solve_mixed(op, f1, &g1, b1, o).solution;
    const auto u2 = solve_mixed(op, f2, &g2, b2, o).solution;
    for (std::size_t k = 0; k < m->node_count(); ++k) CHECK(u1[k] <= u2[k] + 1e-12 * std::max(1.0, std::abs(u2[k])));
  }
}

TEST_CASE("admissible shift search") {
  const auto m = mesh(3, 1, 1.0, 8);
  const auto s0 = find_admissible_shift(m, Field(m, 0.0), flat_c2(m));
  CHECK(s0.interior == 0.0);
  const auto op = OperatorAssembly::laplacian(m);
  const double lambda = principal_eigen(op, EigenDenominator::kVolume).value;
  const auto s = find_admissible_shift(m, Field(m, -3 * lambda), Field(m, 0.0));
  CHECK(s.interior > 0.0);
  CHECK(s.interior >= 2 * lambda * 0.5);
  // the returned shift works, half of it does not (when it is not the first step)
  const OperatorAssembly ok(m, Field(m, -3 * lambda), Field(m, 0.0), s);
  CHECK_NOTHROW(linalg::BandedCholesky(ok.reduced_matrix()));
  if (s.interior > 1.0) {
    const OperatorAssembly half(m, Field(m, -3 * lambda), Field(m, 0.0), Shift{s.interior / 2, s.robin / 2});
    CHECK(code_of([&] { linalg::BandedCholesky(half.reduced_matrix()); }) == ErrorCode::kIndefiniteOperator);
  }
}

TEST_CASE("Rayleigh quotient") {
  const auto m = mesh(4, 2, 1.0, 10);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const OperatorAssembly op(m, Field(m, 0.0), flat_c2(m));
  Field bump = Field::from_function(m, [&](double v, double w) {
    return std::max(0.0, 1 - 16 * (v - 1) * (v - 1)) * std::sin(w - 0.1);
  });
  for (std::size_t k = 0; k < m->node_count(); ++k)
    if (m->dirichlet(k)) bump[k] = 0.0;
  for (int t = 0; t < 20; ++t) {
    Field z(m, 0.0);
    for (std::size_t k = 0; k < m->node_count(); ++k)
      if (!m->dirichlet(k)) z[k] = U(rng);
    CHECK(rayleigh_quotient(op, z) >= 0.0);
    CHECK(rayleigh_quotient(op, z, EigenDenominator::kVolumePlusBoundary) >= 0.0);
  }
  const double q0 = rayleigh_quotient(op, bump);
  const OperatorAssembly shifted(m, Field(m, -1e4), flat_c2(m));
  const double qk = rayleigh_quotient(shifted, bump);
  CHECK(qk < 0.0);
  CHECK(qk == doctest::Approx(q0 - 1e4).epsilon(1e-12));
  CHECK(code_of([&] { rayleigh_quotient(op, Field(m, 0.0)); }) == ErrorCode::kDomain);
  CHECK(code_of([&] { rayleigh_quotient(op, Field(m, 1.0)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("principal eigenpair matches a dense full-spectrum solve on 8x8 meshes") {
  struct Case {
    int n, d;
    double h, c, c2_extra;
  };
  for (const Case cs : {Case{3, 1, 1.0, 0.0, 0.0}, Case{4, 2, 0.5, 0.0, 1.0}, Case{5, 4, 2.0, 0.0, 0.0},
                        Case{4, 1, 1.0, -40.0, 0.0}, Case{6, 3, 1.0, 2.5, 0.3}}) {
    const auto m = mesh(cs.n, cs.d, cs.h, 8);
    Field c2 = flat_c2(m);
    for (std::size_t k = 0; k < m->node_count(); ++k) c2[k] += cs.c2_extra;
    const OperatorAssembly op(m, Field(m, cs.c), c2);
    for (auto variant : {EigenDenominator::kVolume, EigenDenominator::kVolumePlusBoundary}) {
      const auto e = principal_eigen(op, variant);
      const double ref = smallest_generalized_eigenvalue(dense_operator(op, variant));
      CHECK(e.value == doctest::Approx(ref).epsilon(1e-8).scale(std::max(1.0, std::abs(ref))));
      CHECK(std::abs(e.value - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
      // ground state: positive on free nodes, zero on Dirichlet nodes, sup 1
      CHECK(e.vector.max() == doctest::Approx(1.0));
      for (std::size_t k = 0; k < m->node_count(); ++k) {
        if (m->dirichlet(k)) CHECK(e.vector[k] == 0.0);
        else CHECK(e.vector[k] > 0.0);
      }
      // variational characterization
      CHECK(rayleigh_quotient(op, e.vector, variant) == doctest::Approx(e.value).epsilon(1e-8));
      CHECK(rayleigh_quotient(op, e.vector, variant) >= e.value - 1e-10 * std::max(1.0, std::abs(e.value)));
      if (cs.c == 0.0) CHECK(e.value >= -1e-10);
      if (cs.c == -40.0) CHECK(e.value < 0.0);
    }
  }
}

TEST_CASE("boundary term in the denominator lowers the eigenvalue") {
  const auto m = mesh(3, 1, 1.0, 12);
  const auto op = OperatorAssembly::laplacian(m);
  const double a = principal_eigen(op, EigenDenominator::kVolume).value;
  const double b = principal_eigen(op, EigenDenominator::kVolumePlusBoundary).value;
  CHECK(a > 0.0);
  CHECK(b > 0.0);
  CHECK(b < a);
}
