#include <cmath>
#include <random>

#include "doctest.h"
#include "yamabe/error.hpp"
#include "yamabe/yamabe_solver.hpp"

using namespace yamabe;

namespace {

MeshPtr power_mesh(int n, int d, int N, double w0 = 0.1) {
  return Mesh::build(ReducedDomain{ConeModel::make(n, d, 1.0), 0.5, 2.0, w0}, N, N, 2.0);
}

MeshPtr geometric_mesh(int n, int d, int N, double w0 = 0.05, int layer = 12) {
  auto m = Mesh::build_geometric(ReducedDomain{ConeModel::make(n, d, 1.0), 0.5, 2.0, w0}, N, N);
  return layer > 0 ? m->with_inner_layer(layer, 4.0) : m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

Field exact_profile(const MeshPtr& m) {
  const double a = m->cone().exponent();
  return Field::from_function(m, [&](double v, double w) { return std::pow(v * std::sin(w), -a); });
}

MonotoneResult solve(const NonlinearProblem& pb, const MonotoneOptions& o = {}) {
  return monotone_iterate(pb, Field(pb.mesh, 0.0), pick_cap(pb), o);
}

double residual_bound(const NonlinearProblem& pb, const MonotoneOptions& o, double S) {
  return 10 * o.tol * (1 + std::pow(S, pb.cone().interior_power()));
}

// A problem with zero coefficients and zero linear potentials.
NonlinearProblem linear_problem(const MeshPtr& m, double data) {
  NonlinearProblem pb = NonlinearProblem::flat(m, 0.0, 0.0, Field(m, data));
  pb.c2_lin = Field(m, 0.0);
  return pb;
}

}  // namespace

TEST_CASE("cap of a linear problem is the data bound") {
  const auto m = power_mesh(3, 1, 8);
  CHECK(pick_cap(linear_problem(m, 1.0)) == 1.0);
  CHECK(pick_cap(linear_problem(m, 3.0)) == 3.0);
}

TEST_CASE("cap of the model problem satisfies both derivative conditions") {
  const auto m = power_mesh(3, 1, 16);
  const auto pb = NonlinearProblem::model(m);
  const double S = pick_cap(pb);
  double umax = 0;
  for (std::size_t k = 0; k < m->node_count(); ++k)
    if (m->dirichlet(k)) umax = std::max(umax, pb.dirichlet_data[k]);
  CHECK(S >= umax);
  const double p = 5.0, q = 3.0;
  for (std::size_t k = 0; k < m->node_count(); ++k) {
    if (m->dirichlet(k)) continue;
    // d/dt [(S^p - c) t - c0 t^p] at t = S
    CHECK(std::pow(S, p) - pb.c[k] - p * pb.c0[k] * std::pow(S, p - 1) >= 0.0);
    if (m->tag(k) == BoundaryTag::kRobinCone)
      CHECK(std::pow(S, q) - pb.c2_lin[k] - q * pb.c1[k] * std::pow(S, q - 1) >= 0.0);
  }
  NonlinearProblem bad = pb;
  bad.c = Field(m, 1e80);
  CHECK(code_of([&] { pick_cap(bad); }) == ErrorCode::kOverflow);
}

TEST_CASE("linear problem converges to the constant data at once") {
  const auto m = power_mesh(4, 2, 12);
  const auto r = solve(linear_problem(m, 2.0));
  CHECK(r.report.converged);
  CHECK(r.report.iterations <= 2);
  for (std::size_t k = 0; k < m->node_count(); ++k) CHECK(r.report.solution[k] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("model problem: solution within O(mesh^2) of the exact profile") {
  std::vector<double> err;
  auto m = power_mesh(3, 1, 16);
  for (int level = 0; level < 2; ++level, m = m->refine()) {
    const auto pb = NonlinearProblem::model(m);
    MonotoneOptions o;
    const double S = pick_cap(pb);
    const auto r = monotone_iterate(pb, Field(m, 0.0), S, o);
    CHECK(r.report.converged);
    CHECK(r.report.max_ordering_defect <= 1e-12);
    CHECK(r.report.residual_sup <= residual_bound(pb, o, S));
    const Field ex = exact_profile(m);
    double e = 0;
    for (std::size_t k = 0; k < m->node_count(); ++k) e = std::max(e, std::abs(r.report.solution[k] - ex[k]));
    err.push_back(e);
    // bracket at the end: sub <= super, both near the solution
    for (std::size_t k = 0; k < m->node_count(); ++k)
      CHECK(r.bracket.sub[k] <= r.bracket.super[k] * (1 + 1e-12));
  }
  CHECK(std::log2(err[0] / err[1]) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("both shift policies reach the same solution") {
  const auto m = power_mesh(4, 2, 12);
  const auto pb = NonlinearProblem::model(m);
  MonotoneOptions a, b;
  b.policy = ShiftPolicy::kCapPower;
  b.max_iter = 200000;
  // the cap shift contracts slowly, so its increments understate the error
  b.tol = 1e-12;
  const auto ra = solve(pb, a), rb = solve(pb, b);
  CHECK(ra.report.iterations < rb.report.iterations);
  for (std::size_t k = 0; k < m->node_count(); ++k)
    CHECK(std::abs(ra.report.solution[k] - rb.report.solution[k]) <= 10 * a.tol * std::max(1.0, ra.report.solution[k]));
  CHECK(rb.report.max_ordering_defect <= 1e-12);
}

TEST_CASE("doubling the cap does not change the solution") {
  const auto m = power_mesh(3, 1, 12);
  const auto pb = NonlinearProblem::model(m);
  const double S = pick_cap(pb);
  const auto r1 = monotone_iterate(pb, Field(m, 0.0), S);
  const auto r2 = monotone_iterate(pb, Field(m, 0.0), 2 * S);
  for (std::size_t k = 0; k < m->node_count(); ++k)
    CHECK(std::abs(r1.report.solution[k] - r2.report.solution[k]) <= 1e-8 * std::max(1.0, r1.report.solution[k]));
}

TEST_CASE("sub and supersolution checks") {
  const auto m = power_mesh(3, 1, 12);
  const auto pb = NonlinearProblem::model(m);
  CHECK(check_sub_super(pb, Field(m, 0.0), Side::kSub).admissible());
  Field twice = exact_profile(m);
  for (double& v : twice.data()) v *= 2;
  CHECK(check_sub_super(pb, twice, Side::kSuper).admissible());
  CHECK_FALSE(check_sub_super(pb, twice, Side::kSub).admissible());

  // negative potentials: a small constant is a subsolution when
  // c eps + c0 eps^p <= 0 and c2 eps + c1 eps^q <= 0
  NonlinearProblem neg = NonlinearProblem::flat(m, 1.0, 1.0, Field(m, 1.0));
  neg.c = Field(m, -1.0);
  neg.c2_lin = Field(m, -1.0);
  CHECK(check_sub_super(neg, Field(m, 0.1), Side::kSub).admissible());
  CHECK_FALSE(check_sub_super(neg, Field(m, 2.0), Side::kSub).admissible());
  CHECK(code_of([&] { monotone_iterate(pb, twice, pick_cap(pb)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("larger coefficients give smaller solutions, larger data larger ones") {
  const auto m = power_mesh(4, 2, 12);
  const auto pb = NonlinearProblem::model(m);
  NonlinearProblem heavy = pb;
  for (double& v : heavy.c0.data()) v *= 2;
  NonlinearProblem heavy1 = pb;
  for (double& v : heavy1.c1.data()) v *= 2;
  NonlinearProblem more = pb;
  for (double& v : more.dirichlet_data.data()) v *= 1.5;
  const Field u = solve(pb).report.solution;
  const Field u0 = solve(heavy).report.solution;
  const Field u1 = solve(heavy1).report.solution;
  const Field ud = solve(more).report.solution;
  for (std::size_t k = 0; k < m->node_count(); ++k) {
    if (m->dirichlet(k)) continue;
    CHECK(u0[k] < u[k]);
    CHECK(u1[k] <= u[k]);
    CHECK(ud[k] > u[k]);
    CHECK(u[k] > 0.0);
  }
}

TEST_CASE("comparison principle over random ordered coefficients and data") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto m = power_mesh(3, 1, 8);
  for (int t = 0; t < 10; ++t) {
    NonlinearProblem a = NonlinearProblem::model(m), b = a;
    for (std::size_t k = 0; k < m->node_count(); ++k) {
      a.c0[k] = 0.1 + U(rng);
      b.c0[k] = a.c0[k] + U(rng);
      a.c1[k] = 0.1 + U(rng);
      b.c1[k] = a.c1[k] + U(rng);
      b.dirichlet_data[k] = 0.5 + 2 * U(rng);
      a.dirichlet_data[k] = b.dirichlet_data[k] + U(rng);
    }
    const Field ua = solve(a).report.solution, ub = solve(b).report.solution;
    for (std::size_t k = 0; k < m->node_count(); ++k) CHECK(ub[k] <= ua[k] * (1 + 1e-12));
  }
}

TEST_CASE("exhaustion on the model problem") {
  const auto m = geometric_mesh(3, 1, 16);
  const auto pb = NonlinearProblem::model(m);
  ExhaustionOptions o;
  o.stabilization_tol = 1e-3;
  o.stop_when_stable = false;
  const auto r = exhaustion_blowup_solve(pb, geometric_data_sequence(12), o);
  CHECK(r.stabilized);
  CHECK(r.monotonicity_defect <= 1e-12);
  CHECK(r.probe_change.back() < r.probe_change.front());
  CHECK(r.probe_change.back() < 1e-3);
  // solutions increase with the data
  for (std::size_t i = 1; i < r.runs.size(); ++i)
    for (std::size_t k = 0; k < m->node_count(); ++k)
      CHECK(r.runs[i].solution[k] >= r.runs[i - 1].solution[k] * (1 - 1e-12));
  // once the data exceed u* on the inner face the solution dominates the
  // solution with data u*
  const Field base = solve(pb).report.solution;
  for (std::size_t k = 0; k < m->node_count(); ++k) CHECK(r.last().solution[k] >= base[k] * (1 - 1e-10));
  // heavier c0 gives smaller stabilized values
  NonlinearProblem heavy = pb;
  for (double& v : heavy.c0.data()) v *= 4;
  const auto rh = exhaustion_blowup_solve(heavy, geometric_data_sequence(12), o);
  for (std::size_t k : r.probe_nodes) CHECK(rh.last().solution[k] < r.last().solution[k]);
}

TEST_CASE("exhaustion stabilizes in the threshold case n = 4, d = 1") {
  const auto m = geometric_mesh(4, 1, 16);
  const auto pb = NonlinearProblem::flat(m, 1.0, 0.5, Field(m, 1.0));
  ExhaustionOptions o;
  o.stabilization_tol = 1e-3;
  const auto r = exhaustion_blowup_solve(pb, geometric_data_sequence(24), o);
  CHECK(r.stabilized);
  CHECK(r.monotonicity_defect <= 1e-12);
  ExhaustionOptions strict = o;
  strict.stabilization_tol = 1e-12;
  CHECK(code_of([&] { exhaustion_blowup_solve(pb, geometric_data_sequence(2), strict); }) == ErrorCode::kNoStabilization);
  CHECK(code_of([&] { exhaustion_blowup_solve(pb, {2.0, 1.0}, o); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("probe set stays away from the Dirichlet faces") {
  const auto m = geometric_mesh(4, 2, 16);
  const auto probe = interior_probe_nodes(*m);
  CHECK(!probe.empty());
  for (std::size_t k : probe) {
    CHECK_FALSE(m->dirichlet(k));
    CHECK(m->angular_index(k) > std::size_t(m->inner_layer_nodes()) + 1);
  }
}

TEST_CASE("blow-up exponent fit") {
  const auto m = geometric_mesh(3, 1, 16, 0.01, 0);
  const Field u = exact_profile(m);
  const auto fit = fit_blowup_exponent(u, 0.01, 0.5);
  CHECK(fit.alpha == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.completeness == doctest::Approx(1.0).epsilon(1e-12));
  Field v(m, 0.0);
  for (std::size_t k = 0; k < m->node_count(); ++k) v[k] = 3 * std::pow(m->rho(k), -0.17);
  CHECK(fit_blowup_exponent(v, 0.01, 0.5).alpha == doctest::Approx(0.17).epsilon(1e-12));
  CHECK(code_of([&] { fit_blowup_exponent(u, 0.3, 0.31); }) == ErrorCode::kDegenerateWindow);
}

TEST_CASE("verdict rule") {
  const ConeModel c = ConeModel::make(4, 1, 1.0);
  const VerdictRule rule;
  BlowupFit f;
  f.alpha = 0.95;
  f.completeness = 0.5;
  CHECK(classify(c, f, 0.0, 0.001, rule) == Verdict::kCompleteType);
  CHECK(classify(c, f, 0.0, 0.05, rule) == Verdict::kInconclusive);
  f.alpha = 0.1;
  CHECK(classify(c, f, 0.01, 1.0, rule) == Verdict::kBoundedType);
  CHECK(classify(c, f, 0.2, 1.0, rule) == Verdict::kInconclusive);
  f.alpha = 0.5;
  CHECK(classify(c, f, 0.0, 0.0, rule) == Verdict::kInconclusive);
}

TEST_CASE("maximal solution of the model problem decreases over truncations and tracks u*") {
  const auto base = Mesh::build_geometric(ReducedDomain{ConeModel::make(3, 1, 1.0), 0.5, 2.0, 0.05}, 16, 16);
  MaximalOptions o;
  o.exhaustion.stabilization_tol = 1e-3;
  o.exhaustion.stop_when_stable = false;
  o.data_sequence = geometric_data_sequence(18);
  o.rho_lo = 0.01;
  o.rho_hi = 0.1;
  o.inner_layer_nodes = 12;
  const auto r = maximal_solution([](const MeshPtr& m) { return NonlinearProblem::model(m); }, base, 6,
                                  base->natural_nodes_per_halving(), o);
  CHECK(r.monotonicity_defect <= 1e-6);
  CHECK(r.report.fitted_exponent.has_value());
  CHECK(*r.report.fitted_exponent == doctest::Approx(0.5).epsilon(0.1));
  CHECK(r.report.completeness_indicator > 0.0);
  // relative distance to u* on the fit window of the last truncation
  const Field& u = r.report.solution;
  const Mesh& m = u.mesh();
  const std::size_t i = m.mid_radial_index();
  for (std::size_t j = 0; j < m.angular_count(); ++j) {
    const std::size_t k = m.index(i, j);
    if (m.rho(k) < 0.01 || m.rho(k) > 0.1) continue;
    CHECK(u[k] * std::sqrt(m.rho(k)) == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("lower barrier feasibility and domination") {
  const auto m = power_mesh(3, 1, 16, 0.05);
  const auto pb = NonlinearProblem::model(m);
  const auto fit = barrier_psi_fit(pb);
  CHECK(fit.feasible);
  // rho Lap rho - n/2 = (n-d-1) - n/2 = -1/2 on the flat model with c = 0
  CHECK(fit.lhs_interior == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.c1_margin > 0.0);
  CHECK(fit.c_star > 0.0);
  const Field u = solve(pb).report.solution;
  CHECK(psi_lower_bound_margin(fit, pb, u) >= 0.0);

  const auto m41 = power_mesh(4, 1, 16, 0.05);
  const auto f41 = barrier_psi_fit(NonlinearProblem::flat(m41, 1.0, 0.5, Field(m41, 1.0)));
  CHECK_FALSE(f41.feasible);
  CHECK(f41.lhs_interior == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("upper barrier on interior balls") {
  const auto m = power_mesh(4, 2, 24, 0.05);
  const auto pb = NonlinearProblem::model(m);
  const auto r = upper_barrier_check(exact_profile(m), pb);
  CHECK(r.balls > 0);
  CHECK(r.failure_nodes.empty());
  CHECK(r.c3 >= 1.0 / 4);
  CHECK(r.c3 <= 4.0);
  const auto rk = upper_barrier_check(Field(m, 1.0), pb);
  CHECK(rk.failure_nodes.empty());
}
