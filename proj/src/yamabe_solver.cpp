#include "yamabe/yamabe_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "yamabe/error.hpp"

namespace yamabe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel(double v) { return std::max(1.0, std::abs(v)); }

double sup_abs(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s = std::max(s, std::abs(v));
  return s;
}

double powabs(double u, double p) { return std::pow(std::abs(u), p); }

// x^p - y^p without cancellation when x and y are close.
double pow_diff(double x, double y, double p) {
  if (x < 0.0 || y <= 0.0 || std::abs(x - y) > 0.5 * y) return powabs(x, p) - powabs(y, p);
  return std::pow(y, p) * std::expm1(p * std::log1p((x - y) / y));
}

bool robin(const Mesh& m, std::size_t k) { return m.tag(k) == BoundaryTag::kRobinCone; }

NonlinearProblem with_data(const NonlinearProblem& p, Field data) {
  NonlinearProblem q = p;
  q.dirichlet_data = std::move(data);
  return q;
}

bool cap_conditions_hold(const NonlinearProblem& pb, double S) {
  const Mesh& m = *pb.mesh;
  const double p = pb.cone().interior_power(), q = pb.cone().boundary_power();
  const double Sp = std::pow(S, p), Sq = std::pow(S, q);
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (m.dirichlet(k)) continue;
    const double c = pb.c[k], c0 = pb.c0[k];
    // derivative of (S^p - c) t - c0 t^p is smallest at t = S for c0 > 0, at t = 0 otherwise
    if (Sp - c - p * std::max(c0, 0.0) * Sp / S < 0.0) return false;
    if (c * S + c0 * Sp < 0.0) return false;
    if (robin(m, k)) {
      const double c2 = pb.c2_lin[k], c1 = pb.c1[k];
      if (Sq - c2 - q * std::max(c1, 0.0) * Sq / S < 0.0) return false;
      if (c2 * S + c1 * Sq < 0.0) return false;
    }
  }
  return true;
}

double cap_from(const NonlinearProblem& pb, double S) {
  while (!cap_conditions_hold(pb, S)) {
    S *= 2.0;
    if (S > 1e12) fail(ErrorCode::kOverflow, "cap search exceeded 1e12; coefficients inconsistent");
  }
  return S;
}

}  // namespace

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::kCompleteType: return "COMPLETE_TYPE";
    case Verdict::kBoundedType: return "BOUNDED_TYPE";
    case Verdict::kInconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

NonlinearProblem NonlinearProblem::flat(const MeshPtr& mesh, double c0, double c1, Field data) {
  NonlinearProblem pb;
  pb.mesh = mesh;
  pb.c0 = Field(mesh, c0);
  pb.c1 = Field(mesh, c1);
  pb.c = Field(mesh, 0.0);
  const ConeModel cone = mesh->cone();
  pb.c2_lin = Field::from_function(mesh, [&](double varrho, double) { return flat_robin_potential(cone, varrho); });
  pb.dirichlet_data = std::move(data);
  pb.validate();
  return pb;
}

NonlinearProblem NonlinearProblem::model(const MeshPtr& mesh) {
  const ModelSolution ms = exact_model_solution(mesh->cone());
  Field data = Field::from_function(mesh, [&](double varrho, double omega) {
    return ms.value(varrho * std::sin(omega));
  });
  return flat(mesh, ms.c0_star, ms.c1_star, std::move(data));
}

void NonlinearProblem::validate() const {
  if (!mesh) fail(ErrorCode::kInvalidArgument, "problem has no mesh");
  c0.require_on(*mesh, "c0");
  c1.require_on(*mesh, "c1");
  c.require_on(*mesh, "c");
  c2_lin.require_on(*mesh, "c2_lin");
  dirichlet_data.require_on(*mesh, "Dirichlet data");
  for (const Field* f : {&c0, &c1, &c, &c2_lin, &dirichlet_data})
    if (!f->all_finite()) fail(ErrorCode::kInvalidArgument, "problem fields must be finite");
}

double NonlinearProblem::c0_min() const {
  double v = kInf;
  for (std::size_t k = 0; k < mesh->node_count(); ++k) v = std::min(v, c0[k]);
  return v;
}

double NonlinearProblem::c1_min() const {
  double v = kInf;
  for (std::size_t k = 0; k < mesh->node_count(); ++k)
    if (robin(*mesh, k)) v = std::min(v, c1[k]);
  return v;
}

double pick_cap(const NonlinearProblem& problem) {
  problem.validate();
  const Mesh& m = *problem.mesh;
  double S = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k)
    if (m.dirichlet(k)) S = std::max(S, problem.dirichlet_data[k]);
  if (!(S > 0.0)) S = 1.0;
  return cap_from(problem, S);
}

Field discrete_residual(const NonlinearProblem& problem, const Field& u) {
  const Mesh& m = *problem.mesh;
  u.require_on(m, "candidate");
  const OperatorAssembly op(problem.mesh, problem.c, problem.c2_lin);
  std::vector<double> y(m.node_count());
  op.apply_weighted(u.values(), y);
  const double p = problem.cone().interior_power(), q = problem.cone().boundary_power();
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (m.dirichlet(k)) {
      y[k] = 0.0;
      continue;
    }
    y[k] += m.weight(k) * problem.c0[k] * powabs(u[k], p);
    if (robin(m, k)) {
      y[k] += m.surface_weight(k) * problem.c1[k] * powabs(u[k], q);
      y[k] /= m.surface_weight(k);
    } else {
      y[k] /= m.weight(k);
    }
  }
  return Field(problem.mesh, std::move(y));
}

double residual_sup(const NonlinearProblem& problem, const Field& u) {
  return sup_abs(discrete_residual(problem, u));
}

namespace {

// Sum of the absolute values of the terms in each strong-form row.
std::vector<double> row_magnitude(const NonlinearProblem& problem, const Field& u) {
  const Mesh& m = *problem.mesh;
  const OperatorAssembly op(problem.mesh, problem.c, problem.c2_lin);
  const std::size_t na = m.angular_count();
  const double p = problem.cone().interior_power(), q = problem.cone().boundary_power();
  std::vector<double> s(m.node_count(), 0.0);
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    s[k] += std::abs(op.reaction(k) * u[k]) + m.weight(k) * std::abs(problem.c0[k]) * powabs(u[k], p);
    if (robin(m, k)) s[k] += m.surface_weight(k) * std::abs(problem.c1[k]) * powabs(u[k], q);
    const double fr = op.radial_conductance(k) * (std::abs(u[k]) + (op.radial_conductance(k) != 0.0 ? std::abs(u[k + na]) : 0.0));
    const double fa = op.angular_conductance(k) * (std::abs(u[k]) + (op.angular_conductance(k) != 0.0 ? std::abs(u[k + 1]) : 0.0));
    s[k] += fr + fa;
    if (fr != 0.0) s[k + na] += fr;
    if (fa != 0.0) s[k + 1] += fa;
  }
  for (std::size_t k = 0; k < m.node_count(); ++k)
    s[k] /= robin(m, k) ? m.surface_weight(k) : m.weight(k);
  return s;
}

}  // namespace

SubSuperReport check_sub_super(const NonlinearProblem& problem, const Field& candidate, Side side) {
  const Mesh& m = *problem.mesh;
  const Field r = discrete_residual(problem, candidate);
  const std::vector<double> mag = row_magnitude(problem, candidate);
  const double sign = side == Side::kSub ? 1.0 : -1.0;
  SubSuperReport rep;
  rep.interior_margin = rep.robin_margin = rep.dirichlet_margin = rep.margin = -kInf;
  rep.relative_margin = -kInf;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    double v, scale;
    if (m.dirichlet(k)) {
      v = sign * (candidate[k] - problem.dirichlet_data[k]);
      scale = rel(problem.dirichlet_data[k]);
      rep.dirichlet_margin = std::max(rep.dirichlet_margin, v);
    } else {
      v = sign * r[k];
      scale = mag[k] > 0.0 ? mag[k] : 1.0;
      double& slot = robin(m, k) ? rep.robin_margin : rep.interior_margin;
      slot = std::max(slot, v);
    }
    if (v > rep.margin) {
      rep.margin = v;
      rep.worst_node = k;
    }
    rep.relative_margin = std::max(rep.relative_margin, v / scale);
  }
  return rep;
}

MonotoneResult monotone_iterate(const NonlinearProblem& problem, const Field& sub0, double S,
                                const MonotoneOptions& options, const Field* super0) {
  problem.validate();
  const MeshPtr& mesh = problem.mesh;
  const Mesh& m = *mesh;
  sub0.require_on(m, "initial subsolution");
  if (!(S > 0.0) || !std::isfinite(S)) fail(ErrorCode::kInvalidArgument, "cap must be positive");
  if (!(options.tol > 0.0) || options.max_iter < 1)
    fail(ErrorCode::kInvalidArgument, "tolerance and iteration limit must be positive");
  const double p = problem.cone().interior_power(), q = problem.cone().boundary_power();

  // Admissibility of the starting bracket up to rounding in each row.
  constexpr double kRowTol = 1e-10;
  const auto sub_check = check_sub_super(problem, sub0, Side::kSub);
  if (!sub_check.admissible_to(kRowTol))
    fail(ErrorCode::kInvalidArgument,
         "initial iterate is not a subsolution (margin " + num(sub_check.margin) + ")");
  Field sub = sub0;
  Field super = super0 ? *super0 : Field(mesh, S);
  if (super0) {
    super0->require_on(m, "initial supersolution");
    const auto sup_check = check_sub_super(problem, *super0, Side::kSuper);
    if (!sup_check.admissible_to(kRowTol))
      fail(ErrorCode::kInvalidArgument,
           "initial upper iterate is not a supersolution (margin " + num(sup_check.margin) + ")");
  }
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (sub[k] < -options.ordering_tol * rel(sub[k]) || sub[k] > super[k] + options.ordering_tol * rel(super[k]))
      fail(ErrorCode::kOrderingViolation, "initial bracket is not ordered at node " + std::to_string(k));
  }

  MonotoneResult out;
  SolverReport& rep = out.report;
  rep.cap = S;
  const std::size_t N = m.node_count();
  std::vector<double> P(N), P2(N), f_lo(N), f_up(N), f_gap(N), g_lo(N), g_up(N), g_gap(N);
  int it = 0;
  for (it = 1; it <= options.max_iter; ++it) {
    for (std::size_t k = 0; k < N; ++k) {
      if (options.policy == ShiftPolicy::kCapPower) {
        P[k] = std::pow(S, p);
        P2[k] = robin(m, k) ? std::pow(S, q) : 0.0;
      } else {
        const double t = std::max(super[k], 0.0);
        P[k] = std::max({problem.c[k], problem.c[k] + p * problem.c0[k] * std::pow(t, p - 1.0), 0.0});
        P2[k] = robin(m, k) ? std::max({problem.c2_lin[k],
                                         problem.c2_lin[k] + q * problem.c1[k] * std::pow(t, q - 1.0), 0.0})
                            : 0.0;
      }
    }
    const OperatorAssembly op(mesh, Field(mesh, P), Field(mesh, P2));
    if (options.strict_mmatrix && !op.certificate().ok)
      fail(ErrorCode::kMMatrixViolation, "linearized operator fails the M-matrix sign conditions");
    const MixedSolver solver(op, options.linear);
    // Where the bracket is narrow the lower branch is taken as the upper one
    // minus the solution for the gap, whose right-hand side F(u+) - F(u-) >= 0
    // is formed without cancelling the large shift terms; elsewhere it is
    // solved for directly.  All right-hand sides are non-negative.
    for (std::size_t k = 0; k < N; ++k) {
      const double gap = super[k] - sub[k];
      f_up[k] = (P[k] - problem.c[k]) * super[k] - problem.c0[k] * powabs(super[k], p);
      g_up[k] = (P2[k] - problem.c2_lin[k]) * super[k] - problem.c1[k] * powabs(super[k], q);
      f_gap[k] = std::max(0.0, (P[k] - problem.c[k]) * gap - problem.c0[k] * pow_diff(super[k], sub[k], p));
      g_gap[k] = std::max(0.0, (P2[k] - problem.c2_lin[k]) * gap - problem.c1[k] * pow_diff(super[k], sub[k], q));
      f_lo[k] = std::max(0.0, (P[k] - problem.c[k]) * sub[k] - problem.c0[k] * powabs(sub[k], p));
      g_lo[k] = std::max(0.0, (P2[k] - problem.c2_lin[k]) * sub[k] - problem.c1[k] * powabs(sub[k], q));
    }
    const Field gup(mesh, g_up), glo(mesh, g_lo), ggap(mesh, g_gap);
    auto up = solver.solve(Field(mesh, f_up), &gup, problem.dirichlet_data);
    auto lo = solver.solve(Field(mesh, f_lo), &glo, problem.dirichlet_data);
    const auto narrow = solver.solve(Field(mesh, f_gap), &ggap, Field(mesh, 0.0));
    for (std::size_t k = 0; k < N; ++k) {
      const double g = narrow.solution[k];
      if (g < 0.5 * up.solution[k]) lo.solution[k] = up.solution[k] - g;
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.linear_residual = std::max(lo.relative_residual, up.relative_residual);
    const Field& nlo = lo.solution;
    const Field& nup = up.solution;
    double defect = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      rec.lower_increment = std::max(rec.lower_increment, std::abs(nlo[k] - sub[k]) / rel(nlo[k]));
      rec.upper_increment = std::max(rec.upper_increment, std::abs(nup[k] - super[k]) / rel(nup[k]));
      rec.gap = std::max(rec.gap, nup[k] - nlo[k]);
      defect = std::max(defect, (sub[k] - nlo[k]) / rel(sub[k]));    // lower branch must not decrease
      defect = std::max(defect, (nup[k] - super[k]) / rel(super[k]));  // upper branch must not increase
      defect = std::max(defect, (nlo[k] - nup[k]) / rel(nup[k]));
      if (!super0) defect = std::max(defect, (nup[k] - S) / rel(S));
    }
    rec.ordering_defect = defect;
    rep.max_ordering_defect = std::max(rep.max_ordering_defect, defect);
    rep.trace.push_back(rec);
    if (defect > options.ordering_tol)
      fail(ErrorCode::kOrderingViolation,
           "bracket ordering broken by " + num(defect) + " at iteration " + std::to_string(it) +
               "; refine the mesh");
    sub = nlo;
    super = nup;
    if (rec.lower_increment < options.tol && rec.upper_increment < options.tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged)
    fail(ErrorCode::kNonConvergence, "monotone iteration did not converge in " +
                                         std::to_string(options.max_iter) + " iterations (increment " +
                                         num(rep.trace.back().lower_increment) + ")");
  rep.iterations = std::min(it, options.max_iter);
  rep.final_increment = rep.trace.back().lower_increment;
  rep.residual_sup = residual_sup(problem, sub);
  rep.solution = sub;
  out.bracket = BracketState{sub, super, S, rep.iterations};
  return out;
}

std::vector<std::size_t> interior_probe_nodes(const Mesh& mesh) {
  std::vector<double> rhos;
  for (std::size_t k = 0; k < mesh.node_count(); ++k)
    if (!mesh.dirichlet(k)) rhos.push_back(mesh.rho(k));
  if (rhos.empty()) return {};
  std::nth_element(rhos.begin(), rhos.begin() + rhos.size() / 2, rhos.end());
  const double median = rhos[rhos.size() / 2];
  std::vector<std::size_t> probe;
  for (std::size_t k = 0; k < mesh.node_count(); ++k) {
    if (mesh.dirichlet(k) || mesh.angular_index(k) <= std::size_t(mesh.inner_layer_nodes()) + 1) continue;
    const std::size_t i = mesh.radial_index(k);
    if (i <= 1 || i + 2 >= mesh.radial_count()) continue;
    if (mesh.rho(k) >= median) probe.push_back(k);
  }
  return probe;
}

std::vector<double> geometric_data_sequence(int k) {
  std::vector<double> seq;
  for (int i = 0; i <= k; ++i) seq.push_back(std::ldexp(1.0, i));
  return seq;
}

ExhaustionResult exhaustion_blowup_solve(const NonlinearProblem& problem,
                                         const std::vector<double>& data_sequence,
                                         const ExhaustionOptions& options) {
  problem.validate();
  if (data_sequence.empty()) fail(ErrorCode::kInvalidArgument, "empty data sequence");
  for (std::size_t i = 0; i < data_sequence.size(); ++i) {
    if (!(data_sequence[i] > 0.0) || (i > 0 && !(data_sequence[i] > data_sequence[i - 1])))
      fail(ErrorCode::kInvalidArgument, "data sequence must be positive and increasing");
  }
  const MeshPtr& mesh = problem.mesh;
  const Mesh& m = *mesh;
  ExhaustionResult res;
  res.probe_nodes = interior_probe_nodes(m);
  const bool nonneg = problem.c0_min() >= 0.0 && problem.c1_min() >= 0.0;

  for (std::size_t i = 0; i < data_sequence.size(); ++i) {
    const double mi = data_sequence[i];
    Field data = problem.dirichlet_data;
    for (std::size_t k = 0; k < m.node_count(); ++k)
      if (m.tag(k) == BoundaryTag::kDirichletInnerAngular) data[k] = mi;
    const NonlinearProblem pb = with_data(problem, std::move(data));
    double S = pick_cap(pb);

    Field sub0 = res.runs.empty() ? Field(mesh, 0.0) : res.runs.back().solution;
    std::optional<Field> super0;
    if (!res.runs.empty() && nonneg && mi <= 2.0 * data_sequence[i - 1]) {
      // twice the previous solution dominates the new data and is a supersolution
      Field cand = res.runs.back().solution;
      for (double& v : cand.data()) v *= 2.0;
      if (check_sub_super(pb, cand, Side::kSuper).admissible_to(1e-10)) {
        super0 = std::move(cand);
        S = cap_from(pb, std::max(S, super0->max()));
      }
    }
    MonotoneResult mr = monotone_iterate(pb, sub0, S, options.monotone, super0 ? &*super0 : nullptr);

    if (!res.runs.empty()) {
      const Field& prev = res.runs.back().solution;
      const Field& cur = mr.report.solution;
      double change = 0.0, scale = 0.0;
      for (std::size_t k : res.probe_nodes) {
        change = std::max(change, cur[k] - prev[k]);
        scale = std::max(scale, std::abs(cur[k]));
      }
      for (std::size_t k = 0; k < m.node_count(); ++k)
        res.monotonicity_defect = std::max(res.monotonicity_defect, (prev[k] - cur[k]) / rel(prev[k]));
      res.probe_change.push_back(scale > 0.0 ? change / scale : change);
    }
    res.data_values.push_back(mi);
    res.runs.push_back(std::move(mr.report));
    if (res.monotonicity_defect > 1e-9)
      fail(ErrorCode::kMonotonicityViolation,
           "exhaustion solutions decreased in the data by " + num(res.monotonicity_defect));
    if (!res.probe_change.empty() && res.probe_change.back() < options.stabilization_tol) {
      res.stabilized = true;
      if (options.stop_when_stable) break;
    } else {
      res.stabilized = false;
    }
  }
  if (!res.stabilized)
    fail(ErrorCode::kNoStabilization,
         "interior probe values still changing by " +
             num(res.probe_change.empty() ? kInf : res.probe_change.back()) +
             " at data " + num(data_sequence.back()));
  return res;
}

BlowupFit fit_blowup_exponent(const Field& solution, double rho_lo, double rho_hi) {
  const Mesh& m = solution.mesh();
  const std::size_t i = m.mid_radial_index();
  const double a = m.cone().exponent();
  BlowupFit fit;
  fit.completeness = kInf;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t j = 0; j < m.angular_count(); ++j) {
    const std::size_t k = m.index(i, j);
    const double rho = m.rho(k);
    if (rho < rho_lo || rho > rho_hi) continue;
    const double u = solution[k];
    if (!(u > 0.0)) fail(ErrorCode::kDegenerateWindow, "non-positive value inside the fit window");
    const double x = -std::log(rho), y = std::log(u);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++fit.samples;
    fit.completeness = std::min(fit.completeness, u * std::pow(rho, a));
    fit.sup = std::max(fit.sup, u);
  }
  if (fit.samples < 4)
    fail(ErrorCode::kDegenerateWindow, "fit window holds " + std::to_string(fit.samples) + " nodes (need 4)");
  const double n = double(fit.samples);
  const double vxx = sxx - sx * sx / n, vxy = sxy - sx * sy / n, vyy = syy - sy * sy / n;
  if (!(vxx > 0.0)) fail(ErrorCode::kDegenerateWindow, "fit window has no spread in rho");
  fit.alpha = vxy / vxx;
  fit.r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  return fit;
}

Verdict classify(const ConeModel& cone, const BlowupFit& fit, double sup_variation,
                 double completeness_variation, const VerdictRule& rule) {
  const double a = cone.exponent();
  if (fit.alpha >= rule.complete_fraction * a && fit.completeness > 0.0 &&
      completeness_variation < rule.completeness_stability)
    return Verdict::kCompleteType;
  if (fit.alpha <= rule.bounded_fraction * a && sup_variation < rule.sup_stability) return Verdict::kBoundedType;
  return Verdict::kInconclusive;
}

MaximalResult maximal_solution(const ProblemFactory& factory, const MeshPtr& base, int truncations,
                               int nodes_per_halving, const MaximalOptions& options) {
  if (truncations < 2) fail(ErrorCode::kInvalidArgument, "need at least two truncations");
  if (!(options.rho_hi > options.rho_lo)) fail(ErrorCode::kDegenerateWindow, "empty fit window");
  MaximalResult res;
  for (int t = 0; t < truncations; ++t) {
    TruncationRun run;
    run.mesh = t == 0 ? base : res.runs.back().mesh->extend_toward_axis(1, nodes_per_halving);
    run.mesh = run.mesh->with_inner_layer(options.inner_layer_nodes, options.inner_layer_ratio);
    run.omega_min = run.mesh->domain().omega_min;
    run.exhaustion = exhaustion_blowup_solve(factory(run.mesh), options.data_sequence, options.exhaustion);
    try {
      run.fit = fit_blowup_exponent(run.exhaustion.last().solution, options.rho_lo, options.rho_hi);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateWindow || t + 2 >= truncations) throw;
    }
    if (!res.runs.empty()) {
      const TruncationRun& prev = res.runs.back();
      const Mesh& pm = *prev.mesh;
      const Mesh& cm = *run.mesh;
      const int off = pm.angular_offset_in(cm);
      if (off < 0) fail(ErrorCode::kInvalidArgument, "truncation meshes are not nested");
      const Field& up = prev.exhaustion.last().solution;
      const Field& uc = run.exhaustion.last().solution;
      double defect = 0.0;
      for (std::size_t i = 0; i < pm.radial_count(); ++i)
        for (std::size_t j = 0; j < pm.angular_count(); ++j) {
          const double a = up[pm.index(i, j)], b = uc[cm.index(i, j + std::size_t(off))];
          defect = std::max(defect, (b - a) / rel(a));
        }
      res.monotonicity_defect = std::max(res.monotonicity_defect, defect);
      if (defect > options.monotonicity_tol)
        fail(ErrorCode::kMonotonicityViolation,
             "maximal-solution sequence increased by " + num(defect) + " at truncation " +
                 std::to_string(t));
    }
    res.runs.push_back(std::move(run));
  }
  const BlowupFit& a = *res.runs[res.runs.size() - 2].fit;
  const BlowupFit& b = *res.runs.back().fit;
  res.sup_variation = std::abs(b.sup - a.sup) / a.sup;
  res.completeness_variation =
      a.completeness > 0.0 ? std::abs(b.completeness - a.completeness) / a.completeness : kInf;
  res.report = res.runs.back().exhaustion.last();
  res.report.fitted_exponent = b.alpha;
  res.report.completeness_indicator = b.completeness;
  res.report.verdict =
      classify(base->cone(), b, res.sup_variation, res.completeness_variation, options.verdict);
  return res;
}

BarrierFit barrier_psi_fit(const NonlinearProblem& problem, double band_rho) {
  problem.validate();
  const Mesh& m = *problem.mesh;
  const ConeModel& cone = problem.cone();
  const int n = cone.n, d = cone.d;
  const double a = cone.exponent(), p = cone.interior_power(), q = cone.boundary_power();
  if (!(band_rho > 0.0)) {
    double lo = kInf, hi = 0.0;
    for (std::size_t k = 0; k < m.node_count(); ++k) {
      if (m.dirichlet(k)) continue;
      lo = std::min(lo, m.rho(k));
      hi = std::max(hi, m.rho(k));
    }
    band_rho = lo + 0.25 * (hi - lo);
  }
  BarrierFit fit;
  fit.band_rho = band_rho;
  double sup_c = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k)
    if (!m.dirichlet(k) && m.rho(k) <= band_rho) sup_c = std::max(sup_c, std::abs(problem.c[k]));
  const double r_norm = 4.0 * (n - 1) / (n - 2) * sup_c;

  fit.lhs_interior = fit.lhs_boundary = -kInf;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (m.dirichlet(k) || m.rho(k) > band_rho) continue;
    const double rho = m.rho(k);
    fit.lhs_interior = std::max(fit.lhs_interior, (n - d - 1) - 0.5 * n + r_norm * rho * rho / (n - 1));
    if (robin(m, k))
      fit.lhs_boundary = std::max(fit.lhs_boundary, -cone.cos_theta() + 2.0 * rho * problem.c2_lin[k] / (n - 2));
  }
  if (fit.lhs_interior == -kInf) fail(ErrorCode::kDegenerateWindow, "near-Gamma band holds no nodes");
  fit.c1_margin = -std::max(fit.lhs_interior, fit.lhs_boundary);
  fit.feasible = fit.c1_margin > 0.0;
  if (!fit.feasible) return fit;

  // Largest C with C rho^{-a} a subsolution on the band.
  const double c0_star = 0.25 * (n - 2) * (2 * d + 2 - n);
  double c_star = kInf;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (m.dirichlet(k) || m.rho(k) > band_rho) continue;
    const double rho = m.rho(k);
    const double top = c0_star - problem.c[k] * rho * rho;
    if (top <= 0.0) {
      c_star = 0.0;
      break;
    }
    if (problem.c0[k] > 0.0) c_star = std::min(c_star, std::pow(top / problem.c0[k], 1.0 / (p - 1.0)));
    if (robin(m, k)) {
      const double btop = a * cone.cos_theta() - problem.c2_lin[k] * rho;
      if (btop <= 0.0) {
        c_star = 0.0;
        break;
      }
      if (problem.c1[k] > 0.0) c_star = std::min(c_star, std::pow(btop / problem.c1[k], 1.0 / (q - 1.0)));
    }
  }
  fit.c_star = std::isfinite(c_star) ? c_star : 0.0;
  fit.feasible = fit.c_star > 0.0;
  return fit;
}

double psi_lower_bound_margin(const BarrierFit& fit, const NonlinearProblem& problem, const Field& u) {
  const Mesh& m = *problem.mesh;
  u.require_on(m, "solution");
  const double a = problem.cone().exponent();
  const double shift = fit.c_star * std::pow(fit.band_rho, -a);
  double margin = kInf;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    if (m.dirichlet(k) || m.rho(k) > fit.band_rho) continue;
    margin = std::min(margin, u[k] - (fit.c_star * std::pow(m.rho(k), -a) - shift));
  }
  return margin;
}

UpperBarrierReport upper_barrier_check(const Field& solution, const NonlinearProblem& problem, double k) {
  const Mesh& m = *problem.mesh;
  solution.require_on(m, "solution");
  if (!(k > 0.0 && k < 1.0)) fail(ErrorCode::kInvalidArgument, "ball ratio must lie in (0, 1)");
  const ConeModel& cone = problem.cone();
  const int n = cone.n;
  const double a = cone.exponent(), p = cone.interior_power();
  const ReducedDomain& dom = m.domain();
  const std::size_t ic = m.mid_radial_index();

  struct Ball {
    double vc, wc, radius;
  };
  std::vector<Ball> balls;
  for (std::size_t j = 0; j < m.angular_count(); ++j) {
    const std::size_t kc = m.index(ic, j);
    if (m.dirichlet(kc) || robin(m, kc)) continue;
    const double vc = m.varrho(kc), wc = m.omega(kc);
    const double radius = k * m.rho(kc);
    const double room = std::min({vc * std::sin(cone.theta - wc), vc * std::sin(wc - dom.omega_min),
                                  vc - dom.rho_polar_min, dom.rho_polar_max - vc});
    if (radius < room) balls.push_back({vc, wc, radius});
  }
  UpperBarrierReport rep;
  rep.balls = balls.size();
  if (balls.empty()) return rep;

  auto dist2 = [](double v1, double w1, double v2, double w2) {
    return v1 * v1 + v2 * v2 - 2.0 * v1 * v2 * std::cos(w1 - w2);
  };
  // Smallest C1 with -Lap w + c w + c0 w^p >= 0 on every ball:
  // c0 C1^{p-1} >= n(n-2) - c (R^2 - s^2)^2 / R^2.
  double c1 = 0.0;
  for (const Ball& b : balls) {
    for (std::size_t kk = 0; kk < m.node_count(); ++kk) {
      const double s2 = dist2(m.varrho(kk), m.omega(kk), b.vc, b.wc);
      const double R2 = b.radius * b.radius;
      if (s2 >= R2) continue;
      const double need = n * (n - 2) - problem.c[kk] * (R2 - s2) * (R2 - s2) / R2;
      if (need <= 0.0) continue;
      if (!(problem.c0[kk] > 0.0)) fail(ErrorCode::kDomain, "upper barrier needs c0 > 0");
      c1 = std::max(c1, std::pow(need / problem.c0[kk], 1.0 / (p - 1.0)));
    }
  }
  rep.c1 = c1;
  rep.c3 = c1 * std::pow(k, -a);
  for (const Ball& b : balls) {
    const double R2 = b.radius * b.radius;
    for (std::size_t kk = 0; kk < m.node_count(); ++kk) {
      const double s2 = dist2(m.varrho(kk), m.omega(kk), b.vc, b.wc);
      if (s2 >= R2) continue;
      const double w = c1 * std::pow(b.radius, a) / std::pow(R2 - s2, a);
      const double ratio = solution[kk] / w;
      rep.worst_ratio = std::max(rep.worst_ratio, ratio);
      if (ratio > 1.0 + 1e-12) rep.failure_nodes.push_back(kk);
    }
  }
  std::sort(rep.failure_nodes.begin(), rep.failure_nodes.end());
  rep.failure_nodes.erase(std::unique(rep.failure_nodes.begin(), rep.failure_nodes.end()), rep.failure_nodes.end());
  return rep;
}

}  // namespace yamabe
