#include "yamabe/cone_geometry.hpp"

#include <cmath>
#include <string>

#include "yamabe/error.hpp"

namespace yamabe {

namespace {

void require_dimension(int n) {
  if (n < 3) fail(ErrorCode::kDomain, "dimension n must be >= 3, got " + std::to_string(n));
}

void require_slope(double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    fail(ErrorCode::kDomain, "cone slope h must be finite and > 0");
}

}  // namespace

ConeModel ConeModel::make(int n, int d, double h) {
  require_dimension(n);
  if (d < 1 || d > n - 1)
    fail(ErrorCode::kDomain, "singular dimension d must lie in [1, n-1], got " + std::to_string(d));
  require_slope(h);
  ConeModel cone;
  cone.n = n;
  cone.d = d;
  cone.h = h;
  // arccot(h) for h > 0
  cone.theta = std::atan2(1.0, h);
  return cone;
}

double ConeModel::cos_theta() const { return h / std::sqrt(1.0 + h * h); }
double ConeModel::sin_theta() const { return 1.0 / std::sqrt(1.0 + h * h); }

double ModelSolution::value(double rho) const { return std::pow(rho, -exponent); }

double product_scalar_curvature(int n, int d) {
  require_dimension(n);
  if (d < 0 || d > n - 1)
    fail(ErrorCode::kDomain, "singular dimension d must lie in [0, n-1]");
  return double(n - 1) * double(n - 2 - 2 * d);
}

double model_boundary_mean_curvature(int d, double h) {
  if (d < 1) fail(ErrorCode::kDomain, "singular dimension d must be >= 1");
  require_slope(h);
  return -double(d) * h / std::sqrt(1.0 + h * h);
}

double euclidean_boundary_mean_curvature(int n, int d, double h, double t) {
  require_dimension(n);
  if (d < 1 || d > n - 1) fail(ErrorCode::kDomain, "singular dimension d must lie in [1, n-1]");
  require_slope(h);
  if (!(t > 0.0)) fail(ErrorCode::kDomain, "distance t to the singular set must be > 0");
  return double(n - d - 1) * h / (std::sqrt(1.0 + h * h) * t);
}

VertexAsymptotics vertex_asymptotics(const ConeModel& cone) {
  const double c = cone.cos_theta();
  const double k = cone.transverse_sphere_dim();
  return {c, k * c, k};
}

CurvatureReport conformal_rho2_curvatures(int n, double rho2_R, double rho_lap_rho,
                                          double rho_H, double grad_rho_nu) {
  const double m = n - 1;
  return {rho2_R + 2.0 * m * (rho_lap_rho - 0.5 * n), rho_H - m * grad_rho_nu};
}

CurvatureReport conformal_u_curvatures(int n, double u, double lap_u, double du_dnu,
                                       double R_g, double H_g) {
  require_dimension(n);
  if (!(u > 0.0)) fail(ErrorCode::kDomain, "conformal factor u must be > 0");
  const double m = n - 1;
  const double k = n - 2;
  const double scalar =
      -(4.0 * m / k) * std::pow(u, -double(n + 2) / k) * (lap_u - k / (4.0 * m) * R_g * u);
  const double mean = std::pow(u, -double(n) / k) * ((2.0 * m / k) * du_dnu + H_g * u);
  return {scalar, mean};
}

ModelSolution exact_model_solution(const ConeModel& cone) {
  const double n = cone.n;
  const double d = cone.d;
  ModelSolution s;
  s.exponent = cone.exponent();
  s.c0_star = (n - 2.0) * (2.0 * d + 2.0 - n) / 4.0;
  s.c1_star = d * (n - 2.0) * cone.cos_theta() / (2.0 * (n - 1.0));
  s.no_complete_solution = !(s.c0_star > 0.0);
  return s;
}

double target_R_to_c0(int n, double R) {
  require_dimension(n);
  return (n - 2.0) * std::abs(R) / (4.0 * (n - 1.0));
}

double target_H_to_c1(int n, double H) {
  require_dimension(n);
  return (n - 2.0) * std::abs(H) / (2.0 * (n - 1.0));
}

double flat_robin_potential(const ConeModel& cone, double varrho) {
  const double n = cone.n;
  return (n - 2.0) * cone.transverse_sphere_dim() * cone.h / (2.0 * (n - 1.0) * varrho);
}

}  // namespace yamabe
