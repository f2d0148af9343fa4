#pragma once

// Closed-form geometry of the generalized solid cone
//
//   C_{d,h} = { x in R^n : x_1 >= h |(x_{d+1}, ..., x_n)| }
//
// with singular set Gamma = { x_1 >= 0, x_{d+1} = ... = x_n = 0 } and the
// conformal transformation laws used by the solver.  All functions are pure.

namespace yamabe {

struct ConeModel {
  int n = 3;         // ambient dimension
  int d = 1;         // dimension of the singular set
  double h = 1.0;    // slope of the boundary cone
  double theta = 0;  // angle between Gamma and the boundary, h = cot(theta)

  // Validates n >= 3, 1 <= d <= n-1, h > 0 and fills in theta.
  static ConeModel make(int n, int d, double h);

  // (n-2)/2, the blow-up rate of complete conformal factors.
  double exponent() const { return 0.5 * (n - 2); }
  // (n+2)/(n-2) and n/(n-2).
  double interior_power() const { return double(n + 2) / double(n - 2); }
  double boundary_power() const { return double(n) / double(n - 2); }
  // Codimension minus one of Gamma: the multiplicity n-d-1 of the transverse sphere.
  int transverse_sphere_dim() const { return n - d - 1; }
  double cos_theta() const;
  double sin_theta() const;
};

struct CurvatureReport {
  double scalar = 0;
  double mean = 0;
};

struct VertexAsymptotics {
  double grad_rho_nu = 0;  // limit of g(grad rho, nu)
  double rho_H = 0;        // limit of rho * H
  double rho_lap_rho = 0;  // limit of rho * Laplacian(rho)
};

struct ModelSolution {
  double exponent = 0;
  double c0_star = 0;
  double c1_star = 0;
  // Set when c0_star <= 0: no complete solution with positive c0 exists.
  bool no_complete_solution = false;

  // u*(rho) = rho^{-(n-2)/2}.
  double value(double rho) const;
};

// Scalar curvature (n-1)(n-2-2d) of the product H^{d+1} x S^{n-d-1}.
double product_scalar_curvature(int n, int d);

// Mean curvature -d h / sqrt(1+h^2) of the model boundary in the metric
// rho^{-2} delta.
double model_boundary_mean_curvature(int d, double h);

// Euclidean mean curvature of the boundary cone at distance t from Gamma:
// (n-d-1) h / (sqrt(1+h^2) t).
double euclidean_boundary_mean_curvature(int n, int d, double h, double t);

VertexAsymptotics vertex_asymptotics(const ConeModel& cone);

// Curvatures of rho^{-2} g from the rho-weighted data of g.  The first
// argument is rho^2 R_g (already scaled).
CurvatureReport conformal_rho2_curvatures(int n, double rho2_R, double rho_lap_rho,
                                          double rho_H, double grad_rho_nu);

// Curvatures of u^{4/(n-2)} g given u, its Laplacian and outward normal
// derivative, and the curvatures of g at the same point.
CurvatureReport conformal_u_curvatures(int n, double u, double lap_u, double du_dnu,
                                       double R_g, double H_g);

ModelSolution exact_model_solution(const ConeModel& cone);

// Coefficient normalization helpers: a conformal metric with scalar
// curvature R < 0 and mean curvature H < 0 solves the equation with
// c0 = (n-2)|R| / (4(n-1)) and c1 = (n-2)|H| / (2(n-1)).
double target_R_to_c0(int n, double R);
double target_H_to_c1(int n, double H);

// Linear potentials of the flat background: the interior potential is zero,
// the Robin potential is (n-2)/(2(n-1)) times the Euclidean mean curvature of
// the cone at polar radius varrho, i.e. (n-2)(n-d-1)h / (2(n-1) varrho).
double flat_robin_potential(const ConeModel& cone, double varrho);

}  // namespace yamabe
