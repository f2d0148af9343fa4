#include "yamabe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "yamabe/error.hpp"

namespace yamabe {

const char* to_string(BoundaryTag tag) noexcept {
  switch (tag) {
    case BoundaryTag::kInterior: return "INTERIOR";
    case BoundaryTag::kDirichletInnerAngular: return "DIRICHLET_INNER_ANGULAR";
    case BoundaryTag::kDirichletRadial: return "DIRICHLET_RADIAL";
    case BoundaryTag::kRobinCone: return "ROBIN_CONE";
  }
  return "UNKNOWN";
}

void ReducedDomain::validate() const {
  // re-validates the cone and recomputes nothing; theta must be consistent
  ConeModel::make(cone.n, cone.d, cone.h);
  if (!(rho_polar_min > 0.0) || !(rho_polar_max > rho_polar_min) || !std::isfinite(rho_polar_max))
    fail(ErrorCode::kDegenerateDomain, "need 0 < varrho_0 < varrho_1");
  if (!(omega_min >= 0.0) || !(omega_min < cone.theta))
    fail(ErrorCode::kDegenerateDomain, "need 0 <= omega_0 < theta");
}

double volume_density(const ConeModel& cone, double varrho, double omega) {
  const int k = cone.transverse_sphere_dim();
  return std::pow(varrho, cone.n - cone.d) * (k == 0 ? 1.0 : std::pow(std::sin(omega), k));
}

namespace {

std::vector<double> log_uniform(double a, double b, int n) {
  std::vector<double> x(n + 1);
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i <= n; ++i) x[i] = std::exp(la + (lb - la) * double(i) / n);
  x.front() = a;
  x.back() = b;
  return x;
}

std::vector<double> duals(const std::vector<double>& x) {
  std::vector<double> w(x.size());
  const std::size_t n = x.size() - 1;
  for (std::size_t i = 0; i <= n; ++i) {
    const double lo = i == 0 ? x[0] : 0.5 * (x[i - 1] + x[i]);
    const double hi = i == n ? x[n] : 0.5 * (x[i] + x[i + 1]);
    w[i] = hi - lo;
  }
  return w;
}

void require_counts(int n_radial, int n_angular) {
  if (n_radial < 4 || n_angular < 4)
    fail(ErrorCode::kInvalidArgument, "n_radial and n_angular must be >= 4");
}

}  // namespace

Mesh::Mesh(const ReducedDomain& domain, std::vector<double> radial, std::vector<double> angular,
           AngularSpacing spacing, double grading)
    : domain_(domain),
      radial_(std::move(radial)),
      angular_(std::move(angular)),
      spacing_(spacing),
      grading_(grading) {
  for (std::size_t i = 1; i < radial_.size(); ++i)
    if (!(radial_[i] > radial_[i - 1])) fail(ErrorCode::kDegenerateDomain, "radial nodes not strictly increasing");
  for (std::size_t j = 1; j < angular_.size(); ++j)
    if (!(angular_[j] > angular_[j - 1])) fail(ErrorCode::kDegenerateDomain, "angular nodes not strictly increasing");

  radial_dual_ = duals(radial_);
  angular_dual_ = duals(angular_);

  const std::size_t nr = radial_.size(), na = angular_.size();
  tags_.resize(nr * na);
  weights_.resize(nr * na);
  surface_weights_.assign(nr * na, 0.0);
  const ConeModel& cone = domain_.cone;
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const std::size_t k = index(i, j);
      BoundaryTag t = BoundaryTag::kInterior;
      if (j == 0)
        t = BoundaryTag::kDirichletInnerAngular;
      else if (i == 0 || i == nr - 1)
        t = BoundaryTag::kDirichletRadial;
      else if (j == na - 1)
        t = BoundaryTag::kRobinCone;
      tags_[k] = t;
      weights_[k] = volume_density(cone, radial_[i], angular_[j]) * radial_dual_[i] * angular_dual_[j];
      if (t == BoundaryTag::kRobinCone) {
        // surface measure on omega = theta is (W / varrho) d varrho
        surface_weights_[k] = volume_density(cone, radial_[i], angular_[j]) / radial_[i] * radial_dual_[i];
      }
    }
  }
}

MeshPtr Mesh::build(const ReducedDomain& domain, int n_radial, int n_angular, double grading) {
  domain.validate();
  require_counts(n_radial, n_angular);
  if (!(grading >= 1.0)) fail(ErrorCode::kInvalidArgument, "grading must be >= 1");
  const double w0 = domain.omega_min, th = domain.cone.theta;
  std::vector<double> ang(n_angular + 1);
  for (int k = 0; k <= n_angular; ++k) ang[k] = w0 + (th - w0) * std::pow(double(k) / n_angular, grading);
  ang.back() = th;
  return MeshPtr(new Mesh(domain, log_uniform(domain.rho_polar_min, domain.rho_polar_max, n_radial),
                          std::move(ang), AngularSpacing::kPower, grading));
}

MeshPtr Mesh::build_geometric(const ReducedDomain& domain, int n_radial, int n_angular) {
  domain.validate();
  require_counts(n_radial, n_angular);
  if (!(domain.omega_min > 0.0))
    fail(ErrorCode::kDegenerateDomain, "geometric angular spacing needs omega_0 > 0");
  return MeshPtr(new Mesh(domain, log_uniform(domain.rho_polar_min, domain.rho_polar_max, n_radial),
                          log_uniform(domain.omega_min, domain.cone.theta, n_angular),
                          AngularSpacing::kGeometric, 1.0));
}

MeshPtr Mesh::refine() const {
  if (layer_nodes_ > 0) fail(ErrorCode::kInvalidArgument, "meshes with an inner layer cannot be refined");
  ReducedDomain base = domain_;
  base.omega_min = domain_.omega_min * std::pow(2.0, extension_halvings_);
  const int base_angular = n_angular() - extension_halvings_ * extension_nodes_;
  MeshPtr fine = spacing_ == AngularSpacing::kPower
                     ? build(base, 2 * n_radial(), 2 * base_angular, grading_)
                     : build_geometric(base, 2 * n_radial(), 2 * base_angular);
  if (extension_halvings_ > 0) fine = fine->extend_toward_axis(extension_halvings_, 2 * extension_nodes_);
  return fine;
}

MeshPtr Mesh::extend_toward_axis(int halvings, int nodes_per_halving) const {
  if (halvings < 0 || nodes_per_halving < 1)
    fail(ErrorCode::kInvalidArgument, "extension needs halvings >= 0 and nodes_per_halving >= 1");
  if (extension_halvings_ > 0 && nodes_per_halving != extension_nodes_)
    fail(ErrorCode::kInvalidArgument, "repeated extensions must use the same nodes_per_halving");
  if (!(domain_.omega_min > 0.0)) fail(ErrorCode::kDegenerateDomain, "cannot extend a mesh with omega_0 = 0");
  if (halvings == 0) return MeshPtr(new Mesh(*this));
  ReducedDomain dom = domain_;
  dom.omega_min = domain_.omega_min * std::ldexp(1.0, -halvings);
  const int extra = halvings * nodes_per_halving;
  std::vector<double> ang;
  ang.reserve(angular_.size() + extra);
  for (int t = 0; t < extra; ++t)
    ang.push_back(dom.omega_min * std::exp2(double(t) / nodes_per_halving));
  ang.insert(ang.end(), angular_.begin(), angular_.end());
  auto* m = new Mesh(dom, radial_, std::move(ang), spacing_, grading_);
  m->extension_halvings_ = extension_halvings_ + halvings;
  m->extension_nodes_ = nodes_per_halving;
  m->layer_nodes_ = layer_nodes_;
  return MeshPtr(m);
}

MeshPtr Mesh::with_inner_layer(int nodes, double ratio) const {
  if (nodes < 0 || !(ratio > 1.0)) fail(ErrorCode::kInvalidArgument, "layer needs nodes >= 0 and ratio > 1");
  if (nodes == 0) return MeshPtr(new Mesh(*this));
  const double w0 = angular_[0], gap = angular_[1] - angular_[0];
  std::vector<double> ang{w0};
  for (int k = nodes; k >= 1; --k) ang.push_back(w0 + gap * std::pow(ratio, -k));
  ang.insert(ang.end(), angular_.begin() + 1, angular_.end());
  auto* m = new Mesh(domain_, radial_, std::move(ang), spacing_, grading_);
  m->extension_halvings_ = extension_halvings_;
  m->extension_nodes_ = extension_nodes_;
  m->layer_nodes_ = layer_nodes_ + nodes;
  return MeshPtr(m);
}

int Mesh::natural_nodes_per_halving() const {
  if (!(angular_[0] > 0.0)) return 1;
  const double k = std::log(2.0) / std::log(angular_[1] / angular_[0]);
  return std::max(1, int(std::lround(k)));
}

double Mesh::rho(std::size_t k) const { return varrho(k) * std::sin(omega(k)); }

int Mesh::angular_offset_in(const Mesh& finer) const {
  if (finer.radial_ != radial_ || finer.angular_.size() < angular_.size()) return -1;
  const std::size_t off = finer.angular_.size() - angular_.size();
  for (std::size_t j = 0; j < angular_.size(); ++j)
    if (std::abs(finer.angular_[off + j] - angular_[j]) > 1e-14 * std::max(1.0, angular_[j])) return -1;
  return int(off);
}

Field::Field(MeshPtr mesh, double fill) : mesh_(std::move(mesh)) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "field needs a mesh");
  values_.assign(mesh_->node_count(), fill);
}

Field::Field(MeshPtr mesh, std::vector<double> values) : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "field needs a mesh");
  if (values_.size() != mesh_->node_count())
    fail(ErrorCode::kFieldMismatch, "field length " + std::to_string(values_.size()) +
                                        " != node count " + std::to_string(mesh_->node_count()));
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }

void Field::require_on(const Mesh& mesh, const char* what) const {
  if (!mesh_ || values_.size() != mesh.node_count())
    fail(ErrorCode::kFieldMismatch, std::string(what) + " is not defined on the operator mesh");
}

Field distance_field(const MeshPtr& mesh) {
  std::vector<double> v(mesh->node_count());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = mesh->rho(k);
  return Field(mesh, std::move(v));
}

void write_field_table(std::ostream& out, const Field& field) {
  const Mesh& m = field.mesh();
  out << "# varrho omega tag value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < m.node_count(); ++k)
    out << m.varrho(k) << ' ' << m.omega(k) << ' ' << to_string(m.tag(k)) << ' ' << field[k] << '\n';
}

void write_mesh_table(std::ostream& out, const Mesh& mesh) {
  out << "# varrho omega tag weight\n" << std::setprecision(17);
  for (std::size_t k = 0; k < mesh.node_count(); ++k)
    out << mesh.varrho(k) << ' ' << mesh.omega(k) << ' ' << to_string(mesh.tag(k)) << ' '
        << mesh.weight(k) << '\n';
}

}  // namespace yamabe
