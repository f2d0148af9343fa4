#pragma once

// Tensor-product grids on the axisymmetric reduction of the truncated cone.
//
// A point of the cone is represented by its orbit under translations along
// Gamma and rotations about it, i.e. by polar coordinates (varrho, omega) in
// the (x_1, r) half-plane, where r is the Euclidean distance to Gamma and
// omega is measured from Gamma.  The cone face sits at omega = theta and the
// distance to Gamma is rho = varrho sin(omega).  The reduced domain is the
// rectangle [varrho_0, varrho_1] x [omega_0, theta].

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "yamabe/cone_geometry.hpp"

namespace yamabe {

enum class BoundaryTag : std::uint8_t {
  kInterior = 0,
  kDirichletInnerAngular,  // omega = omega_0, the truncation near Gamma
  kDirichletRadial,        // varrho = varrho_0 and varrho = varrho_1
  kRobinCone,              // omega = theta, the boundary cone
};

const char* to_string(BoundaryTag tag) noexcept;

inline bool is_dirichlet(BoundaryTag tag) {
  return tag == BoundaryTag::kDirichletInnerAngular || tag == BoundaryTag::kDirichletRadial;
}

struct ReducedDomain {
  ConeModel cone;
  double rho_polar_min = 0.5;  // varrho_0
  double rho_polar_max = 2.0;  // varrho_1
  double omega_min = 0.05;     // omega_0

  void validate() const;
};

// Volume density of the reduced measure: varrho^{n-d} sin^{n-d-1}(omega).
double volume_density(const ConeModel& cone, double varrho, double omega);

enum class AngularSpacing : std::uint8_t { kPower, kGeometric };

class Mesh;
using MeshPtr = std::shared_ptr<const Mesh>;

class Mesh {
 public:
  // Radial nodes uniform in log(varrho); angular node k at
  // omega_0 + (theta - omega_0) (k / n_angular)^grading.
  static MeshPtr build(const ReducedDomain& domain, int n_radial, int n_angular,
                       double grading = 2.0);
  // Angular nodes uniform in log(omega); requires omega_0 > 0.
  static MeshPtr build_geometric(const ReducedDomain& domain, int n_radial, int n_angular);

  // Same spacing rule with twice as many intervals in each direction; every
  // node of this mesh is a node of the refined one.
  MeshPtr refine() const;

  // Halves omega_0 `halvings` times, inserting `nodes_per_halving` nodes
  // uniform in log(omega) per halving.  All existing nodes are kept, so the
  // result is nested with this mesh on the common subdomain.
  MeshPtr extend_toward_axis(int halvings, int nodes_per_halving) const;

  // Inserts `nodes` angular lines between omega_0 and the next line at
  // distances gap * ratio^{-k}, k = nodes..1, resolving the boundary layer of
  // large Dirichlet data on the inner face.  The result keeps every node of
  // this mesh.
  MeshPtr with_inner_layer(int nodes, double ratio) const;
  int inner_layer_nodes() const { return layer_nodes_; }

  // Number of extension nodes per halving that continues a geometric angular
  // grid with (approximately) its own ratio.
  int natural_nodes_per_halving() const;

  const ReducedDomain& domain() const { return domain_; }
  const ConeModel& cone() const { return domain_.cone; }

  int n_radial() const { return int(radial_.size()) - 1; }
  int n_angular() const { return int(angular_.size()) - 1; }
  std::size_t radial_count() const { return radial_.size(); }
  std::size_t angular_count() const { return angular_.size(); }
  std::size_t node_count() const { return radial_.size() * angular_.size(); }

  std::size_t index(std::size_t i, std::size_t j) const { return i * angular_.size() + j; }
  std::size_t radial_index(std::size_t k) const { return k / angular_.size(); }
  std::size_t angular_index(std::size_t k) const { return k % angular_.size(); }

  std::span<const double> radial_nodes() const { return radial_; }
  std::span<const double> angular_nodes() const { return angular_; }

  double varrho(std::size_t k) const { return radial_[radial_index(k)]; }
  double omega(std::size_t k) const { return angular_[angular_index(k)]; }
  // Euclidean distance to Gamma.
  double rho(std::size_t k) const;

  BoundaryTag tag(std::size_t k) const { return tags_[k]; }
  bool dirichlet(std::size_t k) const { return is_dirichlet(tags_[k]); }
  std::span<const BoundaryTag> tags() const { return tags_; }

  // Dual-cell widths (half cells at the ends).
  double radial_dual(std::size_t i) const { return radial_dual_[i]; }
  double angular_dual(std::size_t j) const { return angular_dual_[j]; }

  // Volume quadrature weight of node k: density times dual-cell area.
  double weight(std::size_t k) const { return weights_[k]; }
  std::span<const double> weights() const { return weights_; }
  // Surface quadrature weight on ROBIN_CONE nodes, zero elsewhere.
  double surface_weight(std::size_t k) const { return surface_weights_[k]; }
  std::span<const double> surface_weights() const { return surface_weights_; }

  // Index of the middle radial slice.
  std::size_t mid_radial_index() const { return radial_.size() / 2; }

  // Position of this mesh's first angular node inside `finer`, whose angular
  // nodes must contain this mesh's as a contiguous suffix; -1 otherwise.
  int angular_offset_in(const Mesh& finer) const;

  AngularSpacing angular_spacing() const { return spacing_; }
  double grading() const { return grading_; }

 private:
  Mesh(const ReducedDomain& domain, std::vector<double> radial, std::vector<double> angular,
       AngularSpacing spacing, double grading);

  ReducedDomain domain_;
  std::vector<double> radial_;
  std::vector<double> angular_;
  std::vector<double> radial_dual_;
  std::vector<double> angular_dual_;
  std::vector<BoundaryTag> tags_;
  std::vector<double> weights_;
  std::vector<double> surface_weights_;
  AngularSpacing spacing_ = AngularSpacing::kPower;
  double grading_ = 1.0;
  int extension_halvings_ = 0;
  int extension_nodes_ = 0;
  int layer_nodes_ = 0;
};

// Node-indexed scalar values on a mesh.
class Field {
 public:
  Field() = default;
  Field(MeshPtr mesh, double fill);
  Field(MeshPtr mesh, std::vector<double> values);

  template <class Fn>
  static Field from_function(MeshPtr mesh, Fn&& fn) {
    std::vector<double> v(mesh->node_count());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = fn(mesh->varrho(k), mesh->omega(k));
    return Field(std::move(mesh), std::move(v));
  }

  const MeshPtr& mesh_ptr() const { return mesh_; }
  const Mesh& mesh() const { return *mesh_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool all_finite() const;
  double max() const;
  double min() const;

  // Throws FIELD_MISMATCH unless the field lives on `mesh` with one value per node.
  void require_on(const Mesh& mesh, const char* what) const;

 private:
  MeshPtr mesh_;
  std::vector<double> values_;
};

// rho = varrho sin(omega) at every node.
Field distance_field(const MeshPtr& mesh);

// Plain-text table, one node per row: "varrho omega tag value".  Lines
// starting with '#' are comments.
void write_field_table(std::ostream& out, const Field& field);
void write_mesh_table(std::ostream& out, const Mesh& mesh);

}  // namespace yamabe
