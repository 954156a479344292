#pragma once

#include "pds/error.hpp"
#include "pds/grid.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace pds {

/// Units: kN, m. E in kN/m^2.
struct ShellMaterial {
  double youngs_modulus = 20e6;
  double poisson = 0.2;
  double thickness = 0.1;

  void validate() const;
  double bending_rigidity() const;  // D = E t^3 / (12 (1 - nu^2))
  double shear_modulus() const;
};

inline constexpr double kShearCorrection = 5.0 / 6.0;
/// Drilling penalty relative to the largest bending diagonal of an element.
inline constexpr double kDrillingFactor = 1e-6;

/// Per-node degrees of freedom, in this order.
enum class Dof { Ux, Uy, Uz, Rx, Ry, Rz };
inline constexpr int kNodeDofs = 6;
const char* dof_name(Dof dof);

struct NodeSupport {
  int node = -1;
  std::array<bool, 6> fixed{};
  std::array<double, 6> value{};  // prescribed displacement/rotation of fixed dofs

  static NodeSupport pin(int node);     // three translations
  static NodeSupport clamp(int node);   // all six
};

struct AreaLoad {
  double pressure = 1.0;        // kN/m^2
  Vec3 direction{0.0, 0.0, -1.0};
  bool per_plan_area = false;   // scale by |n_z| (load given per unit plan area)
};

struct PointLoad {
  int node = -1;
  Dof dof = Dof::Uz;
  double value = 0.0;
};

struct FemModel {
  std::vector<Vec3> nodes;
  /// Counterclockwise about the intended outward normal.
  std::vector<std::array<int, 4>> elements;
  ShellMaterial material;
  std::vector<NodeSupport> supports;
  AreaLoad load;
  std::vector<PointLoad> point_loads;

  int dof_count() const { return kNodeDofs * static_cast<int>(nodes.size()); }
  void validate() const;
};

/// One element per grid cell, nodes = grid points, pins at `supports`.
FemModel shell_model(const GridSurface& grid, const ShellMaterial& material, std::span<const int> supports,
                     const AreaLoad& load = {});

/// Grid point ids of the support cells of a layout.
std::vector<int> support_nodes(const GridSurface& grid, const PointLayout& layout);

/// Flat projection of a (possibly warped) quad: orthonormal frame with e3
/// along the diagonal cross product, in-plane node coordinates and the
/// out-of-plane offsets bridged by rigid links.
struct ElementFrame {
  Eigen::Matrix3d rotation;  // rows e1, e2, e3
  Vec3 center;
  std::array<Eigen::Vector2d, 4> local;
  std::array<double, 4> warp{};
};

ElementFrame element_frame(const std::array<Vec3, 4>& xyz);

class ElementError : public NumericalError {
 public:
  ElementError(const std::string& what, int element)
      : NumericalError(what + " (element " + std::to_string(element) + ")"), element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

class SingularStiffnessError : public NumericalError {
 public:
  SingularStiffnessError(int node, Dof dof);
  int node() const noexcept { return node_; }
  Dof dof() const noexcept { return dof_; }

 private:
  int node_;
  Dof dof_;
};

using ElementMatrix = Eigen::Matrix<double, 24, 24>;

/// Stiffness in the element's local frame (dofs u, v, w, rx, ry, rz per
/// node) before the rigid-link and rotation transforms.
ElementMatrix local_element_stiffness(const ElementFrame& frame, const ShellMaterial& material, int element = -1,
                                      double drilling_factor = kDrillingFactor);

/// Global-frame 24x24 stiffness of the quad with nodes `xyz`.
ElementMatrix element_stiffness(const std::array<Vec3, 4>& xyz, const ShellMaterial& material, int element = -1,
                                double drilling_factor = kDrillingFactor);

/// Stress resultants at the element center, local frame: membrane forces
/// N = (Nxx, Nyy, Nxy) kN/m, moments M = (Mxx, Myy, Mxy) kNm/m (positive
/// when the -e3 face is in tension) and transverse shears Q = (Qx, Qy).
struct ElementResultants {
  Eigen::Vector3d membrane = Eigen::Vector3d::Zero();
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();
  Eigen::Vector2d shear = Eigen::Vector2d::Zero();
};

struct PrincipalMoments {
  double m1 = 0.0;  // larger
  double m2 = 0.0;
  double max() const { return m1; }
};

PrincipalMoments principal_moments(const Eigen::Vector3d& moment);

struct FemResult {
  Eigen::VectorXd displacement;  // 6 per node, global frame
  Eigen::VectorXd load;          // applied nodal loads
  double work = 0.0;             // f^T u
  double strain_energy2 = 0.0;   // u^T K u
  std::vector<ElementResultants> resultants;
  std::vector<PrincipalMoments> moments;

  double compliance() const { return work; }
  Vec3 translation(int node) const;
};

Eigen::VectorXd nodal_loads(const FemModel& model);

FemResult assemble_and_solve(const FemModel& model, int threads = 1);

inline double compliance(const FemResult& result) { return result.work; }
PrincipalMoments principal_moments(const FemResult& result, int element);

}  // namespace pds
