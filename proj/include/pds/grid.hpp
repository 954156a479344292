#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pds {

using Vec3 = Eigen::Vector3d;

/// How a grid point participates in the two optimization levels.
///
///   Free    - z is a lower-level variable, developability is evaluated.
///   Fixed   - z never changes.
///   Design  - z is held by the lower level and driven by the upper level.
///   Exempt  - z is a lower-level variable, developability is NOT evaluated.
enum class PointRole : std::uint8_t { Free, Fixed, Design, Exempt };

const char* role_name(PointRole role);
PointRole parse_role(const std::string& token);

/// Rectangular grid of surface points. Index i = a + nu * b, where a runs
/// along x (0..nu-1) and b along y (0..nv-1).
class GridSurface {
 public:
  GridSurface() = default;
  /// Uniform flat lattice spanning [0,lx] x [0,ly], every point Free.
  GridSurface(int nu, int nv, double lx, double ly);

  int nu() const noexcept { return nu_; }
  int nv() const noexcept { return nv_; }
  int size() const noexcept { return nu_ * nv_; }
  double lx() const noexcept { return lx_; }
  double ly() const noexcept { return ly_; }

  int index(int a, int b) const noexcept { return a + nu_ * b; }
  int col(int i) const noexcept { return i % nu_; }
  int row(int i) const noexcept { return i / nu_; }
  bool contains(int a, int b) const noexcept { return a >= 0 && a < nu_ && b >= 0 && b < nv_; }
  bool is_boundary(int i) const noexcept;

  const Vec3& point(int i) const { return points_[static_cast<std::size_t>(i)]; }
  void set_point(int i, const Vec3& p) { points_[static_cast<std::size_t>(i)] = p; }
  std::span<const Vec3> points() const noexcept { return points_; }

  PointRole role(int i) const { return roles_[static_cast<std::size_t>(i)]; }
  void set_role(int i, PointRole r) { roles_[static_cast<std::size_t>(i)] = r; }

  bool moves_in_lower_level(int i) const {
    return role(i) == PointRole::Free || role(i) == PointRole::Exempt;
  }
  /// Interior and not exempt: the default developability evaluation set I.
  bool evaluates_developability(int i) const {
    return !is_boundary(i) && role(i) != PointRole::Exempt;
  }

  std::vector<int> interior_points() const;
  std::vector<int> design_points() const;
  std::vector<int> lower_level_variables() const;
  std::vector<int> points_with_role(PointRole r) const;

  Eigen::VectorXd heights(std::span<const int> ids) const;
  void set_heights(std::span<const int> ids, const Eigen::VectorXd& z);

  bool operator==(const GridSurface& other) const;

 private:
  int nu_ = 0;
  int nv_ = 0;
  double lx_ = 0.0;
  double ly_ = 0.0;
  std::vector<Vec3> points_;
  std::vector<PointRole> roles_;
};

/// The 8 auxiliary triangles around an interior point.
struct AuxiliaryFan {
  int center = -1;
  /// Neighbors in counterclockwise order (seen from +z), starting at +x.
  std::array<int, 8> ring{};

  /// Triangle j is (center, ring[j], ring[(j+1)%8]).
  std::array<std::array<int, 3>, 8> triangles() const;
};

AuxiliaryFan neighbor_fan(const GridSurface& grid, int i);

/// Analytic dome z = rise * sin(pi u) sin(pi v) sampled on a jittered
/// parameter lattice. Boundary points keep their uniform parameters.
struct BaseSurfaceSpec {
  int nu = 21;
  int nv = 21;
  double lx = 10.0;
  double ly = 10.0;
  double rise = 2.0;
  double jitter = 0.0;  // half-width in normalized (u,v)
  std::uint64_t seed = 42;
};

/// Smallest doubled plan area of a fan triangle of the jittered lattice, in
/// units of the parameter spacing (1 for an unjittered side/diagonal pair).
inline constexpr double kMinFanCross = 0.1;

GridSurface build_base_surface(const BaseSurfaceSpec& spec);

/// Grid coordinates (a,b) of points with special roles, plus structural
/// supports. Design entries are lower-level fixed and upper-level variable.
struct PointLayout {
  using Cell = std::pair<int, int>;
  std::vector<Cell> fixed;
  std::vector<Cell> design;
  std::vector<Cell> exempt;
  std::vector<Cell> supports;
};

enum class CasePreset { Case1, Case2 };

PointLayout case_layout(CasePreset preset, int nu, int nv);

/// Returns a copy of `grid` with roles assigned from `layout`; every point
/// not named in the layout becomes Free.
GridSurface classify_points(const GridSurface& grid, const PointLayout& layout);

}  // namespace pds
