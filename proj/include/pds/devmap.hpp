#pragma once

#include "pds/grid.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace pds {

/// sqrt(A) is evaluated as sqrt(A + d^2) - d with this d.
inline constexpr double kSqrtSmoothing = 1e-10;
/// Fan triangles with a smaller 3D area (m^2) are rejected.
inline constexpr double kDegenerateArea = 1e-14;
/// Face normals closer than this cosine to the tangent plane of the vertex
/// normal cannot be projected (a folded one-ring).
inline constexpr double kMinTipCosine = 1e-6;

/// Parameters of F = sum_{i in I} tanh(c (sqrt(A_i) + eps)).
struct DevObjectiveConfig {
  double sharpness = 100.0;  // c
  double offset = 1e-6;      // eps
  std::vector<int> evaluation_set;  // I, ascending
};

/// Config with I = interior, non-exempt points of `grid`.
DevObjectiveConfig make_objective_config(const GridSurface& grid, double sharpness, double offset = 1e-6);
void validate(const DevObjectiveConfig& config, const GridSurface& grid);

struct PointGaussMap {
  int index = -1;
  std::array<Vec3, 8> face_normals;
  Vec3 vertex_normal;
  std::array<double, 8> areas{};
  double error = 0.0;       // A_i
  double sqrt_error = 0.0;  // sqrt(A_i)
};

std::array<Vec3, 8> face_normals(const GridSurface& grid, const AuxiliaryFan& fan);
Vec3 vertex_normal(std::span<const Vec3, 8> normals);
/// Areas of the 8 Gauss-map triangles (n_i, n_j, n_j+1), measured on the
/// tangent plane of n_i after central projection of the face-normal tips.
std::array<double, 8> gauss_triangle_areas(const Vec3& vertex_normal, std::span<const Vec3, 8> normals);

PointGaussMap gauss_map_at(const GridSurface& grid, int i);
double developability_error(const GridSurface& grid, int i);

/// A_i for each id, evaluated in batches by the dispatched SIMD kernel.
std::vector<double> developability_errors(const GridSurface& grid, std::span<const int> ids, int threads = 1);

double smoothed_sqrt(double error);
double filtered_term(double error, const DevObjectiveConfig& config);

double objective(const GridSurface& grid, const DevObjectiveConfig& config, int threads = 1);

struct ObjectiveGradient {
  double value = 0.0;
  /// dF/dz per grid point (length grid.size()); entries for points that do
  /// not move are still filled, callers pick the variables they own.
  Eigen::VectorXd dz;
  /// Points of I with A_i below the smoothing floor, where sqrt(A_i) is
  /// replaced by its smoothed form.
  std::vector<int> below_floor;
};

ObjectiveGradient objective_gradient(const GridSurface& grid, const DevObjectiveConfig& config, int threads = 1);

/// A_i written as a sum of squares, A_i = |r|^2 with r the 24 stacked
/// half cross vectors of the Gauss-map triangles, and dr/dz for the 9
/// points of the fan (slot 0 the center, then the ring).
struct FanResidual {
  std::array<int, 9> nodes{};
  double error = 0.0;
  Eigen::Matrix<double, 24, 1> residual;
  Eigen::Matrix<double, 24, 9> jacobian_z;
};

FanResidual developability_residual(const GridSurface& grid, int i);

/// dF_i/dA_i of one filtered term, including the sqrt smoothing.
double filter_slope(double error, const DevObjectiveConfig& config);

/// Share of sum sqrt(A_i) over I carried by the largest 10% of entries.
double error_concentration(std::span<const double> sqrt_errors, double top_fraction = 0.1);

/// Fraction of entries strictly below `threshold`.
double fraction_below(std::span<const double> values, double threshold);

}  // namespace pds
