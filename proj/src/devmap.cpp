#include "pds/devmap.hpp"

#include "pds/error.hpp"
#include "pds/gauss_lane.hpp"
#include "pds/kernels.hpp"
#include "pds/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace pds {

namespace {

using lane::V3;
using D3 = V3<double>;

D3 to_lane(const Vec3& p) { return {p.x(), p.y(), p.z()}; }
Vec3 to_vec(const D3& p) { return {p.x, p.y, p.z}; }
D3 add(const D3& a, const D3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }

void gather_ring(const GridSurface& grid, const AuxiliaryFan& fan, D3& center, std::array<D3, 8>& ring) {
  center = to_lane(grid.point(fan.center));
  for (int j = 0; j < 8; ++j) ring[j] = to_lane(grid.point(fan.ring[j]));
}

void check_forward(const lane::GaussForward<double>& fwd, int point) {
  for (int j = 0; j < 8; ++j)
    if (!(0.5 * fwd.edge_cross_norm[j] >= kDegenerateArea)) throw DegenerateTriangleError(point, j);
  if (!(fwd.normal_sum_norm > 1e-12))
    throw NumericalError("face normals cancel at point " + std::to_string(point));
  for (int j = 0; j < 8; ++j)
    if (!(fwd.tip_dot[j] > kMinTipCosine))
      throw NumericalError("folded one-ring at point " + std::to_string(point));
}

lane::GaussForward<double> forward_at(const GridSurface& grid, int i) {
  const AuxiliaryFan fan = neighbor_fan(grid, i);
  D3 center;
  std::array<D3, 8> ring;
  gather_ring(grid, fan, center, ring);
  lane::GaussForward<double> fwd;
  lane::gauss_forward(center, ring, fwd);
  check_forward(fwd, i);
  return fwd;
}

// Chain rule from the Gauss-map cross vectors w_j = (tip_j - n) x
// (tip_j+1 - n) back to the 9 fan positions. Slot 0 is the center, slot
// j+1 is ring[j].
void backprop_cross(const lane::GaussForward<double>& f, const D3& center, const std::array<D3, 8>& ring,
                    const std::array<D3, 8>& g_w, std::array<D3, 9>& g_pos) {
  using lane::cross;
  using lane::dot;
  using lane::scale;
  using lane::sub;
  std::array<D3, 8> g_tip{};
  std::array<D3, 8> g_face{};
  D3 g_n{0, 0, 0};
  for (int j = 0; j < 8; ++j) {
    const int k = (j + 1) % 8;
    const D3 p = sub(f.tip[j], f.vertex_normal);
    const D3 q = sub(f.tip[k], f.vertex_normal);
    const D3 g_p = cross(q, g_w[j]);
    const D3 g_q = cross(g_w[j], p);
    g_tip[j] = add(g_tip[j], g_p);
    g_tip[k] = add(g_tip[k], g_q);
    g_n = sub(g_n, add(g_p, g_q));
  }
  for (int j = 0; j < 8; ++j) {
    const double d = f.tip_dot[j];
    const double s = dot(f.face_normal[j], g_tip[j]) / (d * d);
    g_face[j] = add(g_face[j], sub(scale(g_tip[j], 1.0 / d), scale(f.vertex_normal, s)));
    g_n = sub(g_n, scale(f.face_normal[j], s));
  }
  const D3 g_m = scale(sub(g_n, scale(f.vertex_normal, dot(f.vertex_normal, g_n))), 1.0 / f.normal_sum_norm);
  for (int j = 0; j < 8; ++j) g_face[j] = add(g_face[j], scale(g_m, 0.125));

  g_pos.fill(D3{0, 0, 0});
  for (int j = 0; j < 8; ++j) {
    const int k = (j + 1) % 8;
    const D3& fn = f.face_normal[j];
    const D3 g_e = scale(sub(g_face[j], scale(fn, dot(fn, g_face[j]))), 1.0 / f.edge_cross_norm[j]);
    const D3 e1 = sub(ring[j], center);
    const D3 e2 = sub(ring[k], center);
    const D3 g_e1 = cross(e2, g_e);
    const D3 g_e2 = cross(g_e, e1);
    g_pos[j + 1] = add(g_pos[j + 1], g_e1);
    g_pos[k + 1] = add(g_pos[k + 1], g_e2);
    g_pos[0] = sub(g_pos[0], add(g_e1, g_e2));
  }
}

// dA/dw_j = w_j / 2 since A = 1/4 sum |w_j|^2.
void backprop_point(const lane::GaussForward<double>& f, const D3& center, const std::array<D3, 8>& ring,
                    double g_error, std::array<D3, 9>& g_pos) {
  std::array<D3, 8> g_w;
  for (int j = 0; j < 8; ++j) g_w[j] = lane::scale(f.area_cross[j], 0.5 * g_error);
  backprop_cross(f, center, ring, g_w, g_pos);
}

}  // namespace

DevObjectiveConfig make_objective_config(const GridSurface& grid, double sharpness, double offset) {
  DevObjectiveConfig config;
  config.sharpness = sharpness;
  config.offset = offset;
  for (int i = 0; i < grid.size(); ++i)
    if (grid.evaluates_developability(i)) config.evaluation_set.push_back(i);
  validate(config, grid);
  return config;
}

void validate(const DevObjectiveConfig& config, const GridSurface& grid) {
  if (!(config.sharpness > 0.0)) throw ConfigError("filter sharpness c must be positive");
  if (!(config.offset >= 0.0)) throw ConfigError("filter offset must be non-negative");
  for (int i : config.evaluation_set)
    if (i < 0 || i >= grid.size() || grid.is_boundary(i))
      throw ConfigError("evaluation set contains non-interior point " + std::to_string(i));
}

std::array<Vec3, 8> face_normals(const GridSurface& grid, const AuxiliaryFan& fan) {
  D3 center;
  std::array<D3, 8> ring;
  gather_ring(grid, fan, center, ring);
  std::array<Vec3, 8> out;
  for (int j = 0; j < 8; ++j) {
    const D3 c = lane::cross(lane::sub(ring[j], center), lane::sub(ring[(j + 1) % 8], center));
    const double len = lane::norm(c);
    if (!(0.5 * len >= kDegenerateArea)) throw DegenerateTriangleError(fan.center, j);
    out[j] = to_vec(lane::scale(c, 1.0 / len));
  }
  return out;
}

Vec3 vertex_normal(std::span<const Vec3, 8> normals) {
  D3 s = to_lane(normals[0]);
  for (int j = 1; j < 8; ++j) s = add(s, to_lane(normals[j]));
  s = lane::scale(s, 0.125);
  const double len = lane::norm(s);
  if (!(len > 1e-12)) throw NumericalError("face normals sum to zero");
  return to_vec(lane::scale(s, 1.0 / len));
}

std::array<double, 8> gauss_triangle_areas(const Vec3& vertex_normal, std::span<const Vec3, 8> normals) {
  const D3 n = to_lane(vertex_normal);
  std::array<D3, 8> tip;
  for (int j = 0; j < 8; ++j) {
    const D3 f = to_lane(normals[j]);
    const double d = lane::dot(f, n);
    if (!(d > kMinTipCosine)) throw NumericalError("face normal cannot be projected onto the tangent plane");
    tip[j] = lane::scale(f, 1.0 / d);
  }
  std::array<double, 8> areas{};
  for (int j = 0; j < 8; ++j)
    areas[j] = 0.5 * lane::norm(lane::cross(lane::sub(tip[j], n), lane::sub(tip[(j + 1) % 8], n)));
  return areas;
}

PointGaussMap gauss_map_at(const GridSurface& grid, int i) {
  const auto fwd = forward_at(grid, i);
  PointGaussMap out;
  out.index = i;
  for (int j = 0; j < 8; ++j) {
    out.face_normals[j] = to_vec(fwd.face_normal[j]);
    out.areas[j] = fwd.area[j];
  }
  out.vertex_normal = to_vec(fwd.vertex_normal);
  out.error = fwd.error;
  out.sqrt_error = std::sqrt(fwd.error);
  return out;
}

double developability_error(const GridSurface& grid, int i) { return forward_at(grid, i).error; }

std::vector<double> developability_errors(const GridSurface& grid, std::span<const int> ids, int threads) {
  kernels::FanBatch batch;
  batch.resize(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const AuxiliaryFan fan = neighbor_fan(grid, ids[k]);
    for (int s = 0; s < 9; ++s) {
      const Vec3& p = grid.point(s == 0 ? fan.center : fan.ring[s - 1]);
      batch.x[s][k] = p.x();
      batch.y[s][k] = p.y();
      batch.z[s][k] = p.z();
    }
  }
  kernels::GaussBatchResult result;
  result.resize(ids.size());
  parallel_for(ids.size(), threads,
               [&](std::size_t begin, std::size_t end) { kernels::gauss_error(batch, result, begin, end); });
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!(0.5 * result.min_cross_norm[k] >= kDegenerateArea)) {
      // Recompute on the scalar path to name the offending triangle.
      (void)forward_at(grid, ids[k]);
      throw DegenerateTriangleError(ids[k], -1);
    }
    if (!(result.min_tip_dot[k] > kMinTipCosine)) (void)forward_at(grid, ids[k]);
  }
  return std::move(result.error);
}

double smoothed_sqrt(double error) {
  return std::sqrt(error + kSqrtSmoothing * kSqrtSmoothing) - kSqrtSmoothing;
}

double filtered_term(double error, const DevObjectiveConfig& config) {
  return std::tanh(config.sharpness * (smoothed_sqrt(error) + config.offset));
}

double objective(const GridSurface& grid, const DevObjectiveConfig& config, int threads) {
  const auto errors = developability_errors(grid, config.evaluation_set, threads);
  double f = 0.0;
  for (double a : errors) f += filtered_term(a, config);
  return f;
}

ObjectiveGradient objective_gradient(const GridSurface& grid, const DevObjectiveConfig& config, int threads) {
  const auto& ids = config.evaluation_set;
  const std::size_t n = ids.size();
  std::vector<lane::GaussForward<double>> fwd(n);
  std::vector<AuxiliaryFan> fans(n);
  for (std::size_t k = 0; k < n; ++k) fans[k] = neighbor_fan(grid, ids[k]);

  std::vector<std::array<D3, 9>> local(n);
  std::vector<double> terms(n);
  std::vector<char> ok(n, 1);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      D3 center;
      std::array<D3, 8> ring;
      gather_ring(grid, fans[k], center, ring);
      lane::gauss_forward(center, ring, fwd[k]);
      const double a = fwd[k].error;
      const double t = std::tanh(config.sharpness * (smoothed_sqrt(a) + config.offset));
      terms[k] = t;
      const double root = std::sqrt(a + kSqrtSmoothing * kSqrtSmoothing);
      const double g_error = config.sharpness * (1.0 - t * t) * 0.5 / root;
      // Validity is checked serially below; skip backprop on bad fans.
      bool good = true;
      for (int j = 0; j < 8; ++j)
        good = good && 0.5 * fwd[k].edge_cross_norm[j] >= kDegenerateArea && fwd[k].tip_dot[j] > kMinTipCosine;
      good = good && fwd[k].normal_sum_norm > 1e-12;
      ok[k] = good ? 1 : 0;
      if (good) backprop_point(fwd[k], center, ring, g_error, local[k]);
    }
  });

  ObjectiveGradient out;
  out.dz = Eigen::VectorXd::Zero(grid.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok[k]) check_forward(fwd[k], ids[k]);
    out.value += terms[k];
    if (fwd[k].error < kSqrtSmoothing * kSqrtSmoothing) out.below_floor.push_back(ids[k]);
    out.dz[fans[k].center] += local[k][0].z;
    for (int j = 0; j < 8; ++j) out.dz[fans[k].ring[j]] += local[k][j + 1].z;
  }
  return out;
}

FanResidual developability_residual(const GridSurface& grid, int i) {
  const AuxiliaryFan fan = neighbor_fan(grid, i);
  D3 center;
  std::array<D3, 8> ring;
  gather_ring(grid, fan, center, ring);
  lane::GaussForward<double> fwd;
  lane::gauss_forward(center, ring, fwd);
  check_forward(fwd, i);

  FanResidual out;
  out.nodes[0] = fan.center;
  for (int j = 0; j < 8; ++j) out.nodes[j + 1] = fan.ring[j];
  out.error = fwd.error;
  std::array<D3, 8> seed;
  std::array<D3, 9> g_pos;
  for (int j = 0; j < 8; ++j) {
    const D3& w = fwd.area_cross[j];
    out.residual.segment<3>(3 * j) << 0.5 * w.x, 0.5 * w.y, 0.5 * w.z;
    for (int comp = 0; comp < 3; ++comp) {
      seed.fill(D3{0, 0, 0});
      (comp == 0 ? seed[j].x : comp == 1 ? seed[j].y : seed[j].z) = 0.5;
      backprop_cross(fwd, center, ring, seed, g_pos);
      for (int s = 0; s < 9; ++s) out.jacobian_z(3 * j + comp, s) = g_pos[s].z;
    }
  }
  return out;
}

double filter_slope(double error, const DevObjectiveConfig& config) {
  const double t = filtered_term(error, config);
  return config.sharpness * (1.0 - t * t) * 0.5 / std::sqrt(error + kSqrtSmoothing * kSqrtSmoothing);
}

double error_concentration(std::span<const double> sqrt_errors, double top_fraction) {
  if (sqrt_errors.empty()) return 0.0;
  std::vector<double> sorted(sqrt_errors.begin(), sqrt_errors.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(sorted.size()))));
  const double head = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), 0.0);
  return head / total;
}

double fraction_below(std::span<const double> values, double threshold) {
  if (values.empty()) return 0.0;
  const auto count = std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; });
  return static_cast<double>(count) / static_cast<double>(values.size());
}

}  // namespace pds
