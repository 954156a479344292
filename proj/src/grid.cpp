#include "pds/grid.hpp"

#include "pds/error.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace pds {

const char* role_name(PointRole role) {
  switch (role) {
    case PointRole::Free: return "free";
    case PointRole::Fixed: return "fixed";
    case PointRole::Design: return "design";
    case PointRole::Exempt: return "exempt";
  }
  return "free";
}

PointRole parse_role(const std::string& token) {
  if (token == "free") return PointRole::Free;
  if (token == "fixed") return PointRole::Fixed;
  if (token == "design") return PointRole::Design;
  if (token == "exempt") return PointRole::Exempt;
  throw ConfigError("unknown point role '" + token + "'");
}

GridSurface::GridSurface(int nu, int nv, double lx, double ly)
    : nu_(nu), nv_(nv), lx_(lx), ly_(ly) {
  if (nu < 3 || nv < 3) throw ConfigError("grid needs at least 3x3 points");
  if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("plan dimensions must be positive");
  points_.resize(static_cast<std::size_t>(nu * nv));
  roles_.assign(points_.size(), PointRole::Free);
  for (int b = 0; b < nv; ++b)
    for (int a = 0; a < nu; ++a)
      points_[static_cast<std::size_t>(index(a, b))] =
          Vec3(lx * a / (nu - 1), ly * b / (nv - 1), 0.0);
}

bool GridSurface::is_boundary(int i) const noexcept {
  const int a = col(i);
  const int b = row(i);
  return a == 0 || b == 0 || a == nu_ - 1 || b == nv_ - 1;
}

std::vector<int> GridSurface::interior_points() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!is_boundary(i)) out.push_back(i);
  return out;
}

std::vector<int> GridSurface::points_with_role(PointRole r) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (role(i) == r) out.push_back(i);
  return out;
}

std::vector<int> GridSurface::design_points() const { return points_with_role(PointRole::Design); }

std::vector<int> GridSurface::lower_level_variables() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (moves_in_lower_level(i)) out.push_back(i);
  return out;
}

Eigen::VectorXd GridSurface::heights(std::span<const int> ids) const {
  Eigen::VectorXd z(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) z[static_cast<Eigen::Index>(k)] = point(ids[k]).z();
  return z;
}

void GridSurface::set_heights(std::span<const int> ids, const Eigen::VectorXd& z) {
  for (std::size_t k = 0; k < ids.size(); ++k)
    points_[static_cast<std::size_t>(ids[k])].z() = z[static_cast<Eigen::Index>(k)];
}

bool GridSurface::operator==(const GridSurface& other) const {
  return nu_ == other.nu_ && nv_ == other.nv_ && lx_ == other.lx_ && ly_ == other.ly_ &&
         points_ == other.points_ && roles_ == other.roles_;
}

std::array<std::array<int, 3>, 8> AuxiliaryFan::triangles() const {
  std::array<std::array<int, 3>, 8> tris{};
  for (int j = 0; j < 8; ++j) tris[j] = {center, ring[j], ring[(j + 1) % 8]};
  return tris;
}

AuxiliaryFan neighbor_fan(const GridSurface& grid, int i) {
  if (i < 0 || i >= grid.size()) throw ConfigError("point index out of range");
  if (grid.is_boundary(i)) throw ConfigError("no fan: point " + std::to_string(i) + " is on the boundary");
  static constexpr std::array<std::array<int, 2>, 8> kOffsets = {
      {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  AuxiliaryFan fan;
  fan.center = i;
  const int a = grid.col(i);
  const int b = grid.row(i);
  for (int j = 0; j < 8; ++j) fan.ring[j] = grid.index(a + kOffsets[j][0], b + kOffsets[j][1]);
  return fan;
}

GridSurface build_base_surface(const BaseSurfaceSpec& spec) {
  if (spec.nu < 3 || spec.nv < 3) throw ConfigError("grid needs at least 3x3 points");
  if (!(spec.jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
  const double du = 1.0 / (spec.nu - 1);
  const double dv = 1.0 / (spec.nv - 1);
  // Two neighbors jittering toward each other must not meet.
  if (spec.jitter >= 0.5 * du || spec.jitter >= 0.5 * dv)
    throw ConfigError("jitter half-width would fold the grid (must be < half the parameter spacing)");

  GridSurface grid(spec.nu, spec.nv, spec.lx, spec.ly);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> offset(-spec.jitter, spec.jitter);
  std::vector<double> us(static_cast<std::size_t>(grid.size())), vs(us.size());
  for (int b = 0; b < spec.nv; ++b) {
    for (int a = 0; a < spec.nu; ++a) {
      const auto i = static_cast<std::size_t>(grid.index(a, b));
      us[i] = a * du;
      vs[i] = b * dv;
      if (!grid.is_boundary(grid.index(a, b)) && spec.jitter > 0.0) {
        us[i] += offset(rng);
        vs[i] += offset(rng);
      }
      if (a == spec.nu - 1) us[i] = 1.0;
      if (b == spec.nv - 1) vs[i] = 1.0;
    }
  }

  // The half-spacing bound keeps axis neighbors apart but not the diagonal
  // fan triangles: those can flip once the jitter exceeds a sixth of the
  // spacing. Centers of such fans are redrawn from the same stream.
  auto fan_ok = [&](int i) {
    const AuxiliaryFan fan = neighbor_fan(grid, i);
    const auto c = static_cast<std::size_t>(i);
    for (int j = 0; j < 8; ++j) {
      const auto p = static_cast<std::size_t>(fan.ring[j]);
      const auto q = static_cast<std::size_t>(fan.ring[(j + 1) % 8]);
      const double ax = (us[p] - us[c]) / du, ay = (vs[p] - vs[c]) / dv;
      const double bx = (us[q] - us[c]) / du, by = (vs[q] - vs[c]) / dv;
      if (ax * by - ay * bx < kMinFanCross) return false;
    }
    return true;
  };
  const std::vector<int> interior = grid.interior_points();
  for (int pass = 0;; ++pass) {
    bool clean = true;
    for (int i : interior) {
      if (fan_ok(i)) continue;
      clean = false;
      const auto k = static_cast<std::size_t>(i);
      us[k] = grid.col(i) * du + offset(rng);
      vs[k] = grid.row(i) * dv + offset(rng);
    }
    if (clean) break;
    if (pass == 1000) throw ConfigError("could not draw a jitter without folded fans");
  }

  constexpr double pi = std::numbers::pi;
  for (int i = 0; i < grid.size(); ++i) {
    const double u = us[static_cast<std::size_t>(i)];
    const double v = vs[static_cast<std::size_t>(i)];
    const double z = spec.rise * std::sin(pi * u) * std::sin(pi * v);
    // sin(pi) is not exactly zero; pin the rim to z = 0.
    grid.set_point(i, Vec3(u * spec.lx, v * spec.ly, grid.is_boundary(i) ? 0.0 : z));
  }
  return grid;
}

PointLayout case_layout(CasePreset preset, int nu, int nv) {
  PointLayout layout;
  const int am = (nu - 1) / 2;
  const int bm = (nv - 1) / 2;
  const int a1 = nu - 1;
  const int b1 = nv - 1;
  if (preset == CasePreset::Case1) {
    layout.fixed = {{0, 0}, {a1, 0}, {0, b1}, {a1, b1}};
    layout.design = {{am, bm}, {am, 0}, {am, b1}, {0, bm}, {a1, bm}};
    layout.supports = {{0, 0}, {a1, 0}, {0, b1}, {a1, b1}, {am, 0}, {am, b1}, {0, bm}, {a1, bm}};
    return layout;
  }
  // 5 x 3 sub-lattice of fixed points.
  std::array<int, 5> cols{};
  for (int k = 0; k < 5; ++k) cols[k] = static_cast<int>(std::lround(k * (nu - 1) / 4.0));
  const std::array<int, 3> rows = {0, bm, b1};
  for (int r : rows) {
    for (int k = 0; k < 5; ++k) {
      const bool corner = (k == 0 || k == 4) && (r == 0 || r == b1);
      (corner ? layout.fixed : layout.design).push_back({cols[k], r});
      if (r == 0 || r == b1 || k == 0 || k == 4) layout.supports.push_back({cols[k], r});
    }
  }
  layout.exempt = {{cols[1], 1}, {cols[3], 1}, {cols[1], b1 - 1}, {cols[3], b1 - 1}};
  return layout;
}

GridSurface classify_points(const GridSurface& grid, const PointLayout& layout) {
  GridSurface out = grid;
  for (int i = 0; i < out.size(); ++i) out.set_role(i, PointRole::Free);
  auto assign = [&](const std::vector<PointLayout::Cell>& cells, PointRole role) {
    for (auto [a, b] : cells) {
      if (!grid.contains(a, b))
        throw ConfigError("layout point (" + std::to_string(a) + "," + std::to_string(b) +
                          ") is outside the " + std::to_string(grid.nu()) + "x" +
                          std::to_string(grid.nv()) + " grid");
      out.set_role(grid.index(a, b), role);
    }
  };
  assign(layout.fixed, PointRole::Fixed);
  assign(layout.design, PointRole::Design);
  assign(layout.exempt, PointRole::Exempt);
  for (auto [a, b] : layout.supports)
    if (!grid.contains(a, b)) throw ConfigError("support point outside the grid");
  return out;
}

}  // namespace pds
