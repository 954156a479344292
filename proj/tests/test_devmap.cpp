#include "doctest.h"

#include "pds/devmap.hpp"
#include "pds/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

using namespace pds;

namespace {

GridSurface dome(int n, double rise, double jitter, std::uint64_t seed) {
  BaseSurfaceSpec spec;
  spec.nu = n;
  spec.nv = n;
  spec.rise = rise;
  spec.jitter = jitter;
  spec.seed = seed;
  return build_base_surface(spec);
}

// Uniform lattice lifted onto a cylinder z = f(x).
GridSurface cylinder(int n) {
  GridSurface g(n, n, 10.0, 10.0);
  for (int i = 0; i < g.size(); ++i) {
    Vec3 p = g.point(i);
    p.z() = 2.0 * std::sin(std::numbers::pi * p.x() / 10.0) + 0.05 * p.x() * p.x();
    g.set_point(i, p);
  }
  return g;
}

// Independent area oracle: Eigen cross products on centrally projected tips.
double projected_area(const Vec3& n, const Vec3& a, const Vec3& b) {
  const Vec3 pa = a / a.dot(n) - n;
  const Vec3 pb = b / b.dot(n) - n;
  return 0.5 * pa.cross(pb).norm();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

TEST_CASE("face normals of planes") {
  GridSurface flat(5, 5, 4.0, 4.0);
  for (const Vec3& n : face_normals(flat, neighbor_fan(flat, 12))) CHECK((n - Vec3(0, 0, 1)).norm() <= 1e-15);

  GridSurface tilted = dome(5, 0.0, 0.1, 4);
  for (int i = 0; i < tilted.size(); ++i) {
    Vec3 p = tilted.point(i);
    p.z() = p.x();
    tilted.set_point(i, p);
  }
  const Vec3 expected = Vec3(-1, 0, 1) / std::sqrt(2.0);
  for (int i : tilted.interior_points())
    for (const Vec3& n : face_normals(tilted, neighbor_fan(tilted, i))) CHECK((n - expected).norm() <= 1e-14);
}

TEST_CASE("face normals are orthogonal to their triangle edges") {
  const GridSurface g = dome(3, 1.5, 0.1, 11);
  const AuxiliaryFan fan = neighbor_fan(g, 4);
  const auto normals = face_normals(g, fan);
  const auto tris = fan.triangles();
  for (int j = 0; j < 8; ++j) {
    const Vec3 e1 = g.point(tris[j][1]) - g.point(tris[j][0]);
    const Vec3 e2 = g.point(tris[j][2]) - g.point(tris[j][0]);
    CHECK(std::abs(normals[j].dot(e1.normalized())) <= 1e-12);
    CHECK(std::abs(normals[j].dot(e2.normalized())) <= 1e-12);
    CHECK(std::abs(normals[j].norm() - 1.0) <= 1e-12);
    CHECK(normals[j].z() > 0.0);
  }
}

TEST_CASE("degenerate fan triangle is reported") {
  GridSurface g(3, 3, 2.0, 2.0);
  g.set_point(5, g.point(4));  // collapse the +x neighbor onto the center
  try {
    (void)face_normals(g, neighbor_fan(g, 4));
    FAIL("expected a degenerate triangle");
  } catch (const DegenerateTriangleError& e) {
    CHECK(e.point() == 4);
    CHECK(e.triangle() == 0);
  }
  CHECK_THROWS_AS(objective(g, make_objective_config(g, 100.0)), NumericalError);
}

TEST_CASE("vertex normal is the renormalized mean") {
  std::array<Vec3, 8> same;
  same.fill(Vec3(0, 0, 1));
  CHECK((vertex_normal(same) - Vec3(0, 0, 1)).norm() <= 1e-15);

  const double t = 0.3;
  std::array<Vec3, 8> tilted;
  for (int j = 0; j < 8; ++j) tilted[j] = Vec3(0, (j % 2 ? -1 : 1) * std::sin(t), std::cos(t));
  CHECK((vertex_normal(tilted) - Vec3(0, 0, 1)).norm() <= 1e-15);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    std::array<Vec3, 8> n;
    Vec3 sum = Vec3::Zero();
    for (auto& v : n) {
      v = Vec3(0.3 * nd(rng), 0.3 * nd(rng), 1.0).normalized();
      sum += v;
    }
    CHECK((vertex_normal(n) - sum.normalized()).norm() <= 1e-14);
  }

  std::array<Vec3, 8> cancel;
  for (int j = 0; j < 8; ++j) cancel[j] = Vec3(0, 0, j % 2 ? 1.0 : -1.0);
  CHECK_THROWS_AS(vertex_normal(cancel), NumericalError);
}

TEST_CASE("Gauss-map triangle areas") {
  std::array<Vec3, 8> same;
  same.fill(Vec3(0.1, 0.2, 1.0).normalized());
  for (double a : gauss_triangle_areas(same[0], same)) CHECK(a == 0.0);

  // Normals on one great circle (single-curved surface): zero area.
  std::array<Vec3, 8> arc;
  for (int j = 0; j < 8; ++j) {
    const double t = 0.4 * std::sin(0.7 * j + 0.2);
    arc[j] = Vec3(std::sin(t), 0, std::cos(t));
  }
  for (double a : gauss_triangle_areas(vertex_normal(arc), arc)) CHECK(a <= 1e-16);

  const double s = 0.1;
  const Vec3 n(0, 0, 1);
  const Vec3 a(s, 0, std::sqrt(1 - s * s));
  const Vec3 b(0, s, std::sqrt(1 - s * s));
  std::array<Vec3, 8> fan;
  fan.fill(n);
  fan[0] = a;
  fan[1] = b;
  const auto areas = gauss_triangle_areas(n, fan);
  CHECK(areas[0] == doctest::Approx(projected_area(n, a, b)).epsilon(1e-13));
  CHECK(areas[0] == doctest::Approx(0.5 * s * s).epsilon(0.02));
  CHECK(areas[1] == doctest::Approx(projected_area(n, b, n)).epsilon(1e-13));
  CHECK(areas[1] == 0.0);
}

TEST_CASE("developability error on reference shapes") {
  GridSurface flat(11, 11, 10.0, 10.0);
  for (int i : flat.interior_points()) CHECK(developability_error(flat, i) == 0.0);

  const GridSurface cyl = cylinder(21);
  double worst = 0.0;
  for (int i : cyl.interior_points()) worst = std::max(worst, developability_error(cyl, i));
  CHECK(worst <= 1e-20);

  const GridSurface d = dome(21, 2.0, 0.0, 1);
  for (int i : d.interior_points()) CHECK(developability_error(d, i) > 0.0);

  const PointGaussMap report = gauss_map_at(d, d.index(5, 7));
  double sum = 0.0;
  for (double a : report.areas) sum += a * a;
  CHECK(report.error == doctest::Approx(sum).epsilon(1e-14));
  CHECK(report.sqrt_error == doctest::Approx(std::sqrt(sum)).epsilon(1e-14));
  CHECK(std::abs(report.vertex_normal.norm() - 1.0) <= 1e-12);
}

TEST_CASE("batched errors match per-point evaluation") {
  const GridSurface d = dome(15, 2.0, 0.02, 9);
  const auto ids = d.interior_points();
  const auto batch = developability_errors(d, ids, 3);
  for (std::size_t k = 0; k < ids.size(); ++k) CHECK(batch[k] == developability_error(d, ids[k]));
}

TEST_CASE("objective on flat and bounded inputs") {
  GridSurface flat(11, 11, 10.0, 10.0);
  const auto cfg = make_objective_config(flat, 100.0, 1e-6);
  CHECK(cfg.evaluation_set.size() == 81);
  CHECK(std::abs(objective(flat, cfg) - 81.0 * std::tanh(1e-4)) <= 1e-12);

  const GridSurface d = dome(11, 2.0, 0.02, 2);
  const auto dcfg = make_objective_config(d, 100.0);
  const double f = objective(d, dcfg);
  CHECK(f > 0.0);
  CHECK(f < static_cast<double>(dcfg.evaluation_set.size()));

  CHECK_THROWS_AS(make_objective_config(d, 0.0), ConfigError);
  CHECK_THROWS_AS(make_objective_config(d, 10.0, -1.0), ConfigError);
}

TEST_CASE("one large local error saturates") {
  GridSurface g(11, 11, 10.0, 10.0);
  const int spike = g.index(5, 5);
  g.set_point(spike, g.point(spike) + Vec3(0, 0, 1.0));
  const auto cfg = make_objective_config(g, 100.0, 1e-6);
  // The spike touches the fans of itself and its 8 neighbors.
  int touched = 0;
  for (int i : cfg.evaluation_set) {
    const double a = developability_error(g, i);
    if (a > 0.0) {
      ++touched;
      CHECK(filtered_term(a, cfg) > 0.999);
    }
  }
  CHECK(touched == 9);
  const double expected = (81 - 9) * std::tanh(100.0 * 1e-6) + 9.0;
  CHECK(std::abs(objective(g, cfg) - expected) <= 9e-3);
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rise(0.5, 2.5);
  for (double c : {10.0, 100.0}) {
    for (int trial = 0; trial < 3; ++trial) {
      const GridSurface g = dome(7, rise(rng), 0.05, 100 + trial);
      const auto cfg = make_objective_config(g, c);
      const auto grad = objective_gradient(g, cfg);
      CHECK(grad.value == doctest::Approx(objective(g, cfg)).epsilon(1e-14));
      const double h = 1e-6;
      double worst = 0.0;
      for (int i = 0; i < g.size(); ++i) {
        if (std::abs(grad.dz[i]) <= 1e-10) continue;
        // Per-term differences avoid rounding in the large total.
        GridSurface up = g;
        GridSurface dn = g;
        up.set_point(i, g.point(i) + Vec3(0, 0, h));
        dn.set_point(i, g.point(i) - Vec3(0, 0, h));
        double diff = 0.0;
        for (int k : cfg.evaluation_set)
          diff += filtered_term(developability_error(up, k), cfg) - filtered_term(developability_error(dn, k), cfg);
        const double fd = diff / (2 * h);
        worst = std::max(worst, std::abs(fd - grad.dz[i]) / std::abs(fd));
      }
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("gradient vanishes on a flat grid") {
  GridSurface flat(9, 9, 8.0, 8.0);
  const auto cfg = make_objective_config(flat, 100.0);
  const auto grad = objective_gradient(flat, cfg);
  CHECK(grad.dz.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad.below_floor.size() == cfg.evaluation_set.size());
}

TEST_CASE("gradient doubles with c in the linear regime") {
  const GridSurface g = dome(9, 1e-4, 0.02, 6);
  auto cfg = make_objective_config(g, 1.0, 0.0);
  const auto g1 = objective_gradient(g, cfg);
  cfg.sharpness = 2.0;
  const auto g2 = objective_gradient(g, cfg);
  CHECK((g2.dz - 2.0 * g1.dz).norm() <= 1e-6 * g2.dz.norm());
}

TEST_CASE("gradient is independent of thread count") {
  const GridSurface g = dome(13, 2.0, 0.02, 12);
  const auto cfg = make_objective_config(g, 100.0);
  const auto a = objective_gradient(g, cfg, 1);
  const auto b = objective_gradient(g, cfg, 4);
  CHECK(a.value == b.value);
  CHECK(a.dz == b.dz);
  CHECK(objective(g, cfg, 1) == objective(g, cfg, 3));
}

TEST_CASE("rigid motion and uniform scale leave F unchanged") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> shift(-20.0, 20.0);
  for (int trial = 0; trial < 5; ++trial) {
    const GridSurface g = dome(9, 1.0 + trial * 0.4, 0.03, 50 + trial);
    const auto cfg = make_objective_config(g, 100.0);
    const double f0 = objective(g, cfg);
    const Eigen::Matrix3d rot = random_rotation(rng);
    const Vec3 t(shift(rng), shift(rng), shift(rng));
    GridSurface moved = g;
    GridSurface scaled = g;
    for (int i = 0; i < g.size(); ++i) {
      moved.set_point(i, rot * g.point(i) + t);
      scaled.set_point(i, 3.7 * g.point(i));
    }
    CHECK(std::abs(objective(moved, cfg) - f0) <= 1e-10);
    CHECK(std::abs(objective(scaled, cfg) - f0) <= 1e-10);
    for (int i : cfg.evaluation_set) {
      CHECK(std::abs(developability_error(moved, i) - developability_error(g, i)) <= 1e-10);
      CHECK(std::abs(developability_error(scaled, i) - developability_error(g, i)) <= 1e-10);
    }
  }
}

TEST_CASE("F increases with c and eps; saturation underestimates large errors") {
  const GridSurface g = dome(11, 2.0, 0.02, 31);
  auto cfg = make_objective_config(g, 10.0);
  double prev = objective(g, cfg);
  for (double c : {20.0, 50.0, 100.0, 200.0}) {
    cfg.sharpness = c;
    const double f = objective(g, cfg);
    CHECK(f > prev);
    prev = f;
  }
  cfg.sharpness = 10.0;
  cfg.offset = 0.0;
  prev = objective(g, cfg);
  for (double eps : {1e-6, 1e-4, 1e-2}) {
    cfg.offset = eps;
    const double f = objective(g, cfg);
    CHECK(f > prev);
    prev = f;
  }

  cfg.sharpness = 100.0;
  cfg.offset = 1e-6;
  // 1 - tanh(3) is about 5e-3, so the 1e-3-per-point bound needs K >= 4/c.
  const double k_cap = 4.0 / cfg.sharpness;
  double capped = 0.0;
  for (int i : cfg.evaluation_set)
    capped += std::tanh(cfg.sharpness * (std::min(smoothed_sqrt(developability_error(g, i)), k_cap) + cfg.offset));
  CHECK(std::abs(capped - objective(g, cfg)) < cfg.evaluation_set.size() * 1e-3);
}

TEST_CASE("error statistics") {
  const std::vector<double> v = {10, 0, 0, 0, 0, 0, 0, 0, 0, 10};
  CHECK(error_concentration(v) == doctest::Approx(0.5));
  CHECK(fraction_below(v, 1.0) == doctest::Approx(0.8));
  const std::vector<double> uniform(20, 1.0);
  CHECK(error_concentration(uniform) == doctest::Approx(0.1));
}
