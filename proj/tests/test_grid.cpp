#include "doctest.h"

#include "pds/error.hpp"
#include "pds/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace pds;

namespace {

// Shoelace area of the plan projection of a closed polygon.
double plan_area(const GridSurface& g, const std::vector<int>& loop) {
  double s = 0.0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const Vec3& p = g.point(loop[k]);
    const Vec3& q = g.point(loop[(k + 1) % loop.size()]);
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * s;
}

double plan_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

TEST_CASE("flat base surface spans the plan") {
  BaseSurfaceSpec spec;
  spec.nu = 9;
  spec.nv = 7;
  spec.rise = 0.0;
  spec.jitter = 0.02;
  const GridSurface g = build_base_surface(spec);
  CHECK(g.size() == 63);
  for (const Vec3& p : g.points()) {
    CHECK(p.z() == 0.0);
    CHECK(p.x() >= 0.0);
    CHECK(p.x() <= spec.lx);
    CHECK(p.y() >= 0.0);
    CHECK(p.y() <= spec.ly);
  }
  CHECK(g.point(g.index(8, 6)).x() == spec.lx);
  CHECK(g.point(g.index(8, 6)).y() == spec.ly);
}

TEST_CASE("dome apex without jitter") {
  BaseSurfaceSpec spec;
  spec.nu = 21;
  spec.nv = 21;
  spec.rise = 2.0;
  const GridSurface g = build_base_surface(spec);
  CHECK(g.point(g.index(10, 10)).z() == 2.0);
  CHECK(g.point(g.index(0, 0)).z() == 0.0);
  CHECK(g.point(g.index(20, 20)).z() == 0.0);
}

TEST_CASE("jitter stays within its half-width of the uniform lattice") {
  BaseSurfaceSpec spec;
  spec.jitter = 0.015;
  spec.seed = 42;
  BaseSurfaceSpec plain = spec;
  plain.jitter = 0.0;
  const GridSurface jittered = build_base_surface(spec);
  const GridSurface uniform = build_base_surface(plain);
  double max_dx = 0.0;
  double max_dy = 0.0;
  for (int i = 0; i < jittered.size(); ++i) {
    max_dx = std::max(max_dx, std::abs(jittered.point(i).x() - uniform.point(i).x()));
    max_dy = std::max(max_dy, std::abs(jittered.point(i).y() - uniform.point(i).y()));
  }
  CHECK(max_dx > 0.0);
  CHECK(max_dx <= 0.015 * spec.lx + 1e-12);
  CHECK(max_dy <= 0.015 * spec.ly + 1e-12);
}

TEST_CASE("jittered fans are never inverted") {
  // 0.3 of the spacing: independent draws would flip some diagonal fans.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    BaseSurfaceSpec spec;
    spec.jitter = 0.015;
    spec.seed = seed;
    const GridSurface g = build_base_surface(spec);
    int flipped = 0;
    for (int i : g.interior_points()) {
      const AuxiliaryFan fan = neighbor_fan(g, i);
      for (const auto& t : fan.triangles()) {
        const Vec3 e1 = g.point(t[1]) - g.point(t[0]);
        const Vec3 e2 = g.point(t[2]) - g.point(t[0]);
        if (e1.x() * e2.y() - e1.y() * e2.x() <= 0.0) ++flipped;
      }
    }
    CHECK_MESSAGE(flipped == 0, "seed " << seed);
  }
}

TEST_CASE("identical spec and seed give bit-identical grids") {
  BaseSurfaceSpec spec;
  spec.jitter = 0.01;
  spec.seed = 7;
  CHECK(build_base_surface(spec) == build_base_surface(spec));
  BaseSurfaceSpec other = spec;
  other.seed = 8;
  CHECK_FALSE(build_base_surface(spec) == build_base_surface(other));
}

TEST_CASE("fold-over jitter is rejected") {
  BaseSurfaceSpec spec;
  spec.nu = 11;
  spec.jitter = 0.05;  // half the u spacing
  CHECK_THROWS_AS(build_base_surface(spec), ConfigError);
  spec.jitter = -0.1;
  CHECK_THROWS_AS(build_base_surface(spec), ConfigError);
  spec.jitter = 0.0;
  spec.nu = 2;
  CHECK_THROWS_AS(build_base_surface(spec), ConfigError);
}

TEST_CASE("neighbor fan on a 3x3 grid is the other eight points") {
  GridSurface g(3, 3, 2.0, 2.0);
  const AuxiliaryFan fan = neighbor_fan(g, 4);
  std::set<int> ring(fan.ring.begin(), fan.ring.end());
  CHECK(ring == std::set<int>{0, 1, 2, 3, 5, 6, 7, 8});
  CHECK_THROWS_AS(neighbor_fan(g, 0), ConfigError);
  CHECK_THROWS_AS(neighbor_fan(g, 3), ConfigError);
}

TEST_CASE("fan triangles tile the one-ring") {
  BaseSurfaceSpec spec;
  spec.nu = 5;
  spec.nv = 5;
  spec.rise = 0.0;
  spec.jitter = 0.05;
  spec.seed = 3;
  const GridSurface g = build_base_surface(spec);
  for (int i : g.interior_points()) {
    const AuxiliaryFan fan = neighbor_fan(g, i);
    std::map<int, int> uses;
    double tri_sum = 0.0;
    for (const auto& t : fan.triangles()) {
      CHECK(t[0] == i);
      ++uses[t[1]];
      ++uses[t[2]];
      const double area = plan_triangle_area(g.point(t[0]), g.point(t[1]), g.point(t[2]));
      CHECK(area > 0.0);  // counterclockwise seen from +z
      tri_sum += area;
    }
    CHECK(uses.size() == 8);
    for (auto [idx, count] : uses) CHECK(count == 2);
    const std::vector<int> loop(fan.ring.begin(), fan.ring.end());
    CHECK(std::abs(tri_sum - plan_area(g, loop)) <= 1e-12);
  }
}

TEST_CASE("case presets assign the expected roles") {
  GridSurface g(21, 21, 10.0, 10.0);
  const GridSurface c1 = classify_points(g, case_layout(CasePreset::Case1, 21, 21));
  CHECK(c1.points_with_role(PointRole::Fixed).size() + c1.design_points().size() == 9);
  CHECK(c1.design_points().size() == 5);
  CHECK(c1.role(c1.index(10, 10)) == PointRole::Design);
  CHECK(c1.role(c1.index(0, 0)) == PointRole::Fixed);
  CHECK(case_layout(CasePreset::Case1, 21, 21).supports.size() == 8);

  GridSurface r(21, 11, 10.0, 5.0);
  const GridSurface c2 = classify_points(r, case_layout(CasePreset::Case2, 21, 11));
  CHECK(c2.points_with_role(PointRole::Fixed).size() + c2.design_points().size() == 15);
  CHECK(c2.design_points().size() == 11);
  const auto exempt = c2.points_with_role(PointRole::Exempt);
  CHECK(exempt.size() == 4);
  for (int i : exempt) {
    CHECK_FALSE(c2.is_boundary(i));
    CHECK(c2.moves_in_lower_level(i));
    CHECK_FALSE(c2.evaluates_developability(i));
  }
}

TEST_CASE("empty layout leaves every point free") {
  GridSurface g(5, 4, 1.0, 1.0);
  const GridSurface c = classify_points(g, PointLayout{});
  CHECK(c.lower_level_variables().size() == 20);
  int evaluated = 0;
  for (int i = 0; i < c.size(); ++i) evaluated += c.evaluates_developability(i) ? 1 : 0;
  CHECK(evaluated == static_cast<int>(c.interior_points().size()));
}

TEST_CASE("layouts outside the grid are rejected") {
  GridSurface g(5, 5, 1.0, 1.0);
  PointLayout layout;
  layout.design = {{5, 0}};
  CHECK_THROWS_AS(classify_points(g, layout), ConfigError);
  layout.design.clear();
  layout.supports = {{-1, 2}};
  CHECK_THROWS_AS(classify_points(g, layout), ConfigError);
}

TEST_CASE("every point has exactly one role") {
  GridSurface g(13, 13, 10.0, 10.0);
  const GridSurface c = classify_points(g, case_layout(CasePreset::Case1, 13, 13));
  std::size_t total = 0;
  for (auto r : {PointRole::Free, PointRole::Fixed, PointRole::Design, PointRole::Exempt})
    total += c.points_with_role(r).size();
  CHECK(total == static_cast<std::size_t>(c.size()));
  for (int i : c.design_points()) CHECK_FALSE(c.moves_in_lower_level(i));
}
