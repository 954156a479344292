#include "doctest.h"

#include "pds/nlp.hpp"

#include <cmath>

using namespace pds;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

GridSurface case1_dome(int n, std::uint64_t seed = 42) {
  BaseSurfaceSpec spec;
  spec.nu = n;
  spec.nv = n;
  spec.rise = 2.0;
  spec.jitter = 0.015;
  spec.seed = seed;
  return classify_points(build_base_surface(spec), case_layout(CasePreset::Case1, n, n));
}

BoundsSpec lower_bounds(const GridSurface& g) { return BoundsSpec::around(g.heights(g.lower_level_variables()), 8.0); }

void check_monotone(const NlpResult& r) {
  for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k].value <= r.history[k - 1].value);
}

}  // namespace

TEST_CASE("one-dimensional quadratics") {
  auto f = [](const Eigen::VectorXd& x) { return (x[0] - 3.0) * (x[0] - 3.0); };
  auto g = [](const Eigen::VectorXd& x) { return vec({2.0 * (x[0] - 3.0)}); };

  const auto inner = minimize_bounded(f, g, vec({0.0}), {vec({0.0}), vec({10.0})});
  CHECK(std::abs(inner.x[0] - 3.0) <= 1e-8);
  CHECK(inner.status == NlpStatus::GradientTolerance);

  const auto active = minimize_bounded(f, g, vec({0.0}), {vec({0.0}), vec({2.0})});
  CHECK(active.x[0] == 2.0);
  CHECK(active.value == 1.0);
  check_monotone(active);
}

TEST_CASE("bounded Rosenbrock") {
  auto f = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  auto g = [](const Eigen::VectorXd& x) {
    return vec({-400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] * x[0])});
  };
  NlpSettings st;
  st.gradient_tolerance = 1e-9;
  st.objective_tolerance = 1e-20;
  st.max_iterations = 2000;
  const BoundsSpec box{vec({-2.0, -2.0}), vec({2.0, 2.0})};
  const auto r = minimize_bounded(f, g, vec({-1.2, 1.0}), box, st);
  CHECK(std::abs(r.x[0] - 1.0) <= 1e-5);
  CHECK(std::abs(r.x[1] - 1.0) <= 1e-5);
  check_monotone(r);

  // Determinism: identical inputs, identical iterate sequence.
  const auto again = minimize_bounded(f, g, vec({-1.2, 1.0}), box, st);
  REQUIRE(again.history.size() == r.history.size());
  for (std::size_t k = 0; k < r.history.size(); ++k) CHECK(again.history[k].value == r.history[k].value);
}

TEST_CASE("iterates stay feasible") {
  const BoundsSpec box{vec({-1.0, 0.5, -3.0}), vec({1.0, 2.0, -1.0})};
  auto f = [&](const Eigen::VectorXd& x) {
    CHECK(box.contains(x));
    return (x - vec({5.0, -5.0, 0.0})).squaredNorm() + std::pow(x[0] * x[1], 2);
  };
  auto g = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd d = 2.0 * (x - vec({5.0, -5.0, 0.0}));
    d[0] += 2.0 * x[0] * x[1] * x[1];
    d[1] += 2.0 * x[1] * x[0] * x[0];
    return d;
  };
  const auto r = minimize_bounded(f, g, vec({0.0, 1.0, -2.0}), box, {});
  CHECK(r.x[0] == 1.0);
  CHECK(r.x[1] == 0.5);
  CHECK(r.x[2] == -1.0);
}

TEST_CASE("stationary start returns the start") {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  auto g = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x); };
  const auto r = minimize_bounded(f, g, vec({0.0, 0.0}), BoundsSpec::around(vec({0.0, 0.0}), 1.0));
  CHECK(r.iterations == 0);
  CHECK(r.x == vec({0.0, 0.0}));
  CHECK(r.status == NlpStatus::GradientTolerance);
}

TEST_CASE("invalid inputs and callback failures") {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  auto g = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x); };
  CHECK_THROWS_AS(minimize_bounded(f, g, vec({3.0}), {vec({0.0}), vec({1.0})}), ConfigError);
  CHECK_THROWS_AS(minimize_bounded(f, g, vec({0.5}), {vec({1.0}), vec({0.0})}), ConfigError);
  NlpSettings bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(minimize_bounded(f, g, vec({0.5}), {vec({0.0}), vec({1.0})}, bad), ConfigError);

  auto broken = [](const Eigen::VectorXd&) -> double { throw NumericalError("degenerate"); };
  try {
    (void)minimize_bounded(broken, g, vec({0.25}), {vec({0.0}), vec({1.0})});
    FAIL("expected NlpFailure");
  } catch (const NlpFailure& e) {
    CHECK(e.iterate() == vec({0.25}));
  }
}

TEST_CASE("lower level leaves developable inputs alone") {
  GridSurface flat(9, 9, 8.0, 8.0);
  const auto cfg = make_objective_config(flat, 100.0);
  const auto r = solve_lower_level(flat, cfg, lower_bounds(flat));
  CHECK(r.grid == flat);
  CHECK(r.solve.iterations == 0);

  GridSurface cyl(15, 15, 10.0, 10.0);
  for (int i = 0; i < cyl.size(); ++i) {
    Vec3 p = cyl.point(i);
    p.z() = 1.5 * std::sin(0.3 * p.x());
    cyl.set_point(i, p);
  }
  const auto rc = solve_lower_level(cyl, make_objective_config(cyl, 100.0), lower_bounds(cyl));
  double drift = 0.0;
  for (int i = 0; i < cyl.size(); ++i) drift = std::max(drift, std::abs(rc.grid.point(i).z() - cyl.point(i).z()));
  CHECK(drift <= 1e-8);
}

TEST_CASE("lower level drives a dome to a piecewise developable surface") {
  const GridSurface dome = case1_dome(15);
  const auto cfg = make_objective_config(dome, 100.0);
  const auto bounds = lower_bounds(dome);
  const auto r = solve_lower_level(dome, cfg, bounds);
  check_monotone(r.solve);

  std::vector<double> roots;
  for (double a : developability_errors(r.grid, cfg.evaluation_set)) roots.push_back(std::sqrt(a));
  CHECK(fraction_below(roots, 1e-4) >= 0.9);

  // Only Free/Exempt heights move and plan coordinates never change.
  for (int i = 0; i < dome.size(); ++i) {
    CHECK(r.grid.point(i).x() == dome.point(i).x());
    CHECK(r.grid.point(i).y() == dome.point(i).y());
    if (!dome.moves_in_lower_level(i)) CHECK(r.grid.point(i).z() == dome.point(i).z());
  }
  CHECK(bounds.contains(r.grid.heights(dome.lower_level_variables())));
  CHECK(r.solve.value == doctest::Approx(objective(r.grid, cfg)).epsilon(1e-14));

  const auto again = solve_lower_level(dome, cfg, bounds, {}, 3);
  CHECK(again.grid == r.grid);
}

TEST_CASE("lower level reaches the analytic floor when only corners are held") {
  BaseSurfaceSpec spec;
  spec.nu = spec.nv = 15;
  spec.jitter = 0.015;
  PointLayout corners;
  corners.fixed = {{0, 0}, {14, 0}, {0, 14}, {14, 14}};
  const GridSurface dome = classify_points(build_base_surface(spec), corners);
  const auto cfg = make_objective_config(dome, 100.0);
  const auto r = solve_lower_level(dome, cfg, lower_bounds(dome));
  const double floor = static_cast<double>(cfg.evaluation_set.size()) * std::tanh(cfg.sharpness * cfg.offset);
  const double f0 = r.solve.history.front().value;
  CHECK(f0 - r.solve.value >= 0.9 * (f0 - floor));
  check_monotone(r.solve);
}

TEST_CASE("tight lower-level bounds are honored") {
  const GridSurface dome = case1_dome(11, 5);
  const auto cfg = make_objective_config(dome, 100.0);
  const auto bounds = BoundsSpec::around(dome.heights(dome.lower_level_variables()), 0.05);
  const auto r = solve_lower_level(dome, cfg, bounds);
  CHECK(bounds.contains(r.solve.x));
  check_monotone(r.solve);
  CHECK_THROWS_AS(solve_lower_level(dome, cfg, BoundsSpec::around(Eigen::VectorXd::Zero(3), 1.0)), ConfigError);
}
