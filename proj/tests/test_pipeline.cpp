#include "doctest.h"

#include "pds/io.hpp"
#include "pds/pipeline.hpp"

#include <cmath>
#include <filesystem>

using namespace pds;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pds_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

CaseConfig small_case(const fs::path& out) {
  CaseConfig c = default_case_config("case1");
  c.surface.nu = 9;
  c.surface.nv = 9;
  c.anneal.steps = 5;
  c.anneal.moves = 5;
  c.anneal.warmup_samples = 5;
  c.anneal.local_search_budget = 10;
  c.out_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("compliance triple formatting") {
  CHECK(format_compliance_triple(4.998, 5.555, 3.386) == "4.998 → 5.555 → 3.386 kNm");
  CHECK(format_compliance_triple(5.0, 12.3456, 0.001234) == "5.000 → 12.35 → 0.001234 kNm");
  CHECK(format_compliance_triple(4.998, std::nullopt, std::nullopt) == "4.998 → n/a → n/a kNm");

  RunSummary s;
  s.preset = "case1";
  s.nu = s.nv = 21;
  s.sharpness = 100;
  s.initial = StageSummary{4.998, {}};
  s.pds = StageSummary{5.555, {}};
  s.optimal = StageSummary{3.386, {}};
  CHECK(report_summary(s).find("4.998 → 5.555 → 3.386 kNm") != std::string::npos);
  s.optimal.reset();
  CHECK(report_summary(s).find("n/a") != std::string::npos);
}

TEST_CASE("config json round trip and strictness") {
  for (const char* preset : {"case1", "case2"}) {
    CaseConfig c = default_case_config(preset);
    c.seed = 7;
    c.anneal.initial_temperature = 0.5;
    c.load.per_plan_area = true;
    const nlohmann::json j = to_json(c);
    CHECK(to_json(case_config_from_json(j)) == j);
  }
  CHECK(case_config_from_json(nlohmann::json::parse(R"({"case":"case2"})")).surface.nv == 11);
  CHECK(case_config_from_json(nlohmann::json::parse(R"({"grid":{"nu":13}})")).surface.nu == 13);

  CHECK_THROWS_AS(case_config_from_json(nlohmann::json::parse(R"({"sead":1})")), ConfigError);
  CHECK_THROWS_AS(case_config_from_json(nlohmann::json::parse(R"({"anneal":{"step":3}})")), ConfigError);
  CHECK_THROWS_AS(case_config_from_json(nlohmann::json::parse(R"({"seed":"x"})")), ConfigError);
  CHECK_THROWS_AS(case_config_from_json(nlohmann::json::parse(R"({"case":"case3"})")), ConfigError);
  CHECK_THROWS_AS(case_config_from_json(nlohmann::json::parse(R"({"load":{"direction":[0,1]}})")), ConfigError);
  CHECK_THROWS_AS(load_case_config("/nonexistent/config.json"), ConfigError);

  CaseConfig bad = default_case_config();
  bad.sharpness = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = default_case_config("custom");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("grid and layout files round trip") {
  const fs::path dir = scratch("io");
  CaseConfig c = default_case_config("case2");
  const GridSurface g = initial_surface(c);
  write_grid(dir / "g.grid", g);
  CHECK(read_grid(dir / "g.grid") == g);

  const std::string text = slurp(dir / "g.grid");
  write_text_atomic(dir / "extra.grid", text + "1 2 3 free\n");
  CHECK_THROWS_AS(read_grid(dir / "extra.grid"), ConfigError);
  write_text_atomic(dir / "short.grid", text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_grid(dir / "short.grid"), ConfigError);
  write_text_atomic(dir / "role.grid", "3 3\n0 0 0 wobbly\n");
  CHECK_THROWS_AS(read_grid(dir / "role.grid"), ConfigError);

  const PointLayout layout = resolve_layout(c);
  write_layout(dir / "layout.txt", layout);
  const PointLayout back = read_layout(dir / "layout.txt");
  CHECK(back.fixed == layout.fixed);
  CHECK(back.design == layout.design);
  CHECK(back.exempt == layout.exempt);
  CHECK(back.supports == layout.supports);
  write_text_atomic(dir / "bad_layout.txt", "fixed 1\n");
  CHECK_THROWS_AS(read_layout(dir / "bad_layout.txt"), ConfigError);

  // A custom layout reproduces the preset it was copied from.
  CaseConfig custom = c;
  custom.preset = "custom";
  custom.layout_file = (dir / "layout.txt").string();
  CHECK(initial_surface(custom) == initial_surface(c));
}

TEST_CASE("design evaluation reuses the warm start and stays finite at the bounds") {
  CaseConfig c = small_case(scratch("eval"));
  const GridSurface base = initial_surface(c);
  const DevObjectiveConfig obj = make_objective_config(base, c.sharpness, c.offset);
  const BoundsSpec lower = BoundsSpec::around(base.heights(base.lower_level_variables()), c.lower_half_width);
  const LowerLevelResult pds = solve_lower_level(base, obj, lower, c.lower);
  const double w_pds = analyze_shell(pds.grid, c).work;

  DesignState state = make_design_state(c, base, pds.grid);
  const std::vector<int> design = base.design_points();
  const Eigen::VectorXd z2 = base.heights(design);
  const DesignEvaluation at_z2 = evaluate_design(z2, state);
  CHECK(at_z2.reused_warm);
  CHECK(at_z2.result.w == w_pds);
  CHECK(at_z2.result.f_residual == doctest::Approx(pds.solve.value).epsilon(1e-12));

  const Eigen::VectorXd corner = z2.array() + c.upper_half_width;
  const DesignEvaluation up = evaluate_design(corner, state);
  REQUIRE(up.result.ok());
  CHECK(up.grid.heights(design) == corner);
  CHECK(!up.reused_warm);
  // The other corner, starting from the raised shape.
  const DesignEvaluation down = evaluate_design(z2.array() - c.upper_half_width, state);
  CHECK(down.result.ok());
  CHECK(std::isfinite(down.result.f_residual));

  const DesignEvaluation wrong = evaluate_design(Eigen::VectorXd::Zero(1), state);
  CHECK(!wrong.result.ok());
}

TEST_CASE("pipeline artifacts, determinism and resume") {
  const fs::path a = scratch("full_a");
  const CaseConfig cfg = small_case(a);
  const RunArtifacts run = run_pipeline(cfg);
  REQUIRE(run.summary.optimal);
  REQUIRE(run.optimal);
  CHECK(run.summary.optimal->compliance <= run.summary.pds->compliance);
  CHECK(run.summary.pds->dev.objective < run.summary.initial->dev.objective);

  for (const char* stage : {"initial", "pds", "optimal"})
    for (const char* suffix : {".grid", ".obj", "_gauss.csv", "_gauss.vtk", "_fem.vtk", "_fem.csv"})
      CHECK_MESSAGE(fs::exists(a / (std::string(stage) + suffix)), stage << suffix);
  for (const char* f : {"config.json", "summary.json", "timings.json", "objective_history.csv", "anneal_history.csv",
                        "anneal_checkpoint.json"})
    CHECK_MESSAGE(fs::exists(a / f), f);
  CHECK(slurp(a / "initial.obj").find("\nf ") != std::string::npos);

  SUBCASE("exported shapes reproduce the reported values") {
    for (const auto& [name, stage] : {std::pair{"initial", run.summary.initial}, {"pds", run.summary.pds},
                                      {"optimal", run.summary.optimal}}) {
      const GridSurface g = read_grid(a / (std::string(name) + ".grid"));
      const double f = objective(g, make_objective_config(g, cfg.sharpness, cfg.offset));
      const double w = analyze_shell(g, cfg).work;
      CHECK(std::abs(f - stage->dev.objective) <= 1e-8 * std::max(1.0, std::abs(f)));
      CHECK(std::abs(w - stage->compliance) <= 1e-8 * std::max(1.0, std::abs(w)));
    }
    const RunSummary back = summary_from_json(nlohmann::json::parse(slurp(a / "summary.json")));
    CHECK(to_json(back) == to_json(run.summary));
  }

  SUBCASE("rerun gives byte-identical results") {
    const fs::path b = scratch("full_b");
    CaseConfig again = cfg;
    again.out_dir = b.string();
    again.threads = 2;
    run_pipeline(again);
    for (const char* f : {"summary.json", "optimal.grid", "anneal_history.csv", "pds_fem.csv"})
      CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }

  SUBCASE("skipping the anneal leaves the first two stages unchanged") {
    const fs::path s = scratch("skip");
    CaseConfig skip = cfg;
    skip.out_dir = s.string();
    skip.skip_anneal = true;
    const RunArtifacts r = run_pipeline(skip);
    CHECK(!r.summary.optimal);
    CHECK(!fs::exists(s / "optimal.grid"));
    CHECK(!fs::exists(s / "anneal_history.csv"));
    for (const char* f : {"initial.grid", "initial_fem.csv", "initial_gauss.csv", "pds.grid", "pds_fem.vtk",
                          "pds_gauss.vtk", "objective_history.csv"})
      CHECK_MESSAGE(slurp(a / f) == slurp(s / f), f);
    CHECK(report_summary(r.summary).find("→ n/a kNm") != std::string::npos);
  }

  SUBCASE("an interrupted run resumes to the same result") {
    const fs::path p = scratch("partial");
    CaseConfig part = cfg;
    part.out_dir = p.string();
    part.stop_after_levels = 2;
    const RunArtifacts stopped = run_pipeline(part);
    CHECK(!stopped.summary.optimal);
    REQUIRE(fs::exists(p / "anneal_checkpoint.json"));
    CHECK(!fs::exists(p / "optimal.grid"));

    const RunArtifacts resumed = resume_pipeline(p);
    REQUIRE(resumed.summary.optimal);
    CHECK(slurp(p / "summary.json") == slurp(a / "summary.json"));
    CHECK(slurp(p / "anneal_history.csv") == slurp(a / "anneal_history.csv"));
    CHECK(slurp(p / "optimal.grid") == slurp(a / "optimal.grid"));
  }
}

TEST_CASE("zero load gives zero compliance everywhere") {
  CaseConfig c = small_case(scratch("zero"));
  c.load.pressure = 0.0;
  c.anneal.steps = 2;
  c.anneal.moves = 2;
  c.anneal.local_search = false;
  const RunArtifacts r = run_pipeline(c);
  REQUIRE(r.summary.optimal);
  CHECK(format_compliance_triple(r.summary.initial->compliance, r.summary.pds->compliance,
                                 r.summary.optimal->compliance) == "0.000 → 0.000 → 0.000 kNm");
}

TEST_CASE("resume without a checkpoint is a configuration error") {
  CaseConfig c = small_case(scratch("noresume"));
  c.skip_anneal = true;
  run_pipeline(c);
  CHECK_THROWS_AS(resume_pipeline(c.out_dir), ConfigError);
  CHECK_THROWS_AS(resume_pipeline(scratch("missing")), ConfigError);
}
