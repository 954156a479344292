// pdsopt: command-line front end for the shape optimization pipeline.

#include "pds/error.hpp"
#include "pds/io.hpp"
#include "pds/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <regex>

namespace fs = std::filesystem;
using namespace pds;

namespace {

struct CaseFlags {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> sharpness;
  std::string grid;
  std::optional<int> threads;
  std::string out;
};

void add_case_flags(CLI::App* cmd, CaseFlags& f) {
  cmd->add_option("--case", f.preset, "case1, case2 or custom")->check(CLI::IsMember({"case1", "case2", "custom"}));
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--c", f.sharpness, "developability filter sharpness");
  cmd->add_option("--threads", f.threads, "worker threads");
}

CaseConfig resolve_case(const CaseFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    try {
      j = nlohmann::json::parse(read_text(f.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(f.config + ": expected a JSON object");
  }
  if (!f.preset.empty()) j["case"] = f.preset;
  CaseConfig c = case_config_from_json(j);
  if (f.seed) c.seed = *f.seed;
  if (f.sharpness) c.sharpness = *f.sharpness;
  if (f.threads) c.threads = *f.threads;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.grid.empty()) {
    static const std::regex shape(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(f.grid, m, shape)) throw ConfigError("--grid expects NUxNV, got '" + f.grid + "'");
    c.surface.nu = std::stoi(m[1]);
    c.surface.nv = std::stoi(m[2]);
  }
  return c;
}

// Analyses of an existing grid use its size for the layout.
CaseConfig case_for_grid(const CaseFlags& f, const GridSurface& g) {
  CaseConfig c = resolve_case(f);
  c.surface.nu = g.nu();
  c.surface.nv = g.nv();
  c.surface.lx = g.lx();
  c.surface.ly = g.ly();
  c.validate();
  return c;
}

int cmd_run(const CaseFlags& f, bool skip, bool triangulate, std::optional<int> stop) {
  CaseConfig c = resolve_case(f);
  if (skip) c.skip_anneal = true;
  if (triangulate) c.triangulate = true;
  if (stop) c.stop_after_levels = *stop;
  const RunArtifacts r = run_pipeline(c);
  std::cout << report_summary(r.summary);
  if (!r.summary.optimal && !c.skip_anneal) std::cout << "stopped at a checkpoint; continue with 'pdsopt resume'\n";
  std::cout << "artifacts in " << r.out_dir.string() << "\n";
  return 0;
}

int cmd_analyze(const CaseFlags& f, const std::string& grid_path) {
  const GridSurface g = read_grid(grid_path);
  const CaseConfig c = case_for_grid(f, g);
  const FemResult fem = analyze_shell(g, c);
  double peak = 0.0;
  for (const PrincipalMoments& m : fem.moments) peak = std::max(peak, m.max());
  std::printf("W = %#.4g kNm\nmax |M| = %#.4g kNm/m\n", fem.work, peak);
  if (!f.out.empty()) {
    const fs::path out = f.out;
    write_fem_vtk(out / "analysis_fem.vtk", g, fem);
    write_fem_csv(out / "analysis_fem.csv", fem);
    std::cout << "artifacts in " << out.string() << "\n";
  }
  return 0;
}

int cmd_devcheck(const CaseFlags& f, const std::string& grid_path) {
  const GridSurface g = read_grid(grid_path);
  const CaseConfig c = case_for_grid(f, g);
  const DevObjectiveConfig obj = make_objective_config(g, c.sharpness, c.offset);
  const DevStats s = developability_stats(g, obj, c.threads);
  std::printf("F = %.10g over %zu points (c = %g)\n", s.objective, obj.evaluation_set.size(), c.sharpness);
  std::printf("sqrt(A): max %.4e, median %.4e, %d at or above %g, %.1f%% below\n", s.max_sqrt, s.median_sqrt,
              s.count_above, kDevelopableThreshold, 100.0 * s.fraction_below);
  std::printf("top 10%% of points carry %.1f%% of sum sqrt(A)\n", 100.0 * s.concentration);
  if (!f.out.empty()) {
    const fs::path out = f.out;
    write_devcheck_csv(out / "devcheck.csv", g, obj, c.threads);
    write_gauss_vtk(out / "devcheck_gauss.vtk", g, obj, c.threads);
    std::cout << "artifacts in " << out.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape optimization of piecewise developable shells"};
  app.require_subcommand(1);

  CaseFlags run_flags, analyze_flags, dev_flags;
  bool skip = false, triangulate = false;
  std::optional<int> stop;
  auto* run = app.add_subcommand("run", "run the three-stage pipeline");
  add_case_flags(run, run_flags);
  run->add_option("--seed", run_flags.seed, "seed for jitter and annealing");
  run->add_option("--grid", run_flags.grid, "grid size NUxNV");
  run->add_option("--out", run_flags.out, "output directory");
  run->add_flag("--skip-anneal", skip, "stop after the lower-level stage");
  run->add_flag("--triangulate", triangulate, "write triangles instead of quads to OBJ");
  run->add_option("--stop-after-levels", stop, "checkpoint and stop after N temperature levels")
      ->check(CLI::PositiveNumber);

  std::string analyze_grid, dev_grid;
  auto* analyze = app.add_subcommand("analyze", "shell analysis of a grid file");
  analyze->add_option("grid", analyze_grid, "grid file")->required();
  add_case_flags(analyze, analyze_flags);
  analyze->add_option("--out", analyze_flags.out, "write analysis_fem.{vtk,csv} here");

  auto* devcheck = app.add_subcommand("devcheck", "developability report of a grid file");
  devcheck->add_option("grid", dev_grid, "grid file")->required();
  add_case_flags(devcheck, dev_flags);
  devcheck->add_option("--out", dev_flags.out, "write devcheck.csv and devcheck_gauss.vtk here");

  std::string resume_dir;
  std::optional<int> resume_threads;
  auto* resume = app.add_subcommand("resume", "continue an interrupted run");
  resume->add_option("--out", resume_dir, "run directory")->required();
  resume->add_option("--threads", resume_threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return cmd_run(run_flags, skip, triangulate, stop);
    if (*analyze) return cmd_analyze(analyze_flags, analyze_grid);
    if (*devcheck) return cmd_devcheck(dev_flags, dev_grid);
    const RunArtifacts r = resume_pipeline(resume_dir, resume_threads);
    std::cout << report_summary(r.summary) << "artifacts in " << r.out_dir.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
