#pragma once

#include "pds/anneal.hpp"
#include "pds/devmap.hpp"
#include "pds/fem.hpp"
#include "pds/grid.hpp"
#include "pds/nlp.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pds {

/// Every setting of a run. Defaults reproduce the reference setup of the
/// selected preset; `seed` drives both the jitter and the annealer.
struct CaseConfig {
  std::string preset = "case1";   // case1 | case2 | custom
  std::string layout_file;        // required for custom
  BaseSurfaceSpec surface;
  double sharpness = 100.0;       // c
  double offset = 1e-6;           // eps
  double lower_half_width = 8.0;  // m, around the base-surface free heights
  double upper_half_width = 1.0;  // m, around the base-surface design heights
  NlpSettings lower;
  ShellMaterial material;
  AreaLoad load;
  AnnealConfig anneal;
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out_dir = "out";
  bool skip_anneal = false;
  int stop_after_levels = 0;      // >0: checkpoint and stop after that many temperature levels
  bool triangulate = false;

  void validate() const;
};

CaseConfig default_case_config(const std::string& preset = "case1");

nlohmann::json to_json(const CaseConfig& config);
/// Applies the keys present in `j` on top of the defaults of its "case"
/// preset (or `base` when given). Unknown keys are errors.
CaseConfig case_config_from_json(const nlohmann::json& j);
CaseConfig case_config_from_json(const nlohmann::json& j, const CaseConfig& base);
CaseConfig load_case_config(const std::filesystem::path& path);

PointLayout resolve_layout(const CaseConfig& config);

/// Base surface with roles assigned, the starting point of every run.
GridSurface initial_surface(const CaseConfig& config);

struct DevStats {
  double objective = 0.0;       // F
  double max_sqrt = 0.0;
  double median_sqrt = 0.0;
  int count_above = 0;          // sqrt(A_i) >= threshold
  double fraction_below = 0.0;  // sqrt(A_i) < threshold
  double concentration = 0.0;   // share of sum sqrt(A_i) in the top 10%
};

inline constexpr double kDevelopableThreshold = 1e-4;

DevStats developability_stats(const GridSurface& grid, const DevObjectiveConfig& config, int threads = 1);

/// Shell compliance of a shaped grid under the configured supports/load.
FemResult analyze_shell(const GridSurface& grid, const CaseConfig& config);

/// Upper-level evaluation context. `warm` is the previous lower-level
/// solution; it is replaced after every successful evaluation.
struct DesignState {
  GridSurface base;
  GridSurface warm;
  BoundsSpec lower_bounds;
  DevObjectiveConfig objective;
  CaseConfig config;
  std::vector<int> supports;
};

DesignState make_design_state(const CaseConfig& config, const GridSurface& base, const GridSurface& warm);

struct DesignEvaluation {
  Evaluation result;
  GridSurface grid;             // solved shape (valid when result.ok())
  bool reused_warm = false;     // Z matched the warm start exactly
  bool fell_back = false;       // warm start failed, solved from the base surface
};

/// Imposes Z, solves the lower level (warm-started) and returns the shell
/// compliance. Solver failures map to the +inf sentinel; never throws
/// NumericalError.
DesignEvaluation evaluate_design(const Eigen::VectorXd& z, DesignState& state);

struct StageSummary {
  double compliance = 0.0;
  DevStats dev;
};

struct RunSummary {
  std::string preset;
  int nu = 0, nv = 0;
  double sharpness = 0.0;
  std::uint64_t seed = 0;
  std::optional<StageSummary> initial, pds, optimal;
  // Stage 2
  std::string lower_status;
  int lower_iterations = 0;
  // Stage 3
  std::vector<double> z_initial, z_optimal;
  int anneal_evaluations = 0, warmup_evaluations = 0, polish_evaluations = 0, failed_evaluations = 0;
  double t0 = 0.0;
};

nlohmann::json to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& j);

/// "4.998 → 5.555 → 3.386 kNm"; missing stages print as "n/a".
std::string format_compliance_triple(std::optional<double> initial, std::optional<double> pds,
                                     std::optional<double> optimal);

std::string report_summary(const RunSummary& summary);

struct RunArtifacts {
  std::filesystem::path out_dir;
  RunSummary summary;
  GridSurface initial, pds;
  std::optional<GridSurface> optimal;
};

/// Runs stages (1) base surface, (2) lower-level PDS, (3) annealing, and
/// writes every artifact under config.out_dir. With stop_after_levels set,
/// stage 3 stops at a checkpoint and `optimal` stays empty.
RunArtifacts run_pipeline(const CaseConfig& config);

/// Continues stage 3 of a run directory from its last checkpoint.
RunArtifacts resume_pipeline(const std::filesystem::path& out_dir, std::optional<int> threads = {});

}  // namespace pds
