#pragma once

#include "pds/nlp.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pds {

struct AnnealConfig {
  int steps = 100;                  // temperature levels
  int moves = 10;                   // proposals per level
  std::optional<double> initial_temperature;  // unset: warm-up estimate
  double cooling = 0.95;            // T_{k+1} = cooling * T_k
  double move_scale = 0.25;         // sigma = move_scale * range * sqrt(T / T0)
  int warmup_samples = 20;
  double warmup_acceptance = 0.8;   // target acceptance of the median warm-up uphill move
  std::uint64_t seed = 1;
  bool local_search = true;
  int local_search_budget = 50;

  int budget() const { return steps * moves; }
  void validate() const;
};

inline constexpr double kFailedEvaluation = std::numeric_limits<double>::infinity();

struct Evaluation {
  double w = kFailedEvaluation;
  double f_residual = std::numeric_limits<double>::quiet_NaN();
  std::string diagnostic;  // empty on success

  bool ok() const { return std::isfinite(w); }
};

using Evaluator = std::function<Evaluation(const Eigen::VectorXd&)>;

enum class AnnealPhase { Warmup, Anneal, Polish };
const char* phase_name(AnnealPhase phase);

struct AnnealRecord {
  int eval = 0;           // 1-based, all phases
  AnnealPhase phase = AnnealPhase::Anneal;
  double temperature = 0.0;
  double w = kFailedEvaluation;
  double f_residual = 0.0;
  bool accepted = false;  // Metropolis acceptance, or improvement during polish
  Eigen::VectorXd z;
};

/// Everything needed to continue a run after a completed temperature level.
struct AnnealCheckpoint {
  int next_proposal = 1;  // proposals 1 .. budget-1 follow the initial evaluation
  double t0 = 0.0;
  Eigen::VectorXd current_z;
  double current_w = kFailedEvaluation;
  double current_f = 0.0;
  Eigen::VectorXd best_z;
  double best_w = kFailedEvaluation;
  double best_f = 0.0;
  std::string rng_state;
  std::vector<AnnealRecord> history;
};

struct AnnealResult {
  Eigen::VectorXd best_z;
  double best_w = kFailedEvaluation;
  double best_f = 0.0;
  double t0 = 0.0;
  int warmup_evaluations = 0;
  int anneal_evaluations = 0;
  int polish_evaluations = 0;
  std::vector<AnnealRecord> history;
};

double move_sigma(double range, double temperature, double t0, const AnnealConfig& config);

/// Reflects x back into [lo, hi] (repeatedly, for long moves).
double reflect_into(double x, double lo, double hi);

/// Gaussian move of every component with sigma from move_sigma, reflected
/// at the bounds. Consumes only `rng` (no cached distribution state).
Eigen::VectorXd propose_move(const Eigen::VectorXd& z, double temperature, double t0, const BoundsSpec& bounds,
                             const AnnealConfig& config, std::mt19937_64& rng);

using CheckpointFn = std::function<void(const AnnealCheckpoint&)>;

/// Metropolis annealing with geometric cooling. The first evaluation is z0;
/// steps * moves evaluations in total, plus warm-up (when no initial
/// temperature is given) and pattern-search polish evaluations.
AnnealResult anneal(const Eigen::VectorXd& z0, const BoundsSpec& bounds, const AnnealConfig& config,
                    const Evaluator& evaluate, const CheckpointFn& on_level = {},
                    const AnnealCheckpoint* resume = nullptr);

nlohmann::json to_json(const AnnealCheckpoint& checkpoint);
AnnealCheckpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace pds
