#pragma once

#include "pds/devmap.hpp"
#include "pds/error.hpp"
#include "pds/grid.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace pds {

/// Componentwise box lower <= x <= upper.
struct BoundsSpec {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static BoundsSpec around(const Eigen::VectorXd& center, double half_width);

  Eigen::Index size() const { return lower.size(); }
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  void validate() const;
};

struct NlpSettings {
  double gradient_tolerance = 1e-6;   // infinity norm of the projected gradient
  double objective_tolerance = 1e-10; // absolute change of f between accepted iterates
  int max_iterations = 500;
  int memory = 10;                    // quasi-Newton correction pairs
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  double first_step = 0.1;            // infinity-norm length of the first trial step
  double model_sharpening = 2.0;      // lower level: c multiplier of the first-phase model weights (1 = off)

  void validate() const;
};

enum class NlpStatus { GradientTolerance, ObjectiveStagnation, IterationLimit, LineSearchFailure };
const char* status_name(NlpStatus status);

struct NlpIterate {
  int iteration = 0;
  double value = 0.0;
  double projected_gradient_norm = 0.0;
};

struct NlpResult {
  Eigen::VectorXd x;
  double value = 0.0;
  NlpStatus status = NlpStatus::IterationLimit;
  int iterations = 0;
  int function_evaluations = 0;
  int gradient_evaluations = 0;
  std::vector<NlpIterate> history;  // accepted iterates, starting with x0
};

/// A callback failed mid-solve; carries the iterate that triggered it.
class NlpFailure : public NumericalError {
 public:
  NlpFailure(const std::string& what, Eigen::VectorXd iterate)
      : NumericalError(what), iterate_(std::move(iterate)) {}
  const Eigen::VectorXd& iterate() const noexcept { return iterate_; }

 private:
  Eigen::VectorXd iterate_;
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const BoundsSpec& bounds);

/// Projected limited-memory quasi-Newton method with an Armijo backtracking
/// search along the projection arc. Variables at a bound whose gradient
/// pushes outward are held fixed for the step.
NlpResult minimize_bounded(const ObjectiveFn& f, const GradientFn& g, const Eigen::VectorXd& x0,
                           const BoundsSpec& bounds, const NlpSettings& settings = {});

struct LowerLevelResult {
  GridSurface grid;
  NlpResult solve;
};

/// Minimizes the filtered developability objective over the z-coordinates
/// of the points that move in the lower level (Free and Exempt). `bounds`
/// is indexed like `grid.lower_level_variables()`.
LowerLevelResult solve_lower_level(const GridSurface& grid, const DevObjectiveConfig& config,
                                   const BoundsSpec& bounds, const NlpSettings& settings = {},
                                   int threads = 1);

}  // namespace pds
