#include "pds/nlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace pds {

BoundsSpec BoundsSpec::around(const Eigen::VectorXd& center, double half_width) {
  if (!(half_width >= 0.0)) throw ConfigError("bound half-width must be non-negative");
  return {center.array() - half_width, center.array() + half_width};
}

bool BoundsSpec::contains(const Eigen::VectorXd& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd BoundsSpec::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

void BoundsSpec::validate() const {
  if (lower.size() != upper.size()) throw ConfigError("bound vectors differ in length");
  if (!(lower.array() <= upper.array()).all()) throw ConfigError("lower bound exceeds upper bound");
}

void NlpSettings::validate() const {
  if (!(gradient_tolerance > 0 && objective_tolerance > 0 && max_iterations > 0 && memory > 0 && armijo > 0 &&
        backtrack > 0 && backtrack < 1 && max_backtracks > 0 && first_step > 0))
    throw ConfigError("solver settings must be positive");
  if (!(model_sharpening >= 1.0) || !std::isfinite(model_sharpening))
    throw ConfigError("model_sharpening must be a finite value >= 1");
}

const char* status_name(NlpStatus status) {
  switch (status) {
    case NlpStatus::GradientTolerance: return "gradient_tolerance";
    case NlpStatus::ObjectiveStagnation: return "objective_stagnation";
    case NlpStatus::IterationLimit: return "iteration_limit";
    case NlpStatus::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const BoundsSpec& bounds) {
  if (x.size() == 0) return 0.0;
  return (x - bounds.project(x - g)).lpNorm<Eigen::Infinity>();
}

namespace {

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

// Components held at a bound for this step.
Eigen::VectorXd free_mask(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const BoundsSpec& b) {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if ((x[k] <= b.lower[k] && g[k] > 0.0) || (x[k] >= b.upper[k] && g[k] < 0.0)) m[k] = 0.0;
  return m;
}

Eigen::VectorXd two_loop(const Eigen::VectorXd& g, const Eigen::VectorXd& mask, const std::deque<Pair>& mem) {
  Eigen::VectorXd q = g.cwiseProduct(mask);
  std::vector<double> alpha(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alpha[k] = mem[k].rho * mem[k].s.cwiseProduct(mask).dot(q);
    q -= alpha[k] * mem[k].y.cwiseProduct(mask);
  }
  const Pair& last = mem.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * mem[k].y.cwiseProduct(mask).dot(q);
    q += (alpha[k] - beta) * mem[k].s.cwiseProduct(mask);
  }
  return -q.cwiseProduct(mask);
}

}  // namespace

NlpResult minimize_bounded(const ObjectiveFn& f, const GradientFn& g, const Eigen::VectorXd& x0,
                           const BoundsSpec& bounds, const NlpSettings& settings) {
  settings.validate();
  bounds.validate();
  if (x0.size() != bounds.size()) throw ConfigError("initial point and bounds differ in length");
  if (!bounds.contains(x0)) throw ConfigError("initial point violates the bounds");

  NlpResult r;
  auto eval_f = [&](const Eigen::VectorXd& x) {
    ++r.function_evaluations;
    try {
      const double v = f(x);
      if (!std::isfinite(v)) throw NumericalError("objective is not finite");
      return v;
    } catch (const NumericalError& e) {
      throw NlpFailure(e.what(), x);
    }
  };
  auto eval_g = [&](const Eigen::VectorXd& x) {
    ++r.gradient_evaluations;
    try {
      Eigen::VectorXd v = g(x);
      if (v.size() != x.size() || !v.allFinite()) throw NumericalError("gradient is malformed");
      return v;
    } catch (const NumericalError& e) {
      throw NlpFailure(e.what(), x);
    }
  };

  Eigen::VectorXd x = x0;
  double fx = eval_f(x);
  Eigen::VectorXd gx = eval_g(x);
  double pg = projected_gradient_norm(x, gx, bounds);
  r.history.push_back({0, fx, pg});
  std::deque<Pair> memory;

  r.status = NlpStatus::IterationLimit;
  for (int it = 1; it <= settings.max_iterations; ++it) {
    if (pg <= settings.gradient_tolerance) {
      r.status = NlpStatus::GradientTolerance;
      break;
    }
    const Eigen::VectorXd mask = free_mask(x, gx, bounds);
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = fx;
    // Quasi-Newton direction first; if its search fails, clear the memory
    // and retry once with scaled steepest descent.
    bool used_memory = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Eigen::VectorXd d;
      if (attempt == 0 && !memory.empty()) {
        d = two_loop(gx, mask, memory);
        used_memory = gx.dot(d) < 0.0;
        if (!used_memory) d.resize(0);
      }
      if (d.size() == 0) {
        const Eigen::VectorXd sd = -gx.cwiseProduct(mask);
        const double len = sd.lpNorm<Eigen::Infinity>();
        if (!(len > 0.0)) break;
        d = sd * (settings.first_step / len);
      }
      double step = 1.0;
      for (int bt = 0; bt < settings.max_backtracks; ++bt, step *= settings.backtrack) {
        x_new = bounds.project(x + step * d);
        const Eigen::VectorXd moved = x_new - x;
        if (moved.lpNorm<Eigen::Infinity>() == 0.0) break;
        // A trial point the callback cannot evaluate (e.g. a folded
        // one-ring) is treated like an uphill step.
        try {
          f_new = eval_f(x_new);
        } catch (const NlpFailure&) {
          continue;
        }
        if (f_new <= fx + settings.armijo * gx.dot(moved)) {
          accepted = true;
          break;
        }
      }
      if (accepted) break;
      memory.clear();
      if (!used_memory) break;
      used_memory = false;
    }
    if (!accepted) {
      r.status = NlpStatus::LineSearchFailure;
      break;
    }

    const Eigen::VectorXd g_new = eval_g(x_new);
    Pair p{x_new - x, g_new - gx, 0.0};
    const double sy = p.s.dot(p.y);
    if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > settings.memory) memory.pop_front();
    }
    const double change = fx - f_new;
    x = x_new;
    fx = f_new;
    gx = g_new;
    pg = projected_gradient_norm(x, gx, bounds);
    r.iterations = it;
    r.history.push_back({it, fx, pg});
    if (pg <= settings.gradient_tolerance) {
      r.status = NlpStatus::GradientTolerance;
      break;
    }
    if (change <= settings.objective_tolerance) {
      r.status = NlpStatus::ObjectiveStagnation;
      break;
    }
  }
  r.x = x;
  r.value = fx;
  return r;
}

namespace {

// Objective value and projected-gradient norm at the current heights.
struct LowerState {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

LowerState lower_state(const GridSurface& work, const DevObjectiveConfig& config, const std::vector<int>& vars,
                       int threads) {
  const ObjectiveGradient full = objective_gradient(work, config, threads);
  LowerState st;
  st.value = full.value;
  st.gradient.resize(static_cast<Eigen::Index>(vars.size()));
  for (std::size_t k = 0; k < vars.size(); ++k) st.gradient[static_cast<Eigen::Index>(k)] = full.dz[vars[k]];
  return st;
}

}  // namespace

LowerLevelResult solve_lower_level(const GridSurface& grid, const DevObjectiveConfig& config,
                                   const BoundsSpec& bounds, const NlpSettings& settings, int threads) {
  validate(config, grid);
  settings.validate();
  bounds.validate();
  const std::vector<int> vars = grid.lower_level_variables();
  const auto n = static_cast<Eigen::Index>(vars.size());
  if (bounds.size() != n) throw ConfigError("lower-level bounds do not match the number of free points");

  std::vector<int> column(static_cast<std::size_t>(grid.size()), -1);
  for (std::size_t k = 0; k < vars.size(); ++k) column[static_cast<std::size_t>(vars[k])] = static_cast<int>(k);

  LowerLevelResult result;
  NlpResult& r = result.solve;
  GridSurface work = grid;
  Eigen::VectorXd z = grid.heights(vars);
  if (!bounds.contains(z)) throw ConfigError("initial heights violate the lower-level bounds");

  LowerState st;
  try {
    st = lower_state(work, config, vars, threads);
  } catch (const NumericalError& e) {
    throw NlpFailure(e.what(), z);
  }
  ++r.function_evaluations;
  ++r.gradient_evaluations;
  double pg = projected_gradient_norm(z, st.gradient, bounds);
  r.history.push_back({0, st.value, pg});
  r.status = NlpStatus::IterationLimit;

  // Majorize-minimize: tanh(c(sqrt(A)+eps)) is concave in A, so with
  // weights w_i = dF_i/dA_i the model sum w_i |r_i + J_i dz|^2 bounds the
  // decrease of F from above. Each step is a damped Gauss-Newton step on
  // that model, accepted only if the true F decreases.
  //
  // The first phase takes the weights from a sharper filter. Points with
  // moderate errors then drop out of the model sooner, which lets the errors
  // gather on a few saturated points instead of stalling spread over many.
  // Once that phase stalls the exact weights take over.
  DevObjectiveConfig weights = config;
  weights.sharpness = settings.model_sharpening * config.sharpness;
  bool sharpened = settings.model_sharpening != 1.0;
  auto end_sharpened_phase = [&] {
    if (!sharpened) return false;
    sharpened = false;
    weights = config;
    return true;
  };
  double damping = 1e-4;
  Eigen::MatrixXd normal(n, n);
  Eigen::VectorXd rhs(n);
  for (int it = 1; it <= settings.max_iterations; ++it) {
    if (pg <= settings.gradient_tolerance) {
      r.status = NlpStatus::GradientTolerance;
      break;
    }
    normal.setZero();
    rhs.setZero();
    for (int i : config.evaluation_set) {
      const FanResidual fr = developability_residual(work, i);
      const double w = filter_slope(fr.error, weights);
      for (int a = 0; a < 9; ++a) {
        const int ca = column[static_cast<std::size_t>(fr.nodes[a])];
        if (ca < 0) continue;
        rhs[ca] -= w * fr.jacobian_z.col(a).dot(fr.residual);
        for (int b = 0; b < 9; ++b) {
          const int cb = column[static_cast<std::size_t>(fr.nodes[b])];
          if (cb >= 0) normal(ca, cb) += w * fr.jacobian_z.col(a).dot(fr.jacobian_z.col(b));
        }
      }
    }
    // Variables pinned at a bound with an outward gradient stay put.
    const Eigen::VectorXd mask = free_mask(z, st.gradient, bounds);
    const Eigen::VectorXd diag = normal.diagonal();
    const double diag_scale = std::max(diag.maxCoeff(), 1e-300);

    bool accepted = false;
    Eigen::VectorXd z_new;
    GridSurface trial = work;
    LowerState st_new;
    while (damping <= 1e12) {
      Eigen::MatrixXd lhs = normal;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (mask[k] == 0.0) {
          lhs.row(k).setZero();
          lhs.col(k).setZero();
          lhs(k, k) = 1.0;
        } else {
          lhs(k, k) += damping * (diag[k] + 1e-12 * diag_scale);
        }
      }
      const Eigen::VectorXd step = lhs.ldlt().solve(rhs.cwiseProduct(mask));
      z_new = bounds.project(z + step);
      if (!step.allFinite() || (z_new - z).lpNorm<Eigen::Infinity>() == 0.0) {
        damping *= 10.0;
        continue;
      }
      trial.set_heights(vars, z_new);
      ++r.function_evaluations;
      ++r.gradient_evaluations;
      try {
        st_new = lower_state(trial, config, vars, threads);
      } catch (const NumericalError&) {
        damping *= 10.0;
        continue;
      }
      if (st_new.value < st.value) {
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) {
      if (end_sharpened_phase()) {
        damping = 1e-4;
        continue;
      }
      r.status = NlpStatus::LineSearchFailure;
      break;
    }
    damping = std::max(damping / 10.0, 1e-10);
    const double change = st.value - st_new.value;
    z = z_new;
    st = st_new;
    work = trial;
    pg = projected_gradient_norm(z, st.gradient, bounds);
    r.iterations = it;
    r.history.push_back({it, st.value, pg});
    if (pg <= settings.gradient_tolerance) {
      r.status = NlpStatus::GradientTolerance;
      break;
    }
    if (change <= settings.objective_tolerance) {
      if (end_sharpened_phase()) {
        damping = 1e-4;
        continue;
      }
      r.status = NlpStatus::ObjectiveStagnation;
      break;
    }
  }
  r.x = z;
  r.value = st.value;
  result.grid = grid;
  result.grid.set_heights(vars, z);
  return result;
}

}  // namespace pds
