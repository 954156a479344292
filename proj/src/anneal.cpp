#include "pds/anneal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pds {

namespace {

Evaluation guarded(const Evaluator& evaluate, const Eigen::VectorXd& z) {
  try {
    Evaluation e = evaluate(z);
    if (std::isnan(e.w)) e.w = kFailedEvaluation;
    return e;
  } catch (const ConfigError&) {
    throw;
  } catch (const NumericalError& err) {
    return {kFailedEvaluation, std::numeric_limits<double>::quiet_NaN(), err.what()};
  }
}

std::string save_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void load_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ConfigError("corrupt random-number state in checkpoint");
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j, double missing = kFailedEvaluation) {
  return j.is_null() ? missing : j.get<double>();
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

AnnealPhase parse_phase(const std::string& s) {
  if (s == "warmup") return AnnealPhase::Warmup;
  if (s == "anneal") return AnnealPhase::Anneal;
  if (s == "polish") return AnnealPhase::Polish;
  throw ConfigError("unknown annealing phase '" + s + "'");
}

}  // namespace

void AnnealConfig::validate() const {
  if (steps < 1 || moves < 1) throw ConfigError("annealing needs at least one step and one move");
  if (!(cooling > 0.0 && cooling < 1.0)) throw ConfigError("cooling ratio must lie in (0, 1)");
  if (initial_temperature && !(*initial_temperature > 0.0)) throw ConfigError("initial temperature must be positive");
  if (!(move_scale > 0.0)) throw ConfigError("move scale must be positive");
  if (warmup_samples < 1) throw ConfigError("warm-up needs at least one sample");
  if (!(warmup_acceptance > 0.0 && warmup_acceptance < 1.0)) throw ConfigError("warm-up acceptance must lie in (0, 1)");
  if (local_search_budget < 0) throw ConfigError("local-search budget must be non-negative");
}

const char* phase_name(AnnealPhase phase) {
  switch (phase) {
    case AnnealPhase::Warmup: return "warmup";
    case AnnealPhase::Anneal: return "anneal";
    case AnnealPhase::Polish: return "polish";
  }
  return "?";
}

double move_sigma(double range, double temperature, double t0, const AnnealConfig& config) {
  return config.move_scale * range * std::sqrt(std::max(temperature, 0.0) / t0);
}

double reflect_into(double x, double lo, double hi) {
  const double range = hi - lo;
  if (!(range > 0.0)) return lo;
  const double period = 2.0 * range;
  double y = std::fmod(x - lo, period);
  if (y < 0.0) y += period;
  if (y > range) y = period - y;
  return std::clamp(lo + y, lo, hi);
}

Eigen::VectorXd propose_move(const Eigen::VectorXd& z, double temperature, double t0, const BoundsSpec& bounds,
                             const AnnealConfig& config, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd out(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double sigma = move_sigma(bounds.upper[k] - bounds.lower[k], temperature, t0, config);
    out[k] = reflect_into(z[k] + sigma * gauss(rng), bounds.lower[k], bounds.upper[k]);
  }
  return out;
}

AnnealResult anneal(const Eigen::VectorXd& z0, const BoundsSpec& bounds, const AnnealConfig& config,
                    const Evaluator& evaluate, const CheckpointFn& on_level, const AnnealCheckpoint* resume) {
  config.validate();
  bounds.validate();
  if (bounds.size() != z0.size()) throw ConfigError("design bounds do not match the design vector");
  if (!bounds.contains(z0)) throw ConfigError("initial design violates its bounds");

  const int budget = config.budget();
  std::mt19937_64 rng(config.seed);
  AnnealCheckpoint st;

  auto record = [&](AnnealPhase phase, double temperature, const Evaluation& e, bool accepted,
                    const Eigen::VectorXd& z) {
    st.history.push_back({static_cast<int>(st.history.size()) + 1, phase, temperature, e.w,
                          e.f_residual, accepted, z});
  };
  auto offer_best = [&](const Evaluation& e, const Eigen::VectorXd& z) {
    if (e.ok() && e.w < st.best_w) {
      st.best_w = e.w;
      st.best_f = e.f_residual;
      st.best_z = z;
    }
  };
  auto checkpoint = [&](int next) {
    st.next_proposal = next;
    st.rng_state = save_rng(rng);
    if (on_level) on_level(st);
  };
  auto level_done = [&](int k) { return (k + 1) % config.moves == 0 || k == budget - 1; };

  if (resume) {
    st = *resume;
    load_rng(rng, st.rng_state);
    if (st.current_z.size() != z0.size() || st.best_z.size() != z0.size() || !(st.t0 > 0.0))
      throw ConfigError("checkpoint does not match this design problem");
  } else {
    const Evaluation e0 = guarded(evaluate, z0);
    st.current_z = z0;
    st.current_w = e0.w;
    st.current_f = e0.f_residual;
    st.best_z = z0;
    offer_best(e0, z0);
    if (config.initial_temperature) {
      st.t0 = *config.initial_temperature;
    } else {
      // Warm-up: T0 such that the median uphill step is accepted with the
      // target probability.
      std::vector<double> jumps;
      std::vector<std::pair<Evaluation, Eigen::VectorXd>> samples;
      for (int k = 0; k < config.warmup_samples; ++k) {
        const Eigen::VectorXd z = propose_move(z0, 1.0, 1.0, bounds, config, rng);
        const Evaluation e = guarded(evaluate, z);
        if (e.ok() && e0.ok()) jumps.push_back(std::abs(e.w - e0.w));
        offer_best(e, z);
        samples.emplace_back(e, z);
      }
      double median = 0.0;
      if (!jumps.empty()) {
        std::sort(jumps.begin(), jumps.end());
        const std::size_t m = jumps.size() / 2;
        median = jumps.size() % 2 ? jumps[m] : 0.5 * (jumps[m - 1] + jumps[m]);
      }
      st.t0 = median > 0.0 ? median / -std::log(config.warmup_acceptance) : 1.0;
      record(AnnealPhase::Anneal, st.t0, e0, true, z0);
      for (const auto& [e, z] : samples) record(AnnealPhase::Warmup, st.t0, e, false, z);
    }
    if (config.initial_temperature) record(AnnealPhase::Anneal, st.t0, e0, true, z0);
    if (level_done(0)) checkpoint(1);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = st.next_proposal; k < budget; ++k) {
    const double temperature = st.t0 * std::pow(config.cooling, k / config.moves);
    const Eigen::VectorXd z = propose_move(st.current_z, temperature, st.t0, bounds, config, rng);
    const Evaluation e = guarded(evaluate, z);
    const double u = unit(rng);
    bool accept = false;
    if (e.ok()) {
      const double delta = e.w - st.current_w;
      accept = !std::isfinite(st.current_w) || delta <= 0.0 || u < std::exp(-delta / temperature);
    }
    if (accept) {
      st.current_z = z;
      st.current_w = e.w;
      st.current_f = e.f_residual;
    }
    offer_best(e, z);
    record(AnnealPhase::Anneal, temperature, e, accept, z);
    if (level_done(k)) checkpoint(k + 1);
  }

  if (config.local_search && std::isfinite(st.best_w)) {
    // Coordinate pattern search around the best design, shrinking the
    // probe length whenever a full sweep finds no improvement.
    Eigen::VectorXd step = 0.1 * (bounds.upper - bounds.lower);
    const Eigen::VectorXd floor = 1e-6 * (bounds.upper - bounds.lower);
    int used = 0;
    while (used < config.local_search_budget && (step.array() > floor.array()).any()) {
      bool improved = false;
      for (Eigen::Index i = 0; i < step.size() && !improved && used < config.local_search_budget; ++i) {
        for (double sign : {1.0, -1.0}) {
          if (used >= config.local_search_budget) break;
          Eigen::VectorXd z = st.best_z;
          z[i] = std::clamp(z[i] + sign * step[i], bounds.lower[i], bounds.upper[i]);
          if (z[i] == st.best_z[i]) continue;
          const Evaluation e = guarded(evaluate, z);
          ++used;
          const bool better = e.ok() && e.w < st.best_w;
          record(AnnealPhase::Polish, 0.0, e, better, z);
          if (better) {
            offer_best(e, z);
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }

  AnnealResult r;
  r.best_z = st.best_z;
  r.best_w = st.best_w;
  r.best_f = st.best_f;
  r.t0 = st.t0;
  for (const AnnealRecord& rec : st.history) {
    if (rec.phase == AnnealPhase::Warmup) ++r.warmup_evaluations;
    if (rec.phase == AnnealPhase::Anneal) ++r.anneal_evaluations;
    if (rec.phase == AnnealPhase::Polish) ++r.polish_evaluations;
  }
  r.history = std::move(st.history);
  return r;
}

nlohmann::json to_json(const AnnealCheckpoint& c) {
  nlohmann::json history = nlohmann::json::array();
  for (const AnnealRecord& r : c.history) {
    history.push_back({{"eval", r.eval},
                       {"phase", phase_name(r.phase)},
                       {"temperature", r.temperature},
                       {"W", number(r.w)},
                       {"F_residual", number(r.f_residual)},
                       {"accepted", r.accepted},
                       {"Z", vector_json(r.z)}});
  }
  return {{"next_proposal", c.next_proposal},
          {"t0", c.t0},
          {"current_z", vector_json(c.current_z)},
          {"current_w", number(c.current_w)},
          {"current_f", number(c.current_f)},
          {"best_z", vector_json(c.best_z)},
          {"best_w", number(c.best_w)},
          {"best_f", number(c.best_f)},
          {"rng_state", c.rng_state},
          {"history", history}};
}

AnnealCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    AnnealCheckpoint c;
    c.next_proposal = j.at("next_proposal").get<int>();
    c.t0 = j.at("t0").get<double>();
    c.current_z = vector_from(j.at("current_z"));
    c.current_w = number_from(j.at("current_w"));
    c.current_f = number_from(j.at("current_f"), std::numeric_limits<double>::quiet_NaN());
    c.best_z = vector_from(j.at("best_z"));
    c.best_w = number_from(j.at("best_w"));
    c.best_f = number_from(j.at("best_f"), std::numeric_limits<double>::quiet_NaN());
    c.rng_state = j.at("rng_state").get<std::string>();
    for (const auto& h : j.at("history")) {
      AnnealRecord r;
      r.eval = h.at("eval").get<int>();
      r.phase = parse_phase(h.at("phase").get<std::string>());
      r.temperature = h.at("temperature").get<double>();
      r.w = number_from(h.at("W"));
      r.f_residual = number_from(h.at("F_residual"), std::numeric_limits<double>::quiet_NaN());
      r.accepted = h.at("accepted").get<bool>();
      r.z = vector_from(h.at("Z"));
      c.history.push_back(std::move(r));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed annealing checkpoint: ") + e.what());
  }
}

}  // namespace pds
