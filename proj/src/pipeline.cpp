#include "pds/pipeline.hpp"

#include "pds/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace pds {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Strict JSON reading: every object lists its keys, anything else is an error.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [key, value] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
        throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  template <class T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  Section sub(const char* key) const { return Section(j_.at(key), where_ + "." + key); }
  const json& raw(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string where_;
};

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stage_json(const std::optional<StageSummary>& s) {
  if (!s) return nullptr;
  return {{"W", number(s->compliance)},
          {"F", number(s->dev.objective)},
          {"max_sqrt_A", number(s->dev.max_sqrt)},
          {"median_sqrt_A", number(s->dev.median_sqrt)},
          {"count_above_threshold", s->dev.count_above},
          {"fraction_below_threshold", number(s->dev.fraction_below)},
          {"concentration_top10", number(s->dev.concentration)}};
}

std::optional<StageSummary> stage_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  auto num = [&](const char* k) { return j.at(k).is_null() ? std::nan("") : j.at(k).get<double>(); };
  StageSummary s;
  s.compliance = num("W");
  s.dev.objective = num("F");
  s.dev.max_sqrt = num("max_sqrt_A");
  s.dev.median_sqrt = num("median_sqrt_A");
  s.dev.count_above = j.at("count_above_threshold").get<int>();
  s.dev.fraction_below = num("fraction_below_threshold");
  s.dev.concentration = num("concentration_top10");
  return s;
}

std::vector<double> all_heights(const GridSurface& g) {
  std::vector<double> z;
  for (const Vec3& p : g.points()) z.push_back(p.z());
  return z;
}

GridSurface with_heights(GridSurface g, const std::vector<double>& z) {
  if (static_cast<int>(z.size()) != g.size()) throw ConfigError("stored heights do not match the grid");
  for (int i = 0; i < g.size(); ++i) {
    Vec3 p = g.point(i);
    p.z() = z[static_cast<std::size_t>(i)];
    g.set_point(i, p);
  }
  return g;
}

StageSummary analyze_stage(const std::string& name, const GridSurface& grid, const CaseConfig& cfg,
                           const DevObjectiveConfig& objective, const fs::path& out, const FemResult* known = nullptr) {
  const FemResult fem = known ? *known : analyze_shell(grid, cfg);
  write_grid(out / (name + ".grid"), grid);
  write_obj(out / (name + ".obj"), grid, cfg.triangulate);
  write_devcheck_csv(out / (name + "_gauss.csv"), grid, objective, cfg.threads);
  write_gauss_vtk(out / (name + "_gauss.vtk"), grid, objective, cfg.threads);
  write_fem_vtk(out / (name + "_fem.vtk"), grid, fem);
  write_fem_csv(out / (name + "_fem.csv"), fem);
  return {fem.work, developability_stats(grid, objective, cfg.threads)};
}

struct StopRequested {};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void write_summary(const fs::path& out, const RunSummary& s) { write_text_atomic(out / "summary.json", to_json(s).dump(2) + "\n"); }

void run_anneal_stage(const CaseConfig& cfg, const GridSurface& base, const GridSurface& pds, const fs::path& out,
                      RunArtifacts& art, const json* checkpoint) {
  const DevObjectiveConfig objective = make_objective_config(base, cfg.sharpness, cfg.offset);
  DesignState state = make_design_state(cfg, base, pds);
  const std::vector<int> design = base.design_points();
  if (design.empty()) throw ConfigError("the layout has no design points to anneal");
  const Eigen::VectorXd z2 = base.heights(design);
  const BoundsSpec upper = BoundsSpec::around(z2, cfg.upper_half_width);

  AnnealConfig acfg = cfg.anneal;
  acfg.seed = cfg.seed;

  double best_w = kFailedEvaluation;
  GridSurface best_grid = pds;
  AnnealCheckpoint resume_from;
  if (checkpoint) {
    try {
      resume_from = checkpoint_from_json(checkpoint->at("anneal"));
      state.warm = with_heights(base, checkpoint->at("warm_z").get<std::vector<double>>());
      best_grid = with_heights(base, checkpoint->at("best_grid_z").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
    best_w = resume_from.best_w;
  }

  auto evaluator = [&](const Eigen::VectorXd& z) {
    DesignEvaluation d = evaluate_design(z, state);
    if (d.result.ok() && d.result.w < best_w) {
      best_w = d.result.w;
      best_grid = std::move(d.grid);
    }
    return d.result;
  };
  int levels = 0;
  auto on_level = [&](const AnnealCheckpoint& cp) {
    const json j = {{"anneal", to_json(cp)}, {"warm_z", all_heights(state.warm)}, {"best_grid_z", all_heights(best_grid)}};
    write_text_atomic(out / "anneal_checkpoint.json", j.dump() + "\n");
    if (cfg.stop_after_levels > 0 && ++levels >= cfg.stop_after_levels) throw StopRequested{};
  };

  AnnealResult r;
  try {
    r = anneal(z2, upper, acfg, evaluator, on_level, checkpoint ? &resume_from : nullptr);
  } catch (const StopRequested&) {
    return;
  }
  write_anneal_history(out / "anneal_history.csv", r.history);
  if (!std::isfinite(r.best_w)) throw NumericalError("every design evaluation failed");
  if (best_grid.heights(design) != r.best_z) throw NumericalError("best design and best shape disagree");

  const FemResult fem = analyze_shell(best_grid, cfg);
  art.summary.optimal = analyze_stage("optimal", best_grid, cfg, objective, out, &fem);
  art.summary.z_initial.assign(z2.begin(), z2.end());
  art.summary.z_optimal.assign(r.best_z.begin(), r.best_z.end());
  art.summary.anneal_evaluations = r.anneal_evaluations;
  art.summary.warmup_evaluations = r.warmup_evaluations;
  art.summary.polish_evaluations = r.polish_evaluations;
  art.summary.failed_evaluations = static_cast<int>(
      std::count_if(r.history.begin(), r.history.end(), [](const AnnealRecord& h) { return !std::isfinite(h.w); }));
  art.summary.t0 = r.t0;
  art.optimal = best_grid;
}

}  // namespace

void CaseConfig::validate() const {
  if (preset != "case1" && preset != "case2" && preset != "custom")
    throw ConfigError("case must be case1, case2 or custom (got '" + preset + "')");
  if (preset == "custom" && layout_file.empty()) throw ConfigError("the custom case needs a layout_file");
  if (!(sharpness > 0.0)) throw ConfigError("c must be positive");
  if (!(offset >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(lower_half_width > 0.0) || !(upper_half_width > 0.0)) throw ConfigError("bound half-widths must be positive");
  if (surface.nu < 3 || surface.nv < 3) throw ConfigError("grid needs at least 3x3 points");
  if (!(surface.lx > 0.0) || !(surface.ly > 0.0)) throw ConfigError("plan dimensions must be positive");
  if (!(surface.jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (stop_after_levels < 0) throw ConfigError("stop_after_levels must be non-negative");
  if (out_dir.empty()) throw ConfigError("output directory must be set");
  lower.validate();
  material.validate();
  anneal.validate();
  if (!std::isfinite(load.pressure) || load.pressure < 0.0) throw ConfigError("load must be finite and non-negative");
  if (!(load.direction.norm() > 0.0)) throw ConfigError("load direction must be non-zero");
}

CaseConfig default_case_config(const std::string& preset) {
  CaseConfig c;
  c.preset = preset;
  if (preset == "case2") {
    c.surface.nu = 21;
    c.surface.nv = 11;
    c.surface.lx = 10.0;
    c.surface.ly = 5.0;
    c.surface.rise = 1.0;
    c.surface.jitter = 0.01;
  } else {
    c.surface.nu = 21;
    c.surface.nv = 21;
    c.surface.lx = 10.0;
    c.surface.ly = 10.0;
    c.surface.rise = 2.0;
    c.surface.jitter = 0.015;
  }
  return c;
}

json to_json(const CaseConfig& c) {
  return {{"case", c.preset},
          {"layout_file", c.layout_file},
          {"seed", c.seed},
          {"threads", c.threads},
          {"output", {{"dir", c.out_dir}, {"triangulate", c.triangulate}}},
          {"grid", {{"nu", c.surface.nu}, {"nv", c.surface.nv}, {"lx", c.surface.lx}, {"ly", c.surface.ly}}},
          {"surface", {{"rise", c.surface.rise}, {"jitter", c.surface.jitter}}},
          {"developability", {{"c", c.sharpness}, {"epsilon", c.offset}}},
          {"bounds", {{"lower_half_width", c.lower_half_width}, {"upper_half_width", c.upper_half_width}}},
          {"lower_level",
           {{"gradient_tolerance", c.lower.gradient_tolerance},
            {"objective_tolerance", c.lower.objective_tolerance},
            {"max_iterations", c.lower.max_iterations},
            {"model_sharpening", c.lower.model_sharpening}}},
          {"material",
           {{"E", c.material.youngs_modulus}, {"poisson", c.material.poisson}, {"thickness", c.material.thickness}}},
          {"load",
           {{"q", c.load.pressure},
            {"direction", {c.load.direction.x(), c.load.direction.y(), c.load.direction.z()}},
            {"per_plan_area", c.load.per_plan_area}}},
          {"anneal",
           {{"steps", c.anneal.steps},
            {"moves", c.anneal.moves},
            {"initial_temperature", c.anneal.initial_temperature ? json(*c.anneal.initial_temperature) : json(nullptr)},
            {"cooling", c.anneal.cooling},
            {"move_scale", c.anneal.move_scale},
            {"warmup_samples", c.anneal.warmup_samples},
            {"warmup_acceptance", c.anneal.warmup_acceptance},
            {"local_search", c.anneal.local_search},
            {"local_search_budget", c.anneal.local_search_budget}}},
          {"stages", {{"skip_anneal", c.skip_anneal}, {"stop_after_levels", c.stop_after_levels}}}};
}

CaseConfig case_config_from_json(const json& j) {
  std::string preset = "case1";
  if (j.is_object() && j.contains("case")) {
    if (!j.at("case").is_string()) throw ConfigError("case must be a string");
    preset = j.at("case").get<std::string>();
  }
  if (preset != "case1" && preset != "case2" && preset != "custom")
    throw ConfigError("case must be case1, case2 or custom (got '" + preset + "')");
  return case_config_from_json(j, default_case_config(preset));
}

CaseConfig case_config_from_json(const json& j, const CaseConfig& base) {
  CaseConfig c = base;
  const Section top(j, "config");
  top.allow({"case", "layout_file", "seed", "threads", "output", "grid", "surface", "developability", "bounds",
             "lower_level", "material", "load", "anneal", "stages"});
  top.read("case", c.preset);
  top.read("layout_file", c.layout_file);
  top.read("seed", c.seed);
  top.read("threads", c.threads);
  if (top.has("output")) {
    const Section s = top.sub("output");
    s.allow({"dir", "triangulate"});
    s.read("dir", c.out_dir);
    s.read("triangulate", c.triangulate);
  }
  if (top.has("grid")) {
    const Section s = top.sub("grid");
    s.allow({"nu", "nv", "lx", "ly"});
    s.read("nu", c.surface.nu);
    s.read("nv", c.surface.nv);
    s.read("lx", c.surface.lx);
    s.read("ly", c.surface.ly);
  }
  if (top.has("surface")) {
    const Section s = top.sub("surface");
    s.allow({"rise", "jitter"});
    s.read("rise", c.surface.rise);
    s.read("jitter", c.surface.jitter);
  }
  if (top.has("developability")) {
    const Section s = top.sub("developability");
    s.allow({"c", "epsilon"});
    s.read("c", c.sharpness);
    s.read("epsilon", c.offset);
  }
  if (top.has("bounds")) {
    const Section s = top.sub("bounds");
    s.allow({"lower_half_width", "upper_half_width"});
    s.read("lower_half_width", c.lower_half_width);
    s.read("upper_half_width", c.upper_half_width);
  }
  if (top.has("lower_level")) {
    const Section s = top.sub("lower_level");
    s.allow({"gradient_tolerance", "objective_tolerance", "max_iterations", "model_sharpening"});
    s.read("gradient_tolerance", c.lower.gradient_tolerance);
    s.read("objective_tolerance", c.lower.objective_tolerance);
    s.read("max_iterations", c.lower.max_iterations);
    s.read("model_sharpening", c.lower.model_sharpening);
  }
  if (top.has("material")) {
    const Section s = top.sub("material");
    s.allow({"E", "poisson", "thickness"});
    s.read("E", c.material.youngs_modulus);
    s.read("poisson", c.material.poisson);
    s.read("thickness", c.material.thickness);
  }
  if (top.has("load")) {
    const Section s = top.sub("load");
    s.allow({"q", "direction", "per_plan_area"});
    s.read("q", c.load.pressure);
    s.read("per_plan_area", c.load.per_plan_area);
    if (s.has("direction")) {
      std::vector<double> d;
      s.read("direction", d);
      if (d.size() != 3) throw ConfigError("load.direction needs three components");
      c.load.direction = Vec3(d[0], d[1], d[2]);
    }
  }
  if (top.has("anneal")) {
    const Section s = top.sub("anneal");
    s.allow({"steps", "moves", "initial_temperature", "cooling", "move_scale", "warmup_samples", "warmup_acceptance",
             "local_search", "local_search_budget"});
    s.read("steps", c.anneal.steps);
    s.read("moves", c.anneal.moves);
    if (s.has("initial_temperature")) {
      if (s.raw("initial_temperature").is_null()) {
        c.anneal.initial_temperature.reset();
      } else {
        double t = 0.0;
        s.read("initial_temperature", t);
        c.anneal.initial_temperature = t;
      }
    }
    s.read("cooling", c.anneal.cooling);
    s.read("move_scale", c.anneal.move_scale);
    s.read("warmup_samples", c.anneal.warmup_samples);
    s.read("warmup_acceptance", c.anneal.warmup_acceptance);
    s.read("local_search", c.anneal.local_search);
    s.read("local_search_budget", c.anneal.local_search_budget);
  }
  if (top.has("stages")) {
    const Section s = top.sub("stages");
    s.allow({"skip_anneal", "stop_after_levels"});
    s.read("skip_anneal", c.skip_anneal);
    s.read("stop_after_levels", c.stop_after_levels);
  }
  return c;
}

CaseConfig load_case_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return case_config_from_json(j);
}

PointLayout resolve_layout(const CaseConfig& c) {
  if (c.preset == "case1") return case_layout(CasePreset::Case1, c.surface.nu, c.surface.nv);
  if (c.preset == "case2") return case_layout(CasePreset::Case2, c.surface.nu, c.surface.nv);
  return read_layout(c.layout_file);
}

GridSurface initial_surface(const CaseConfig& c) {
  BaseSurfaceSpec spec = c.surface;
  spec.seed = c.seed;
  return classify_points(build_base_surface(spec), resolve_layout(c));
}

DevStats developability_stats(const GridSurface& grid, const DevObjectiveConfig& config, int threads) {
  DevStats s;
  s.objective = objective(grid, config, threads);
  std::vector<double> roots;
  for (double a : developability_errors(grid, config.evaluation_set, threads)) roots.push_back(std::sqrt(a));
  if (roots.empty()) return s;
  s.fraction_below = fraction_below(roots, kDevelopableThreshold);
  s.concentration = error_concentration(roots);
  s.count_above = static_cast<int>(
      std::count_if(roots.begin(), roots.end(), [](double r) { return r >= kDevelopableThreshold; }));
  std::sort(roots.begin(), roots.end());
  s.max_sqrt = roots.back();
  const std::size_t m = roots.size() / 2;
  s.median_sqrt = roots.size() % 2 ? roots[m] : 0.5 * (roots[m - 1] + roots[m]);
  return s;
}

FemResult analyze_shell(const GridSurface& grid, const CaseConfig& config) {
  const std::vector<int> supports = support_nodes(grid, resolve_layout(config));
  return assemble_and_solve(shell_model(grid, config.material, supports, config.load), config.threads);
}

DesignState make_design_state(const CaseConfig& config, const GridSurface& base, const GridSurface& warm) {
  DesignState s;
  s.base = base;
  s.warm = warm;
  s.lower_bounds = BoundsSpec::around(base.heights(base.lower_level_variables()), config.lower_half_width);
  s.objective = make_objective_config(base, config.sharpness, config.offset);
  s.config = config;
  s.supports = support_nodes(base, resolve_layout(config));
  return s;
}

DesignEvaluation evaluate_design(const Eigen::VectorXd& z, DesignState& state) {
  DesignEvaluation out;
  const std::vector<int> design = state.base.design_points();
  const std::vector<int> vars = state.base.lower_level_variables();
  auto fail = [&](const std::string& why) {
    out.result = {kFailedEvaluation, std::nan(""), why};
    return out;
  };
  if (static_cast<Eigen::Index>(design.size()) != z.size()) return fail("design vector has the wrong length");

  const CaseConfig& cfg = state.config;
  double f = 0.0;
  if (state.warm.heights(design) == z) {
    out.grid = state.warm;
    out.reused_warm = true;
    f = objective(out.grid, state.objective, cfg.threads);
  } else {
    std::string first_error;
    for (const GridSurface* start : {&state.warm, &state.base}) {
      GridSurface trial = *start;
      trial.set_heights(design, z);
      // A start outside the lower-level box is projected back in.
      trial.set_heights(vars, state.lower_bounds.project(trial.heights(vars)));
      try {
        LowerLevelResult r = solve_lower_level(trial, state.objective, state.lower_bounds, cfg.lower, cfg.threads);
        out.grid = std::move(r.grid);
        f = r.solve.value;
        out.fell_back = start == &state.base;
        first_error.clear();
        break;
      } catch (const NumericalError& e) {
        if (first_error.empty()) first_error = e.what();
      }
    }
    if (!first_error.empty()) return fail("lower level failed: " + first_error);
  }

  try {
    const FemResult fem =
        assemble_and_solve(shell_model(out.grid, cfg.material, state.supports, cfg.load), cfg.threads);
    if (!std::isfinite(fem.work)) return fail("non-finite compliance");
    out.result = {fem.work, f, {}};
  } catch (const NumericalError& e) {
    return fail(std::string("shell analysis failed: ") + e.what());
  }
  state.warm = out.grid;
  return out;
}

json to_json(const RunSummary& s) {
  json j = {{"case", s.preset},
            {"grid", {{"nu", s.nu}, {"nv", s.nv}}},
            {"c", s.sharpness},
            {"seed", s.seed},
            {"developable_threshold", kDevelopableThreshold},
            {"stages", {{"initial", stage_json(s.initial)}, {"pds", stage_json(s.pds)}, {"optimal", stage_json(s.optimal)}}},
            {"compliance_kNm",
             {{"initial", s.initial ? number(s.initial->compliance) : json(nullptr)},
              {"pds", s.pds ? number(s.pds->compliance) : json(nullptr)},
              {"optimal", s.optimal ? number(s.optimal->compliance) : json(nullptr)}}}};
  if (s.pds) j["lower_level"] = {{"status", s.lower_status}, {"iterations", s.lower_iterations}};
  if (s.optimal) {
    j["anneal"] = {{"evaluations", s.anneal_evaluations},
                   {"warmup_evaluations", s.warmup_evaluations},
                   {"polish_evaluations", s.polish_evaluations},
                   {"failed_evaluations", s.failed_evaluations},
                   {"initial_temperature", s.t0},
                   {"Z_initial", s.z_initial},
                   {"Z_optimal", s.z_optimal}};
  }
  return j;
}

RunSummary summary_from_json(const json& j) {
  try {
    RunSummary s;
    s.preset = j.at("case").get<std::string>();
    s.nu = j.at("grid").at("nu").get<int>();
    s.nv = j.at("grid").at("nv").get<int>();
    s.sharpness = j.at("c").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.initial = stage_from(j.at("stages").at("initial"));
    s.pds = stage_from(j.at("stages").at("pds"));
    s.optimal = stage_from(j.at("stages").at("optimal"));
    if (j.contains("lower_level")) {
      s.lower_status = j.at("lower_level").at("status").get<std::string>();
      s.lower_iterations = j.at("lower_level").at("iterations").get<int>();
    }
    if (j.contains("anneal")) {
      const json& a = j.at("anneal");
      s.anneal_evaluations = a.at("evaluations").get<int>();
      s.warmup_evaluations = a.at("warmup_evaluations").get<int>();
      s.polish_evaluations = a.at("polish_evaluations").get<int>();
      s.failed_evaluations = a.at("failed_evaluations").get<int>();
      s.t0 = a.at("initial_temperature").get<double>();
      s.z_initial = a.at("Z_initial").get<std::vector<double>>();
      s.z_optimal = a.at("Z_optimal").get<std::vector<double>>();
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed summary: ") + e.what());
  }
}

std::string format_compliance_triple(std::optional<double> initial, std::optional<double> pds,
                                     std::optional<double> optimal) {
  auto fmt = [](std::optional<double> v) -> std::string {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%#.4g", *v);
    return buf;
  };
  return fmt(initial) + " → " + fmt(pds) + " → " + fmt(optimal) + " kNm";
}

std::string report_summary(const RunSummary& s) {
  auto w = [](const std::optional<StageSummary>& st) { return st ? std::optional<double>(st->compliance) : std::nullopt; };
  char line[256];
  std::snprintf(line, sizeof line, "%s, %dx%d grid, c = %g, seed %llu\n", s.preset.c_str(), s.nu, s.nv, s.sharpness,
                static_cast<unsigned long long>(s.seed));
  std::string out = line;
  out += "compliance: " + format_compliance_triple(w(s.initial), w(s.pds), w(s.optimal)) + "\n";
  std::snprintf(line, sizeof line, "%-8s %12s %12s %12s %12s %10s %10s\n", "stage", "W [kNm]", "F", "max sqrtA",
                "median sqrtA", "n>=1e-4", "top10%");
  out += line;
  for (const auto& [name, st] : {std::pair{"initial", &s.initial}, {"pds", &s.pds}, {"optimal", &s.optimal}}) {
    if (!*st) {
      std::snprintf(line, sizeof line, "%-8s %12s %12s %12s %12s %10s %10s\n", name, "n/a", "n/a", "n/a", "n/a", "n/a",
                    "n/a");
    } else {
      const StageSummary& v = **st;
      std::snprintf(line, sizeof line, "%-8s %#12.4g %#12.4g %12.3e %12.3e %10d %10.3f\n", name, v.compliance,
                    v.dev.objective, v.dev.max_sqrt, v.dev.median_sqrt, v.dev.count_above, v.dev.concentration);
    }
    out += line;
  }
  return out;
}

RunArtifacts run_pipeline(const CaseConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  RunArtifacts art;
  art.out_dir = out;
  write_text_atomic(out / "config.json", to_json(cfg).dump(2) + "\n");
  json timings;
  Stopwatch clock;

  RunSummary& s = art.summary;
  s.preset = cfg.preset;
  s.nu = cfg.surface.nu;
  s.nv = cfg.surface.nv;
  s.sharpness = cfg.sharpness;
  s.seed = cfg.seed;

  art.initial = initial_surface(cfg);
  const DevObjectiveConfig objective = make_objective_config(art.initial, cfg.sharpness, cfg.offset);
  s.initial = analyze_stage("initial", art.initial, cfg, objective, out);
  write_summary(out, s);
  timings["initial_seconds"] = clock.lap();

  const BoundsSpec lower =
      BoundsSpec::around(art.initial.heights(art.initial.lower_level_variables()), cfg.lower_half_width);
  const LowerLevelResult pds = solve_lower_level(art.initial, objective, lower, cfg.lower, cfg.threads);
  write_objective_history(out / "objective_history.csv", pds.solve);
  art.pds = pds.grid;
  s.pds = analyze_stage("pds", art.pds, cfg, objective, out);
  s.lower_status = status_name(pds.solve.status);
  s.lower_iterations = pds.solve.iterations;
  write_summary(out, s);
  timings["pds_seconds"] = clock.lap();

  if (!cfg.skip_anneal) {
    run_anneal_stage(cfg, art.initial, art.pds, out, art, nullptr);
    write_summary(out, s);
    timings["anneal_seconds"] = clock.lap();
  }
  write_text_atomic(out / "timings.json", timings.dump(2) + "\n");
  return art;
}

RunArtifacts resume_pipeline(const fs::path& out, std::optional<int> threads) {
  CaseConfig cfg = load_case_config(out / "config.json");
  cfg.out_dir = out.string();
  if (threads) cfg.threads = *threads;
  cfg.skip_anneal = false;
  cfg.stop_after_levels = 0;
  cfg.validate();
  if (!fs::exists(out / "anneal_checkpoint.json"))
    throw ConfigError(out.string() + " has no annealing checkpoint to resume from");

  RunArtifacts art;
  art.out_dir = out;
  art.summary = summary_from_json(json::parse(read_text(out / "summary.json")));
  if (!art.summary.initial || !art.summary.pds) throw ConfigError("stages 1 and 2 are incomplete in " + out.string());
  art.initial = initial_surface(cfg);
  const GridSurface stored = read_grid(out / "initial.grid");
  if (all_heights(stored) != all_heights(art.initial)) throw ConfigError("initial.grid does not match config.json");
  art.pds = with_heights(art.initial, all_heights(read_grid(out / "pds.grid")));

  json checkpoint;
  try {
    checkpoint = json::parse(read_text(out / "anneal_checkpoint.json"));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  Stopwatch clock;
  run_anneal_stage(cfg, art.initial, art.pds, out, art, &checkpoint);
  write_summary(out, art.summary);
  write_text_atomic(out / "timings.json", json{{"resume_anneal_seconds", clock.lap()}}.dump(2) + "\n");
  return art;
}

}  // namespace pds
