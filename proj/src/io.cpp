#include "pds/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pds {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ConfigError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw ConfigError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_grid(const fs::path& path, const GridSurface& grid) {
  std::string s = std::to_string(grid.nu()) + " " + std::to_string(grid.nv()) + "\n";
  for (int i = 0; i < grid.size(); ++i) {
    const Vec3& p = grid.point(i);
    s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + " " +
         role_name(grid.role(i)) + "\n";
  }
  write_text_atomic(path, s);
}

GridSurface read_grid(const fs::path& path) {
  std::istringstream in(read_text(path));
  int nu = 0, nv = 0;
  if (!(in >> nu >> nv)) throw ConfigError(path.string() + ": missing 'nu nv' header");
  if (nu < 3 || nv < 3 || nu > 100000 || nv > 100000 || static_cast<long long>(nu) * nv > 50000000)
    throw ConfigError(path.string() + ": unsupported grid size");
  std::vector<Vec3> pts(static_cast<std::size_t>(nu * nv));
  std::vector<PointRole> roles(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double x = 0, y = 0, z = 0;
    std::string role;
    if (!(in >> x >> y >> z >> role))
      throw ConfigError(path.string() + ": expected 'x y z role' for point " + std::to_string(i));
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw ConfigError(path.string() + ": non-finite coordinate at point " + std::to_string(i));
    pts[i] = Vec3(x, y, z);
    roles[i] = parse_role(role);
  }
  std::string extra;
  if (in >> extra) throw ConfigError(path.string() + ": trailing data after " + std::to_string(pts.size()) + " points");
  double xmin = pts[0].x(), xmax = xmin, ymin = pts[0].y(), ymax = ymin;
  for (const Vec3& p : pts) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  GridSurface g(nu, nv, xmax - xmin, ymax - ymin);
  for (int i = 0; i < g.size(); ++i) {
    g.set_point(i, pts[static_cast<std::size_t>(i)]);
    g.set_role(i, roles[static_cast<std::size_t>(i)]);
  }
  return g;
}

void write_obj(const fs::path& path, const GridSurface& grid, bool triangulate) {
  std::string s = "# " + std::to_string(grid.nu()) + "x" + std::to_string(grid.nv()) + " grid\n";
  for (const Vec3& p : grid.points())
    s += "v " + format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  for (int b = 0; b + 1 < grid.nv(); ++b) {
    for (int a = 0; a + 1 < grid.nu(); ++a) {
      const int v0 = grid.index(a, b) + 1, v1 = grid.index(a + 1, b) + 1;
      const int v2 = grid.index(a + 1, b + 1) + 1, v3 = grid.index(a, b + 1) + 1;
      if (triangulate) {
        s += "f " + std::to_string(v0) + " " + std::to_string(v1) + " " + std::to_string(v2) + "\n";
        s += "f " + std::to_string(v0) + " " + std::to_string(v2) + " " + std::to_string(v3) + "\n";
      } else {
        s += "f " + std::to_string(v0) + " " + std::to_string(v1) + " " + std::to_string(v2) + " " +
             std::to_string(v3) + "\n";
      }
    }
  }
  write_text_atomic(path, s);
}

void write_devcheck_csv(const fs::path& path, const GridSurface& grid, const DevObjectiveConfig& config, int threads) {
  validate(config, grid);
  const std::vector<double> errors = developability_errors(grid, config.evaluation_set, threads);
  std::string s = "i,u_index,v_index,sqrt_Ai,Ai,filtered_term\n";
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const int i = config.evaluation_set[k];
    s += std::to_string(i) + "," + std::to_string(grid.col(i)) + "," + std::to_string(grid.row(i)) + "," +
         format_double(std::sqrt(errors[k])) + "," + format_double(errors[k]) + "," +
         format_double(filtered_term(errors[k], config)) + "\n";
  }
  write_text_atomic(path, s);
}

namespace {

std::string vtk_header(const GridSurface& grid, const std::string& title) {
  std::string s = "# vtk DataFile Version 3.0\n" + title + "\nASCII\nDATASET POLYDATA\n";
  s += "POINTS " + std::to_string(grid.size()) + " double\n";
  for (const Vec3& p : grid.points())
    s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  const int cells = (grid.nu() - 1) * (grid.nv() - 1);
  s += "POLYGONS " + std::to_string(cells) + " " + std::to_string(5 * cells) + "\n";
  for (int b = 0; b + 1 < grid.nv(); ++b)
    for (int a = 0; a + 1 < grid.nu(); ++a)
      s += "4 " + std::to_string(grid.index(a, b)) + " " + std::to_string(grid.index(a + 1, b)) + " " +
           std::to_string(grid.index(a + 1, b + 1)) + " " + std::to_string(grid.index(a, b + 1)) + "\n";
  return s;
}

}  // namespace

void write_gauss_vtk(const fs::path& path, const GridSurface& grid, const DevObjectiveConfig& config, int threads) {
  validate(config, grid);
  const std::vector<double> errors = developability_errors(grid, config.evaluation_set, threads);
  std::vector<double> root(static_cast<std::size_t>(grid.size()), 0.0);
  std::vector<int> mask(root.size(), 0);
  for (std::size_t k = 0; k < errors.size(); ++k) {
    root[static_cast<std::size_t>(config.evaluation_set[k])] = std::sqrt(errors[k]);
    mask[static_cast<std::size_t>(config.evaluation_set[k])] = 1;
  }
  std::string s = vtk_header(grid, "local Gauss map area");
  s += "POINT_DATA " + std::to_string(grid.size()) + "\nSCALARS sqrt_Ai double 1\nLOOKUP_TABLE default\n";
  for (double v : root) s += format_double(v) + "\n";
  s += "SCALARS in_evaluation_set int 1\nLOOKUP_TABLE default\n";
  for (int v : mask) s += std::to_string(v) + "\n";
  write_text_atomic(path, s);
}

void write_fem_vtk(const fs::path& path, const GridSurface& grid, const FemResult& result) {
  const int cells = (grid.nu() - 1) * (grid.nv() - 1);
  if (result.displacement.size() != kNodeDofs * grid.size() || static_cast<int>(result.moments.size()) != cells)
    throw ConfigError("shell result does not belong to this grid");
  std::string s = vtk_header(grid, "shell displacements and bending moments");
  s += "POINT_DATA " + std::to_string(grid.size()) + "\nVECTORS displacement double\n";
  for (int i = 0; i < grid.size(); ++i) {
    const Vec3 u = result.translation(i);
    s += format_double(u.x()) + " " + format_double(u.y()) + " " + format_double(u.z()) + "\n";
  }
  s += "CELL_DATA " + std::to_string(cells) + "\n";
  for (const char* name : {"Mmax", "M1", "M2"}) {
    s += std::string("SCALARS ") + name + " double 1\nLOOKUP_TABLE default\n";
    for (const PrincipalMoments& m : result.moments)
      s += format_double(name[1] == '2' ? m.m2 : (name[1] == '1' ? m.m1 : m.max())) + "\n";
  }
  write_text_atomic(path, s);
}

void write_fem_csv(const fs::path& path, const FemResult& result) {
  std::string s = "element,M1,M2,Mmax,W_total\n";
  for (std::size_t e = 0; e < result.moments.size(); ++e) {
    const PrincipalMoments& m = result.moments[e];
    s += std::to_string(e) + "," + format_double(m.m1) + "," + format_double(m.m2) + "," + format_double(m.max()) +
         "," + format_double(result.work) + "\n";
  }
  write_text_atomic(path, s);
}

void write_objective_history(const fs::path& path, const NlpResult& solve) {
  std::string s = "iter,F,projected_grad_norm\n";
  for (const NlpIterate& it : solve.history)
    s += std::to_string(it.iteration) + "," + format_double(it.value) + "," +
         format_double(it.projected_gradient_norm) + "\n";
  write_text_atomic(path, s);
}

void write_anneal_history(const fs::path& path, const std::vector<AnnealRecord>& history) {
  const Eigen::Index nz = history.empty() ? 0 : history.front().z.size();
  std::string s = "eval,temperature,W,F_residual,accepted";
  for (Eigen::Index k = 0; k < nz; ++k) s += ",Z" + std::to_string(k);
  s += "\n";
  for (const AnnealRecord& r : history) {
    s += std::to_string(r.eval) + "," + format_double(r.temperature) + "," + format_double(r.w) + "," +
         format_double(r.f_residual) + "," + (r.accepted ? "1" : "0");
    for (Eigen::Index k = 0; k < r.z.size(); ++k) s += "," + format_double(r.z[k]);
    s += "\n";
  }
  write_text_atomic(path, s);
}

PointLayout read_layout(const fs::path& path) {
  std::istringstream in(read_text(path));
  PointLayout layout;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    int a = 0, b = 0;
    std::string extra;
    if (!(ls >> a >> b) || (ls >> extra))
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected '<kind> u_index v_index'");
    if (kind == "fixed")
      layout.fixed.emplace_back(a, b);
    else if (kind == "design")
      layout.design.emplace_back(a, b);
    else if (kind == "exempt")
      layout.exempt.emplace_back(a, b);
    else if (kind == "support")
      layout.supports.emplace_back(a, b);
    else
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown entry '" + kind + "'");
  }
  return layout;
}

void write_layout(const fs::path& path, const PointLayout& layout) {
  std::string s;
  auto emit = [&](const char* kind, const std::vector<PointLayout::Cell>& cells) {
    for (const auto& [a, b] : cells) s += std::string(kind) + " " + std::to_string(a) + " " + std::to_string(b) + "\n";
  };
  emit("fixed", layout.fixed);
  emit("design", layout.design);
  emit("exempt", layout.exempt);
  emit("support", layout.supports);
  write_text_atomic(path, s);
}

}  // namespace pds
