#include "pds/fem.hpp"

#include "pds/parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <exception>

namespace pds {

namespace {

constexpr std::array<double, 4> kNodeR{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kNodeS{-1.0, -1.0, 1.0, 1.0};
const double kGauss = 1.0 / std::sqrt(3.0);

enum : int { U = 0, V = 1, W = 2, RX = 3, RY = 4, RZ = 5 };

struct Shape {
  std::array<double, 4> n{};
  std::array<double, 4> dx{};
  std::array<double, 4> dy{};
  Eigen::Matrix2d jac;  // rows d/dr, d/ds of (x, y)
  double det = 0.0;
};

Shape shape_at(const ElementFrame& f, double r, double s, int element) {
  Shape sh;
  std::array<double, 4> dr{}, ds{};
  for (int a = 0; a < 4; ++a) {
    sh.n[a] = 0.25 * (1.0 + r * kNodeR[a]) * (1.0 + s * kNodeS[a]);
    dr[a] = 0.25 * kNodeR[a] * (1.0 + s * kNodeS[a]);
    ds[a] = 0.25 * kNodeS[a] * (1.0 + r * kNodeR[a]);
  }
  sh.jac.setZero();
  for (int a = 0; a < 4; ++a) {
    sh.jac(0, 0) += dr[a] * f.local[a].x();
    sh.jac(0, 1) += dr[a] * f.local[a].y();
    sh.jac(1, 0) += ds[a] * f.local[a].x();
    sh.jac(1, 1) += ds[a] * f.local[a].y();
  }
  sh.det = sh.jac.determinant();
  const double scale = sh.jac.cwiseAbs().maxCoeff();
  if (!(sh.det > 1e-12 * scale * scale)) throw ElementError("inverted or degenerate shell element", element);
  const Eigen::Matrix2d inv = sh.jac.inverse();
  for (int a = 0; a < 4; ++a) {
    sh.dx[a] = inv(0, 0) * dr[a] + inv(0, 1) * ds[a];
    sh.dy[a] = inv(1, 0) * dr[a] + inv(1, 1) * ds[a];
  }
  return sh;
}

using Row24 = Eigen::Matrix<double, 1, 24>;
using B3 = Eigen::Matrix<double, 3, 24>;
using B2 = Eigen::Matrix<double, 2, 24>;

B3 membrane_b(const Shape& sh) {
  B3 b = B3::Zero();
  for (int a = 0; a < 4; ++a) {
    b(0, 6 * a + U) = sh.dx[a];
    b(1, 6 * a + V) = sh.dy[a];
    b(2, 6 * a + U) = sh.dy[a];
    b(2, 6 * a + V) = sh.dx[a];
  }
  return b;
}

// Curvatures with beta_x = ry, beta_y = -rx.
B3 bending_b(const Shape& sh) {
  B3 b = B3::Zero();
  for (int a = 0; a < 4; ++a) {
    b(0, 6 * a + RY) = sh.dx[a];
    b(1, 6 * a + RX) = -sh.dy[a];
    b(2, 6 * a + RY) = sh.dy[a];
    b(2, 6 * a + RX) = -sh.dx[a];
  }
  return b;
}

B2 shear_b(const Shape& sh) {
  B2 b = B2::Zero();
  for (int a = 0; a < 4; ++a) {
    b(0, 6 * a + W) = sh.dx[a];
    b(0, 6 * a + RY) = sh.n[a];
    b(1, 6 * a + W) = sh.dy[a];
    b(1, 6 * a + RX) = -sh.n[a];
  }
  return b;
}

// Covariant transverse shear rows tied along the element mid-lines.
struct ShearTying {
  Row24 rz_top, rz_bottom, sz_right, sz_left;
};

ShearTying shear_tying(const ElementFrame& f, int element) {
  auto covariant = [&](double r, double s, int row) -> Row24 {
    const Shape sh = shape_at(f, r, s, element);
    return (sh.jac * shear_b(sh)).row(row);
  };
  return {covariant(0.0, 1.0, 0), covariant(0.0, -1.0, 0), covariant(1.0, 0.0, 1), covariant(-1.0, 0.0, 1)};
}

B2 assumed_shear_b(const ShearTying& t, const Shape& sh, double r, double s) {
  B2 cov;
  cov.row(0) = 0.5 * (1.0 + s) * t.rz_top + 0.5 * (1.0 - s) * t.rz_bottom;
  cov.row(1) = 0.5 * (1.0 + r) * t.sz_right + 0.5 * (1.0 - r) * t.sz_left;
  return sh.jac.inverse() * cov;
}

Row24 drilling_b(const Shape& sh) {
  Row24 b = Row24::Zero();
  for (int a = 0; a < 4; ++a) {
    b(6 * a + RZ) = sh.n[a];
    b(6 * a + U) = 0.5 * sh.dy[a];
    b(6 * a + V) = -0.5 * sh.dx[a];
  }
  return b;
}

Eigen::Matrix3d plane_stress(double e, double nu) {
  Eigen::Matrix3d d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return d * (e / (1.0 - nu * nu));
}

// Local flat-node dofs from global dofs at the actual nodes.
ElementMatrix element_transform(const ElementFrame& f) {
  ElementMatrix t = ElementMatrix::Zero();
  for (int a = 0; a < 4; ++a) {
    Eigen::Matrix<double, 6, 6> link = Eigen::Matrix<double, 6, 6>::Identity();
    link(U, RY) = -f.warp[a];
    link(V, RX) = f.warp[a];
    Eigen::Matrix<double, 6, 6> rot = Eigen::Matrix<double, 6, 6>::Zero();
    rot.block<3, 3>(0, 0) = f.rotation;
    rot.block<3, 3>(3, 3) = f.rotation;
    t.block<6, 6>(6 * a, 6 * a) = link * rot;
  }
  return t;
}

std::array<Vec3, 4> element_nodes(const FemModel& m, int e) {
  const auto& el = m.elements[static_cast<std::size_t>(e)];
  return {m.nodes[static_cast<std::size_t>(el[0])], m.nodes[static_cast<std::size_t>(el[1])],
          m.nodes[static_cast<std::size_t>(el[2])], m.nodes[static_cast<std::size_t>(el[3])]};
}

Eigen::Matrix<double, 24, 1> gather(const FemModel& m, const Eigen::VectorXd& u, int e) {
  Eigen::Matrix<double, 24, 1> out;
  const auto& el = m.elements[static_cast<std::size_t>(e)];
  for (int a = 0; a < 4; ++a) out.segment<6>(6 * a) = u.segment<6>(kNodeDofs * el[static_cast<std::size_t>(a)]);
  return out;
}

ElementResultants resultants(const FemModel& m, const Eigen::VectorXd& u, int e) {
  const ElementFrame f = element_frame(element_nodes(m, e));
  const Eigen::Matrix<double, 24, 1> ul = element_transform(f) * gather(m, u, e);
  const ShellMaterial& mat = m.material;
  const Shape sh = shape_at(f, 0.0, 0.0, e);
  ElementResultants r;
  r.membrane = plane_stress(mat.youngs_modulus, mat.poisson) * mat.thickness * (membrane_b(sh) * ul);
  r.moment = -plane_stress(mat.youngs_modulus, mat.poisson) * (std::pow(mat.thickness, 3) / 12.0) * (bending_b(sh) * ul);
  r.shear = kShearCorrection * mat.shear_modulus() * mat.thickness *
            (assumed_shear_b(shear_tying(f, e), sh, 0.0, 0.0) * ul);
  return r;
}

}  // namespace

void ShellMaterial::validate() const {
  if (!(youngs_modulus > 0.0)) throw ConfigError("Young's modulus must be positive");
  if (!(poisson >= 0.0 && poisson < 0.5)) throw ConfigError("Poisson's ratio must lie in [0, 0.5)");
  if (!(thickness > 0.0)) throw ConfigError("shell thickness must be positive");
}

double ShellMaterial::bending_rigidity() const {
  return youngs_modulus * thickness * thickness * thickness / (12.0 * (1.0 - poisson * poisson));
}

double ShellMaterial::shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson)); }

const char* dof_name(Dof dof) {
  switch (dof) {
    case Dof::Ux: return "ux";
    case Dof::Uy: return "uy";
    case Dof::Uz: return "uz";
    case Dof::Rx: return "rx";
    case Dof::Ry: return "ry";
    case Dof::Rz: return "rz";
  }
  return "?";
}

NodeSupport NodeSupport::pin(int node) {
  NodeSupport s;
  s.node = node;
  s.fixed = {true, true, true, false, false, false};
  return s;
}

NodeSupport NodeSupport::clamp(int node) {
  NodeSupport s;
  s.node = node;
  s.fixed.fill(true);
  return s;
}

SingularStiffnessError::SingularStiffnessError(int node, Dof dof)
    : NumericalError("singular stiffness matrix: no restraint against a mode through node " + std::to_string(node) +
                     " dof " + dof_name(dof) + " (check supports)"),
      node_(node),
      dof_(dof) {}

void FemModel::validate() const {
  material.validate();
  const int n = static_cast<int>(nodes.size());
  for (const Vec3& p : nodes)
    if (!p.allFinite()) throw ConfigError("non-finite node coordinate");
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& el = elements[e];
    for (int a = 0; a < 4; ++a) {
      if (el[static_cast<std::size_t>(a)] < 0 || el[static_cast<std::size_t>(a)] >= n)
        throw ConfigError("element " + std::to_string(e) + " references a missing node");
      for (int b = 0; b < a; ++b)
        if (el[static_cast<std::size_t>(a)] == el[static_cast<std::size_t>(b)])
          throw ConfigError("element " + std::to_string(e) + " repeats a node");
    }
  }
  for (const NodeSupport& s : supports)
    if (s.node < 0 || s.node >= n) throw ConfigError("support on a missing node " + std::to_string(s.node));
  for (const PointLoad& p : point_loads)
    if (p.node < 0 || p.node >= n) throw ConfigError("point load on a missing node " + std::to_string(p.node));
  if (!std::isfinite(load.pressure)) throw ConfigError("non-finite load");
  if (load.pressure != 0.0 && !(load.direction.norm() > 0.0)) throw ConfigError("load direction must be non-zero");
}

std::vector<int> support_nodes(const GridSurface& grid, const PointLayout& layout) {
  std::vector<int> out;
  for (const auto& [a, b] : layout.supports) {
    if (!grid.contains(a, b))
      throw ConfigError("support (" + std::to_string(a) + "," + std::to_string(b) + ") lies outside the grid");
    out.push_back(grid.index(a, b));
  }
  return out;
}

FemModel shell_model(const GridSurface& grid, const ShellMaterial& material, std::span<const int> supports,
                     const AreaLoad& load) {
  FemModel m;
  m.nodes.assign(grid.points().begin(), grid.points().end());
  for (int b = 0; b + 1 < grid.nv(); ++b)
    for (int a = 0; a + 1 < grid.nu(); ++a)
      m.elements.push_back({grid.index(a, b), grid.index(a + 1, b), grid.index(a + 1, b + 1), grid.index(a, b + 1)});
  m.material = material;
  for (int s : supports) m.supports.push_back(NodeSupport::pin(s));
  m.load = load;
  m.validate();
  return m;
}

ElementFrame element_frame(const std::array<Vec3, 4>& x) {
  ElementFrame f;
  f.center = 0.25 * (x[0] + x[1] + x[2] + x[3]);
  const Vec3 normal = (x[2] - x[0]).cross(x[3] - x[1]);
  const double scale = std::max((x[2] - x[0]).norm(), (x[3] - x[1]).norm());
  if (!(normal.norm() > 1e-12 * scale * scale)) throw NumericalError("collapsed shell element");
  const Vec3 e3 = normal.normalized();
  Vec3 e1 = 0.5 * (x[1] + x[2] - x[0] - x[3]);
  e1 -= e1.dot(e3) * e3;
  if (!(e1.norm() > 1e-12 * scale)) throw NumericalError("collapsed shell element");
  e1.normalize();
  const Vec3 e2 = e3.cross(e1);
  f.rotation.row(0) = e1.transpose();
  f.rotation.row(1) = e2.transpose();
  f.rotation.row(2) = e3.transpose();
  for (int a = 0; a < 4; ++a) {
    const Vec3 d = f.rotation * (x[static_cast<std::size_t>(a)] - f.center);
    f.local[static_cast<std::size_t>(a)] = d.head<2>();
    f.warp[static_cast<std::size_t>(a)] = d.z();
  }
  return f;
}

ElementMatrix local_element_stiffness(const ElementFrame& f, const ShellMaterial& mat, int element,
                                      double drilling_factor) {
  const Eigen::Matrix3d dm = plane_stress(mat.youngs_modulus, mat.poisson) * mat.thickness;
  const Eigen::Matrix3d db = plane_stress(mat.youngs_modulus, mat.poisson) * (std::pow(mat.thickness, 3) / 12.0);
  const double ds = kShearCorrection * mat.shear_modulus() * mat.thickness;
  const ShearTying tying = shear_tying(f, element);

  ElementMatrix membrane = ElementMatrix::Zero();
  ElementMatrix plate = ElementMatrix::Zero();
  ElementMatrix drill = ElementMatrix::Zero();
  for (double r : {-kGauss, kGauss}) {
    for (double s : {-kGauss, kGauss}) {
      const Shape sh = shape_at(f, r, s, element);
      const B3 bm = membrane_b(sh);
      const B3 bb = bending_b(sh);
      const B2 bs = assumed_shear_b(tying, sh, r, s);
      const Row24 bd = drilling_b(sh);
      membrane += bm.transpose() * dm * bm * sh.det;
      plate += (bb.transpose() * db * bb + bs.transpose() * ds * bs) * sh.det;
      drill += bd.transpose() * bd * sh.det;
    }
  }
  double plate_diag = 0.0, drill_diag = 0.0;
  for (int a = 0; a < 4; ++a) {
    plate_diag = std::max({plate_diag, plate(6 * a + RX, 6 * a + RX), plate(6 * a + RY, 6 * a + RY)});
    drill_diag = std::max(drill_diag, drill(6 * a + RZ, 6 * a + RZ));
  }
  return membrane + plate + (drilling_factor * plate_diag / drill_diag) * drill;
}

ElementMatrix element_stiffness(const std::array<Vec3, 4>& xyz, const ShellMaterial& material, int element,
                                double drilling_factor) {
  ElementFrame f;
  try {
    f = element_frame(xyz);
  } catch (const ElementError&) {
    throw;
  } catch (const NumericalError& e) {
    throw ElementError(e.what(), element);
  }
  const ElementMatrix t = element_transform(f);
  ElementMatrix k = t.transpose() * local_element_stiffness(f, material, element, drilling_factor) * t;
  return 0.5 * (k + k.transpose());
}

PrincipalMoments principal_moments(const Eigen::Vector3d& m) {
  const double mean = 0.5 * (m[0] + m[1]);
  const double radius = std::hypot(0.5 * (m[0] - m[1]), m[2]);
  return {mean + radius, mean - radius};
}

PrincipalMoments principal_moments(const FemResult& result, int element) {
  return principal_moments(result.resultants.at(static_cast<std::size_t>(element)).moment);
}

Vec3 FemResult::translation(int node) const { return displacement.segment<3>(kNodeDofs * node); }

Eigen::VectorXd nodal_loads(const FemModel& m) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m.dof_count());
  if (m.load.pressure != 0.0) {
    const Vec3 dir = m.load.direction.normalized();
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
      const auto x = element_nodes(m, static_cast<int>(e));
      for (double r : {-kGauss, kGauss}) {
        for (double s : {-kGauss, kGauss}) {
          Vec3 xr = Vec3::Zero(), xs = Vec3::Zero();
          std::array<double, 4> n{};
          for (int a = 0; a < 4; ++a) {
            n[a] = 0.25 * (1.0 + r * kNodeR[a]) * (1.0 + s * kNodeS[a]);
            xr += 0.25 * kNodeR[a] * (1.0 + s * kNodeS[a]) * x[static_cast<std::size_t>(a)];
            xs += 0.25 * kNodeS[a] * (1.0 + r * kNodeR[a]) * x[static_cast<std::size_t>(a)];
          }
          const Vec3 da = xr.cross(xs);
          const double area = m.load.per_plan_area ? std::abs(da.z()) : da.norm();
          for (int a = 0; a < 4; ++a)
            f.segment<3>(kNodeDofs * m.elements[e][static_cast<std::size_t>(a)]) += m.load.pressure * n[a] * area * dir;
        }
      }
    }
  }
  for (const PointLoad& p : m.point_loads) f[kNodeDofs * p.node + static_cast<int>(p.dof)] += p.value;
  return f;
}

FemResult assemble_and_solve(const FemModel& model, int threads) {
  model.validate();
  const int n_dof = model.dof_count();
  const std::size_t n_el = model.elements.size();

  std::vector<ElementMatrix> ke(n_el);
  std::vector<std::exception_ptr> failure(n_el);
  parallel_for(n_el, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      try {
        ke[e] = element_stiffness(element_nodes(model, static_cast<int>(e)), model.material, static_cast<int>(e));
      } catch (...) {
        failure[e] = std::current_exception();
      }
    }
  });
  for (const auto& f : failure)
    if (f) std::rethrow_exception(f);

  // Constrained dofs and their prescribed values.
  std::vector<char> fixed(static_cast<std::size_t>(n_dof), 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n_dof);
  for (const NodeSupport& s : model.supports) {
    for (int d = 0; d < kNodeDofs; ++d) {
      if (!s.fixed[static_cast<std::size_t>(d)]) continue;
      fixed[static_cast<std::size_t>(kNodeDofs * s.node + d)] = 1;
      u[kNodeDofs * s.node + d] = s.value[static_cast<std::size_t>(d)];
    }
  }
  std::vector<int> column(static_cast<std::size_t>(n_dof), -1);
  std::vector<int> free_dofs;
  for (int k = 0; k < n_dof; ++k) {
    if (fixed[static_cast<std::size_t>(k)]) continue;
    column[static_cast<std::size_t>(k)] = static_cast<int>(free_dofs.size());
    free_dofs.push_back(k);
  }

  const Eigen::VectorXd f = nodal_loads(model);
  const auto n_free = static_cast<Eigen::Index>(free_dofs.size());
  Eigen::VectorXd rhs(n_free);
  for (Eigen::Index k = 0; k < n_free; ++k) rhs[k] = f[free_dofs[static_cast<std::size_t>(k)]];

  std::vector<Eigen::Triplet<double>> full_triplets, free_triplets;
  full_triplets.reserve(n_el * 576);
  free_triplets.reserve(n_el * 576);
  for (std::size_t e = 0; e < n_el; ++e) {
    std::array<int, 24> g{};
    for (int a = 0; a < 4; ++a)
      for (int d = 0; d < kNodeDofs; ++d) g[static_cast<std::size_t>(6 * a + d)] = kNodeDofs * model.elements[e][static_cast<std::size_t>(a)] + d;
    for (int i = 0; i < 24; ++i) {
      const int gi = g[static_cast<std::size_t>(i)];
      const int ci = column[static_cast<std::size_t>(gi)];
      for (int j = 0; j < 24; ++j) {
        const int gj = g[static_cast<std::size_t>(j)];
        const double kij = ke[e](i, j);
        full_triplets.emplace_back(gi, gj, kij);
        if (ci < 0) continue;
        const int cj = column[static_cast<std::size_t>(gj)];
        if (cj >= 0)
          free_triplets.emplace_back(ci, cj, kij);
        else
          rhs[ci] -= kij * u[gj];
      }
    }
  }

  if (n_free > 0) {
    Eigen::SparseMatrix<double> kff(n_free, n_free);
    kff.setFromTriplets(free_triplets.begin(), free_triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(kff);
    const Eigen::VectorXd d = ldlt.info() == Eigen::Success ? Eigen::VectorXd(ldlt.vectorD()) : Eigen::VectorXd();
    const double dmax = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
    Eigen::Index bad = ldlt.info() == Eigen::Success ? -1 : 0;
    for (Eigen::Index k = 0; k < d.size() && bad < 0; ++k)
      if (!(d[k] > 1e-13 * dmax)) bad = k;
    if (bad >= 0) {
      const int dof = free_dofs[static_cast<std::size_t>(ldlt.permutationPinv().indices()[bad])];
      throw SingularStiffnessError(dof / kNodeDofs, static_cast<Dof>(dof % kNodeDofs));
    }
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (!x.allFinite()) throw NumericalError("shell solve produced non-finite displacements");
    for (Eigen::Index k = 0; k < n_free; ++k) u[free_dofs[static_cast<std::size_t>(k)]] = x[k];
  }

  Eigen::SparseMatrix<double> k_full(n_dof, n_dof);
  k_full.setFromTriplets(full_triplets.begin(), full_triplets.end());

  FemResult r;
  r.displacement = u;
  r.load = f;
  r.work = f.dot(u);
  r.strain_energy2 = u.dot(k_full * u);
  r.resultants.resize(n_el);
  r.moments.resize(n_el);
  for (std::size_t e = 0; e < n_el; ++e) {
    r.resultants[e] = resultants(model, u, static_cast<int>(e));
    r.moments[e] = principal_moments(r.resultants[e].moment);
  }
  return r;
}

}  // namespace pds
