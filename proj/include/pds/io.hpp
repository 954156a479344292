#pragma once

#include "pds/anneal.hpp"
#include "pds/devmap.hpp"
#include "pds/fem.hpp"
#include "pds/grid.hpp"
#include "pds/nlp.hpp"

#include <filesystem>
#include <string>

namespace pds {

/// "%.17g": reads back to the same double.
std::string format_double(double v);

/// Header "nu nv", then one "x y z role" line per point in index order.
void write_grid(const std::filesystem::path& path, const GridSurface& grid);
GridSurface read_grid(const std::filesystem::path& path);

/// Wavefront OBJ of the grid cells (quads, or two triangles each).
void write_obj(const std::filesystem::path& path, const GridSurface& grid, bool triangulate = false);

/// One line per point of the evaluation set:
/// i,u_index,v_index,sqrt_Ai,Ai,filtered_term
void write_devcheck_csv(const std::filesystem::path& path, const GridSurface& grid, const DevObjectiveConfig& config,
                        int threads = 1);

/// Legacy VTK of the grid with sqrt(A_i) as point data (0 outside I) and an
/// in_evaluation_set mask.
void write_gauss_vtk(const std::filesystem::path& path, const GridSurface& grid, const DevObjectiveConfig& config,
                     int threads = 1);

/// Legacy VTK with point displacements and per-element M1, M2, Mmax.
void write_fem_vtk(const std::filesystem::path& path, const GridSurface& grid, const FemResult& result);

/// element,M1,M2,Mmax,W_total
void write_fem_csv(const std::filesystem::path& path, const FemResult& result);

/// iter,F,projected_grad_norm
void write_objective_history(const std::filesystem::path& path, const NlpResult& solve);

/// eval,temperature,W,F_residual,accepted,Z0,Z1,...
void write_anneal_history(const std::filesystem::path& path, const std::vector<AnnealRecord>& history);

/// Layout file: one "<fixed|design|exempt|support> u_index v_index" entry
/// per line; '#' starts a comment.
PointLayout read_layout(const std::filesystem::path& path);
void write_layout(const std::filesystem::path& path, const PointLayout& layout);

/// Writes `text` to `path` through a temporary file and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace pds
