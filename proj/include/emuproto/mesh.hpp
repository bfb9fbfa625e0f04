#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "emuproto/synthdata.hpp"

namespace emuproto {

// Coarse triangular lattice over the grid with bipartite grid<->mesh edges.
// Every grid node connects to the 3 vertices of its containing triangle, in
// both directions. Displacement features are normalized by the domain size.
struct MeshGraph {
  int grid_size = 0;
  int coarsening = 0;
  int mesh_side = 0;  // (grid_size-1)/coarsening + 1

  std::vector<std::array<float, 2>> mesh_pos;       // grid-unit coordinates
  std::vector<std::array<int, 3>> triangles;        // vertex ids, fixed diagonal

  // mesh-mesh edges (lattice + diagonal adjacency, both directions)
  std::vector<std::int32_t> mm_src, mm_dst;
  std::vector<float> mm_disp;  // E_mm x 2

  // grid -> mesh
  std::vector<std::int32_t> gm_grid, gm_mesh;
  std::vector<float> gm_disp;  // (3 G^2) x 2, mesh minus grid position

  // mesh -> grid
  std::vector<std::int32_t> mg_mesh, mg_grid;
  std::vector<float> mg_disp;  // grid minus mesh position

  std::vector<std::int32_t> grid_triangle;  // containing triangle per grid node

  int n_mesh() const { return mesh_side * mesh_side; }
  std::int64_t n_grid() const { return std::int64_t(grid_size) * grid_size; }
  int n_triangles() const { return int(triangles.size()); }
};

// Requires (G-1) divisible by m.
MeshGraph build_mesh(const GridSpec& grid, int coarsening);

// Index lists and tiled displacement features for a batch of samples that
// share one mesh; sample s gets node-id offsets s*n_grid / s*n_mesh.
struct BatchedMesh {
  int batch = 0;
  std::int64_t n_grid = 0, n_mesh = 0;
  std::vector<std::int32_t> gm_grid, gm_mesh, mm_src, mm_dst, mg_mesh, mg_grid;
  std::vector<float> gm_disp, mm_disp, mg_disp;
};

BatchedMesh make_batched(const MeshGraph& mesh, int batch);

}  // namespace emuproto
