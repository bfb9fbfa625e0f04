#include "emuproto/mesh.hpp"

#include <stdexcept>
#include <string>

namespace emuproto {

MeshGraph build_mesh(const GridSpec& grid, int coarsening) {
  grid.validate();
  const int g = grid.size;
  if (coarsening < 2)
    throw std::invalid_argument("build_mesh: coarsening must be >= 2");
  if ((g - 1) % coarsening != 0) {
    std::string valid;
    for (int m = 2; m <= g - 1; ++m)
      if ((g - 1) % m == 0) valid += (valid.empty() ? "" : ",") + std::to_string(m);
    throw std::invalid_argument("build_mesh: (G-1)=" + std::to_string(g - 1) +
                                " not divisible by m=" +
                                std::to_string(coarsening) +
                                "; valid m: {" + valid + "}");
  }

  MeshGraph mesh;
  mesh.grid_size = g;
  mesh.coarsening = coarsening;
  const int ms = (g - 1) / coarsening + 1;
  mesh.mesh_side = ms;
  const float domain = float(g - 1);

  for (int j = 0; j < ms; ++j)
    for (int i = 0; i < ms; ++i)
      mesh.mesh_pos.push_back({float(i * coarsening), float(j * coarsening)});

  auto node = [&](int i, int j) { return j * ms + i; };
  auto add_mm = [&](int a, int b) {
    mesh.mm_src.push_back(a);
    mesh.mm_dst.push_back(b);
    mesh.mm_disp.push_back((mesh.mesh_pos[std::size_t(b)][0] -
                            mesh.mesh_pos[std::size_t(a)][0]) / domain);
    mesh.mm_disp.push_back((mesh.mesh_pos[std::size_t(b)][1] -
                            mesh.mesh_pos[std::size_t(a)][1]) / domain);
  };

  // each lattice square splits along the (i,j)->(i+1,j+1) diagonal:
  //   lower triangle {(i,j),(i+1,j),(i+1,j+1)}, upper {(i,j),(i+1,j+1),(i,j+1)}
  for (int j = 0; j + 1 < ms; ++j)
    for (int i = 0; i + 1 < ms; ++i) {
      mesh.triangles.push_back({node(i, j), node(i + 1, j), node(i + 1, j + 1)});
      mesh.triangles.push_back({node(i, j), node(i + 1, j + 1), node(i, j + 1)});
    }
  for (int j = 0; j < ms; ++j)
    for (int i = 0; i < ms; ++i) {
      if (i + 1 < ms) { add_mm(node(i, j), node(i + 1, j)); add_mm(node(i + 1, j), node(i, j)); }
      if (j + 1 < ms) { add_mm(node(i, j), node(i, j + 1)); add_mm(node(i, j + 1), node(i, j)); }
      if (i + 1 < ms && j + 1 < ms) {
        add_mm(node(i, j), node(i + 1, j + 1));
        add_mm(node(i + 1, j + 1), node(i, j));
      }
    }

  mesh.grid_triangle.resize(std::size_t(mesh.n_grid()));
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      const int gi = y * g + x;
      const int ci = std::min(x / coarsening, ms - 2);
      const int cj = std::min(y / coarsening, ms - 2);
      const float lx = float(x - ci * coarsening) / float(coarsening);
      const float ly = float(y - cj * coarsening) / float(coarsening);
      // on-diagonal points count as the lower triangle
      const int tri = 2 * (cj * (ms - 1) + ci) + (lx >= ly ? 0 : 1);
      mesh.grid_triangle[std::size_t(gi)] = tri;
      for (int v : mesh.triangles[std::size_t(tri)]) {
        mesh.gm_grid.push_back(gi);
        mesh.gm_mesh.push_back(v);
        const float dx = (mesh.mesh_pos[std::size_t(v)][0] - float(x)) / domain;
        const float dy = (mesh.mesh_pos[std::size_t(v)][1] - float(y)) / domain;
        mesh.gm_disp.push_back(dx);
        mesh.gm_disp.push_back(dy);
        mesh.mg_mesh.push_back(v);
        mesh.mg_grid.push_back(gi);
        mesh.mg_disp.push_back(-dx);
        mesh.mg_disp.push_back(-dy);
      }
    }
  return mesh;
}

BatchedMesh make_batched(const MeshGraph& mesh, int batch) {
  BatchedMesh b;
  b.batch = batch;
  b.n_grid = mesh.n_grid();
  b.n_mesh = mesh.n_mesh();
  const auto tile_idx = [&](const std::vector<std::int32_t>& src,
                            std::int64_t stride, std::vector<std::int32_t>& dst) {
    dst.reserve(src.size() * std::size_t(batch));
    for (int s = 0; s < batch; ++s)
      for (auto i : src) dst.push_back(std::int32_t(i + s * stride));
  };
  const auto tile_f = [&](const std::vector<float>& src, std::vector<float>& dst) {
    dst.reserve(src.size() * std::size_t(batch));
    for (int s = 0; s < batch; ++s) dst.insert(dst.end(), src.begin(), src.end());
  };
  tile_idx(mesh.gm_grid, b.n_grid, b.gm_grid);
  tile_idx(mesh.gm_mesh, b.n_mesh, b.gm_mesh);
  tile_idx(mesh.mm_src, b.n_mesh, b.mm_src);
  tile_idx(mesh.mm_dst, b.n_mesh, b.mm_dst);
  tile_idx(mesh.mg_mesh, b.n_mesh, b.mg_mesh);
  tile_idx(mesh.mg_grid, b.n_grid, b.mg_grid);
  tile_f(mesh.gm_disp, b.gm_disp);
  tile_f(mesh.mm_disp, b.mm_disp);
  tile_f(mesh.mg_disp, b.mg_disp);
  return b;
}

}  // namespace emuproto
