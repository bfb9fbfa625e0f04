#include "emuproto/emulator.hpp"

#include <cmath>
#include <stdexcept>

#include "emuproto/rng.hpp"

namespace emuproto {

void EmulatorConfig::validate() const {
  GridSpec{grid, 1.0}.validate();
  if (mesh_coarsening < 2)
    throw std::invalid_argument("EmulatorConfig: mesh_coarsening must be >= 2");
  if ((grid - 1) % mesh_coarsening != 0)
    throw std::invalid_argument(
        "EmulatorConfig: (grid-1) must be divisible by mesh_coarsening");
  if (hidden < 4) throw std::invalid_argument("EmulatorConfig: hidden >= 4");
  if (blocks < 1) throw std::invalid_argument("EmulatorConfig: blocks >= 1");
}

Tensor mlp_apply(const Mlp& mlp, const Tensor& x) {
  Tensor h = relu(bias_add(matmul(x, mlp.w1), mlp.b1));
  return bias_add(matmul(h, mlp.w2), mlp.b2);
}

namespace {

void collect(const std::string& prefix, Mlp& mlp,
             std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix + ".w1", &mlp.w1);
  out.emplace_back(prefix + ".b1", &mlp.b1);
  out.emplace_back(prefix + ".w2", &mlp.w2);
  out.emplace_back(prefix + ".b2", &mlp.b2);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::entries() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect("enc_edge_gm", enc_edge_gm, out);
  collect("enc_node_mesh", enc_node_mesh, out);
  collect("enc_edge_mm", enc_edge_mm, out);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    collect("proc" + std::to_string(b) + ".edge", blocks[b].edge, out);
    collect("proc" + std::to_string(b) + ".node", blocks[b].node, out);
  }
  collect("dec_edge", dec_edge, out);
  collect("dec_node", dec_node, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::entries()
    const {
  auto mut = const_cast<ModelParams*>(this)->entries();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

std::int64_t ModelParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries()) n += t->size();
  return n;
}

ModelParams ModelParams::traced(Tape& tape) const {
  ModelParams copy = *this;
  for (auto& [name, t] : copy.entries()) *t = tape.leaf(*t, true);
  return copy;
}

namespace {

Mlp init_mlp(int in, int hidden, int out, Rng& rng) {
  auto glorot = [&](std::int64_t fan_in, std::int64_t fan_out) {
    Tensor w({fan_in, fan_out});
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    for (std::int64_t i = 0; i < w.size(); ++i)
      w.mutable_data()[i] = float(rng.uniform(-limit, limit));
    return w;
  };
  Mlp mlp;
  mlp.w1 = glorot(in, hidden);
  mlp.b1 = Tensor({hidden});
  mlp.w2 = glorot(hidden, out);
  mlp.b2 = Tensor({out});
  return mlp;
}

}  // namespace

ModelParams init_model(const EmulatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(split_seed(seed, 0x4d4f44454c /* "MODEL" */));
  const int h = cfg.hidden;
  ModelParams p;
  p.enc_edge_gm = init_mlp(cfg.input_channels() + 2, h, h, rng);
  p.enc_node_mesh = init_mlp(h, h, h, rng);
  p.enc_edge_mm = init_mlp(2, h, h, rng);
  for (int b = 0; b < cfg.blocks; ++b)
    p.blocks.push_back({init_mlp(3 * h, h, h, rng), init_mlp(2 * h, h, h, rng)});
  p.dec_edge = init_mlp(h + 2, h, h, rng);
  p.dec_node = init_mlp(h, h, 1, rng);
  return p;
}

std::pair<Tensor, Tensor> gnn_block(const Tensor& node_states,
                                    const Tensor& edge_states,
                                    const std::vector<std::int32_t>& src,
                                    const std::vector<std::int32_t>& dst,
                                    const ModelParams::Block& params) {
  Tensor edge_in = concat_cols({edge_states, gather_rows(node_states, src),
                                gather_rows(node_states, dst)});
  Tensor e = add(edge_states, mlp_apply(params.edge, edge_in));
  Tensor agg = segment_mean(e, dst, node_states.rows());
  Tensor v = add(node_states, mlp_apply(params.node, concat_cols({node_states, agg})));
  return {v, e};
}

Tensor emulator_forward(const ModelParams& params, const EmulatorConfig& cfg,
                        const BatchedMesh& graph, const Tensor& grid_features) {
  const std::int64_t n_grid_b = graph.batch * graph.n_grid;
  const std::int64_t n_mesh_b = graph.batch * graph.n_mesh;
  if (grid_features.rows() != n_grid_b ||
      grid_features.cols() != cfg.input_channels())
    throw std::invalid_argument(
        "emulator_forward: features " + grid_features.shape_str() +
        " do not match batch " + std::to_string(graph.batch) + " x channels " +
        std::to_string(cfg.input_channels()));

  const Tensor gm_disp({std::int64_t(graph.gm_grid.size()), 2}, graph.gm_disp);
  const Tensor mm_disp({std::int64_t(graph.mm_src.size()), 2}, graph.mm_disp);
  const Tensor mg_disp({std::int64_t(graph.mg_mesh.size()), 2}, graph.mg_disp);

  // encode
  Tensor e_gm = mlp_apply(
      params.enc_edge_gm,
      concat_cols({gather_rows(grid_features, graph.gm_grid), gm_disp}));
  Tensor v = mlp_apply(params.enc_node_mesh,
                       segment_mean(e_gm, graph.gm_mesh, n_mesh_b));
  Tensor e = mlp_apply(params.enc_edge_mm, mm_disp);

  // process
  for (const auto& block : params.blocks)
    std::tie(v, e) = gnn_block(v, e, graph.mm_src, graph.mm_dst, block);

  // decode
  Tensor d = mlp_apply(params.dec_edge,
                       concat_cols({gather_rows(v, graph.mg_mesh), mg_disp}));
  Tensor g = segment_mean(d, graph.mg_grid, n_grid_b);
  return mlp_apply(params.dec_node, g);
}

Tensor build_features(const EmulatorConfig& cfg, const Dataset& split,
                      const std::vector<int>& sample_ids,
                      const std::vector<const Footprint*>& prototypes,
                      const NormStats& stats) {
  const int channels = cfg.input_channels();
  if (cfg.use_prototype && prototypes.size() != sample_ids.size())
    throw std::invalid_argument(
        "build_features: prototype count does not match sample count");
  if (!cfg.use_prototype && !prototypes.empty())
    throw std::invalid_argument(
        "build_features: prototypes supplied but use_prototype is off");
  if (int(stats.mean.size()) != channels || int(stats.stdev.size()) != channels)
    throw std::invalid_argument("build_features: stats/channel mismatch");

  const std::int64_t cells = split.grid.cells();
  Tensor out({std::int64_t(sample_ids.size()) * cells, channels});
  float* dst = out.mutable_data();
  for (std::size_t s = 0; s < sample_ids.size(); ++s) {
    const int id = sample_ids[s];
    for (int c = 0; c < channels; ++c) {
      const float* src = c < kNumChannels
                             ? split.input_channel(id, c)
                             : prototypes[s]->values.data();
      const float mu = stats.mean[std::size_t(c)];
      const float inv = 1.0f / std::max(stats.stdev[std::size_t(c)], 1e-12f);
      for (std::int64_t i = 0; i < cells; ++i)
        dst[(std::int64_t(s) * cells + i) * channels + c] = (src[i] - mu) * inv;
    }
  }
  return out;
}

}  // namespace emuproto
