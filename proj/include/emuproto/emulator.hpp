#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emuproto/mesh.hpp"
#include "emuproto/synthdata.hpp"
#include "emuproto/tensor.hpp"

namespace emuproto {

struct EmulatorConfig {
  int grid = 33;
  int mesh_coarsening = 8;
  int hidden = 32;
  int blocks = 4;
  bool use_prototype = false;

  void validate() const;
  int input_channels() const {
    return kNumChannels + (use_prototype ? 1 : 0);
  }
};

// Two-layer ReLU MLP: in -> hidden -> out.
struct Mlp {
  Tensor w1, b1, w2, b2;
};

Tensor mlp_apply(const Mlp& mlp, const Tensor& x);

// Encoder-Processor-Decoder parameters. Entry order is fixed and defines
// the checkpoint layout and the Adam state layout.
struct ModelParams {
  Mlp enc_edge_gm;    // [grid channels + 2 disp] -> H
  Mlp enc_node_mesh;  // H -> H
  Mlp enc_edge_mm;    // 2 disp -> H
  struct Block {
    Mlp edge;  // 3H -> H
    Mlp node;  // 2H -> H
  };
  std::vector<Block> blocks;
  Mlp dec_edge;  // H + 2 disp -> H
  Mlp dec_node;  // H -> 1

  std::vector<std::pair<std::string, Tensor*>> entries();
  std::vector<std::pair<std::string, const Tensor*>> entries() const;
  std::int64_t param_count() const;

  // All parameters re-registered as trainable leaves of `tape`; shares the
  // underlying buffers, so optimizer updates are visible here.
  ModelParams traced(Tape& tape) const;
};

// Glorot-uniform weights, zero biases, deterministic in seed.
ModelParams init_model(const EmulatorConfig& cfg, std::uint64_t seed);

// One processor round: e' = e + MLP_e([e, v_src, v_dst]);
// v' = v + MLP_v([v, mean of incoming e']).
std::pair<Tensor, Tensor> gnn_block(const Tensor& node_states,
                                    const Tensor& edge_states,
                                    const std::vector<std::int32_t>& src,
                                    const std::vector<std::int32_t>& dst,
                                    const ModelParams::Block& params);

// Full pass over a batch of samples sharing one mesh. `grid_features` is
// [batch * G^2, channels], already normalized; returns [batch * G^2, 1]
// in scaled target space.
Tensor emulator_forward(const ModelParams& params, const EmulatorConfig& cfg,
                        const BatchedMesh& graph, const Tensor& grid_features);

// Per-channel z-score statistics of the encoder inputs.
struct NormStats {
  std::vector<float> mean, stdev;  // one per input channel
};

// Assembles [batch*G^2, C] normalized features for a run of samples;
// `prototypes` supplies one footprint per sample when the config uses them.
Tensor build_features(const EmulatorConfig& cfg, const Dataset& split,
                      const std::vector<int>& sample_ids,
                      const std::vector<const Footprint*>& prototypes,
                      const NormStats& stats);

}  // namespace emuproto
