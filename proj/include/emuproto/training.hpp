#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emuproto/emulator.hpp"
#include "emuproto/metrics.hpp"
#include "emuproto/proto.hpp"
#include "emuproto/synthdata.hpp"

namespace emuproto {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 5;
  float learning_rate = 5e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  std::uint64_t seed = 0;
  double scale_percentile = 99.9;

  void validate() const;
};

// Targets are divided by `scale` before the loss; predictions are multiplied
// back for native-unit output. Raw footprint values are tiny and heavy-tailed,
// so the scale is a high percentile of the nonzero training values.
struct TargetScaler {
  float scale = 1.0f;
};

TargetScaler fit_scaler(const Dataset& train_split, double percentile);

// Per-channel z-score statistics of the encoder inputs, fitted on the
// training split. The prototype channel (when present) is fitted over the
// assigned prototype fields.
NormStats fit_norm_stats(const EmulatorConfig& cfg, const Dataset& split,
                         const PrototypeSet* set,
                         const std::vector<int>* assignment);

// Moment accumulators mirror ModelParams::entries() order.
struct AdamState {
  std::int64_t t = 0;
  std::vector<std::vector<float>> m, v;
};

AdamState make_adam_state(const ModelParams& params);

// One Adam update with bias correction on a single parameter block; `t` is
// the 1-based step count. Throws on non-finite gradient, naming the block.
void adam_update(const std::string& name, float* theta, const float* grad,
                 float* m, float* v, std::int64_t n, std::int64_t t,
                 const TrainConfig& cfg);

// Applies adam_update to every entry of a traced parameter set using the
// gradients stored on `tape` by the last backward() pass.
void adam_step(ModelParams& traced, Tape& tape, AdamState& state,
               const TrainConfig& cfg);

struct Checkpoint {
  EmulatorConfig emu;
  TrainConfig cfg;
  std::uint64_t seed = 0;
  TargetScaler scaler;
  NormStats stats;
  ModelParams params;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // scaled-space MSE over the epoch's batches
  double val_mse = 0.0;     // scaled space
  double val_iou = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
  std::int64_t optimizer_steps = 0;
};

// Prototype inputs for a training run; leave `set` null for the baseline.
// Assignments map each sample index of the corresponding split to an index
// into set->footprints.
struct PrototypeContext {
  const PrototypeSet* set = nullptr;
  std::vector<int> train_assignment;
  std::vector<int> val_assignment;
};

TrainResult train(const Dataset& train_split, const Dataset& val_split,
                  const PrototypeContext& ctx, const TrainConfig& cfg,
                  const EmulatorConfig& emu_cfg);

// Native-unit predictions (inverse-scaled, clamped at zero from below) for
// the given samples; one G*G field per sample.
std::vector<std::vector<float>> predict(
    const Checkpoint& ck, const Dataset& split, const std::vector<int>& ids,
    const std::vector<const Footprint*>& prototypes);

// Single-sample convenience overload taking a raw meteorological field.
std::vector<float> predict(const Checkpoint& ck, const MetField& met,
                           const Footprint* prototype);

struct SampleMetrics {
  int sample = 0;
  double mse_scaled = 0.0;
  double mse_native = 0.0;
  double iou = 0.0;
};

struct EvalResult {
  std::vector<SampleMetrics> rows;  // ordered by sample index
  Summary mse_scaled, mse_native, iou;
};

EvalResult evaluate(const Checkpoint& ck, const Dataset& split,
                    const PrototypeSet* set, const std::vector<int>* assignment,
                    double alpha = 0.01);

}  // namespace emuproto
