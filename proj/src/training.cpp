#include "emuproto/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emuproto/rng.hpp"

namespace emuproto {

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546;  // epoch shuffle stream

std::vector<const Footprint*> prototype_rows(const PrototypeSet* set,
                                             const std::vector<int>* assignment,
                                             const std::vector<int>& ids) {
  std::vector<const Footprint*> out;
  if (set == nullptr) return out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (assignment == nullptr || id < 0 ||
        std::size_t(id) >= assignment->size())
      throw std::invalid_argument("train: sample " + std::to_string(id) +
                                  " has no prototype assignment");
    const int p = (*assignment)[std::size_t(id)];
    if (p < 0 || std::size_t(p) >= set->footprints.size())
      throw std::invalid_argument("train: sample " + std::to_string(id) +
                                  " assigned to invalid prototype " +
                                  std::to_string(p));
    out.push_back(&set->footprints[std::size_t(p)]);
  }
  return out;
}

Tensor scaled_targets(const Dataset& split, const std::vector<int>& ids,
                      float scale) {
  const std::int64_t cells = split.grid.cells();
  Tensor y({std::int64_t(ids.size()) * cells, 1});
  float* dst = y.mutable_data();
  const float inv = 1.0f / scale;
  for (std::size_t s = 0; s < ids.size(); ++s) {
    const float* t = split.target(ids[s]);
    for (std::int64_t i = 0; i < cells; ++i)
      dst[std::int64_t(s) * cells + i] = t[i] * inv;
  }
  return y;
}

// forward over `ids` in batches; returns raw scaled-space predictions per
// sample, in id order
std::vector<std::vector<float>> forward_scaled(
    const ModelParams& params, const EmulatorConfig& emu_cfg,
    const MeshGraph& mesh, const Dataset& split, const std::vector<int>& ids,
    const std::vector<const Footprint*>& prototypes, const NormStats& stats,
    int batch_size) {
  const std::int64_t cells = split.grid.cells();
  std::vector<std::vector<float>> out(ids.size());
  BatchedMesh full = make_batched(mesh, batch_size);
  for (std::size_t begin = 0; begin < ids.size();
       begin += std::size_t(batch_size)) {
    const std::size_t end =
        std::min(ids.size(), begin + std::size_t(batch_size));
    const std::vector<int> batch_ids(ids.begin() + std::ptrdiff_t(begin),
                                     ids.begin() + std::ptrdiff_t(end));
    std::vector<const Footprint*> batch_protos;
    if (!prototypes.empty())
      batch_protos.assign(prototypes.begin() + std::ptrdiff_t(begin),
                          prototypes.begin() + std::ptrdiff_t(end));
    const int bs = int(end - begin);
    const BatchedMesh* graph = &full;
    BatchedMesh tail;
    if (bs != batch_size) {
      tail = make_batched(mesh, bs);
      graph = &tail;
    }
    Tensor x = build_features(emu_cfg, split, batch_ids, batch_protos, stats);
    Tensor pred = emulator_forward(params, emu_cfg, *graph, x);
    for (int s = 0; s < bs; ++s)
      out[begin + std::size_t(s)].assign(
          pred.data() + std::int64_t(s) * cells,
          pred.data() + std::int64_t(s + 1) * cells);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0f))
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (!(scale_percentile > 0.0 && scale_percentile <= 100.0))
    throw std::invalid_argument("TrainConfig: scale_percentile out of (0,100]");
}

TargetScaler fit_scaler(const Dataset& train_split, double percentile) {
  std::vector<float> nonzero;
  for (float v : train_split.targets)
    if (v > 0.0f) nonzero.push_back(v);
  if (nonzero.empty())
    throw std::invalid_argument("fit_scaler: no nonzero target values");
  std::sort(nonzero.begin(), nonzero.end());
  // linearly interpolated percentile over the sorted sample
  const double rank = percentile / 100.0 * double(nonzero.size() - 1);
  const std::size_t lo = std::size_t(rank);
  const std::size_t hi = std::min(lo + 1, nonzero.size() - 1);
  const double frac = rank - double(lo);
  const float s = float((1.0 - frac) * nonzero[lo] + frac * nonzero[hi]);
  if (!(s > 0.0f)) throw std::invalid_argument("fit_scaler: scale is not positive");
  return TargetScaler{s};
}

NormStats fit_norm_stats(const EmulatorConfig& cfg, const Dataset& split,
                         const PrototypeSet* set,
                         const std::vector<int>* assignment) {
  const int channels = cfg.input_channels();
  const std::int64_t cells = split.grid.cells();
  NormStats stats;
  stats.mean.assign(std::size_t(channels), 0.0f);
  stats.stdev.assign(std::size_t(channels), 1.0f);
  std::vector<int> ids(std::size_t(split.n_samples));
  for (int i = 0; i < split.n_samples; ++i) ids[std::size_t(i)] = i;
  const std::vector<const Footprint*> protos =
      prototype_rows(set, assignment, ids);
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < split.n_samples; ++i) {
      const float* src = c < kNumChannels
                             ? split.input_channel(i, c)
                             : protos[std::size_t(i)]->values.data();
      for (std::int64_t j = 0; j < cells; ++j) {
        sum += double(src[j]);
        sq += double(src[j]) * double(src[j]);
      }
    }
    const double n = double(split.n_samples) * double(cells);
    const double mean = sum / n;
    stats.mean[std::size_t(c)] = float(mean);
    stats.stdev[std::size_t(c)] =
        float(std::sqrt(std::max(0.0, sq / n - mean * mean)));
  }
  return stats;
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState state;
  for (const auto& [name, t] : params.entries()) {
    (void)name;
    state.m.emplace_back(std::size_t(t->size()), 0.0f);
    state.v.emplace_back(std::size_t(t->size()), 0.0f);
  }
  return state;
}

void adam_update(const std::string& name, float* theta, const float* grad,
                 float* m, float* v, std::int64_t n, std::int64_t t,
                 const TrainConfig& cfg) {
  const double corr1 = 1.0 - std::pow(double(cfg.beta1), double(t));
  const double corr2 = 1.0 - std::pow(double(cfg.beta2), double(t));
  for (std::int64_t i = 0; i < n; ++i) {
    const float g = grad[i];
    if (!std::isfinite(g))
      throw std::runtime_error("adam_step: non-finite gradient in " + name);
    m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g * g;
    const double mhat = double(m[i]) / corr1;
    const double vhat = double(v[i]) / corr2;
    theta[i] -= float(double(cfg.learning_rate) * mhat /
                      (std::sqrt(vhat) + double(cfg.epsilon)));
  }
}

void adam_step(ModelParams& traced, Tape& tape, AdamState& state,
               const TrainConfig& cfg) {
  state.t += 1;
  auto entries = traced.entries();
  if (entries.size() != state.m.size())
    throw std::invalid_argument("adam_step: state does not mirror parameters");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& [name, tensor] = entries[i];
    Tensor g = tape.grad(*tensor);
    adam_update(name, tensor->mutable_data(), g.data(), state.m[i].data(),
                state.v[i].data(), tensor->size(), state.t, cfg);
  }
}

TrainResult train(const Dataset& train_split, const Dataset& val_split,
                  const PrototypeContext& ctx, const TrainConfig& cfg,
                  const EmulatorConfig& emu_cfg) {
  cfg.validate();
  emu_cfg.validate();
  if (emu_cfg.use_prototype != (ctx.set != nullptr))
    throw std::invalid_argument(
        "train: use_prototype flag does not match prototype context");
  if (train_split.grid.size != emu_cfg.grid ||
      val_split.grid.size != emu_cfg.grid)
    throw std::invalid_argument("train: dataset grid does not match config");
  if (train_split.n_samples < 1 || val_split.n_samples < 1)
    throw std::invalid_argument("train: empty split");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.emu = emu_cfg;
  ck.cfg = cfg;
  ck.seed = cfg.seed;
  ck.scaler = fit_scaler(train_split, cfg.scale_percentile);
  ck.stats = fit_norm_stats(
      emu_cfg, train_split, ctx.set,
      ctx.set != nullptr ? &ctx.train_assignment : nullptr);
  ck.params = init_model(emu_cfg, cfg.seed);

  const MeshGraph mesh = build_mesh(train_split.grid, emu_cfg.mesh_coarsening);
  const std::int64_t cells = train_split.grid.cells();
  AdamState state = make_adam_state(ck.params);

  std::vector<int> order(std::size_t(train_split.n_samples));
  for (int i = 0; i < train_split.n_samples; ++i) order[std::size_t(i)] = i;
  std::vector<int> val_ids(std::size_t(val_split.n_samples));
  for (int i = 0; i < val_split.n_samples; ++i) val_ids[std::size_t(i)] = i;
  const std::vector<const Footprint*> val_protos = prototype_rows(
      ctx.set, ctx.set != nullptr ? &ctx.val_assignment : nullptr, val_ids);
  const Tensor val_truth = scaled_targets(val_split, val_ids, ck.scaler.scale);

  BatchedMesh full = make_batched(mesh, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // seeded permutation derived from (seed, epoch)
    Rng rng(split_seed(split_seed(cfg.seed, kShuffleTag), std::uint64_t(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double loss_acc = 0.0;
    std::int64_t cells_acc = 0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += std::size_t(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), begin + std::size_t(cfg.batch_size));
      const std::vector<int> ids(order.begin() + std::ptrdiff_t(begin),
                                 order.begin() + std::ptrdiff_t(end));
      const std::vector<const Footprint*> protos = prototype_rows(
          ctx.set, ctx.set != nullptr ? &ctx.train_assignment : nullptr, ids);
      const int bs = int(ids.size());
      const BatchedMesh* graph = &full;
      BatchedMesh tail;  // incomplete final batch is kept
      if (bs != cfg.batch_size) {
        tail = make_batched(mesh, bs);
        graph = &tail;
      }
      Tensor x = build_features(emu_cfg, train_split, ids, protos, ck.stats);
      Tensor y = scaled_targets(train_split, ids, ck.scaler.scale);

      Tape tape;
      ModelParams tp = ck.params.traced(tape);
      Tensor pred = emulator_forward(tp, emu_cfg, *graph, x);
      Tensor diff = sub(pred, y);
      Tensor loss = mean(mul(diff, diff));
      if (!std::isfinite(loss.at(0)))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      tape.backward(loss);
      adam_step(tp, tape, state, cfg);

      loss_acc += double(loss.at(0)) * double(bs * cells);
      cells_acc += bs * cells;
    }

    // validation metrics with the epoch-end parameters
    const std::vector<std::vector<float>> val_pred =
        forward_scaled(ck.params, emu_cfg, mesh, val_split, val_ids,
                       val_protos, ck.stats, cfg.batch_size);
    std::vector<double> mses, ious;
    for (int i = 0; i < val_split.n_samples; ++i) {
      const auto& p = val_pred[std::size_t(i)];
      const std::vector<float> t(val_truth.data() + std::int64_t(i) * cells,
                                 val_truth.data() + std::int64_t(i + 1) * cells);
      mses.push_back(mse(p, t));
      std::vector<float> native(p.size());
      for (std::size_t j = 0; j < p.size(); ++j)
        native[j] = std::max(0.0f, p[j] * ck.scaler.scale);
      const float* truth = val_split.target(i);
      ious.push_back(
          iou(native, std::vector<float>(truth, truth + cells)));
    }
    result.history.push_back(EpochStats{epoch, loss_acc / double(cells_acc),
                                        summarize(mses).mean,
                                        summarize(ious).mean});
  }
  result.optimizer_steps = state.t;
  return result;
}

std::vector<std::vector<float>> predict(
    const Checkpoint& ck, const Dataset& split, const std::vector<int>& ids,
    const std::vector<const Footprint*>& prototypes) {
  if (ck.emu.use_prototype && prototypes.size() != ids.size())
    throw std::invalid_argument("predict: model requires one prototype per sample");
  const MeshGraph mesh = build_mesh(split.grid, ck.emu.mesh_coarsening);
  std::vector<std::vector<float>> out =
      forward_scaled(ck.params, ck.emu, mesh, split, ids, prototypes, ck.stats,
                     ck.cfg.batch_size);
  for (auto& field : out)
    for (float& v : field) v = std::max(0.0f, v * ck.scaler.scale);
  return out;
}

std::vector<float> predict(const Checkpoint& ck, const MetField& met,
                           const Footprint* prototype) {
  Dataset one;
  one.grid = GridSpec{ck.emu.grid, 1.0};
  Footprint dummy;
  dummy.grid_size = ck.emu.grid;
  dummy.values.assign(std::size_t(one.grid.cells()), 0.0f);
  one.append(met, dummy, 0);
  std::vector<const Footprint*> protos;
  if (ck.emu.use_prototype) {
    if (prototype == nullptr)
      throw std::invalid_argument("predict: model requires a prototype");
    protos.push_back(prototype);
  }
  return predict(ck, one, {0}, protos).front();
}

EvalResult evaluate(const Checkpoint& ck, const Dataset& split,
                    const PrototypeSet* set, const std::vector<int>* assignment,
                    double alpha) {
  if (ck.emu.use_prototype != (set != nullptr))
    throw std::invalid_argument(
        "evaluate: use_prototype flag does not match prototype set");
  const std::int64_t cells = split.grid.cells();
  std::vector<int> ids(std::size_t(split.n_samples));
  for (int i = 0; i < split.n_samples; ++i) ids[std::size_t(i)] = i;
  const std::vector<const Footprint*> protos =
      prototype_rows(set, assignment, ids);
  const MeshGraph mesh = build_mesh(split.grid, ck.emu.mesh_coarsening);
  const std::vector<std::vector<float>> scaled =
      forward_scaled(ck.params, ck.emu, mesh, split, ids, protos, ck.stats,
                     ck.cfg.batch_size);

  EvalResult result;
  std::vector<double> v_ms, v_mn, v_iou;
  for (int i = 0; i < split.n_samples; ++i) {
    const auto& p = scaled[std::size_t(i)];
    const float* truth = split.target(i);
    std::vector<float> truth_v(truth, truth + cells);
    std::vector<float> truth_scaled(truth_v);
    for (float& v : truth_scaled) v /= ck.scaler.scale;
    std::vector<float> native(p.size());
    for (std::size_t j = 0; j < p.size(); ++j)
      native[j] = std::max(0.0f, p[j] * ck.scaler.scale);
    SampleMetrics row;
    row.sample = i;
    row.mse_scaled = mse(p, truth_scaled);
    row.mse_native = mse(native, truth_v);
    row.iou = iou(native, truth_v, alpha);
    result.rows.push_back(row);
    v_ms.push_back(row.mse_scaled);
    v_mn.push_back(row.mse_native);
    v_iou.push_back(row.iou);
  }
  result.mse_scaled = summarize(v_ms);
  result.mse_native = summarize(v_mn);
  result.iou = summarize(v_iou);
  return result;
}

}  // namespace emuproto
