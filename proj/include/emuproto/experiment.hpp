#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emuproto/emulator.hpp"
#include "emuproto/metrics.hpp"
#include "emuproto/proto.hpp"
#include "emuproto/synthdata.hpp"
#include "emuproto/training.hpp"

namespace emuproto {

// One comparison cell: a selection method and prototype count.
// n == 0 marks the baseline (no prototype input).
struct CellSpec {
  SelectionMethod method = SelectionMethod::kRandom;
  int n = 0;

  std::string model_id() const;
};

struct ExperimentPlan {
  GridSpec grid{33, 1.0};
  SimParams sim{2000, 200, 0.05, 0.6};
  int n_train = 600;
  int n_test = 200;
  std::uint64_t data_seed = 0;
  int pca_k = 64;
  EmulatorConfig emu{33, 8, 32, 4, false};  // use_prototype set per cell
  TrainConfig train_cfg;                    // seed overridden per run
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<CellSpec> cells;  // must include the baseline
  double iou_alpha = 0.01;
  std::filesystem::path out_dir;

  void validate() const;
};

// Fig.-2-style sweep at desk scale; seed_set offsets every seed in the plan.
ExperimentPlan desk_preset(std::uint64_t seed_set,
                           const std::filesystem::path& out_dir);

struct CellResult {
  CellSpec cell;
  bool ok = false;
  std::string error;
  // across-seed statistics of final-epoch test metrics
  Summary iou, mse_scaled, mse_native;
  std::vector<double> iou_per_seed;
  double iou_improvement = 0.0;  // relative to baseline mean
};

struct ExperimentReport {
  std::vector<CellResult> cells;  // in plan order
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
  bool baseline_ok = false;
};

// Cache directory: $EMUPROTO_CACHE if set, else <out_dir>/cache.
std::filesystem::path cache_dir(const ExperimentPlan& plan);

// Runs every (cell, seed) training job, writes metrics.csv, summary.json,
// plotdata/ curves, and per-run checkpoints under out_dir. Datasets and
// prototype sets are reused from the content-addressed cache when present.
ExperimentReport run_experiment(const ExperimentPlan& plan);

// Writes per-sample CSV grids (truth plus every model's prediction) for the
// given test-sample indices of a finished experiment; empty `samples` picks
// `n_random` indices from a seeded generator.
std::vector<std::filesystem::path> export_fields(
    const std::filesystem::path& experiment_dir, std::vector<int> samples,
    int n_random, std::uint64_t seed, const std::filesystem::path& dest);

}  // namespace emuproto
