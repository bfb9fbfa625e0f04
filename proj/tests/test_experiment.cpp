#include "emuproto/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "doctest.h"
#include "emuproto/io.hpp"

using namespace emuproto;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() /
           (std::string("emuproto-exp-") + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// tiny plan that still exercises every moving part
ExperimentPlan small_plan(const fs::path& out) {
  ExperimentPlan plan = desk_preset(0, out);
  plan.grid.size = 17;
  plan.emu = EmulatorConfig{17, 4, 8, 2, false};
  plan.sim = SimParams{200, 50, 0.05, 0.6};
  plan.n_train = 24;
  plan.n_test = 8;
  plan.pca_k = 8;
  plan.train_cfg.epochs = 2;
  plan.seeds = {0, 1};
  plan.cells = {{SelectionMethod::kRandom, 0}, {SelectionMethod::kKmeans, 2}};
  return plan;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("plan validation") {
  TempDir tmp("validate");
  ExperimentPlan plan = small_plan(tmp.path / "out");
  CHECK_NOTHROW(plan.validate());

  ExperimentPlan no_baseline = plan;
  no_baseline.cells = {{SelectionMethod::kKmeans, 2}};
  CHECK_THROWS_WITH_AS(no_baseline.validate(), doctest::Contains("baseline"),
                       std::invalid_argument);

  ExperimentPlan no_seeds = plan;
  no_seeds.seeds.clear();
  CHECK_THROWS_AS(no_seeds.validate(), std::invalid_argument);

  ExperimentPlan no_out = plan;
  no_out.out_dir.clear();
  CHECK_THROWS_AS(no_out.validate(), std::invalid_argument);
}

TEST_CASE("model ids") {
  CHECK(CellSpec{SelectionMethod::kRandom, 0}.model_id() == "baseline");
  CHECK(CellSpec{SelectionMethod::kKmeans, 20}.model_id() == "kmeans_n20");
  CHECK(CellSpec{SelectionMethod::kCardinal, 4}.model_id() == "cardinal_n4");
}

TEST_CASE("baseline-only plan yields one cell and no improvement entries") {
  TempDir tmp("baseline-only");
  ExperimentPlan plan = small_plan(tmp.path / "out");
  plan.cells = {{SelectionMethod::kRandom, 0}};
  plan.seeds = {0};
  ExperimentReport report = run_experiment(plan);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].ok);
  CHECK(report.baseline_ok);
  CHECK(slurp(report.summary_json).find("iou_improvement") == std::string::npos);
}

TEST_CASE("experiment reruns are bitwise identical and reuse the cache") {
  TempDir tmp("determinism");
  ::setenv("EMUPROTO_CACHE", (tmp.path / "cache").c_str(), 1);
  ExperimentPlan plan = small_plan(tmp.path / "out1");
  ExperimentReport r1 = run_experiment(plan);
  CHECK(r1.baseline_ok);

  // dataset was cached; mtime must survive the second run untouched
  fs::path ds_dir;
  for (const auto& e : fs::directory_iterator(tmp.path / "cache"))
    if (e.path().filename().string().rfind("dataset-", 0) == 0) ds_dir = e.path();
  REQUIRE(!ds_dir.empty());
  const auto stamp = fs::last_write_time(ds_dir / "inputs.bin");

  plan.out_dir = tmp.path / "out2";
  ExperimentReport r2 = run_experiment(plan);
  ::unsetenv("EMUPROTO_CACHE");

  CHECK(slurp(r1.metrics_csv) == slurp(r2.metrics_csv));
  CHECK(slurp(r1.summary_json) == slurp(r2.summary_json));
  CHECK(fs::last_write_time(ds_dir / "inputs.bin") == stamp);

  // improvement figures in the report are recomputable from raw summaries
  double base = 0.0, proto = 0.0, improvement = 0.0;
  for (const CellResult& c : r2.cells) {
    if (c.cell.n == 0) base = c.iou.mean;
    else {
      proto = c.iou.mean;
      improvement = c.iou_improvement;
    }
  }
  CHECK(improvement == doctest::Approx((proto - base) / base).epsilon(1e-12));
}

TEST_CASE("export writes truth plus one grid per model") {
  TempDir tmp("export");
  ::setenv("EMUPROTO_CACHE", (tmp.path / "cache").c_str(), 1);
  ExperimentPlan plan = small_plan(tmp.path / "out");
  run_experiment(plan);
  ::unsetenv("EMUPROTO_CACHE");

  auto files = export_fields(tmp.path / "out", {0, 2, 5}, 0, 0, tmp.path / "plots");
  CHECK(files.size() == 9);  // 3 samples x (truth + 2 models)

  // exported truth equals the dataset's target row
  Dataset pool = load_dataset([&] {
    for (const auto& e : fs::directory_iterator(tmp.path / "cache"))
      if (e.path().filename().string().rfind("dataset-", 0) == 0) return e.path();
    return fs::path();
  }());
  const float* truth = pool.target(plan.n_train + 2);  // test sample 2
  std::ifstream grid(tmp.path / "plots" / "sample2_truth.csv");
  std::string cell;
  for (int i = 0; i < plan.grid.size * plan.grid.size; ++i) {
    char sep = (i + 1) % plan.grid.size == 0 ? '\n' : ',';
    std::getline(grid, cell, sep);
    CHECK(std::stof(cell) == doctest::Approx(truth[i]).epsilon(1e-6));
  }

  CHECK_THROWS_AS(export_fields(tmp.path / "out", {999}, 0, 0, tmp.path / "p2"),
                  std::invalid_argument);
}
