#include "emuproto/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "emuproto/io.hpp"
#include "emuproto/pca.hpp"
#include "emuproto/rng.hpp"
#include "emuproto/sha256.hpp"
#include "json.hpp"

namespace emuproto {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Dataset slice(const Dataset& pool, int begin, int count) {
  Dataset d;
  d.grid = pool.grid;
  d.n_samples = count;
  const std::size_t cells = std::size_t(pool.grid.cells());
  d.inputs.assign(
      pool.inputs.begin() + std::ptrdiff_t(std::size_t(begin) * kNumChannels * cells),
      pool.inputs.begin() +
          std::ptrdiff_t(std::size_t(begin + count) * kNumChannels * cells));
  d.targets.assign(pool.targets.begin() + std::ptrdiff_t(std::size_t(begin) * cells),
                   pool.targets.begin() +
                       std::ptrdiff_t(std::size_t(begin + count) * cells));
  d.seeds.assign(pool.seeds.begin() + begin, pool.seeds.begin() + begin + count);
  return d;
}

json plan_fingerprint(const ExperimentPlan& plan) {
  return json{{"grid", {plan.grid.size, plan.grid.cell_length}},
              {"sim",
               {plan.sim.particles, plan.sim.steps, plan.sim.dt,
                plan.sim.sigma}},
              {"n", plan.n_train + plan.n_test},
              {"seed", plan.data_seed}};
}

Dataset cached_pool(const ExperimentPlan& plan) {
  const std::string key = sha256_hex(plan_fingerprint(plan).dump());
  const fs::path dir = cache_dir(plan) / ("dataset-" + key.substr(0, 16));
  if (fs::exists(dir / "manifest.json")) {
    try {
      return load_dataset(dir);
    } catch (const std::exception&) {
      // corrupt cache entry: fall through and regenerate
    }
  }
  Dataset pool = gen_dataset(plan.grid, plan.sim, plan.n_train + plan.n_test,
                             plan.data_seed);
  save_dataset(pool, dir);
  return pool;
}

PrototypeArtifact cached_prototypes(const ExperimentPlan& plan,
                                    const CellSpec& cell, const Dataset& train,
                                    const PcaModel& pca) {
  json fp = plan_fingerprint(plan);
  fp["cell"] = {to_string(cell.method), cell.n, plan.pca_k, plan.n_train};
  const std::string key = sha256_hex(fp.dump());
  const fs::path dir = cache_dir(plan) / ("prototypes-" + key.substr(0, 16));
  if (fs::exists(dir / "manifest.json")) {
    try {
      return load_prototypes(dir);
    } catch (const std::exception&) {
    }
  }
  PrototypeArtifact a;
  a.grid_size = plan.grid.size;
  a.pca = pca;
  switch (cell.method) {
    case SelectionMethod::kRandom:
      a.set = select_random(train, pca, cell.n, plan.data_seed);
      break;
    case SelectionMethod::kKmeans:
      a.set = select_kmeans(train, pca, cell.n, plan.data_seed);
      break;
    case SelectionMethod::kCardinal:
      a.set = select_cardinal(train, pca, cell.n);
      break;
  }
  save_prototypes(a, dir);
  return a;
}

struct RunOutcome {
  bool ok = false;
  std::string error;
  std::vector<EpochStats> history;
  EvalResult final_eval;
  float scale = 1.0f;
};

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string CellSpec::model_id() const {
  if (n == 0) return "baseline";
  return to_string(method) + "_n" + std::to_string(n);
}

void ExperimentPlan::validate() const {
  grid.validate();
  sim.validate();
  emu.validate();
  train_cfg.validate();
  if (n_train < 2 || n_test < 1)
    throw std::invalid_argument("ExperimentPlan: split sizes too small");
  if (seeds.empty()) throw std::invalid_argument("ExperimentPlan: no seeds");
  if (cells.empty()) throw std::invalid_argument("ExperimentPlan: no cells");
  bool has_baseline = false;
  for (const CellSpec& c : cells) {
    if (c.n == 0) has_baseline = true;
    if (c.n < 0 || c.n > n_train)
      throw std::invalid_argument("ExperimentPlan: bad prototype count");
  }
  if (!has_baseline)
    throw std::invalid_argument("ExperimentPlan: baseline cell missing");
  if (emu.grid != grid.size)
    throw std::invalid_argument("ExperimentPlan: emulator grid mismatch");
  if (out_dir.empty())
    throw std::invalid_argument("ExperimentPlan: no output directory");
}

ExperimentPlan desk_preset(std::uint64_t seed_set,
                           const std::filesystem::path& out_dir) {
  ExperimentPlan plan;
  plan.data_seed = seed_set;
  plan.train_cfg.epochs = 30;
  plan.train_cfg.batch_size = 5;
  plan.train_cfg.learning_rate = 5e-5f;
  plan.seeds = {3 * seed_set, 3 * seed_set + 1, 3 * seed_set + 2};
  plan.cells = {{SelectionMethod::kRandom, 0},  // baseline
                {SelectionMethod::kRandom, 4},
                {SelectionMethod::kCardinal, 2},
                {SelectionMethod::kCardinal, 4},
                {SelectionMethod::kKmeans, 2},
                {SelectionMethod::kKmeans, 4},
                {SelectionMethod::kKmeans, 8},
                {SelectionMethod::kKmeans, 20}};
  plan.out_dir = out_dir;
  return plan;
}

std::filesystem::path cache_dir(const ExperimentPlan& plan) {
  if (const char* env = std::getenv("EMUPROTO_CACHE"); env && *env)
    return fs::path(env);
  return plan.out_dir / "cache";
}

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  fs::create_directories(plan.out_dir);

  const Dataset pool = cached_pool(plan);
  const Dataset train_split = slice(pool, 0, plan.n_train);
  const Dataset test_split = slice(pool, plan.n_train, plan.n_test);

  std::vector<Footprint> train_fp;
  train_fp.reserve(std::size_t(plan.n_train));
  for (int i = 0; i < plan.n_train; ++i)
    train_fp.push_back(train_split.target_footprint(i));
  const PcaModel pca = fit_pca(train_fp, plan.pca_k);

  // prototype sets and assignments per cell, before the training jobs
  std::vector<PrototypeArtifact> protos(plan.cells.size());
  std::vector<std::vector<int>> train_assign(plan.cells.size());
  std::vector<std::vector<int>> test_assign(plan.cells.size());
  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    if (plan.cells[c].n == 0) continue;
    protos[c] = cached_prototypes(plan, plan.cells[c], train_split, pca);
    train_assign[c] = assign_all(protos[c].pca, protos[c].set, train_split);
    test_assign[c] = assign_all(protos[c].pca, protos[c].set, test_split);
    save_prototypes(protos[c], plan.out_dir / "runs" /
                                   plan.cells[c].model_id() / "prototypes");
  }

  // one job per (cell, seed); jobs are independent and may run concurrently
  struct Job {
    std::size_t cell;
    std::size_t seed_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < plan.cells.size(); ++c)
    for (std::size_t s = 0; s < plan.seeds.size(); ++s) jobs.push_back({c, s});
  std::vector<RunOutcome> outcomes(jobs.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(jobs.size()); ++j) {
    const Job job = jobs[std::size_t(j)];
    const CellSpec& cell = plan.cells[job.cell];
    RunOutcome& out = outcomes[std::size_t(j)];
    try {
      TrainConfig cfg = plan.train_cfg;
      cfg.seed = plan.seeds[job.seed_idx];
      EmulatorConfig emu = plan.emu;
      emu.use_prototype = cell.n > 0;
      PrototypeContext ctx;
      if (cell.n > 0) {
        ctx.set = &protos[job.cell].set;
        ctx.train_assignment = train_assign[job.cell];
        ctx.val_assignment = test_assign[job.cell];
      }
      TrainResult r = train(train_split, test_split, ctx, cfg, emu);
      out.history = std::move(r.history);
      out.final_eval =
          evaluate(r.checkpoint, test_split,
                   cell.n > 0 ? &protos[job.cell].set : nullptr,
                   cell.n > 0 ? &test_assign[job.cell] : nullptr,
                   plan.iou_alpha);
      out.scale = r.checkpoint.scaler.scale;
      const fs::path run_dir = plan.out_dir / "runs" / cell.model_id() /
                               ("seed" + std::to_string(cfg.seed));
      save_checkpoint(r.checkpoint, run_dir);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  // metrics.csv: single writer, deterministic plan order
  ExperimentReport report;
  report.metrics_csv = plan.out_dir / "metrics.csv";
  {
    std::ofstream csv(report.metrics_csv, std::ios::trunc);
    csv << "model,selection,n_prototypes,seed,split,epoch,mse_scaled,"
           "mse_native,iou\n";
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const RunOutcome& out = outcomes[j];
      if (!out.ok) continue;
      const CellSpec& cell = plan.cells[jobs[j].cell];
      const std::uint64_t seed = plan.seeds[jobs[j].seed_idx];
      const std::string prefix = cell.model_id() + "," +
                                 to_string(cell.method) + "," +
                                 std::to_string(cell.n) + "," +
                                 std::to_string(seed) + ",";
      const double s2 = double(out.scale) * double(out.scale);
      for (const EpochStats& h : out.history) {
        // train rows carry the optimization loss; IoU is test-only
        csv << prefix << "train," << h.epoch << "," << csv_num(h.train_loss)
            << "," << csv_num(h.train_loss * s2) << ",\n";
        csv << prefix << "test," << h.epoch << "," << csv_num(h.val_mse) << ","
            << csv_num(h.val_mse * s2) << "," << csv_num(h.val_iou) << "\n";
      }
    }
  }

  // plotdata/: one training-curve file per run
  fs::create_directories(plan.out_dir / "plotdata");
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const RunOutcome& out = outcomes[j];
    if (!out.ok) continue;
    const CellSpec& cell = plan.cells[jobs[j].cell];
    const std::uint64_t seed = plan.seeds[jobs[j].seed_idx];
    std::ofstream curve(plan.out_dir / "plotdata" /
                        (cell.model_id() + "_seed" + std::to_string(seed) +
                         ".csv"));
    curve << "epoch,train_loss,test_mse,test_iou\n";
    for (const EpochStats& h : out.history)
      curve << h.epoch << "," << csv_num(h.train_loss) << ","
            << csv_num(h.val_mse) << "," << csv_num(h.val_iou) << "\n";
  }

  // per-cell aggregation
  double baseline_iou = 0.0;
  bool baseline_seen = false;
  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    CellResult res;
    res.cell = plan.cells[c];
    std::vector<double> ious, mss, msn;
    std::string error;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].cell != c) continue;
      if (!outcomes[j].ok) {
        error = "seed " + std::to_string(plan.seeds[jobs[j].seed_idx]) + ": " +
                outcomes[j].error;
        continue;
      }
      ious.push_back(outcomes[j].final_eval.iou.mean);
      mss.push_back(outcomes[j].final_eval.mse_scaled.mean);
      msn.push_back(outcomes[j].final_eval.mse_native.mean);
    }
    if (ious.size() == plan.seeds.size()) {
      res.ok = true;
      res.iou = summarize(ious);
      res.mse_scaled = summarize(mss);
      res.mse_native = summarize(msn);
      res.iou_per_seed = ious;
      if (res.cell.n == 0) {
        baseline_iou = res.iou.mean;
        baseline_seen = true;
        report.baseline_ok = true;
      }
    } else {
      res.error = error.empty() ? "missing runs" : error;
    }
    report.cells.push_back(std::move(res));
  }
  for (CellResult& res : report.cells)
    if (res.ok && res.cell.n > 0 && baseline_seen && baseline_iou > 0.0)
      res.iou_improvement = (res.iou.mean - baseline_iou) / baseline_iou;

  // summary.json
  report.summary_json = plan.out_dir / "summary.json";
  {
    json cells = json::array();
    for (const CellResult& res : report.cells) {
      json c = {{"model", res.cell.model_id()},
                {"selection", to_string(res.cell.method)},
                {"n_prototypes", res.cell.n},
                {"ok", res.ok}};
      if (res.ok) {
        c["iou"] = {{"mean", res.iou.mean}, {"std", res.iou.stdev}};
        c["mse_scaled"] = {{"mean", res.mse_scaled.mean},
                           {"std", res.mse_scaled.stdev}};
        c["mse_native"] = {{"mean", res.mse_native.mean},
                           {"std", res.mse_native.stdev}};
        c["iou_per_seed"] = res.iou_per_seed;
        if (res.cell.n > 0) c["iou_improvement"] = res.iou_improvement;
      } else {
        c["error"] = res.error;
      }
      cells.push_back(std::move(c));
    }
    json j = {{"version", 1},
              {"kind", "experiment-summary"},
              {"epochs", plan.train_cfg.epochs},
              {"iou_alpha", plan.iou_alpha},
              {"seeds", plan.seeds},
              {"cells", cells}};
    std::ofstream out(report.summary_json);
    out << j.dump(2) << "\n";
  }

  // plan.json: everything export_fields needs to reload artifacts
  {
    json models = json::array();
    for (std::size_t c = 0; c < plan.cells.size(); ++c) {
      json m = {{"model", plan.cells[c].model_id()},
                {"n_prototypes", plan.cells[c].n}};
      if (plan.cells[c].n > 0) m["test_assignment"] = test_assign[c];
      models.push_back(std::move(m));
    }
    json j = {{"version", 1},
              {"kind", "experiment-plan"},
              {"fingerprint", plan_fingerprint(plan)},
              {"cache_dir", cache_dir(plan).string()},
              {"n_train", plan.n_train},
              {"n_test", plan.n_test},
              {"seeds", plan.seeds},
              {"models", models}};
    std::ofstream out(plan.out_dir / "plan.json");
    out << j.dump(2) << "\n";
  }
  return report;
}

std::vector<std::filesystem::path> export_fields(
    const std::filesystem::path& experiment_dir, std::vector<int> samples,
    int n_random, std::uint64_t seed, const std::filesystem::path& dest) {
  std::ifstream in(experiment_dir / "plan.json");
  if (!in)
    throw std::runtime_error("cannot read " +
                             (experiment_dir / "plan.json").string());
  const json plan = json::parse(in);
  if (plan.value("kind", "") != "experiment-plan")
    throw std::runtime_error("not an experiment directory: " +
                             experiment_dir.string());

  const std::string key = sha256_hex(plan.at("fingerprint").dump());
  const Dataset pool = load_dataset(fs::path(plan.at("cache_dir").get<std::string>()) /
                                    ("dataset-" + key.substr(0, 16)));
  const int n_train = plan.at("n_train").get<int>();
  const int n_test = plan.at("n_test").get<int>();
  const Dataset test_split = slice(pool, n_train, n_test);

  if (samples.empty()) {
    Rng rng(split_seed(seed, 0x4558504f));
    for (int i = 0; i < n_random; ++i)
      samples.push_back(int(rng.uniform_index(std::uint64_t(n_test))));
  }
  for (int s : samples)
    if (s < 0 || s >= n_test)
      throw std::invalid_argument("export: sample index " + std::to_string(s) +
                                  " out of range [0," + std::to_string(n_test) +
                                  ")");

  const std::uint64_t first_seed = plan.at("seeds")[0].get<std::uint64_t>();
  const int g = test_split.grid.size;
  fs::create_directories(dest);
  std::vector<fs::path> written;

  auto write_grid = [&](const fs::path& file, const float* v) {
    std::ofstream out(file, std::ios::trunc);
    for (int y = 0; y < g; ++y) {
      for (int x = 0; x < g; ++x)
        out << csv_num(double(v[y * g + x])) << (x + 1 < g ? "," : "");
      out << "\n";
    }
    written.push_back(file);
  };

  for (int s : samples)
    write_grid(dest / ("sample" + std::to_string(s) + "_truth.csv"),
               test_split.target(s));

  for (const json& m : plan.at("models")) {
    const std::string model = m.at("model").get<std::string>();
    const Checkpoint ck =
        load_checkpoint(experiment_dir / "runs" / model /
                        ("seed" + std::to_string(first_seed)));
    PrototypeArtifact protos;
    std::vector<int> assignment;
    if (m.at("n_prototypes").get<int>() > 0) {
      protos = load_prototypes(experiment_dir / "runs" / model / "prototypes");
      assignment = m.at("test_assignment").get<std::vector<int>>();
    }
    for (int s : samples) {
      std::vector<const Footprint*> proto_row;
      if (ck.emu.use_prototype)
        proto_row.push_back(
            &protos.set.footprints[std::size_t(assignment[std::size_t(s)])]);
      const std::vector<float> field =
          predict(ck, test_split, {s}, proto_row).front();
      write_grid(dest / ("sample" + std::to_string(s) + "_" + model + ".csv"),
                 field.data());
    }
  }
  return written;
}

}  // namespace emuproto
