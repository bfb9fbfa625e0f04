// Command-line front end: data generation, prototype selection, training,
// evaluation, and the full experiment sweep.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emuproto/experiment.hpp"
#include "emuproto/io.hpp"
#include "emuproto/pca.hpp"
#include "json.hpp"

using namespace emuproto;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// --config is applied before CLI11 parses, so explicit flags win over the
// config file and both win over built-in defaults.
json preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw std::invalid_argument(std::string("config: cannot read ") +
                                           argv[i + 1]);
      return json::parse(in);
    }
  return json::object();
}

template <typename T>
void from_config(const json& cfg, const char* key, T& out) {
  if (cfg.contains(key)) {
    try {
      out = cfg.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(std::string("config: invalid value for '") +
                                  key + "'");
    }
  }
}

void apply_plan_config(const json& cfg, ExperimentPlan& plan) {
  from_config(cfg, "grid", plan.grid.size);
  from_config(cfg, "cell_length", plan.grid.cell_length);
  from_config(cfg, "particles", plan.sim.particles);
  from_config(cfg, "steps", plan.sim.steps);
  from_config(cfg, "dt", plan.sim.dt);
  from_config(cfg, "sigma", plan.sim.sigma);
  from_config(cfg, "n_train", plan.n_train);
  from_config(cfg, "n_test", plan.n_test);
  from_config(cfg, "pca_k", plan.pca_k);
  from_config(cfg, "hidden", plan.emu.hidden);
  from_config(cfg, "blocks", plan.emu.blocks);
  from_config(cfg, "mesh_coarsening", plan.emu.mesh_coarsening);
  from_config(cfg, "epochs", plan.train_cfg.epochs);
  from_config(cfg, "batch_size", plan.train_cfg.batch_size);
  from_config(cfg, "learning_rate", plan.train_cfg.learning_rate);
  from_config(cfg, "iou_alpha", plan.iou_alpha);
  from_config(cfg, "seeds", plan.seeds);
  plan.emu.grid = plan.grid.size;
  if (cfg.contains("cells")) {
    plan.cells.clear();
    for (const json& c : cfg.at("cells"))
      plan.cells.push_back(
          {selection_from_string(c.at("method").get<std::string>()),
           c.at("n").get<int>()});
  }
}

PrototypeContext make_context(const PrototypeArtifact* protos,
                              const std::string& assign_train,
                              const std::string& assign_val) {
  PrototypeContext ctx;
  if (protos != nullptr) {
    ctx.set = &protos->set;
    ctx.train_assignment = load_assignment(assign_train);
    ctx.val_assignment = load_assignment(assign_val);
  }
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispersion-footprint emulator with prototype inputs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path, out_dir;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--config", config_path, "JSON config overriding defaults");
  app.add_option("--out", out_dir, "output directory");

  json cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  int gen_n = 10;
  GridSpec grid;
  SimParams sim;
  gen->add_option("--n", gen_n, "number of samples");
  gen->add_option("--grid", grid.size, "grid cells per side");
  gen->add_option("--cell-length", grid.cell_length, "cell edge length");
  gen->add_option("--particles", sim.particles, "particles per release");
  gen->add_option("--steps", sim.steps, "simulation steps");
  gen->add_option("--dt", sim.dt, "time step");
  gen->add_option("--sigma", sim.sigma, "random-walk scale");

  // select
  auto* sel = app.add_subcommand("select", "choose a prototype set");
  std::string sel_data, sel_method = "kmeans";
  int sel_n = 4, sel_pca = 64;
  sel->add_option("--data", sel_data, "training dataset directory")->required();
  sel->add_option("--method", sel_method, "random | kmeans | cardinal");
  sel->add_option("--n", sel_n, "number of prototypes");
  sel->add_option("--pca", sel_pca, "PCA components");

  // assign
  auto* asn = app.add_subcommand("assign", "nearest-prototype assignment");
  std::string asn_data, asn_protos;
  asn->add_option("--data", asn_data, "dataset directory")->required();
  asn->add_option("--prototypes", asn_protos, "prototype artifact directory")
      ->required();

  // train
  auto* trn = app.add_subcommand("train", "train one emulator");
  std::string trn_train, trn_val, trn_protos, trn_at, trn_av;
  TrainConfig tc;
  EmulatorConfig emu;
  trn->add_option("--train", trn_train, "training dataset")->required();
  trn->add_option("--val", trn_val, "validation dataset")->required();
  trn->add_option("--prototypes", trn_protos, "prototype artifact (optional)");
  trn->add_option("--assign-train", trn_at, "train assignment file");
  trn->add_option("--assign-val", trn_av, "val assignment file");
  trn->add_option("--epochs", tc.epochs, "training epochs");
  trn->add_option("--batch", tc.batch_size, "batch size");
  trn->add_option("--lr", tc.learning_rate, "learning rate");
  trn->add_option("--hidden", emu.hidden, "hidden width");
  trn->add_option("--blocks", emu.blocks, "processor blocks");
  trn->add_option("--mesh", emu.mesh_coarsening, "mesh coarsening factor");

  // eval
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string evl_ck, evl_data, evl_protos, evl_assign;
  double evl_alpha = 0.01;
  evl->add_option("--checkpoint", evl_ck, "checkpoint directory")->required();
  evl->add_option("--data", evl_data, "dataset directory")->required();
  evl->add_option("--prototypes", evl_protos, "prototype artifact (optional)");
  evl->add_option("--assign", evl_assign, "assignment file");
  evl->add_option("--alpha", evl_alpha, "IoU threshold fraction");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the full comparison");
  std::string preset = "desk";
  std::uint64_t seed_set = 0;
  exp->add_option("--preset", preset, "preset name (desk)");
  exp->add_option("--seed-set", seed_set, "offset applied to all seeds");

  // export
  auto* exc = app.add_subcommand("export", "dump prediction grids as CSV");
  std::string exc_dir, exc_samples;
  int exc_random = 3;
  exc->add_option("--experiment", exc_dir, "experiment output directory")
      ->required();
  exc->add_option("--samples", exc_samples, "comma-separated test indices");
  exc->add_option("--n-random", exc_random, "random sample count if no list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage problems exit 2; --help exits 0
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (out_dir.empty()) out_dir = "out";
    const fs::path out(out_dir);

    if (gen->parsed()) {
      from_config(cfg, "grid", grid.size);
      from_config(cfg, "particles", sim.particles);
      from_config(cfg, "steps", sim.steps);
      Dataset d = gen_dataset(grid, sim, gen_n, seed);
      save_dataset(d, out);
      std::printf("wrote %d samples to %s\n", d.n_samples, out.c_str());
    } else if (sel->parsed()) {
      Dataset d = load_dataset(sel_data);
      std::vector<Footprint> fps;
      for (int i = 0; i < d.n_samples; ++i) fps.push_back(d.target_footprint(i));
      PcaModel pca = fit_pca(fps, sel_pca);
      PrototypeArtifact a;
      a.grid_size = d.grid.size;
      a.pca = pca;
      const SelectionMethod method = selection_from_string(sel_method);
      if (method == SelectionMethod::kRandom)
        a.set = select_random(d, pca, sel_n, seed);
      else if (method == SelectionMethod::kKmeans)
        a.set = select_kmeans(d, pca, sel_n, seed);
      else
        a.set = select_cardinal(d, pca, sel_n);
      save_prototypes(a, out);
      std::printf("selected %d prototypes (%s, %d PCA dims) into %s\n",
                  a.set.n, sel_method.c_str(), a.pca.k, out.c_str());
    } else if (asn->parsed()) {
      Dataset d = load_dataset(asn_data);
      PrototypeArtifact a = load_prototypes(asn_protos);
      fs::create_directories(out);
      save_assignment(assign_all(a.pca, a.set, d), out / "assignment.json");
      std::printf("wrote %s\n", (out / "assignment.json").c_str());
    } else if (trn->parsed()) {
      Dataset train_d = load_dataset(trn_train);
      Dataset val_d = load_dataset(trn_val);
      tc.seed = seed;
      emu.grid = train_d.grid.size;
      emu.use_prototype = !trn_protos.empty();
      PrototypeArtifact protos;
      if (emu.use_prototype) {
        if (trn_at.empty() || trn_av.empty())
          throw std::invalid_argument(
              "train: --prototypes requires --assign-train and --assign-val");
        protos = load_prototypes(trn_protos);
      }
      PrototypeContext ctx = make_context(
          emu.use_prototype ? &protos : nullptr, trn_at, trn_av);
      TrainResult r = train(train_d, val_d, ctx, tc, emu);
      save_checkpoint(r.checkpoint, out);
      const EpochStats& last = r.history.back();
      std::printf("final epoch %d: train_loss %.6g val_mse %.6g val_iou %.4f\n",
                  last.epoch, last.train_loss, last.val_mse, last.val_iou);
    } else if (evl->parsed()) {
      Checkpoint ck = load_checkpoint(evl_ck);
      Dataset d = load_dataset(evl_data);
      PrototypeArtifact protos;
      std::vector<int> assignment;
      if (!evl_protos.empty()) {
        protos = load_prototypes(evl_protos);
        assignment = load_assignment(evl_assign);
      }
      EvalResult ev = evaluate(ck, d, evl_protos.empty() ? nullptr : &protos.set,
                               evl_protos.empty() ? nullptr : &assignment,
                               evl_alpha);
      std::printf("samples %zu: mse_scaled %.6g +- %.3g, mse_native %.6g, "
                  "iou %.4f +- %.4f\n",
                  ev.rows.size(), ev.mse_scaled.mean, ev.mse_scaled.stdev,
                  ev.mse_native.mean, ev.iou.mean, ev.iou.stdev);
      fs::create_directories(out);
      std::ofstream csv(out / "eval.csv");
      csv << "sample,mse_scaled,mse_native,iou\n";
      for (const SampleMetrics& row : ev.rows)
        csv << row.sample << "," << row.mse_scaled << "," << row.mse_native
            << "," << row.iou << "\n";
    } else if (exp->parsed()) {
      if (preset != "desk")
        throw std::invalid_argument("experiment: unknown preset '" + preset +
                                    "'");
      ExperimentPlan plan = desk_preset(seed_set, out);
      apply_plan_config(cfg, plan);
      ExperimentReport report = run_experiment(plan);
      for (const CellResult& c : report.cells) {
        if (c.ok)
          std::printf("%-12s iou %.4f +- %.4f%s\n", c.cell.model_id().c_str(),
                      c.iou.mean, c.iou.stdev,
                      c.cell.n > 0
                          ? (" (" + std::to_string(c.iou_improvement * 100.0) +
                             "% vs baseline)")
                                .c_str()
                          : "");
        else
          std::printf("%-12s FAILED: %s\n", c.cell.model_id().c_str(),
                      c.error.c_str());
      }
      if (!report.baseline_ok) {
        std::cerr << "baseline cell failed\n";
        return 1;
      }
    } else if (exc->parsed()) {
      std::vector<int> samples;
      if (!exc_samples.empty()) {
        std::size_t pos = 0;
        while (pos < exc_samples.size()) {
          std::size_t next = exc_samples.find(',', pos);
          if (next == std::string::npos) next = exc_samples.size();
          samples.push_back(std::stoi(exc_samples.substr(pos, next - pos)));
          pos = next + 1;
        }
      }
      const auto files = export_fields(exc_dir, samples, exc_random, seed, out);
      std::printf("wrote %zu grid files to %s\n", files.size(), out.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
