#include "emuproto/io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact format is little-endian");

namespace emuproto {

namespace {

using nlohmann::json;

void write_bytes(const std::filesystem::path& file, const void* data,
                 std::size_t bytes) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(static_cast<const char*>(data), std::streamsize(bytes));
  if (!out) throw std::runtime_error("short write to " + file.string());
}

void write_f32(const std::filesystem::path& file, const std::vector<float>& v) {
  write_bytes(file, v.data(), v.size() * sizeof(float));
}

std::vector<float> read_f32(const std::filesystem::path& file,
                            std::size_t expected) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  const std::size_t bytes = std::size_t(in.tellg());
  if (bytes != expected * sizeof(float))
    throw std::runtime_error(file.string() + ": size " + std::to_string(bytes) +
                             " does not match manifest (" +
                             std::to_string(expected * sizeof(float)) + ")");
  std::vector<float> v(expected);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(bytes));
  if (!in) throw std::runtime_error("short read from " + file.string());
  return v;
}

void write_manifest(const std::filesystem::path& dir, const json& j) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
}

json read_manifest(const std::filesystem::path& dir, const std::string& kind) {
  std::ifstream in(dir / "manifest.json");
  if (!in)
    throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
  json j = json::parse(in);
  if (j.value("version", 0) != 1)
    throw std::runtime_error(dir.string() + ": unrecognized manifest version");
  if (j.value("kind", "") != kind)
    throw std::runtime_error(dir.string() + ": expected a " + kind +
                             " manifest, found '" + j.value("kind", "") + "'");
  return j;
}

}  // namespace

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  json j;
  j["version"] = 1;
  j["kind"] = "dataset";
  j["grid"] = {{"size", d.grid.size}, {"cell_length", d.grid.cell_length}};
  j["n_samples"] = d.n_samples;
  j["channels"] = kChannelNames;
  j["dtype"] = "f32le";
  j["seeds"] = d.seeds;
  write_manifest(dir, j);
  write_f32(dir / "inputs.bin", d.inputs);
  write_f32(dir / "targets.bin", d.targets);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json j = read_manifest(dir, "dataset");
  Dataset d;
  d.grid.size = j.at("grid").at("size").get<int>();
  d.grid.cell_length = j.at("grid").at("cell_length").get<double>();
  d.grid.validate();
  d.n_samples = j.at("n_samples").get<int>();
  d.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (int(d.seeds.size()) != d.n_samples)
    throw std::runtime_error(dir.string() + ": seed list does not match n_samples");
  if (j.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error(dir.string() + ": unsupported dtype");
  const std::size_t cells = std::size_t(d.grid.cells());
  d.inputs = read_f32(dir / "inputs.bin",
                      std::size_t(d.n_samples) * kNumChannels * cells);
  d.targets = read_f32(dir / "targets.bin", std::size_t(d.n_samples) * cells);
  return d;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir) {
  json j;
  j["version"] = 1;
  j["kind"] = "checkpoint";
  j["emulator"] = {{"grid", ck.emu.grid},
                   {"mesh_coarsening", ck.emu.mesh_coarsening},
                   {"hidden", ck.emu.hidden},
                   {"blocks", ck.emu.blocks},
                   {"use_prototype", ck.emu.use_prototype}};
  j["train"] = {{"epochs", ck.cfg.epochs},
                {"batch_size", ck.cfg.batch_size},
                {"learning_rate", ck.cfg.learning_rate},
                {"beta1", ck.cfg.beta1},
                {"beta2", ck.cfg.beta2},
                {"epsilon", ck.cfg.epsilon},
                {"seed", ck.cfg.seed},
                {"scale_percentile", ck.cfg.scale_percentile}};
  j["seed"] = ck.seed;
  j["scaler"] = {{"scale", ck.scaler.scale}};
  j["norm"] = {{"mean", ck.stats.mean}, {"stdev", ck.stats.stdev}};

  std::vector<float> blob;
  json params = json::array();
  for (const auto& [name, t] : ck.params.entries()) {
    params.push_back({{"name", name}, {"shape", t->shape()}});
    blob.insert(blob.end(), t->data(), t->data() + t->size());
  }
  j["params"] = params;
  write_manifest(dir, j);
  write_f32(dir / "params.bin", blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const json j = read_manifest(dir, "checkpoint");
  Checkpoint ck;
  const json& e = j.at("emulator");
  ck.emu.grid = e.at("grid").get<int>();
  ck.emu.mesh_coarsening = e.at("mesh_coarsening").get<int>();
  ck.emu.hidden = e.at("hidden").get<int>();
  ck.emu.blocks = e.at("blocks").get<int>();
  ck.emu.use_prototype = e.at("use_prototype").get<bool>();
  ck.emu.validate();
  const json& t = j.at("train");
  ck.cfg.epochs = t.at("epochs").get<int>();
  ck.cfg.batch_size = t.at("batch_size").get<int>();
  ck.cfg.learning_rate = t.at("learning_rate").get<float>();
  ck.cfg.beta1 = t.at("beta1").get<float>();
  ck.cfg.beta2 = t.at("beta2").get<float>();
  ck.cfg.epsilon = t.at("epsilon").get<float>();
  ck.cfg.seed = t.at("seed").get<std::uint64_t>();
  ck.cfg.scale_percentile = t.at("scale_percentile").get<double>();
  ck.cfg.validate();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.scaler.scale = j.at("scaler").at("scale").get<float>();
  ck.stats.mean = j.at("norm").at("mean").get<std::vector<float>>();
  ck.stats.stdev = j.at("norm").at("stdev").get<std::vector<float>>();

  // the config determines all shapes; seed 0 values are overwritten below
  ck.params = init_model(ck.emu, 0);
  auto entries = ck.params.entries();
  const json& params = j.at("params");
  if (params.size() != entries.size())
    throw std::runtime_error(dir.string() + ": parameter list does not match config");
  std::size_t total = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (params[i].at("name").get<std::string>() != entries[i].first)
      throw std::runtime_error(dir.string() + ": unexpected parameter " +
                               params[i].at("name").get<std::string>());
    const auto shape = params[i].at("shape").get<std::vector<std::int64_t>>();
    if (shape != entries[i].second->shape())
      throw std::runtime_error(dir.string() + ": shape mismatch for " +
                               entries[i].first);
    total += std::size_t(entries[i].second->size());
  }
  const std::vector<float> blob = read_f32(dir / "params.bin", total);
  std::size_t offset = 0;
  for (auto& [name, tensor] : entries) {
    std::copy(blob.begin() + std::ptrdiff_t(offset),
              blob.begin() + std::ptrdiff_t(offset + std::size_t(tensor->size())),
              tensor->mutable_data());
    offset += std::size_t(tensor->size());
  }
  return ck;
}

void save_prototypes(const PrototypeArtifact& a,
                     const std::filesystem::path& dir) {
  json j;
  j["version"] = 1;
  j["kind"] = "prototypes";
  j["method"] = to_string(a.set.method);
  j["n"] = a.set.n;
  j["grid_size"] = a.grid_size;
  j["indices"] = a.set.indices;
  j["pca"] = {{"dim", a.pca.dim}, {"k", a.pca.k}};
  write_manifest(dir, j);

  const std::size_t cells = std::size_t(a.grid_size) * std::size_t(a.grid_size);
  std::vector<float> fp;
  for (const Footprint& f : a.set.footprints)
    fp.insert(fp.end(), f.values.begin(), f.values.end());
  if (fp.size() != cells * a.set.footprints.size())
    throw std::runtime_error("save_prototypes: footprint grid mismatch");
  write_f32(dir / "footprints.bin", fp);

  std::vector<float> emb;
  for (const auto& z : a.set.embeddings) emb.insert(emb.end(), z.begin(), z.end());
  write_f32(dir / "embeddings.bin", emb);

  std::vector<float> pca = a.pca.mean;
  pca.insert(pca.end(), a.pca.components.begin(), a.pca.components.end());
  pca.insert(pca.end(), a.pca.explained_variance.begin(),
             a.pca.explained_variance.end());
  write_f32(dir / "pca.bin", pca);
}

PrototypeArtifact load_prototypes(const std::filesystem::path& dir) {
  const json j = read_manifest(dir, "prototypes");
  PrototypeArtifact a;
  a.set.method = selection_from_string(j.at("method").get<std::string>());
  a.set.n = j.at("n").get<int>();
  a.grid_size = j.at("grid_size").get<int>();
  a.set.indices = j.at("indices").get<std::vector<int>>();
  a.pca.dim = j.at("pca").at("dim").get<std::int64_t>();
  a.pca.k = j.at("pca").at("k").get<int>();

  const std::size_t cells = std::size_t(a.grid_size) * std::size_t(a.grid_size);
  const std::size_t n = a.set.indices.size();
  const std::vector<float> fp = read_f32(dir / "footprints.bin", n * cells);
  for (std::size_t i = 0; i < n; ++i) {
    Footprint f;
    f.grid_size = a.grid_size;
    f.values.assign(fp.begin() + std::ptrdiff_t(i * cells),
                    fp.begin() + std::ptrdiff_t((i + 1) * cells));
    a.set.footprints.push_back(std::move(f));
  }
  const std::vector<float> emb =
      read_f32(dir / "embeddings.bin", n * std::size_t(a.pca.k));
  for (std::size_t i = 0; i < n; ++i)
    a.set.embeddings.emplace_back(
        emb.begin() + std::ptrdiff_t(i * std::size_t(a.pca.k)),
        emb.begin() + std::ptrdiff_t((i + 1) * std::size_t(a.pca.k)));

  const std::size_t d = std::size_t(a.pca.dim), k = std::size_t(a.pca.k);
  const std::vector<float> pca = read_f32(dir / "pca.bin", d + k * d + k);
  a.pca.mean.assign(pca.begin(), pca.begin() + std::ptrdiff_t(d));
  a.pca.components.assign(pca.begin() + std::ptrdiff_t(d),
                          pca.begin() + std::ptrdiff_t(d + k * d));
  a.pca.explained_variance.assign(pca.begin() + std::ptrdiff_t(d + k * d),
                                  pca.end());
  a.set.validate();
  a.pca.validate();
  return a;
}

void save_assignment(const std::vector<int>& assignment,
                     const std::filesystem::path& file) {
  json j;
  j["version"] = 1;
  j["kind"] = "assignment";
  j["assignment"] = assignment;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << "\n";
}

std::vector<int> load_assignment(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  json j = json::parse(in);
  if (j.value("version", 0) != 1 || j.value("kind", "") != "assignment")
    throw std::runtime_error(file.string() + ": not an assignment file");
  return j.at("assignment").get<std::vector<int>>();
}

}  // namespace emuproto
