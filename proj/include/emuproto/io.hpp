#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emuproto/pca.hpp"
#include "emuproto/proto.hpp"
#include "emuproto/synthdata.hpp"
#include "emuproto/training.hpp"

namespace emuproto {

// All artifacts are a directory with manifest.json plus raw little-endian
// f32 blocks, so load(save(x)) round-trips bitwise. Loaders verify the
// manifest version and that file sizes match the manifest exactly.

void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Prototype set together with the PCA model used for assignment.
struct PrototypeArtifact {
  PrototypeSet set;
  PcaModel pca;
  int grid_size = 0;
};

void save_prototypes(const PrototypeArtifact& a,
                     const std::filesystem::path& dir);
PrototypeArtifact load_prototypes(const std::filesystem::path& dir);

// Per-sample prototype indices, one JSON file.
void save_assignment(const std::vector<int>& assignment,
                     const std::filesystem::path& file);
std::vector<int> load_assignment(const std::filesystem::path& file);

}  // namespace emuproto
