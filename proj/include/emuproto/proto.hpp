#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emuproto/pca.hpp"
#include "emuproto/synthdata.hpp"

namespace emuproto {

enum class SelectionMethod { kRandom, kKmeans, kCardinal };

std::string to_string(SelectionMethod m);
SelectionMethod selection_from_string(const std::string& s);

// Ordered set of training footprints chosen as prototypes, with their PCA
// embeddings for nearest-prototype assignment.
struct PrototypeSet {
  SelectionMethod method = SelectionMethod::kRandom;
  int n = 0;
  std::vector<int> indices;                     // training-sample indices
  std::vector<Footprint> footprints;            // footprints[i] = train[indices[i]]
  std::vector<std::vector<float>> embeddings;   // PCA projections

  void validate() const;
};

struct KmeansResult {
  std::vector<std::vector<float>> centroids;
  std::vector<int> assignment;            // per input point
  std::vector<int> medoids;               // per cluster: member index, lowest
                                          // L2 to centroid, ties to lowest id
  std::vector<double> objective_history;  // sum of squared distances after
                                          // each assignment step
};

// Lloyd iterations from a k-means++ start. Empty clusters are re-seeded
// with the point farthest from its assigned centroid.
KmeansResult kmeans(const std::vector<std::vector<float>>& points, int n,
                    std::uint64_t seed, int max_iters = 200,
                    double tol = 1e-6);

PrototypeSet select_random(const Dataset& train, const PcaModel& pca, int n,
                           std::uint64_t seed);
PrototypeSet select_kmeans(const Dataset& train, const PcaModel& pca, int n,
                           std::uint64_t seed, int max_iters = 200,
                           double tol = 1e-6);
// Automated directional curation: bins footprints by the angle of their
// mass-centroid displacement into n sectors centered on the cardinal (and
// intercardinal) directions and keeps the most displaced per sector.
PrototypeSet select_cardinal(const Dataset& train, const PcaModel& pca, int n);

// argmin over prototypes of PCA-space L2 distance, ties to lowest index
int assign_oracle(const PcaModel& pca, const PrototypeSet& set,
                  const Footprint& f);
std::vector<int> assign_all(const PcaModel& pca, const PrototypeSet& set,
                            const Dataset& split);

}  // namespace emuproto
