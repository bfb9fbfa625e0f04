#pragma once

#include <cstdint>
#include <vector>

#include "emuproto/synthdata.hpp"

namespace emuproto {

// Orthonormal-row PCA basis over flattened footprints.
struct PcaModel {
  std::int64_t dim = 0;  // D = G^2
  int k = 0;             // retained components (after rank clipping)
  std::vector<float> mean;                // D
  std::vector<float> components;          // k x D, row-major, orthonormal rows
  std::vector<float> explained_variance;  // k, nonincreasing

  void validate() const;
};

// Top-k' eigenvectors of the sample covariance (divisor N-1), with
// k' = min(k, N-1, D). Rows are sign-normalized so the largest-magnitude
// entry of each is positive.
PcaModel fit_pca(const std::vector<Footprint>& samples, int k);
PcaModel fit_pca_rows(const std::vector<float>& rows, std::int64_t n,
                      std::int64_t dim, int k);

std::vector<float> project(const PcaModel& pca, const Footprint& f);
std::vector<float> project_raw(const PcaModel& pca, const float* x);

// mean + components^T z; for PCA validation, may contain negatives
Footprint reconstruct(const PcaModel& pca, const std::vector<float>& z);

}  // namespace emuproto
