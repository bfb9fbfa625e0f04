#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace emuproto {

struct GridSpec {
  int size = 33;          // cells per side
  double cell_length = 1.0;
  void validate() const;
  std::int64_t cells() const { return std::int64_t(size) * size; }
};

// Per-cell input channels. Coordinate channels are affine ramps in [-1,1].
struct MetField {
  GridSpec grid;
  std::vector<float> u, v, topo, xcoord, ycoord;  // each size*size, row-major (y major)
  double mean_u = 0.0, mean_v = 0.0;              // domain-mean wind
};

constexpr int kNumChannels = 5;
inline const std::array<std::string, kNumChannels> kChannelNames = {
    "u", "v", "topo", "xcoord", "ycoord"};

// Nonnegative residence-time density; sums to <= 1 after normalization.
struct Footprint {
  int grid_size = 0;
  std::vector<float> values;  // grid_size^2, row-major
  double mass() const;
  // mass-weighted centroid in cell units (x, y); undefined for zero mass
  std::array<double, 2> centroid() const;
};

struct SimParams {
  int particles = 2000;
  int steps = 200;
  double dt = 0.05;
  double sigma = 0.6;  // random-walk scale, length per sqrt(time)
  void validate() const;
};

struct SimResult {
  Footprint footprint;
  std::vector<std::int64_t> counts;  // per-cell histogram before normalization
  std::int64_t total_steps = 0;      // in-domain particle-steps
};

// Deterministic in (grid, seed). perturb_scale multiplies the sinusoidal
// wind perturbation (0 gives a uniform wind field).
MetField gen_met_field(const GridSpec& grid, std::uint64_t seed,
                       double perturb_scale = 1.0);

// Backward particle walk: x <- x - u(x) dt + sigma sqrt(dt) xi. Particles
// release at the domain center and retire on exit.
SimResult simulate_footprint_counts(const MetField& met,
                                    const SimParams& params,
                                    std::uint64_t seed);
Footprint simulate_footprint(const MetField& met, const SimParams& params,
                             std::uint64_t seed);

// Closed-form plume from the domain-mean wind, normalized to sum 1.
// sigma(d) = spread_a * d^spread_b along the upwind distance d.
Footprint gaussian_plume(const MetField& met, double spread_a,
                         double spread_b);

// In-memory dataset in the on-disk layout: inputs sample-major then
// channel-major, targets one footprint per sample.
struct Dataset {
  GridSpec grid;
  int n_samples = 0;
  std::vector<float> inputs;   // n * kNumChannels * G^2
  std::vector<float> targets;  // n * G^2
  std::vector<std::uint64_t> seeds;

  const float* input_channel(int sample, int channel) const;
  const float* target(int sample) const;
  Footprint target_footprint(int sample) const;
  MetField met_field(int sample) const;
  void append(const MetField& met, const Footprint& fp, std::uint64_t seed);
};

// Sample i derives its streams from split_seed(seed, i), so generation is
// order- and thread-count-independent.
Dataset gen_dataset(const GridSpec& grid, const SimParams& params, int n,
                    std::uint64_t seed);

}  // namespace emuproto
