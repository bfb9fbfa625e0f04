#include "emuproto/synthdata.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "emuproto/rng.hpp"

using namespace emuproto;

namespace {

// uniform wind field built by hand (no perturbation, flat topo)
MetField uniform_wind(const GridSpec& grid, double u, double v) {
  MetField met = gen_met_field(grid, 0, /*perturb_scale=*/0.0);
  std::fill(met.u.begin(), met.u.end(), float(u));
  std::fill(met.v.begin(), met.v.end(), float(v));
  met.mean_u = u;
  met.mean_v = v;
  return met;
}

}  // namespace

TEST_CASE("met field deterministic in (grid, seed)") {
  GridSpec grid{16, 1.0};
  MetField a = gen_met_field(grid, 42), b = gen_met_field(grid, 42);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(a.topo == b.topo);
  MetField c = gen_met_field(grid, 43);
  CHECK(a.u != c.u);
}

TEST_CASE("zero perturbation gives constant wind") {
  MetField met = gen_met_field(GridSpec{16, 1.0}, 5, 0.0);
  for (float v : met.u) CHECK(v == met.u[0]);
  for (float v : met.v) CHECK(v == met.v[0]);
}

TEST_CASE("met field invariants") {
  MetField met = gen_met_field(GridSpec{24, 2.0}, 9);
  for (float t : met.topo) {
    CHECK(t >= 0.0f);
    CHECK(t <= 1.0f);
  }
  CHECK(met.xcoord.front() == -1.0f);
  CHECK(met.xcoord.back() == 1.0f);
  // coordinate channels are affine ramps
  const int g = 24;
  for (int x = 1; x + 1 < g; ++x)
    CHECK(met.xcoord[x + 1] - met.xcoord[x] ==
          doctest::Approx(met.xcoord[1] - met.xcoord[0]));
}

TEST_CASE("wind direction approximately uniform over seeds") {
  // chi^2 against 8 equal bins; critical value for 7 dof at alpha = 0.01
  const int kSeeds = 1000;
  int bins[8] = {0};
  for (int s = 0; s < kSeeds; ++s) {
    MetField met = gen_met_field(GridSpec{8, 1.0}, std::uint64_t(s), 0.0);
    double ang = std::atan2(met.mean_v, met.mean_u);
    if (ang < 0) ang += 2.0 * M_PI;
    bins[std::min(7, int(ang / (2.0 * M_PI / 8)))]++;
  }
  double chi2 = 0.0;
  for (int b = 0; b < 8; ++b) {
    const double e = kSeeds / 8.0;
    chi2 += (bins[b] - e) * (bins[b] - e) / e;
  }
  CHECK(chi2 < 18.475);
}

TEST_CASE("pure diffusion keeps the centroid near the center") {
  GridSpec grid{33, 1.0};
  MetField met = uniform_wind(grid, 0.0, 0.0);
  SimParams params{10000, 50, 0.05, 0.6};
  Footprint fp = simulate_footprint(met, params, 7);
  auto c = fp.centroid();
  const double mid = (grid.size - 1) / 2.0;
  CHECK(std::hypot(c[0] - mid, c[1] - mid) < 0.05 * grid.size);
}

TEST_CASE("eastward wind pushes mass west of center") {
  GridSpec grid{33, 1.0};
  MetField met = uniform_wind(grid, 2.0, 0.0);
  SimParams params{2000, 100, 0.05, 0.05};
  Footprint fp = simulate_footprint(met, params, 3);
  auto c = fp.centroid();
  CHECK(c[0] < (grid.size - 1) / 2.0);
}

TEST_CASE("zero sigma puts all mass on the upwind ray") {
  GridSpec grid{33, 1.0};
  MetField met = uniform_wind(grid, 1.5, 0.0);
  SimParams params{100, 100, 0.05, 0.0};
  Footprint fp = simulate_footprint(met, params, 1);
  const int g = grid.size, cy = (g - 1) / 2;
  CHECK(fp.mass() > 0.0);
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      if (fp.values[std::size_t(y) * g + x] > 0.0f) {
        CHECK(y == cy);            // on the ray through the center
        CHECK(x <= (g - 1) / 2);   // strictly upwind of an eastward flow
      }
    }
}

TEST_CASE("mass conservation integer check") {
  GridSpec grid{16, 1.0};
  SimParams params{500, 20, 0.05, 0.6};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MetField met = gen_met_field(grid, seed);
    SimResult res = simulate_footprint_counts(met, params, seed);
    const std::int64_t counted =
        std::accumulate(res.counts.begin(), res.counts.end(), std::int64_t(0));
    CHECK(counted == res.total_steps);
    CHECK(double(res.footprint.mass()) ==
          doctest::Approx(double(res.total_steps) /
                          (double(params.particles) * params.steps))
              .epsilon(1e-6));
    CHECK(res.footprint.mass() <= 1.0 + 1e-6);
    CHECK(res.footprint.mass() > 0.0);
  }
}

TEST_CASE("upwind centroid property over random uniform winds") {
  GridSpec grid{33, 1.0};
  SimParams params{1000, 50, 0.05, 0.4};
  Rng rng(99);
  int upwind = 0;
  const double mid = (grid.size - 1) / 2.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double spd = rng.uniform(1.0, 5.0);
    MetField met =
        uniform_wind(grid, spd * std::cos(ang), spd * std::sin(ang));
    Footprint fp = simulate_footprint(met, params, std::uint64_t(trial));
    auto c = fp.centroid();
    if ((c[0] - mid) * met.mean_u + (c[1] - mid) * met.mean_v < 0.0) upwind++;
  }
  CHECK(upwind >= 99);
}

TEST_CASE("gaussian plume support, normalization, rotation") {
  GridSpec grid{33, 1.0};
  MetField east = uniform_wind(grid, 3.0, 0.0);
  Footprint plume = gaussian_plume(east, 0.3, 0.8);
  const int g = grid.size, c = (g - 1) / 2;
  double total = 0.0;
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      const float v = plume.values[std::size_t(y) * g + x];
      total += v;
      if (x >= c) CHECK(v == 0.0f);  // support strictly upwind (west)
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

  // rotating the wind by 90 degrees rotates the plume
  MetField north = uniform_wind(grid, 0.0, 3.0);
  Footprint rot = gaussian_plume(north, 0.3, 0.8);
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      // (x,y) under a 90-degree CCW rotation about the center
      const int xr = c - (y - c), yr = c + (x - c);
      CHECK(rot.values[std::size_t(yr) * g + xr] ==
            doctest::Approx(plume.values[std::size_t(y) * g + x])
                .epsilon(1e-6));
    }
}

TEST_CASE("gaussian plume rejects zero wind") {
  MetField met = uniform_wind(GridSpec{16, 1.0}, 0.0, 0.0);
  CHECK_THROWS_AS(gaussian_plume(met, 0.3, 0.8), std::invalid_argument);
}

TEST_CASE("dataset generation is deterministic and order-independent") {
  GridSpec grid{16, 1.0};
  SimParams params{200, 20, 0.05, 0.6};
  Dataset a = gen_dataset(grid, params, 6, 11);
  Dataset b = gen_dataset(grid, params, 6, 11);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(a.seeds == b.seeds);

  // per-sample bytes independent of how many samples are generated
  Dataset prefix = gen_dataset(grid, params, 3, 11);
  CHECK(std::equal(prefix.inputs.begin(), prefix.inputs.end(),
                   a.inputs.begin()));
  CHECK(std::equal(prefix.targets.begin(), prefix.targets.end(),
                   a.targets.begin()));
}

TEST_CASE("single sample dataset upholds footprint invariants") {
  Dataset ds = gen_dataset(GridSpec{16, 1.0}, SimParams{200, 20, 0.05, 0.6},
                           1, 5);
  Footprint fp = ds.target_footprint(0);
  CHECK(fp.mass() > 0.0);
  CHECK(fp.mass() <= 1.0 + 1e-6);
  for (float v : fp.values) CHECK(v >= 0.0f);
}
