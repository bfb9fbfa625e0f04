#include "emuproto/proto.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "emuproto/rng.hpp"

using namespace emuproto;

namespace {

// dataset whose targets are hand-placed footprints; inputs are unused here
Dataset dataset_from_footprints(int g, const std::vector<std::vector<float>>& fps) {
  Dataset ds;
  ds.grid = GridSpec{g, 1.0};
  for (const auto& v : fps) {
    MetField met;
    met.grid = ds.grid;
    const auto cells = std::size_t(ds.grid.cells());
    met.u.assign(cells, 0.0f);
    met.v.assign(cells, 0.0f);
    met.topo.assign(cells, 0.0f);
    met.xcoord.assign(cells, 0.0f);
    met.ycoord.assign(cells, 0.0f);
    Footprint fp;
    fp.grid_size = g;
    fp.values = v;
    ds.append(met, fp, 0);
  }
  return ds;
}

Dataset random_dataset(int n, int g, Rng& rng) {
  std::vector<std::vector<float>> fps;
  for (int i = 0; i < n; ++i) {
    std::vector<float> v(std::size_t(g) * g);
    for (auto& x : v) x = float(rng.uniform(0.0, 1.0));
    fps.push_back(std::move(v));
  }
  return dataset_from_footprints(g, fps);
}

// single off-center lobe at the given displacement from the grid center
std::vector<float> lobe(int g, int dx, int dy) {
  std::vector<float> v(std::size_t(g) * g, 0.0f);
  const int c = (g - 1) / 2;
  v[std::size_t(c + dy) * g + std::size_t(c + dx)] = 1.0f;
  return v;
}

}  // namespace

TEST_CASE("select_random basics") {
  Rng rng(1);
  Dataset ds = random_dataset(8, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 4);

  PrototypeSet all = select_random(ds, pca, 8, 3);
  std::vector<int> sorted = all.indices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

  CHECK(select_random(ds, pca, 3, 5).indices ==
        select_random(ds, pca, 3, 5).indices);
  CHECK_THROWS_AS(select_random(ds, pca, 9, 0), std::invalid_argument);
}

TEST_CASE("select_random n=1 frequencies near uniform") {
  Rng rng(2);
  const int N = 10, kSeeds = 1000;
  Dataset ds = random_dataset(N, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 4);
  int freq[N] = {0};
  for (int s = 0; s < kSeeds; ++s)
    freq[select_random(ds, pca, 1, std::uint64_t(s)).indices[0]]++;
  // binomial: mean 100, sigma = sqrt(1000 * 0.1 * 0.9) ~ 9.49
  const double sigma = std::sqrt(kSeeds * 0.1 * 0.9);
  for (int i = 0; i < N; ++i)
    CHECK(std::abs(freq[i] - kSeeds / double(N)) < 5.0 * sigma);
}

TEST_CASE("kmeans: n = N makes every point a prototype") {
  Rng rng(3);
  Dataset ds = random_dataset(6, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 5);
  PrototypeSet set = select_kmeans(ds, pca, 6, 0);
  std::vector<int> sorted = set.indices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("kmeans separates two well-separated blobs") {
  Rng rng(4);
  std::vector<std::vector<float>> points;
  for (int i = 0; i < 20; ++i) {
    std::vector<float> p(4);
    const float off = i < 10 ? -100.0f : 100.0f;
    for (auto& x : p) x = off + float(rng.uniform(-1.0, 1.0));
    points.push_back(std::move(p));
  }
  KmeansResult km = kmeans(points, 2, 7);
  const bool a = km.medoids[0] < 10;
  const bool b = km.medoids[1] < 10;
  CHECK(a != b);  // one prototype per blob
}

TEST_CASE("kmeans objective nonincreasing and medoids are members") {
  Rng rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<std::vector<float>> points;
    const int N = 30 + int(rng.uniform_index(30));
    for (int i = 0; i < N; ++i) {
      std::vector<float> p(6);
      for (auto& x : p) x = float(rng.uniform(-2.0, 2.0));
      points.push_back(std::move(p));
    }
    const int n = 2 + int(rng.uniform_index(6));
    KmeansResult km = kmeans(points, n, std::uint64_t(inst));
    for (std::size_t it = 1; it < km.objective_history.size(); ++it)
      CHECK(km.objective_history[it] <= km.objective_history[it - 1] + 1e-9);
    for (int c = 0; c < n; ++c) {
      REQUIRE(km.medoids[std::size_t(c)] >= 0);
      CHECK(km.assignment[std::size_t(km.medoids[std::size_t(c)])] == c);
    }
  }
}

TEST_CASE("select_kmeans deterministic end to end") {
  Rng rng(6);
  Dataset ds = random_dataset(25, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 8);
  CHECK(select_kmeans(ds, pca, 4, 9).indices ==
        select_kmeans(ds, pca, 4, 9).indices);
}

TEST_CASE("cardinal selection picks the four lobes") {
  const int g = 17;
  // E, N, W, S lobes plus weaker distractors and a centered footprint
  Dataset ds = dataset_from_footprints(
      g, {lobe(g, 6, 0), lobe(g, 0, 6), lobe(g, -6, 0), lobe(g, 0, -6),
          lobe(g, 2, 1), lobe(g, -1, 2), lobe(g, 0, 0)});
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 4);

  PrototypeSet four = select_cardinal(ds, pca, 4);
  CHECK(four.indices == std::vector<int>{0, 1, 2, 3});  // E, N, W, S sectors

  // n=2: sectors centered E and W, each half-plane; N lobe (angle pi/2)
  // rounds to the W sector, S (3pi/2) rounds to E. Most displaced win.
  PrototypeSet two = select_cardinal(ds, pca, 2);
  CHECK(two.indices.size() == 2);
  CHECK((two.indices[0] == 0 || two.indices[0] == 3));  // E sector
  CHECK((two.indices[1] == 1 || two.indices[1] == 2));  // W sector

  CHECK_THROWS_AS(select_cardinal(ds, pca, 3), std::invalid_argument);
}

TEST_CASE("centered footprint loses to any displaced candidate") {
  const int g = 17;
  Dataset ds = dataset_from_footprints(
      g, {lobe(g, 0, 0), lobe(g, 1, 0), lobe(g, 0, 1), lobe(g, -1, 0),
          lobe(g, 0, -1)});
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 4);
  PrototypeSet set = select_cardinal(ds, pca, 4);
  CHECK(std::find(set.indices.begin(), set.indices.end(), 0) ==
        set.indices.end());
}

TEST_CASE("assign_oracle") {
  Rng rng(7);
  Dataset ds = random_dataset(12, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 6);
  PrototypeSet set = select_random(ds, pca, 5, 1);

  // a prototype footprint maps to itself
  for (int j = 0; j < set.n; ++j)
    CHECK(assign_oracle(pca, set, set.footprints[std::size_t(j)]) == j);

  PrototypeSet one = select_random(ds, pca, 1, 2);
  for (int i = 0; i < ds.n_samples; ++i)
    CHECK(assign_oracle(pca, one, ds.target_footprint(i)) == 0);

  PrototypeSet empty;
  CHECK_THROWS_AS(assign_oracle(pca, empty, ds.target_footprint(0)),
                  std::invalid_argument);

  // brute-force distance table over projected coordinates
  for (int i = 0; i < ds.n_samples; ++i) {
    const auto z = project(pca, ds.target_footprint(i));
    int best = 0;
    double bd = 1e300;
    for (int j = 0; j < set.n; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < z.size(); ++c) {
        const double dd = double(z[c]) - set.embeddings[std::size_t(j)][c];
        d += dd * dd;
      }
      if (d < bd) { bd = d; best = j; }
    }
    CHECK(assign_oracle(pca, set, ds.target_footprint(i)) == best);
  }
}

TEST_CASE("assignment is shift-consistent") {
  Rng rng(8);
  Dataset ds = random_dataset(10, 8, rng);
  PcaModel pca = fit_pca_rows(ds.targets, ds.n_samples, ds.grid.cells(), 5);
  PrototypeSet set = select_random(ds, pca, 4, 3);

  PrototypeSet shifted = set;
  const float c = 0.37f;
  for (auto& fp : shifted.footprints) {
    for (auto& v : fp.values) v += c;
    // embeddings recomputed from the shifted footprints
  }
  for (int j = 0; j < shifted.n; ++j)
    shifted.embeddings[std::size_t(j)] =
        project(pca, shifted.footprints[std::size_t(j)]);

  for (int i = 0; i < ds.n_samples; ++i) {
    Footprint f = ds.target_footprint(i);
    Footprint fs = f;
    for (auto& v : fs.values) v += c;
    CHECK(assign_oracle(pca, set, f) == assign_oracle(pca, shifted, fs));
  }
}
