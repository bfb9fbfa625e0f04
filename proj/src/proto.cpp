#include "emuproto/proto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "emuproto/rng.hpp"

namespace emuproto {

std::string to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::kRandom: return "random";
    case SelectionMethod::kKmeans: return "kmeans";
    case SelectionMethod::kCardinal: return "cardinal";
  }
  throw std::invalid_argument("unknown selection method");
}

SelectionMethod selection_from_string(const std::string& s) {
  if (s == "random") return SelectionMethod::kRandom;
  if (s == "kmeans") return SelectionMethod::kKmeans;
  if (s == "cardinal") return SelectionMethod::kCardinal;
  throw std::invalid_argument("unknown selection method: " + s);
}

void PrototypeSet::validate() const {
  if (int(indices.size()) != n || int(footprints.size()) != n ||
      int(embeddings.size()) != n)
    throw std::invalid_argument("PrototypeSet: field sizes disagree with n");
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("PrototypeSet: duplicate indices");
}

namespace {

double sqdist(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

PrototypeSet build_set(SelectionMethod method, const Dataset& train,
                       const PcaModel& pca, std::vector<int> indices) {
  PrototypeSet set;
  set.method = method;
  set.n = int(indices.size());
  set.indices = std::move(indices);
  for (int idx : set.indices) {
    Footprint fp = train.target_footprint(idx);
    set.embeddings.push_back(project(pca, fp));
    set.footprints.push_back(std::move(fp));
  }
  set.validate();
  return set;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<float>>& points, int n,
                    std::uint64_t seed, int max_iters, double tol) {
  const int num = int(points.size());
  if (n < 1 || n > num)
    throw std::invalid_argument("kmeans: need 1 <= n <= N, got n=" +
                                std::to_string(n) + " N=" + std::to_string(num));
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters >= 1");

  Rng rng(split_seed(seed, 0x4b4d /* "KM" */));
  KmeansResult res;

  // k-means++ seeding
  std::vector<int> centers;
  centers.push_back(int(rng.uniform_index(std::uint64_t(num))));
  std::vector<double> d2(std::size_t(num), 0.0);
  while (int(centers.size()) < n) {
    double total = 0.0;
    for (int i = 0; i < num; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int c : centers)
        best = std::min(best, sqdist(points[std::size_t(i)], points[std::size_t(c)]));
      d2[std::size_t(i)] = best;
      total += best;
    }
    int pick = -1;
    if (total <= 0.0) {
      for (int i = 0; i < num && pick < 0; ++i)
        if (std::find(centers.begin(), centers.end(), i) == centers.end())
          pick = i;
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < num; ++i) {
        acc += d2[std::size_t(i)];
        if (acc >= r) { pick = i; break; }
      }
      if (pick < 0) pick = num - 1;
    }
    centers.push_back(pick);
  }
  for (int c : centers) res.centroids.push_back(points[std::size_t(c)]);

  res.assignment.assign(std::size_t(num), 0);
  const std::size_t dim = points.empty() ? 0 : points[0].size();

  for (int iter = 0; iter < max_iters; ++iter) {
    // assignment step (ties to the lowest cluster id)
    double objective = 0.0;
    for (int i = 0; i < num; ++i) {
      int best = 0;
      double bd = sqdist(points[std::size_t(i)], res.centroids[0]);
      for (int c = 1; c < n; ++c) {
        const double d = sqdist(points[std::size_t(i)], res.centroids[std::size_t(c)]);
        if (d < bd) { bd = d; best = c; }
      }
      res.assignment[std::size_t(i)] = best;
      objective += bd;
    }

    // re-seed empty clusters with the point farthest from its centroid
    std::vector<int> counts(std::size_t(n), 0);
    for (int a : res.assignment) counts[std::size_t(a)]++;
    for (int c = 0; c < n; ++c) {
      if (counts[std::size_t(c)] > 0) continue;
      int far = -1;
      double fd = -1.0;
      for (int i = 0; i < num; ++i) {
        if (counts[std::size_t(res.assignment[std::size_t(i)])] <= 1) continue;
        const double d = sqdist(points[std::size_t(i)],
                                res.centroids[std::size_t(res.assignment[std::size_t(i)])]);
        if (d > fd) { fd = d; far = i; }
      }
      if (far < 0) continue;
      objective -= fd;  // its distance to the new centroid becomes 0
      counts[std::size_t(res.assignment[std::size_t(far)])]--;
      res.assignment[std::size_t(far)] = c;
      counts[std::size_t(c)] = 1;
      res.centroids[std::size_t(c)] = points[std::size_t(far)];
    }
    res.objective_history.push_back(objective);

    // update step
    double max_move2 = 0.0;
    for (int c = 0; c < n; ++c) {
      if (counts[std::size_t(c)] == 0) continue;
      std::vector<double> mean(dim, 0.0);
      for (int i = 0; i < num; ++i) {
        if (res.assignment[std::size_t(i)] != c) continue;
        for (std::size_t j = 0; j < dim; ++j) mean[j] += points[std::size_t(i)][j];
      }
      std::vector<float> next(dim);
      for (std::size_t j = 0; j < dim; ++j)
        next[j] = float(mean[j] / counts[std::size_t(c)]);
      max_move2 = std::max(max_move2, sqdist(next, res.centroids[std::size_t(c)]));
      res.centroids[std::size_t(c)] = std::move(next);
    }
    if (std::sqrt(max_move2) < tol) break;
  }

  // final assignment against the converged centroids, then medoids
  for (int i = 0; i < num; ++i) {
    int best = 0;
    double bd = sqdist(points[std::size_t(i)], res.centroids[0]);
    for (int c = 1; c < n; ++c) {
      const double d = sqdist(points[std::size_t(i)], res.centroids[std::size_t(c)]);
      if (d < bd) { bd = d; best = c; }
    }
    res.assignment[std::size_t(i)] = best;
  }
  res.medoids.assign(std::size_t(n), -1);
  std::vector<double> med_d(std::size_t(n), std::numeric_limits<double>::max());
  for (int i = 0; i < num; ++i) {
    const int c = res.assignment[std::size_t(i)];
    const double d = sqdist(points[std::size_t(i)], res.centroids[std::size_t(c)]);
    if (d < med_d[std::size_t(c)]) {
      med_d[std::size_t(c)] = d;
      res.medoids[std::size_t(c)] = i;
    }
  }
  return res;
}

PrototypeSet select_random(const Dataset& train, const PcaModel& pca, int n,
                           std::uint64_t seed) {
  if (n < 1 || n > train.n_samples)
    throw std::invalid_argument("select_random: need 1 <= n <= N_train");
  // partial Fisher-Yates: first n entries are a uniform sample without
  // replacement, in sampled order
  std::vector<int> pool(std::size_t(train.n_samples));
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(split_seed(seed, 0x524e44 /* "RND" */));
  for (int i = 0; i < n; ++i) {
    const auto j = i + int(rng.uniform_index(std::uint64_t(train.n_samples - i)));
    std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
  }
  pool.resize(std::size_t(n));
  return build_set(SelectionMethod::kRandom, train, pca, std::move(pool));
}

PrototypeSet select_kmeans(const Dataset& train, const PcaModel& pca, int n,
                           std::uint64_t seed, int max_iters, double tol) {
  if (n < 1 || n > train.n_samples)
    throw std::invalid_argument("select_kmeans: need 1 <= n <= N_train");
  std::vector<std::vector<float>> emb;
  emb.reserve(std::size_t(train.n_samples));
  for (int i = 0; i < train.n_samples; ++i)
    emb.push_back(project(pca, train.target_footprint(i)));
  KmeansResult km = kmeans(emb, n, seed, max_iters, tol);
  return build_set(SelectionMethod::kKmeans, train, pca, km.medoids);
}

PrototypeSet select_cardinal(const Dataset& train, const PcaModel& pca,
                             int n) {
  if (n != 2 && n != 4 && n != 8)
    throw std::invalid_argument("select_cardinal: n must be one of {2,4,8}");
  if (n > train.n_samples)
    throw std::invalid_argument("select_cardinal: n exceeds N_train");

  const double sector = 2.0 * M_PI / n;
  const double mid = (train.grid.size - 1) / 2.0;
  std::vector<double> angle(std::size_t(train.n_samples));
  std::vector<double> magnitude(std::size_t(train.n_samples));
  for (int i = 0; i < train.n_samples; ++i) {
    const Footprint fp = train.target_footprint(i);
    if (fp.mass() <= 0.0)
      throw std::invalid_argument("select_cardinal: footprint " +
                                  std::to_string(i) + " has zero mass");
    const auto c = fp.centroid();
    const double dx = c[0] - mid, dy = c[1] - mid;
    double a = std::atan2(dy, dx);
    if (a < 0.0) a += 2.0 * M_PI;
    angle[std::size_t(i)] = a;
    magnitude[std::size_t(i)] = std::hypot(dx, dy);
  }

  // sector k is centered on angle k * 2pi/n (E, N, W, S for n = 4)
  std::vector<int> chosen(std::size_t(n), -1);
  for (int i = 0; i < train.n_samples; ++i) {
    const int s = int(std::llround(angle[std::size_t(i)] / sector)) % n;
    const int cur = chosen[std::size_t(s)];
    if (cur < 0 || magnitude[std::size_t(i)] > magnitude[std::size_t(cur)])
      chosen[std::size_t(s)] = i;
  }

  // empty sectors fall back to the unused footprint closest in angle
  for (int s = 0; s < n; ++s) {
    if (chosen[std::size_t(s)] >= 0) continue;
    const double center = s * sector;
    int best = -1;
    double bd = std::numeric_limits<double>::max();
    for (int i = 0; i < train.n_samples; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double d = std::abs(angle[std::size_t(i)] - center);
      d = std::min(d, 2.0 * M_PI - d);
      if (d < bd) { bd = d; best = i; }
    }
    if (best < 0)
      throw std::invalid_argument("select_cardinal: not enough distinct samples");
    chosen[std::size_t(s)] = best;
  }
  return build_set(SelectionMethod::kCardinal, train, pca, std::move(chosen));
}

int assign_oracle(const PcaModel& pca, const PrototypeSet& set,
                  const Footprint& f) {
  if (set.n < 1) throw std::invalid_argument("assign_oracle: empty prototype set");
  const auto z = project(pca, f);
  int best = 0;
  double bd = sqdist(z, set.embeddings[0]);
  for (int j = 1; j < set.n; ++j) {
    const double d = sqdist(z, set.embeddings[std::size_t(j)]);
    if (d < bd) { bd = d; best = j; }
  }
  return best;
}

std::vector<int> assign_all(const PcaModel& pca, const PrototypeSet& set,
                            const Dataset& split) {
  std::vector<int> out(std::size_t(split.n_samples));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < split.n_samples; ++i)
    out[std::size_t(i)] = assign_oracle(pca, set, split.target_footprint(i));
  return out;
}

}  // namespace emuproto
