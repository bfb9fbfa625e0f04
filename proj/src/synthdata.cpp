#include "emuproto/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "emuproto/rng.hpp"

namespace emuproto {

void GridSpec::validate() const {
  if (size < 8) throw std::invalid_argument("GridSpec: size must be >= 8");
  if (cell_length <= 0.0)
    throw std::invalid_argument("GridSpec: cell_length must be > 0");
}

void SimParams::validate() const {
  if (particles < 100)
    throw std::invalid_argument("SimParams: particles must be >= 100");
  if (steps < 10) throw std::invalid_argument("SimParams: steps must be >= 10");
  if (dt <= 0.0) throw std::invalid_argument("SimParams: dt must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("SimParams: sigma must be >= 0");
}

double Footprint::mass() const {
  double m = 0.0;
  for (float v : values) m += v;
  return m;
}

std::array<double, 2> Footprint::centroid() const {
  double m = 0.0, cx = 0.0, cy = 0.0;
  for (int y = 0; y < grid_size; ++y)
    for (int x = 0; x < grid_size; ++x) {
      const double w = values[std::size_t(y) * grid_size + x];
      m += w;
      cx += w * x;
      cy += w * y;
    }
  return {cx / m, cy / m};
}

namespace {

// three low-frequency sinusoids; total amplitude <= 0.3 * base
void add_sinusoids(std::vector<float>& field, int g, Rng& rng, double base,
                   double scale) {
  for (int k = 0; k < 3; ++k) {
    int fx = 0, fy = 0;
    do {
      fx = int(rng.uniform_index(3));
      fy = int(rng.uniform_index(3));
    } while (fx == 0 && fy == 0);
    const double amp = 0.1 * base * rng.uniform(0.5, 1.0) * scale;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < g; ++y)
      for (int x = 0; x < g; ++x) {
        const double nx = double(x) / (g - 1), ny = double(y) / (g - 1);
        field[std::size_t(y) * g + x] +=
            float(amp * std::sin(2.0 * M_PI * (fx * nx + fy * ny) + phase));
      }
  }
}

}  // namespace

MetField gen_met_field(const GridSpec& grid, std::uint64_t seed,
                       double perturb_scale) {
  grid.validate();
  const int g = grid.size;
  MetField met;
  met.grid = grid;
  met.u.assign(std::size_t(grid.cells()), 0.0f);
  met.v.assign(std::size_t(grid.cells()), 0.0f);
  met.topo.assign(std::size_t(grid.cells()), 0.0f);
  met.xcoord.resize(std::size_t(grid.cells()));
  met.ycoord.resize(std::size_t(grid.cells()));

  Rng rng(split_seed(seed, 0x4d4554 /* "MET" */));
  const double dir = rng.uniform(0.0, 2.0 * M_PI);
  const double speed = rng.uniform(1.0, 5.0);
  const double ubar = speed * std::cos(dir), vbar = speed * std::sin(dir);
  std::fill(met.u.begin(), met.u.end(), float(ubar));
  std::fill(met.v.begin(), met.v.end(), float(vbar));
  add_sinusoids(met.u, g, rng, speed, perturb_scale);
  add_sinusoids(met.v, g, rng, speed, perturb_scale);

  // smoothed random field via low-frequency modes, rescaled to [0,1]
  for (int k = 0; k < 4; ++k) {
    const int fx = 1 + int(rng.uniform_index(2));
    const int fy = 1 + int(rng.uniform_index(2));
    const double amp = rng.uniform(0.5, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < g; ++y)
      for (int x = 0; x < g; ++x) {
        const double nx = double(x) / (g - 1), ny = double(y) / (g - 1);
        met.topo[std::size_t(y) * g + x] +=
            float(amp * std::sin(2.0 * M_PI * (fx * nx + fy * ny) + phase));
      }
  }
  const auto [lo_it, hi_it] =
      std::minmax_element(met.topo.begin(), met.topo.end());
  const float lo = *lo_it, range = *hi_it - *lo_it;
  for (auto& t : met.topo) t = range > 1e-12f ? (t - lo) / range : 0.5f;

  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      met.xcoord[std::size_t(y) * g + x] = float(2.0 * x / (g - 1) - 1.0);
      met.ycoord[std::size_t(y) * g + x] = float(2.0 * y / (g - 1) - 1.0);
    }

  double su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < met.u.size(); ++i) {
    su += met.u[i];
    sv += met.v[i];
  }
  met.mean_u = su / double(grid.cells());
  met.mean_v = sv / double(grid.cells());
  return met;
}

namespace {

// bilinear interpolation at position p (physical units), clamped to domain
void wind_at(const MetField& met, double px, double py, double* u, double* v) {
  const int g = met.grid.size;
  const double h = met.grid.cell_length;
  double cx = std::clamp(px / h, 0.0, double(g - 1));
  double cy = std::clamp(py / h, 0.0, double(g - 1));
  const int x0 = std::min(int(cx), g - 2), y0 = std::min(int(cy), g - 2);
  const double fx = cx - x0, fy = cy - y0;
  auto lerp = [&](const std::vector<float>& f) {
    const double f00 = f[std::size_t(y0) * g + x0];
    const double f10 = f[std::size_t(y0) * g + x0 + 1];
    const double f01 = f[std::size_t(y0 + 1) * g + x0];
    const double f11 = f[std::size_t(y0 + 1) * g + x0 + 1];
    return (1 - fy) * ((1 - fx) * f00 + fx * f10) +
           fy * ((1 - fx) * f01 + fx * f11);
  };
  *u = lerp(met.u);
  *v = lerp(met.v);
}

}  // namespace

SimResult simulate_footprint_counts(const MetField& met,
                                    const SimParams& params,
                                    std::uint64_t seed) {
  met.grid.validate();
  params.validate();
  const int g = met.grid.size;
  const double h = met.grid.cell_length;
  const double extent = (g - 1) * h;

  SimResult res;
  res.counts.assign(std::size_t(met.grid.cells()), 0);
  Rng rng(split_seed(seed, 0x53494d /* "SIM" */));
  const double noise = params.sigma * std::sqrt(params.dt);

  for (int p = 0; p < params.particles; ++p) {
    double x = extent / 2.0, y = extent / 2.0;
    for (int t = 0; t < params.steps; ++t) {
      double u, v, zx, zy;
      wind_at(met, x, y, &u, &v);
      rng.normal_pair(&zx, &zy);
      x += -u * params.dt + noise * zx;
      y += -v * params.dt + noise * zy;
      if (x < 0.0 || x > extent || y < 0.0 || y > extent) break;
      const int ix = int(std::lround(x / h));
      const int iy = int(std::lround(y / h));
      res.counts[std::size_t(iy) * g + ix]++;
      res.total_steps++;
    }
  }

  res.footprint.grid_size = g;
  res.footprint.values.resize(res.counts.size());
  const double norm =
      1.0 / (double(params.particles) * double(params.steps));
  for (std::size_t i = 0; i < res.counts.size(); ++i)
    res.footprint.values[i] = float(double(res.counts[i]) * norm);
  return res;
}

Footprint simulate_footprint(const MetField& met, const SimParams& params,
                             std::uint64_t seed) {
  return simulate_footprint_counts(met, params, seed).footprint;
}

Footprint gaussian_plume(const MetField& met, double spread_a,
                         double spread_b) {
  if (spread_a <= 0.0 || spread_b <= 0.0 || spread_b > 1.0)
    throw std::invalid_argument(
        "gaussian_plume: need spread_a > 0 and spread_b in (0,1]");
  const double wspeed = std::hypot(met.mean_u, met.mean_v);
  if (wspeed < 1e-9)
    throw std::invalid_argument(
        "gaussian_plume: zero mean wind, plume direction undefined");
  const double wx = met.mean_u / wspeed, wy = met.mean_v / wspeed;

  const int g = met.grid.size;
  const double h = met.grid.cell_length;
  const double c = (g - 1) / 2.0;
  Footprint fp;
  fp.grid_size = g;
  fp.values.assign(std::size_t(met.grid.cells()), 0.0f);
  double total = 0.0;
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      const double rx = (x - c) * h, ry = (y - c) * h;
      const double d_par = -(rx * wx + ry * wy);  // upwind distance
      if (d_par <= 0.0) continue;
      const double d_perp = std::abs(rx * wy - ry * wx);
      const double sigma = spread_a * std::pow(d_par, spread_b);
      const double val =
          std::exp(-d_perp * d_perp / (2.0 * sigma * sigma)) /
          std::max(sigma, h);
      fp.values[std::size_t(y) * g + x] = float(val);
      total += val;
    }
  if (total > 0.0) {
    const float inv = float(1.0 / total);
    for (auto& v : fp.values) v *= inv;
  }
  return fp;
}

const float* Dataset::input_channel(int sample, int channel) const {
  return inputs.data() +
         (std::int64_t(sample) * kNumChannels + channel) * grid.cells();
}

const float* Dataset::target(int sample) const {
  return targets.data() + std::int64_t(sample) * grid.cells();
}

Footprint Dataset::target_footprint(int sample) const {
  Footprint fp;
  fp.grid_size = grid.size;
  fp.values.assign(target(sample), target(sample) + grid.cells());
  return fp;
}

MetField Dataset::met_field(int sample) const {
  MetField met;
  met.grid = grid;
  const auto n = std::size_t(grid.cells());
  auto ch = [&](int c) {
    return std::vector<float>(input_channel(sample, c),
                              input_channel(sample, c) + n);
  };
  met.u = ch(0);
  met.v = ch(1);
  met.topo = ch(2);
  met.xcoord = ch(3);
  met.ycoord = ch(4);
  double su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    su += met.u[i];
    sv += met.v[i];
  }
  met.mean_u = su / double(n);
  met.mean_v = sv / double(n);
  return met;
}

void Dataset::append(const MetField& met, const Footprint& fp,
                     std::uint64_t seed) {
  inputs.insert(inputs.end(), met.u.begin(), met.u.end());
  inputs.insert(inputs.end(), met.v.begin(), met.v.end());
  inputs.insert(inputs.end(), met.topo.begin(), met.topo.end());
  inputs.insert(inputs.end(), met.xcoord.begin(), met.xcoord.end());
  inputs.insert(inputs.end(), met.ycoord.begin(), met.ycoord.end());
  targets.insert(targets.end(), fp.values.begin(), fp.values.end());
  seeds.push_back(seed);
  n_samples++;
}

Dataset gen_dataset(const GridSpec& grid, const SimParams& params, int n,
                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
  grid.validate();
  params.validate();
  Dataset ds;
  ds.grid = grid;
  ds.n_samples = n;
  ds.inputs.resize(std::size_t(n) * kNumChannels * grid.cells());
  ds.targets.resize(std::size_t(n) * grid.cells());
  ds.seeds.resize(std::size_t(n));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const std::uint64_t sample_seed = split_seed(seed, std::uint64_t(i));
    const MetField met = gen_met_field(grid, split_seed(sample_seed, 0));
    const Footprint fp =
        simulate_footprint(met, params, split_seed(sample_seed, 1));
    float* dst =
        ds.inputs.data() + std::int64_t(i) * kNumChannels * grid.cells();
    const std::size_t cells = std::size_t(grid.cells());
    std::memcpy(dst + 0 * cells, met.u.data(), cells * sizeof(float));
    std::memcpy(dst + 1 * cells, met.v.data(), cells * sizeof(float));
    std::memcpy(dst + 2 * cells, met.topo.data(), cells * sizeof(float));
    std::memcpy(dst + 3 * cells, met.xcoord.data(), cells * sizeof(float));
    std::memcpy(dst + 4 * cells, met.ycoord.data(), cells * sizeof(float));
    std::memcpy(ds.targets.data() + std::int64_t(i) * grid.cells(),
                fp.values.data(), cells * sizeof(float));
    ds.seeds[std::size_t(i)] = sample_seed;
  }
  return ds;
}

}  // namespace emuproto
