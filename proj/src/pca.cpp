#include "emuproto/pca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace emuproto {

void PcaModel::validate() const {
  if (std::int64_t(mean.size()) != dim ||
      std::int64_t(components.size()) != std::int64_t(k) * dim ||
      int(explained_variance.size()) != k)
    throw std::invalid_argument("PcaModel: inconsistent field sizes");
  for (int i = 1; i < k; ++i)
    if (explained_variance[std::size_t(i)] >
        explained_variance[std::size_t(i - 1)] + 1e-6f)
      throw std::invalid_argument("PcaModel: variances not nonincreasing");
}

PcaModel fit_pca_rows(const std::vector<float>& rows, std::int64_t n,
                      std::int64_t dim, int k) {
  if (n < 2) throw std::invalid_argument("fit_pca: need at least 2 samples");
  if (std::int64_t(rows.size()) != n * dim)
    throw std::invalid_argument("fit_pca: data length != n*dim");
  const int kp = int(std::min<std::int64_t>({std::int64_t(k), n - 1, dim}));
  if (kp < 1) throw std::invalid_argument("fit_pca: k must be >= 1");

  Eigen::MatrixXd x(n, dim);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < dim; ++j)
      x(i, j) = double(rows[std::size_t(i * dim + j)]);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  // Gram-matrix route: eigenvectors of (X Xt)/(N-1) lift to covariance
  // eigenvectors via Xt u / ||Xt u||. Cheaper than the D x D covariance
  // whenever N < D; the covariance route is kept as the test oracle.
  const Eigen::MatrixXd gram = x * x.transpose() / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("fit_pca: eigendecomposition failed");

  PcaModel model;
  model.dim = dim;
  model.k = kp;
  model.mean.resize(std::size_t(dim));
  for (std::int64_t j = 0; j < dim; ++j) model.mean[std::size_t(j)] = float(mean(j));
  model.components.resize(std::size_t(kp) * std::size_t(dim));
  model.explained_variance.resize(std::size_t(kp));

  // Eigen sorts ascending; take the top kp in descending order.
  for (int c = 0; c < kp; ++c) {
    const std::int64_t src = n - 1 - c;
    const double lambda = std::max(0.0, solver.eigenvalues()(src));
    model.explained_variance[std::size_t(c)] = float(lambda);
    Eigen::VectorXd v = x.transpose() * solver.eigenvectors().col(src);
    const double norm = v.norm();
    if (norm > 1e-12) v /= norm;
    // sign rule: largest-magnitude entry positive (first on magnitude ties)
    std::int64_t imax = 0;
    for (std::int64_t j = 1; j < dim; ++j)
      if (std::abs(v(j)) > std::abs(v(imax))) imax = j;
    if (v(imax) < 0.0) v = -v;
    for (std::int64_t j = 0; j < dim; ++j)
      model.components[std::size_t(c) * std::size_t(dim) + std::size_t(j)] =
          float(v(j));
  }
  return model;
}

PcaModel fit_pca(const std::vector<Footprint>& samples, int k) {
  if (samples.size() < 2)
    throw std::invalid_argument("fit_pca: need at least 2 samples");
  const std::int64_t dim = std::int64_t(samples[0].values.size());
  std::vector<float> rows;
  rows.reserve(std::size_t(dim) * samples.size());
  for (const auto& s : samples) {
    if (std::int64_t(s.values.size()) != dim)
      throw std::invalid_argument("fit_pca: inconsistent sample dimensions");
    rows.insert(rows.end(), s.values.begin(), s.values.end());
  }
  return fit_pca_rows(rows, std::int64_t(samples.size()), dim, k);
}

std::vector<float> project_raw(const PcaModel& pca, const float* x) {
  std::vector<float> z(std::size_t(pca.k));
  for (int c = 0; c < pca.k; ++c) {
    const float* row = pca.components.data() + std::size_t(c) * std::size_t(pca.dim);
    double acc = 0.0;
    for (std::int64_t j = 0; j < pca.dim; ++j)
      acc += double(row[j]) * (double(x[j]) - double(pca.mean[std::size_t(j)]));
    z[std::size_t(c)] = float(acc);
  }
  return z;
}

std::vector<float> project(const PcaModel& pca, const Footprint& f) {
  if (std::int64_t(f.values.size()) != pca.dim)
    throw std::invalid_argument("project: footprint dimension " +
                                std::to_string(f.values.size()) +
                                " != PCA dim " + std::to_string(pca.dim));
  return project_raw(pca, f.values.data());
}

Footprint reconstruct(const PcaModel& pca, const std::vector<float>& z) {
  if (int(z.size()) != pca.k)
    throw std::invalid_argument("reconstruct: embedding length " +
                                std::to_string(z.size()) + " != k " +
                                std::to_string(pca.k));
  Footprint out;
  out.grid_size = int(std::lround(std::sqrt(double(pca.dim))));
  out.values.assign(pca.mean.begin(), pca.mean.end());
  for (int c = 0; c < pca.k; ++c) {
    const float* row = pca.components.data() + std::size_t(c) * std::size_t(pca.dim);
    const float zc = z[std::size_t(c)];
    for (std::int64_t j = 0; j < pca.dim; ++j)
      out.values[std::size_t(j)] += zc * row[j];
  }
  return out;
}

}  // namespace emuproto
