#include "emuproto/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emuproto {

double mse(const std::vector<float>& pred, const std::vector<float>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("mse: field sizes differ");
  if (pred.empty()) throw std::invalid_argument("mse: empty fields");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(truth[i]);
    acc += d * d;
  }
  return acc / double(pred.size());
}

double iou(const std::vector<float>& pred, const std::vector<float>& truth,
           double alpha) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("iou: field sizes differ");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("iou: alpha must be in (0,1)");
  const float peak = *std::max_element(truth.begin(), truth.end());
  if (!(peak > 0.0f))
    throw std::invalid_argument("iou: truth field has no positive value");
  const double tau = alpha * double(peak);
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = double(pred[i]) > tau;
    const bool t = double(truth[i]) > tau;
    inter += (p && t);
    uni += (p || t);
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

Summary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("summarize: empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / double(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return Summary{mean, std::sqrt(sq / double(xs.size()))};
}

}  // namespace emuproto
