#pragma once

#include <vector>

namespace emuproto {

// Pixelwise mean squared error; symmetric, double accumulation in index order.
double mse(const std::vector<float>& pred, const std::vector<float>& truth);

// Intersection-over-union of the masks {x > alpha * max(truth)} of both
// fields. Empty union -> 1. Throws if truth has no positive value (the
// threshold would be undefined) or alpha is outside (0,1).
double iou(const std::vector<float>& pred, const std::vector<float>& truth,
           double alpha = 0.01);

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;  // population standard deviation
};

Summary summarize(const std::vector<double>& xs);

}  // namespace emuproto
