#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace emuproto {

class Tape;

// Dense row-major float32 tensor. The buffer is shared and treated as
// immutable once the tensor participates in any op; training code mutates
// parameter buffers only between tapes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<float> values);

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t size() const;
  std::int64_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::int64_t cols() const;  // size / rows, i.e. trailing dims flattened

  const float* data() const { return data_->data(); }
  float* mutable_data() { return data_->data(); }
  float at(std::int64_t i) const { return (*data_)[std::size_t(i)]; }
  bool all_finite() const;

  std::string shape_str() const;

  // tape bookkeeping
  bool traced() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  friend Tensor make_traced(Tape* tape, Tensor value,
                            std::function<void(Tape&)> backward);
  std::vector<std::int64_t> shape_;
  std::shared_ptr<std::vector<float>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Reverse-mode tape. Ops append nodes in execution order; backward() walks
// the records in reverse. One tape per training worker; not thread-safe.
class Tape {
 public:
  // Registers `value` as a leaf. Trainable leaves receive gradients.
  Tensor leaf(const Tensor& value, bool trainable = true);

  // Gradient of the last backward() pass with respect to a trainable leaf.
  Tensor grad(const Tensor& leaf) const;

  void backward(const Tensor& loss);

  int num_nodes() const { return int(nodes_.size()); }

 private:
  friend Tensor make_traced(Tape* tape, Tensor value,
                            std::function<void(Tape&)> backward);
  friend std::vector<float>& grad_buffer(Tape& tape, int node);

  struct Node {
    std::function<void(Tape&)> backward;  // null for leaves
    std::int64_t size = 0;
    bool trainable = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<float>> grads_;
};

// ---- forward ops (recorded on the tape when any input is traced) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& a);
Tensor bias_add(const Tensor& a, const Tensor& bias);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<std::int32_t>& idx);
Tensor segment_sum(const Tensor& a, const std::vector<std::int32_t>& seg,
                   std::int64_t n_segments);
Tensor segment_mean(const Tensor& a, const std::vector<std::int32_t>& seg,
                    std::int64_t n_segments);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// max over coordinates of |analytic - central difference| / max(1, |cd|).
// `f` must build a scalar loss from the traced leaf it is handed.
double gradcheck(const std::function<Tensor(Tape&, const Tensor&)>& f,
                 const Tensor& x, float step);

}  // namespace emuproto
