#include "emuproto/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "emuproto/kernels.hpp"

namespace emuproto {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t p = 1;
  for (auto d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative extent");
    p *= d;
  }
  return p;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a,
                              const Tensor& b) {
  throw std::invalid_argument(op + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

Tape* tape_of(std::initializer_list<const Tensor*> inputs) {
  Tape* t = nullptr;
  for (const Tensor* x : inputs) {
    if (!x->traced()) continue;
    if (t && t != x->tape())
      throw std::invalid_argument("op mixes tensors from different tapes");
    t = x->tape();
  }
  return t;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<float>>(
          std::size_t(shape_product(shape_)), 0.0f)) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<float> values)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<float>>(std::move(values))) {
  if (shape_product(shape_) != std::int64_t(data_->size()))
    throw std::invalid_argument("Tensor: shape/data length mismatch");
}

std::int64_t Tensor::size() const {
  return data_ ? std::int64_t(data_->size()) : 0;
}

std::int64_t Tensor::cols() const {
  const auto r = rows();
  return r > 0 ? size() / r : 0;
}

bool Tensor::all_finite() const {
  for (float v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i)
    os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

// ---- tape ----

Tensor make_traced(Tape* tape, Tensor value,
                   std::function<void(Tape&)> backward) {
  if (!tape) return value;
  value.tape_ = tape;
  value.node_ = int(tape->nodes_.size());
  tape->nodes_.push_back(
      {std::move(backward), value.size(), /*trainable=*/false});
  return value;
}

std::vector<float>& grad_buffer(Tape& tape, int node) {
  return tape.grads_[std::size_t(node)];
}

Tensor Tape::leaf(const Tensor& value, bool trainable) {
  Tensor t = value;
  t.tape_ = this;
  t.node_ = int(nodes_.size());
  nodes_.push_back({nullptr, t.size(), trainable});
  return t;
}

Tensor Tape::grad(const Tensor& leaf) const {
  if (leaf.tape() != this || leaf.node() < 0)
    throw std::invalid_argument("grad: tensor is not a leaf of this tape");
  return Tensor(leaf.shape(), grads_[std::size_t(leaf.node())]);
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this)
    throw std::invalid_argument("backward: loss was not produced on this tape");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                loss.shape_str());
  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    grads_[i].assign(std::size_t(nodes_[i].size), 0.0f);
  grads_[std::size_t(loss.node())][0] = 1.0f;
  for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
    if (nodes_[std::size_t(i)].backward) nodes_[std::size_t(i)].backward(*this);
  }
}

// ---- ops ----

namespace {

// Accumulate src into the grad buffer of `node` (no-op for untraced inputs).
void acc_grad(Tape& tape, int node, const std::vector<float>& src) {
  if (node < 0) return;
  auto& dst = grad_buffer(tape, node);
  kernels::add(std::int64_t(dst.size()), dst.data(), src.data(), dst.data());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    shape_error("matmul", a, b);
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  kernels::matmul(m, n, k, a.data(), b.data(), out.mutable_data());
  Tape* tape = tape_of({&a, &b});
  auto ad = a, bd = b;
  int onode = tape ? int(tape->num_nodes()) : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    if (ad.node() >= 0)
      kernels::matmul_nt_acc(m, k, n, g.data(), bd.data(),
                             grad_buffer(t, ad.node()).data());
    if (bd.node() >= 0)
      kernels::matmul_tn_acc(k, n, m, ad.data(), g.data(),
                             grad_buffer(t, bd.node()).data());
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  Tensor out(a.shape());
  kernels::add(a.size(), a.data(), b.data(), out.mutable_data());
  Tape* tape = tape_of({&a, &b});
  int an = a.node(), bn = b.node(), onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    acc_grad(t, an, g);
    acc_grad(t, bn, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  Tensor out(a.shape());
  kernels::sub(a.size(), a.data(), b.data(), out.mutable_data());
  Tape* tape = tape_of({&a, &b});
  int an = a.node(), bn = b.node(), onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    acc_grad(t, an, g);
    if (bn >= 0)
      kernels::axpy(std::int64_t(g.size()), -1.0f, g.data(),
                    grad_buffer(t, bn).data());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  Tensor out(a.shape());
  kernels::mul(a.size(), a.data(), b.data(), out.mutable_data());
  Tape* tape = tape_of({&a, &b});
  auto ad = a, bd = b;
  int onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    std::vector<float> tmp(g.size());
    if (ad.node() >= 0) {
      kernels::mul(std::int64_t(g.size()), g.data(), bd.data(), tmp.data());
      acc_grad(t, ad.node(), tmp);
    }
    if (bd.node() >= 0) {
      kernels::mul(std::int64_t(g.size()), g.data(), ad.data(), tmp.data());
      acc_grad(t, bd.node(), tmp);
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  Tensor out(a.shape());
  kernels::scale(a.size(), a.data(), s, out.mutable_data());
  Tape* tape = tape_of({&a});
  int an = a.node(), onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    if (an >= 0)
      kernels::axpy(std::int64_t(g.size()), s, g.data(),
                    grad_buffer(t, an).data());
  });
}

Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  kernels::relu(a.size(), a.data(), out.mutable_data());
  Tape* tape = tape_of({&a});
  auto ad = a;
  int onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    if (ad.node() < 0) return;
    const auto& g = grad_buffer(t, onode);
    kernels::relu_grad_acc(std::int64_t(g.size()), ad.data(), g.data(),
                           grad_buffer(t, ad.node()).data());
  });
}

Tensor bias_add(const Tensor& a, const Tensor& bias) {
  if (a.shape().size() != 2 || bias.size() != a.shape()[1])
    shape_error("bias_add", a, bias);
  const std::int64_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out(a.shape());
  kernels::bias_add(rows, cols, a.data(), bias.data(), out.mutable_data());
  Tape* tape = tape_of({&a, &bias});
  int an = a.node(), bn = bias.node(), onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    acc_grad(t, an, g);
    if (bn >= 0) {
      auto& bg = grad_buffer(t, bn);
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
          bg[std::size_t(c)] += g[std::size_t(r * cols + c)];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::int64_t rows = parts[0].rows();
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.rows() != rows)
      shape_error("concat_cols", parts[0], p);
    total += p.shape()[1];
  }
  Tensor out({rows, total});
  float* dst = out.mutable_data();
  std::int64_t off = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.shape()[1];
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < pc; ++c)
        dst[r * total + off + c] = p.data()[r * pc + c];
    off += pc;
  }
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (!p.traced()) continue;
    if (tape && tape != p.tape())
      throw std::invalid_argument("concat_cols mixes tensors from different tapes");
    tape = p.tape();
  }
  auto held = parts;
  int onode = tape ? tape->num_nodes() : -1;
  return make_traced(tape, std::move(out), [=](Tape& t) {
    const auto& g = grad_buffer(t, onode);
    std::int64_t o = 0;
    for (const auto& p : held) {
      const std::int64_t pc = p.shape()[1];
      if (p.node() >= 0) {
        auto& pg = grad_buffer(t, p.node());
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < pc; ++c)
            pg[std::size_t(r * pc + c)] += g[std::size_t(r * total + o + c)];
      }
      o += pc;
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::int32_t>& idx) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("gather_rows: need 2-D input, got " +
                                a.shape_str());
  const std::int64_t cols = a.shape()[1];
  for (auto i : idx)
    if (i < 0 || i >= a.rows())
      throw std::out_of_range("gather_rows: index " + std::to_string(i) +
                              " out of range [0," + std::to_string(a.rows()) +
                              ")");
  Tensor out({std::int64_t(idx.size()), cols});
  kernels::gather_rows(std::int64_t(idx.size()), cols, a.data(), idx.data(),
                       out.mutable_data());
  Tape* tape = tape_of({&a});
  int an = a.node(), onode = tape ? tape->num_nodes() : -1;
  const std::int64_t arows = a.rows();
  return make_traced(tape, std::move(out), [=](Tape& t) {
    if (an < 0) return;
    const auto& g = grad_buffer(t, onode);
    kernels::scatter_rows_acc(std::int64_t(idx.size()), arows, cols, g.data(),
                              idx.data(), grad_buffer(t, an).data());
  });
}

namespace {
void check_segments(const std::vector<std::int32_t>& seg, std::int64_t n_in,
                    std::int64_t n_segments, const char* op) {
  if (std::int64_t(seg.size()) != n_in)
    throw std::invalid_argument(std::string(op) + ": segment list length " +
                                std::to_string(seg.size()) +
                                " != rows " + std::to_string(n_in));
  for (auto s : seg)
    if (s < 0 || s >= n_segments)
      throw std::out_of_range(std::string(op) + ": segment index " +
                              std::to_string(s) + " out of range [0," +
                              std::to_string(n_segments) + ")");
}
}  // namespace

Tensor segment_sum(const Tensor& a, const std::vector<std::int32_t>& seg,
                   std::int64_t n_segments) {
  const std::int64_t cols = a.cols();
  check_segments(seg, a.rows(), n_segments, "segment_sum");
  Tensor out({n_segments, cols});
  kernels::segment_sum(a.rows(), n_segments, cols, a.data(), seg.data(),
                       out.mutable_data());
  Tape* tape = tape_of({&a});
  int an = a.node(), onode = tape ? tape->num_nodes() : -1;
  const std::int64_t n_in = a.rows();
  return make_traced(tape, std::move(out), [=](Tape& t) {
    if (an < 0) return;
    const auto& g = grad_buffer(t, onode);
    auto& ag = grad_buffer(t, an);
    for (std::int64_t i = 0; i < n_in; ++i)
      for (std::int64_t c = 0; c < cols; ++c)
        ag[std::size_t(i * cols + c)] += g[std::size_t(seg[i] * cols + c)];
  });
}

Tensor segment_mean(const Tensor& a, const std::vector<std::int32_t>& seg,
                    std::int64_t n_segments) {
  const std::int64_t cols = a.cols();
  check_segments(seg, a.rows(), n_segments, "segment_mean");
  Tensor out({n_segments, cols});
  auto counts = std::make_shared<std::vector<std::int32_t>>(
      std::size_t(n_segments));
  kernels::segment_mean(a.rows(), n_segments, cols, a.data(), seg.data(),
                        out.mutable_data(), counts->data());
  Tape* tape = tape_of({&a});
  int an = a.node(), onode = tape ? tape->num_nodes() : -1;
  const std::int64_t n_in = a.rows();
  return make_traced(tape, std::move(out), [=](Tape& t) {
    if (an < 0) return;
    const auto& g = grad_buffer(t, onode);
    auto& ag = grad_buffer(t, an);
    for (std::int64_t i = 0; i < n_in; ++i) {
      const float inv = 1.0f / float((*counts)[std::size_t(seg[i])]);
      for (std::int64_t c = 0; c < cols; ++c)
        ag[std::size_t(i * cols + c)] +=
            inv * g[std::size_t(seg[i] * cols + c)];
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += a.at(i);
  Tensor out = Tensor::scalar(float(acc));
  Tape* tape = tape_of({&a});
  int an = a.node(), onode = tape ? tape->num_nodes() : -1;
  const std::int64_t n = a.size();
  return make_traced(tape, std::move(out), [=](Tape& t) {
    if (an < 0) return;
    const float g = grad_buffer(t, onode)[0];
    auto& ag = grad_buffer(t, an);
    for (std::int64_t i = 0; i < n; ++i) ag[std::size_t(i)] += g;
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0f / float(a.size()));
}

double gradcheck(const std::function<Tensor(Tape&, const Tensor&)>& f,
                 const Tensor& x, float step) {
  if (step <= 0.0f) throw std::invalid_argument("gradcheck: step must be > 0");
  Tape tape;
  Tensor leaf = tape.leaf(x, true);
  Tensor loss = f(tape, leaf);
  if (loss.size() != 1)
    throw std::invalid_argument("gradcheck: f must be scalar-valued");
  if (!std::isfinite(loss.at(0)))
    throw std::runtime_error("gradcheck: f(x) is not finite");
  tape.backward(loss);
  Tensor analytic = tape.grad(leaf);

  std::vector<float> base(x.data(), x.data() + x.size());
  auto eval = [&](const std::vector<float>& v) {
    Tape t;
    Tensor l = f(t, t.leaf(Tensor(x.shape(), v), false));
    return double(l.at(0));
  };
  double max_err = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    auto vp = base, vm = base;
    vp[std::size_t(i)] += step;
    vm[std::size_t(i)] -= step;
    const double cd = (eval(vp) - eval(vm)) / (2.0 * double(step));
    const double err =
        std::abs(double(analytic.at(i)) - cd) / std::max(1.0, std::abs(cd));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace emuproto
