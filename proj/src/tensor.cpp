#include "tsgzsl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace tsgzsl::core {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Strides of a shape aligned right against an output rank; broadcast dims get
// stride 0 so the same flat-offset walk serves both operands.
std::vector<std::size_t> aligned_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::vector<std::size_t> own(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) own[i - 1] = own[i] * shape[i];
  const std::size_t offset = out.size() - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    strides[offset + i] = (shape[i] == 1 && out[offset + i] != 1) ? 0 : own[i];
  }
  return strides;
}

// Walks every element of `out`, handing flat offsets into out/a/b to fn.
template <class Fn>
void broadcast_iterate(const Shape& out, const std::vector<std::size_t>& a_str,
                       const std::vector<std::size_t>& b_str, Fn&& fn) {
  const std::size_t rank = out.size();
  const std::size_t total = shape_numel(out);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t io = 0; io < total; ++io) {
    fn(io, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += a_str[d];
      ib += b_str[d];
      if (idx[d] < out[d]) break;
      ia -= a_str[d] * out[d];
      ib -= b_str[d] * out[d];
      idx[d] = 0;
    }
  }
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      fail(std::string(op) + ": shapes not broadcastable: " + shape_str(a) + " vs " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

bool out_requires(const Tape& tape, std::initializer_list<const TensorPtr*> ins) {
  if (!tape.enabled()) return false;
  for (const TensorPtr* t : ins) {
    if (*t && (*t)->requires_grad) return true;
  }
  return false;
}

// Shared skeleton for broadcasted elementwise binaries. `f` computes the
// forward value; `da`/`db` map (out-grad, a-value, b-value) to the gradient
// contribution for each operand.
template <class F, class DA, class DB>
TensorPtr binary_ew(Tape& tape, const TensorPtr& a, const TensorPtr& b, const char* opname, F f,
                    DA da, DB db) {
  require(a && b, std::string(opname) + ": null operand");
  const Shape out_shape = broadcast_shape(a->shape, b->shape, opname);
  auto a_str = aligned_strides(a->shape, out_shape);
  auto b_str = aligned_strides(b->shape, out_shape);
  auto out = Tensor::zeros(out_shape, out_requires(tape, {&a, &b}));
  broadcast_iterate(out_shape, a_str, b_str, [&](std::size_t io, std::size_t ia, std::size_t ib) {
    out->values[io] = f(a->values[ia], b->values[ib]);
  });
  if (out->requires_grad) {
    tape.record(opname, {a, b}, out,
                [a, b, out, out_shape, a_str = std::move(a_str), b_str = std::move(b_str), da, db]() {
                  broadcast_iterate(out_shape, a_str, b_str,
                                    [&](std::size_t io, std::size_t ia, std::size_t ib) {
                                      const double g = out->grad[io];
                                      if (a->requires_grad) a->grad[ia] += da(g, a->values[ia], b->values[ib]);
                                      if (b->requires_grad) b->grad[ib] += db(g, a->values[ia], b->values[ib]);
                                    });
                });
  }
  return out;
}

template <class F, class D>
TensorPtr unary_ew(Tape& tape, const TensorPtr& a, const char* opname, F f, D d) {
  require(a != nullptr, std::string(opname) + ": null operand");
  auto out = Tensor::zeros(a->shape, out_requires(tape, {&a}));
  for (std::size_t i = 0; i < a->numel(); ++i) out->values[i] = f(a->values[i]);
  if (out->requires_grad) {
    tape.record(opname, {a}, out, [a, out, d]() {
      for (std::size_t i = 0; i < a->numel(); ++i) {
        a->grad[i] += d(out->grad[i], a->values[i], out->values[i]);
      }
    });
  }
  return out;
}

std::size_t time_axis(const TensorPtr& x, const char* op) {
  if (x->rank() == 1) return 0;
  if (x->rank() == 3) return 1;
  fail(std::string(op) + ": expected rank-1 or rank-3 input, got shape " + shape_str(x->shape));
}

}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

TensorPtr Tensor::create(Shape shape, std::vector<double> values, bool requires_grad) {
  require(!shape.empty(), "Tensor: shape must have at least one dimension");
  for (std::size_t d : shape) require(d > 0, "Tensor: dimensions must be positive, got " + shape_str(shape));
  require(values.size() == shape_numel(shape),
          "Tensor: value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->values.size(), 0.0);
  return t;
}

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return create(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr Tensor::full(Shape shape, double v, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return create(std::move(shape), std::vector<double>(n, v), requires_grad);
}

TensorPtr Tensor::scalar(double v, bool requires_grad) { return create({1}, {v}, requires_grad); }

TensorPtr Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::vector<double> vals(shape_numel(shape));
  for (double& v : vals) v = rng.uniform_real(lo, hi);
  return create(std::move(shape), std::move(vals), requires_grad);
}

double Tensor::item() const {
  require(numel() == 1, "Tensor::item: tensor has shape " + shape_str(shape) + ", expected a scalar");
  return values[0];
}

void Tensor::zero_grad() {
  if (!requires_grad) return;
  grad.assign(values.size(), 0.0);
  has_grad = false;
}

void Tape::record(std::string op, std::vector<TensorPtr> inputs, TensorPtr output,
                  std::function<void()> backward_fn) {
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward_fn)});
}

void Tape::backward(const TensorPtr& loss) {
  require(loss != nullptr, "backward: null loss");
  require(loss->numel() == 1, "backward: loss must be scalar, got shape " + shape_str(loss->shape));
  require(!nodes_.empty(), "backward: tape is empty");

  std::unordered_set<Tensor*> touched;
  for (const Node& n : nodes_) {
    for (const TensorPtr& in : n.inputs) {
      if (in && in->requires_grad) touched.insert(in.get());
    }
    if (n.output && n.output->requires_grad) touched.insert(n.output.get());
  }
  for (Tensor* t : touched) {
    t->grad.assign(t->values.size(), 0.0);
    t->has_grad = true;
  }
  if (loss->requires_grad) {
    if (!touched.count(loss.get())) {
      loss->grad.assign(1, 0.0);
      loss->has_grad = true;
    }
    loss->grad[0] = 1.0;
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    nodes_[i].backward();
  }
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_ew(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_ew(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_ew(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; }, [](double g, double x, double) { return g * x; });
}

TensorPtr div(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_ew(
      tape, a, b, "div", [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

TensorPtr mask_mul(Tape& tape, const TensorPtr& x, const TensorPtr& mask) { return mul(tape, x, mask); }

TensorPtr scale(Tape& tape, const TensorPtr& a, double c) { return mul(tape, a, Tensor::scalar(c)); }

TensorPtr add_scalar(Tape& tape, const TensorPtr& a, double c) { return add(tape, a, Tensor::scalar(c)); }

TensorPtr relu(Tape& tape, const TensorPtr& a) {
  return unary_ew(
      tape, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

TensorPtr exp(Tape& tape, const TensorPtr& a) {
  return unary_ew(
      tape, a, "exp", [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
}

TensorPtr log(Tape& tape, const TensorPtr& a) {
  return unary_ew(
      tape, a, "log", [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  require(a && b, "matmul: null operand");
  require(a->rank() == 2 && b->rank() == 2 && a->shape[1] == b->shape[0],
          "matmul: incompatible shapes " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = Tensor::zeros({m, n}, out_requires(tape, {&a, &b}));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a->values[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out->values[i * n + j] += av * b->values[p * n + j];
    }
  }
  if (out->requires_grad) {
    tape.record("matmul", {a, b}, out, [a, b, out, m, k, n]() {
      if (a->requires_grad) {
        // dA = dC * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += out->grad[i * n + j] * b->values[p * n + j];
            a->grad[i * k + p] += acc;
          }
      }
      if (b->requires_grad) {
        // dB = A^T * dC
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            const double av = a->values[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) b->grad[p * n + j] += av * out->grad[i * n + j];
          }
      }
    });
  }
  return out;
}

TensorPtr transpose(Tape& tape, const TensorPtr& a) {
  require(a != nullptr, "transpose: null operand");
  require(a->rank() == 2, "transpose: expected rank-2, got shape " + shape_str(a->shape));
  const std::size_t m = a->shape[0], n = a->shape[1];
  auto out = Tensor::zeros({n, m}, out_requires(tape, {&a}));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->values[j * m + i] = a->values[i * n + j];
  if (out->requires_grad) {
    tape.record("transpose", {a}, out, [a, out, m, n]() {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

TensorPtr dot(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  require(a && b, "dot: null operand");
  require(a->rank() == 1 && b->rank() == 1 && a->shape[0] == b->shape[0],
          "dot: incompatible shapes " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  double acc = 0.0;
  for (std::size_t i = 0; i < a->numel(); ++i) acc += a->values[i] * b->values[i];
  auto out = Tensor::create({1}, {acc}, out_requires(tape, {&a, &b}));
  if (out->requires_grad) {
    tape.record("dot", {a, b}, out, [a, b, out]() {
      const double g = out->grad[0];
      for (std::size_t i = 0; i < a->numel(); ++i) {
        if (a->requires_grad) a->grad[i] += g * b->values[i];
        if (b->requires_grad) b->grad[i] += g * a->values[i];
      }
    });
  }
  return out;
}

TensorPtr conv1d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 std::size_t dilation, bool same_padding) {
  require(x && w, "conv1d: null operand");
  require(x->rank() == 3, "conv1d: input must be (B,T,Cin), got " + shape_str(x->shape));
  require(w->rank() == 3, "conv1d: kernel must be (Cout,Cin,K), got " + shape_str(w->shape));
  require(dilation >= 1, "conv1d: dilation must be >= 1");
  const std::size_t B = x->shape[0], T = x->shape[1], Cin = x->shape[2];
  const std::size_t Cout = w->shape[0], K = w->shape[2];
  require(w->shape[1] == Cin, "conv1d: channel mismatch, input " + shape_str(x->shape) + " vs kernel " +
                                  shape_str(w->shape));
  if (bias) {
    require(bias->rank() == 1 && bias->shape[0] == Cout,
            "conv1d: bias shape " + shape_str(bias->shape) + " does not match Cout=" + std::to_string(Cout));
  }
  const std::size_t span = dilation * (K - 1);  // effective kernel span minus one
  std::size_t pad_left = 0, t_out = 0;
  if (same_padding) {
    pad_left = span / 2;
    t_out = T;
  } else {
    require(T > span, "conv1d: input length " + std::to_string(T) + " shorter than effective kernel span " +
                          std::to_string(span + 1) + " and no padding requested");
    t_out = T - span;
  }

  auto out = Tensor::zeros({B, t_out, Cout}, out_requires(tape, {&x, &w, &bias}));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      double* o = &out->values[(b * t_out + t) * Cout];
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(t + k * dilation) - static_cast<std::ptrdiff_t>(pad_left);
        if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* xi = &x->values[(b * T + static_cast<std::size_t>(ti)) * Cin];
        for (std::size_t co = 0; co < Cout; ++co) {
          const double* wk = &w->values[(co * Cin) * K + k];
          double acc = 0.0;
          for (std::size_t ci = 0; ci < Cin; ++ci) acc += xi[ci] * wk[ci * K];
          o[co] += acc;
        }
      }
      if (bias) {
        for (std::size_t co = 0; co < Cout; ++co) o[co] += bias->values[co];
      }
    }
  }
  if (out->requires_grad) {
    std::vector<TensorPtr> ins{x, w};
    if (bias) ins.push_back(bias);
    tape.record("conv1d", ins, out, [x, w, bias, out, B, T, Cin, Cout, K, dilation, pad_left, t_out]() {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < t_out; ++t) {
          const double* go = &out->grad[(b * t_out + t) * Cout];
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t ti =
                static_cast<std::ptrdiff_t>(t + k * dilation) - static_cast<std::ptrdiff_t>(pad_left);
            if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
            const std::size_t xoff = (b * T + static_cast<std::size_t>(ti)) * Cin;
            for (std::size_t co = 0; co < Cout; ++co) {
              const double g = go[co];
              if (g == 0.0) continue;
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                if (x->requires_grad) x->grad[xoff + ci] += g * w->values[(co * Cin + ci) * K + k];
                if (w->requires_grad) w->grad[(co * Cin + ci) * K + k] += g * x->values[xoff + ci];
              }
            }
          }
          if (bias && bias->requires_grad) {
            for (std::size_t co = 0; co < Cout; ++co) bias->grad[co] += go[co];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr maxpool_time(Tape& tape, const TensorPtr& x, std::size_t window, std::size_t stride) {
  require(x != nullptr, "maxpool: null operand");
  require(window >= 1 && stride >= 1, "maxpool: window and stride must be >= 1");
  const std::size_t axis = time_axis(x, "maxpool");
  const std::size_t T = x->shape[axis];
  require(T >= window, "maxpool: input length " + std::to_string(T) + " shorter than window " +
                           std::to_string(window));
  const std::size_t t_out = (T - window) / stride + 1;
  const std::size_t B = x->rank() == 3 ? x->shape[0] : 1;
  const std::size_t C = x->rank() == 3 ? x->shape[2] : 1;

  Shape out_shape = x->shape;
  out_shape[axis] = t_out;
  auto out = Tensor::zeros(out_shape, out_requires(tape, {&x}));
  // argmax (first max on ties) saved for the backward routing
  auto arg = std::make_shared<std::vector<std::size_t>>(out->numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best_idx = (b * T + t * stride) * C + c;
        double best = x->values[best_idx];
        for (std::size_t k = 1; k < window; ++k) {
          const std::size_t idx = (b * T + t * stride + k) * C + c;
          if (x->values[idx] > best) {
            best = x->values[idx];
            best_idx = idx;
          }
        }
        const std::size_t oidx = (b * t_out + t) * C + c;
        out->values[oidx] = best;
        (*arg)[oidx] = best_idx;
      }
    }
  }
  if (out->requires_grad) {
    tape.record("maxpool", {x}, out, [x, out, arg]() {
      for (std::size_t i = 0; i < out->numel(); ++i) x->grad[(*arg)[i]] += out->grad[i];
    });
  }
  return out;
}

namespace {

Shape reduced_shape(const Shape& in, std::size_t axis, bool keepdim) {
  Shape out = in;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out.empty()) out = {1};
  }
  return out;
}

// Decomposes a reduction into (outer, axis length, inner) extents so flat
// offsets can be recovered as (o * len + a) * inner + i.
struct ReduceDims {
  std::size_t outer = 1, len = 1, inner = 1;
};

ReduceDims reduce_dims(const Shape& s, std::size_t axis) {
  ReduceDims d;
  for (std::size_t i = 0; i < axis; ++i) d.outer *= s[i];
  d.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) d.inner *= s[i];
  return d;
}

}  // namespace

TensorPtr reduce_sum(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim) {
  require(x != nullptr, "reduce_sum: null operand");
  require(axis < x->rank(), "reduce_sum: axis " + std::to_string(axis) + " out of range for " + shape_str(x->shape));
  const ReduceDims d = reduce_dims(x->shape, axis);
  auto out = Tensor::zeros(reduced_shape(x->shape, axis, keepdim), out_requires(tape, {&x}));
  for (std::size_t o = 0; o < d.outer; ++o)
    for (std::size_t a = 0; a < d.len; ++a)
      for (std::size_t i = 0; i < d.inner; ++i)
        out->values[o * d.inner + i] += x->values[(o * d.len + a) * d.inner + i];
  if (out->requires_grad) {
    tape.record("reduce_sum", {x}, out, [x, out, d]() {
      for (std::size_t o = 0; o < d.outer; ++o)
        for (std::size_t a = 0; a < d.len; ++a)
          for (std::size_t i = 0; i < d.inner; ++i)
            x->grad[(o * d.len + a) * d.inner + i] += out->grad[o * d.inner + i];
    });
  }
  return out;
}

TensorPtr reduce_mean(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim) {
  require(x != nullptr, "reduce_mean: null operand");
  require(axis < x->rank(), "reduce_mean: axis " + std::to_string(axis) + " out of range for " + shape_str(x->shape));
  auto s = reduce_sum(tape, x, axis, keepdim);
  return scale(tape, s, 1.0 / static_cast<double>(x->shape[axis]));
}

TensorPtr reduce_max(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim) {
  require(x != nullptr, "reduce_max: null operand");
  require(axis < x->rank(), "reduce_max: axis " + std::to_string(axis) + " out of range for " + shape_str(x->shape));
  const ReduceDims d = reduce_dims(x->shape, axis);
  auto out = Tensor::zeros(reduced_shape(x->shape, axis, keepdim), out_requires(tape, {&x}));
  auto arg = std::make_shared<std::vector<std::size_t>>(out->numel());
  for (std::size_t o = 0; o < d.outer; ++o) {
    for (std::size_t i = 0; i < d.inner; ++i) {
      std::size_t best_idx = o * d.len * d.inner + i;
      double best = x->values[best_idx];
      for (std::size_t a = 1; a < d.len; ++a) {
        const std::size_t idx = (o * d.len + a) * d.inner + i;
        if (x->values[idx] > best) {
          best = x->values[idx];
          best_idx = idx;
        }
      }
      out->values[o * d.inner + i] = best;
      (*arg)[o * d.inner + i] = best_idx;
    }
  }
  if (out->requires_grad) {
    tape.record("reduce_max", {x}, out, [x, out, arg]() {
      for (std::size_t i = 0; i < out->numel(); ++i) x->grad[(*arg)[i]] += out->grad[i];
    });
  }
  return out;
}

TensorPtr reduce_sum_all(Tape& tape, const TensorPtr& x) {
  require(x != nullptr, "reduce_sum_all: null operand");
  double acc = 0.0;
  for (double v : x->values) acc += v;
  auto out = Tensor::create({1}, {acc}, out_requires(tape, {&x}));
  if (out->requires_grad) {
    tape.record("reduce_sum_all", {x}, out, [x, out]() {
      const double g = out->grad[0];
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

TensorPtr reduce_mean_all(Tape& tape, const TensorPtr& x) {
  require(x != nullptr, "reduce_mean_all: null operand");
  return scale(tape, reduce_sum_all(tape, x), 1.0 / static_cast<double>(x->numel()));
}

TensorPtr concat(Tape& tape, const std::vector<TensorPtr>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& ref = parts[0]->shape;
  require(axis < ref.size(), "concat: axis " + std::to_string(axis) + " out of range for " + shape_str(ref));
  std::size_t axis_total = 0;
  for (const TensorPtr& p : parts) {
    require(p != nullptr, "concat: null operand");
    require(p->rank() == ref.size(), "concat: rank mismatch " + shape_str(p->shape) + " vs " + shape_str(ref));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis) {
        require(p->shape[i] == ref[i],
                "concat: shape mismatch " + shape_str(p->shape) + " vs " + shape_str(ref));
      }
    }
    axis_total += p->shape[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = axis_total;

  bool req = false;
  for (const TensorPtr& p : parts) req = req || p->requires_grad;
  auto out = Tensor::zeros(out_shape, tape.enabled() && req);

  const ReduceDims d = reduce_dims(out_shape, axis);
  // copy [o, offset .. offset+len_p, i] slabs part by part
  std::size_t offset = 0;
  for (const TensorPtr& p : parts) {
    const std::size_t lp = p->shape[axis];
    for (std::size_t o = 0; o < d.outer; ++o)
      for (std::size_t a = 0; a < lp; ++a)
        for (std::size_t i = 0; i < d.inner; ++i)
          out->values[(o * d.len + offset + a) * d.inner + i] = p->values[(o * lp + a) * d.inner + i];
    offset += lp;
  }
  if (out->requires_grad) {
    auto parts_copy = parts;
    tape.record("concat", parts_copy, out, [parts_copy, out, d, axis]() {
      std::size_t offset = 0;
      for (const TensorPtr& p : parts_copy) {
        const std::size_t lp = p->shape[axis];
        if (p->requires_grad) {
          for (std::size_t o = 0; o < d.outer; ++o)
            for (std::size_t a = 0; a < lp; ++a)
              for (std::size_t i = 0; i < d.inner; ++i)
                p->grad[(o * lp + a) * d.inner + i] += out->grad[(o * d.len + offset + a) * d.inner + i];
        }
        offset += lp;
      }
    });
  }
  return out;
}

TensorPtr slice(Tape& tape, const TensorPtr& x, std::size_t axis, std::size_t start, std::size_t end) {
  require(x != nullptr, "slice: null operand");
  require(axis < x->rank(), "slice: axis " + std::to_string(axis) + " out of range for " + shape_str(x->shape));
  require(start < end && end <= x->shape[axis],
          "slice: invalid range [" + std::to_string(start) + "," + std::to_string(end) + ") for axis of length " +
              std::to_string(x->shape[axis]));
  Shape out_shape = x->shape;
  out_shape[axis] = end - start;
  auto out = Tensor::zeros(out_shape, out_requires(tape, {&x}));
  const ReduceDims d = reduce_dims(x->shape, axis);
  const std::size_t lo = end - start;
  for (std::size_t o = 0; o < d.outer; ++o)
    for (std::size_t a = 0; a < lo; ++a)
      for (std::size_t i = 0; i < d.inner; ++i)
        out->values[(o * lo + a) * d.inner + i] = x->values[(o * d.len + start + a) * d.inner + i];
  if (out->requires_grad) {
    tape.record("slice", {x}, out, [x, out, d, start, lo]() {
      for (std::size_t o = 0; o < d.outer; ++o)
        for (std::size_t a = 0; a < lo; ++a)
          for (std::size_t i = 0; i < d.inner; ++i)
            x->grad[(o * d.len + start + a) * d.inner + i] += out->grad[(o * lo + a) * d.inner + i];
    });
  }
  return out;
}

TensorPtr reshape(Tape& tape, const TensorPtr& x, Shape new_shape) {
  require(x != nullptr, "reshape: null operand");
  require(shape_numel(new_shape) == x->numel(),
          "reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(new_shape));
  auto out = Tensor::create(std::move(new_shape), x->values, out_requires(tape, {&x}));
  if (out->requires_grad) {
    tape.record("reshape", {x}, out, [x, out]() {
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr logsumexp_rows(Tape& tape, const TensorPtr& x) {
  require(x != nullptr, "logsumexp_rows: null operand");
  require(x->rank() == 2, "logsumexp_rows: expected rank-2, got " + shape_str(x->shape));
  auto m = reduce_max(tape, x, 1, /*keepdim=*/true);          // (n,1)
  auto e = exp(tape, sub(tape, x, m));                        // (n,m)
  auto s = reduce_sum(tape, e, 1, /*keepdim=*/true);          // (n,1)
  return add(tape, log(tape, s), m);
}

}  // namespace tsgzsl::core
