#include "adaptkit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adaptkit/errors.hpp"
#include "adaptkit/kernels.hpp"

namespace adaptkit {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::gelu:
      return "gelu";
    case Activation::swish:
      return "swish";
    case Activation::tanh:
      return "tanh";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::gelu, Activation::swish, Activation::tanh})
    if (activation_name(a) == name) return a;
  throw ValidationError("unknown non_linearity '" + std::string(name) +
                        "' (expected relu, gelu, swish or tanh)");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::gelu:
      return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    case Activation::swish:
      return x * sigmoid(x);
    case Activation::tanh:
      return std::tanh(x);
  }
  return 0.0;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + x * pdf;
    }
    case Activation::swish: {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 0.0;
}

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::leaf:
      return "leaf";
    case Primitive::matmul:
      return "matmul";
    case Primitive::add:
      return "add";
    case Primitive::add_bias:
      return "add_bias";
    case Primitive::scale:
      return "scale";
    case Primitive::activation:
      return "activation";
    case Primitive::softmax_rows:
      return "softmax_rows";
    case Primitive::layer_norm:
      return "layer_norm";
    case Primitive::embedding_lookup:
      return "embedding_lookup";
    case Primitive::pool_first:
      return "pool_first";
    case Primitive::transpose:
      return "transpose";
    case Primitive::slice_cols:
      return "slice_cols";
    case Primitive::concat_cols:
      return "concat_cols";
    case Primitive::sum:
      return "sum";
    case Primitive::softmax_cross_entropy:
      return "softmax_cross_entropy";
    case Primitive::mse:
      return "mse";
  }
  return "unknown";
}

const Tensor* Gradients::get(Var v) const {
  if (v.id >= grads_.size() || grads_[v.id].size() == 0) return nullptr;
  return &grads_[v.id];
}

namespace {

[[noreturn]] void shape_mismatch(Primitive p, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(primitive_name(p)) + ": shape mismatch " + shape_str(a) +
                   " vs " + shape_str(b));
}

Tensor transposed(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.size() == 0) {
    dst = Tensor(src.shape(), 0.0);
  }
  kernels::active().axpy(1.0, src.data().data(), dst.data().data(), src.size());
}

Tensor& grad_slot(std::vector<Tensor>& grads, Var v, const Shape& shape) {
  Tensor& g = grads[v.id];
  if (g.size() == 0) g = Tensor(shape, 0.0);
  return g;
}

}  // namespace

bool Tape::any_grad(std::initializer_list<Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return nodes_[v.id].requires_grad; });
}

Var Tape::push(Tensor value, Record rec) {
  for (double v : value.data())
    if (!std::isfinite(v))
      throw NumericError(std::string(primitive_name(rec.kind)) + ": non-finite output");
  bool needs = false;
  for (Var in : rec.inputs) needs = needs || nodes_.at(in.id).requires_grad;
  Var out{static_cast<std::uint32_t>(nodes_.size())};
  nodes_.push_back({std::move(value), needs});
  if (needs) {
    rec.output = out;
    records_.push_back(std::move(rec));
  }
  return out;
}

Var Tape::leaf(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) throw NumericError("leaf: non-finite value");
  Var out{static_cast<std::uint32_t>(nodes_.size())};
  Tensor copy = t;
  const bool rg = grad_enabled_ && t.requires_grad();
  copy.set_requires_grad(rg);
  nodes_.push_back({std::move(copy), rg});
  return out;
}

Var Tape::constant(Tensor t) {
  t.set_requires_grad(false);
  return leaf(t);
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    shape_mismatch(Primitive::matmul, A.shape(), B.shape());
  Tensor out({A.rows(), B.cols()}, 0.0);
  kernels::active().gemm_acc(A.data().data(), B.data().data(), out.data().data(), A.rows(),
                             A.cols(), B.cols());
  return push(std::move(out), {Primitive::matmul, {a, b}, {}, {}, {}, 0.0, {}});
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_mismatch(Primitive::add, A.shape(), B.shape());
  Tensor out(A.shape(), 0.0);
  kernels::active().add(A.data().data(), B.data().data(), out.data().data(), A.size());
  return push(std::move(out), {Primitive::add, {a, b}, {}, {}, {}, 0.0, {}});
}

Var Tape::add_bias(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& B = value(bias);
  if (B.rank() != 1 || B.cols() != X.cols())
    shape_mismatch(Primitive::add_bias, X.shape(), B.shape());
  Tensor out(X.shape(), 0.0);
  kernels::active().add_rows(X.data().data(), B.data().data(), out.data().data(), X.rows(),
                             X.cols());
  return push(std::move(out), {Primitive::add_bias, {x, bias}, {}, {}, {}, 0.0, {}});
}

Var Tape::scale(Var x, double alpha) {
  const Tensor& X = value(x);
  Tensor out(X.shape(), 0.0);
  kernels::active().scale(alpha, X.data().data(), out.data().data(), X.size());
  return push(std::move(out), {Primitive::scale, {x}, {}, {}, {}, alpha, {}});
}

Var Tape::activation(Var x, Activation act) {
  const Tensor& X = value(x);
  Tensor out(X.shape(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = activate(act, X[i]);
  return push(std::move(out), {Primitive::activation, {x}, {}, {}, {}, 0.0, act});
}

Var Tape::softmax_rows(Var x) {
  const Tensor& X = value(x);
  Tensor out(X.shape(), 0.0);
  const std::size_t n = X.cols();
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double* in = X.data().data() + r * n;
    double* o = out.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  Record rec{Primitive::softmax_rows, {x}, {}, {}, {}, 0.0, {}};
  if (nodes_[x.id].requires_grad) rec.saved.push_back(out);
  return push(std::move(out), std::move(rec));
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("layer_norm: epsilon must be positive");
  const Tensor& X = value(x);
  const Tensor& G = value(gamma);
  const Tensor& B = value(beta);
  const std::size_t n = X.cols();
  if (G.rank() != 1 || G.cols() != n) shape_mismatch(Primitive::layer_norm, X.shape(), G.shape());
  if (B.rank() != 1 || B.cols() != n) shape_mismatch(Primitive::layer_norm, X.shape(), B.shape());
  Tensor xhat(X.shape(), 0.0);
  Tensor inv_std({X.rows()}, 0.0);
  Tensor out(X.shape(), 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double* in = X.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += in[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(n);
    double* xh = xhat.data().data() + r * n;
    if (var >= epsilon) {
      const double rs = 1.0 / std::sqrt(var + epsilon);
      inv_std[r] = rs;
      for (std::size_t j = 0; j < n; ++j) xh[j] = (in[j] - mean) * rs;
    }
    double* o = out.data().data() + r * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = G[j] * xh[j] + B[j];
  }
  Record rec{Primitive::layer_norm, {x, gamma, beta}, {}, {}, {}, epsilon, {}};
  if (any_grad({x, gamma, beta})) {
    rec.saved.push_back(std::move(xhat));
    rec.saved.push_back(std::move(inv_std));
  }
  return push(std::move(out), std::move(rec));
}

Var Tape::embedding_lookup(Var table, const std::vector<std::size_t>& ids) {
  const Tensor& T = value(table);
  if (T.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2, got " +
                                      shape_str(T.shape()));
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id sequence");
  const std::size_t h = T.cols();
  Tensor out({ids.size(), h}, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= T.rows())
      throw ValidationError("embedding_lookup: id " + std::to_string(ids[i]) +
                            " out of range for table " + shape_str(T.shape()));
    std::copy_n(T.data().data() + ids[i] * h, h, out.data().data() + i * h);
  }
  Record rec{Primitive::embedding_lookup, {table}, {}, {}, ids, 0.0, {}};
  return push(std::move(out), std::move(rec));
}

Var Tape::pool_first(Var x) {
  const Tensor& X = value(x);
  Tensor out({1, X.cols()}, 0.0);
  std::copy_n(X.data().data(), X.cols(), out.data().data());
  return push(std::move(out), {Primitive::pool_first, {x}, {}, {}, {}, 0.0, {}});
}

Var Tape::transpose(Var x) {
  const Tensor& X = value(x);
  if (X.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(X.shape()));
  return push(transposed(X), {Primitive::transpose, {x}, {}, {}, {}, 0.0, {}});
}

Var Tape::slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& X = value(x);
  if (count == 0 || start + count > X.cols())
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_str(X.shape()));
  Tensor out({X.rows(), count}, 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r)
    std::copy_n(X.data().data() + r * X.cols() + start, count, out.data().data() + r * count);
  return push(std::move(out), {Primitive::slice_cols, {x}, {}, {}, {start, count}, 0.0, {}});
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows)
      shape_mismatch(Primitive::concat_cols, value(parts[0]).shape(), value(p).shape());
    total += value(p).cols();
  }
  Tensor out({rows, total}, 0.0);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(P.data().data() + r * P.cols(), P.cols(), out.data().data() + r * total + off);
    off += P.cols();
  }
  return push(std::move(out), {Primitive::concat_cols, parts, {}, {}, {}, 0.0, {}});
}

Var Tape::sum(Var x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data()) s += v;
  return push(Tensor::scalar(s), {Primitive::sum, {x}, {}, {}, {}, 0.0, {}});
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t label) {
  const Tensor& L = value(logits);
  if (L.rows() != 1)
    throw ShapeError("softmax_cross_entropy: expected a single row of logits, got " +
                     shape_str(L.shape()));
  if (label >= L.cols())
    throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) +
                          " outside " + std::to_string(L.cols()) + " classes");
  const std::size_t n = L.cols();
  const double mx = *std::max_element(L.data().begin(), L.data().end());
  Tensor probs(L.shape(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    probs[j] = std::exp(L[j] - mx);
    total += probs[j];
  }
  for (std::size_t j = 0; j < n; ++j) probs[j] /= total;
  const double loss = -(L[label] - mx - std::log(total));
  Record rec{Primitive::softmax_cross_entropy, {logits}, {}, {}, {label}, 0.0, {}};
  if (nodes_[logits.id].requires_grad) rec.saved.push_back(std::move(probs));
  return push(Tensor::scalar(loss), std::move(rec));
}

Var Tape::mse(Var pred, const Tensor& target) {
  const Tensor& P = value(pred);
  if (P.size() != target.size()) shape_mismatch(Primitive::mse, P.shape(), target.shape());
  Tensor diff(P.shape(), 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    diff[i] = P[i] - target[i];
    s += diff[i] * diff[i];
  }
  Record rec{Primitive::mse, {pred}, {}, {}, {}, 0.0, {}};
  if (nodes_[pred.id].requires_grad) rec.saved.push_back(std::move(diff));
  return push(Tensor::scalar(s / static_cast<double>(P.size())), std::move(rec));
}

Gradients Tape::backward(Var loss) const {
  if (!loss.valid() || loss.id >= nodes_.size())
    throw ValidationError("backward: loss does not belong to this tape");
  const Tensor& L = value(loss);
  if (L.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(L.shape()));
  if (!nodes_[loss.id].requires_grad)
    throw ValidationError("backward: loss is detached from every grad-requiring leaf");

  Gradients g;
  g.grads_.resize(nodes_.size());
  g.grads_[loss.id] = Tensor::scalar(1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output.id > loss.id) continue;
    const Tensor& gout = g.grads_[it->output.id];
    if (gout.size() == 0) continue;
    backprop(*it, gout, g.grads_);
  }
  // Intermediate nodes keep their gradients; that is harmless and useful for
  // debugging, but only leaves are part of the contract.
  return g;
}

void Tape::backprop(const Record& rec, const Tensor& gout, std::vector<Tensor>& grads) const {
  const auto& k = kernels::active();
  auto needs = [&](std::size_t i) { return nodes_[rec.inputs[i].id].requires_grad; };

  switch (rec.kind) {
    case Primitive::leaf:
      break;
    case Primitive::matmul: {
      const Tensor& A = value(rec.inputs[0]);
      const Tensor& B = value(rec.inputs[1]);
      if (needs(0)) {
        Tensor& ga = grad_slot(grads, rec.inputs[0], A.shape());
        const Tensor bt = transposed(B);
        k.gemm_acc(gout.data().data(), bt.data().data(), ga.data().data(), A.rows(), B.cols(),
                   A.cols());
      }
      if (needs(1)) {
        Tensor& gb = grad_slot(grads, rec.inputs[1], B.shape());
        const Tensor at = transposed(A);
        k.gemm_acc(at.data().data(), gout.data().data(), gb.data().data(), A.cols(), A.rows(),
                   B.cols());
      }
      break;
    }
    case Primitive::add:
      for (std::size_t i = 0; i < 2; ++i)
        if (needs(i)) accumulate(grads[rec.inputs[i].id], gout);
      break;
    case Primitive::add_bias: {
      if (needs(0)) accumulate(grads[rec.inputs[0].id], gout);
      if (needs(1)) {
        Tensor& gb = grad_slot(grads, rec.inputs[1], value(rec.inputs[1]).shape());
        const std::size_t n = gout.cols();
        for (std::size_t r = 0; r < gout.rows(); ++r)
          k.axpy(1.0, gout.data().data() + r * n, gb.data().data(), n);
      }
      break;
    }
    case Primitive::scale: {
      Tensor& gx = grad_slot(grads, rec.inputs[0], gout.shape());
      k.axpy(rec.alpha, gout.data().data(), gx.data().data(), gout.size());
      break;
    }
    case Primitive::activation: {
      const Tensor& X = value(rec.inputs[0]);
      Tensor& gx = grad_slot(grads, rec.inputs[0], X.shape());
      for (std::size_t i = 0; i < X.size(); ++i)
        gx[i] += gout[i] * activate_derivative(rec.act, X[i]);
      break;
    }
    case Primitive::softmax_rows: {
      const Tensor& Y = rec.saved[0];
      Tensor& gx = grad_slot(grads, rec.inputs[0], Y.shape());
      const std::size_t n = Y.cols();
      for (std::size_t r = 0; r < Y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gout[r * n + j] * Y[r * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += Y[r * n + j] * (gout[r * n + j] - dot);
      }
      break;
    }
    case Primitive::layer_norm: {
      const Tensor& xhat = rec.saved[0];
      const Tensor& inv_std = rec.saved[1];
      const Tensor& G = value(rec.inputs[1]);
      const std::size_t n = xhat.cols();
      const double nd = static_cast<double>(n);
      if (needs(1) || needs(2)) {
        Tensor* gg = needs(1) ? &grad_slot(grads, rec.inputs[1], G.shape()) : nullptr;
        Tensor* gbeta = needs(2) ? &grad_slot(grads, rec.inputs[2], G.shape()) : nullptr;
        for (std::size_t r = 0; r < xhat.rows(); ++r)
          for (std::size_t j = 0; j < n; ++j) {
            if (gg) (*gg)[j] += gout[r * n + j] * xhat[r * n + j];
            if (gbeta) (*gbeta)[j] += gout[r * n + j];
          }
      }
      if (needs(0)) {
        Tensor& gx = grad_slot(grads, rec.inputs[0], xhat.shape());
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < xhat.rows(); ++r) {
          if (inv_std[r] == 0.0) continue;  // zero-variance row: output is constant
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            dxhat[j] = gout[r * n + j] * G[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[r * n + j];
          }
          mean_d /= nd;
          mean_dx /= nd;
          for (std::size_t j = 0; j < n; ++j)
            gx[r * n + j] += inv_std[r] * (dxhat[j] - mean_d - xhat[r * n + j] * mean_dx);
        }
      }
      break;
    }
    case Primitive::embedding_lookup: {
      const Tensor& T = value(rec.inputs[0]);
      Tensor& gt = grad_slot(grads, rec.inputs[0], T.shape());
      const std::size_t h = T.cols();
      for (std::size_t i = 0; i < rec.indices.size(); ++i)
        k.axpy(1.0, gout.data().data() + i * h, gt.data().data() + rec.indices[i] * h, h);
      break;
    }
    case Primitive::pool_first: {
      const Tensor& X = value(rec.inputs[0]);
      Tensor& gx = grad_slot(grads, rec.inputs[0], X.shape());
      k.axpy(1.0, gout.data().data(), gx.data().data(), X.cols());
      break;
    }
    case Primitive::transpose:
      accumulate(grads[rec.inputs[0].id], transposed(gout));
      break;
    case Primitive::slice_cols: {
      const Tensor& X = value(rec.inputs[0]);
      Tensor& gx = grad_slot(grads, rec.inputs[0], X.shape());
      const std::size_t start = rec.indices[0], count = rec.indices[1];
      for (std::size_t r = 0; r < X.rows(); ++r)
        k.axpy(1.0, gout.data().data() + r * count, gx.data().data() + r * X.cols() + start,
               count);
      break;
    }
    case Primitive::concat_cols: {
      std::size_t off = 0;
      const std::size_t total = gout.cols();
      for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
        const Tensor& P = value(rec.inputs[i]);
        if (needs(i)) {
          Tensor& gp = grad_slot(grads, rec.inputs[i], P.shape());
          for (std::size_t r = 0; r < P.rows(); ++r)
            k.axpy(1.0, gout.data().data() + r * total + off, gp.data().data() + r * P.cols(),
                   P.cols());
        }
        off += P.cols();
      }
      break;
    }
    case Primitive::sum: {
      const Tensor& X = value(rec.inputs[0]);
      Tensor& gx = grad_slot(grads, rec.inputs[0], X.shape());
      for (auto& v : gx.data()) v += gout[0];
      break;
    }
    case Primitive::softmax_cross_entropy: {
      const Tensor& probs = rec.saved[0];
      Tensor& gl = grad_slot(grads, rec.inputs[0], probs.shape());
      for (std::size_t j = 0; j < probs.size(); ++j)
        gl[j] += gout[0] * (probs[j] - (j == rec.indices[0] ? 1.0 : 0.0));
      break;
    }
    case Primitive::mse: {
      const Tensor& diff = rec.saved[0];
      Tensor& gp = grad_slot(grads, rec.inputs[0], value(rec.inputs[0]).shape());
      const double c = 2.0 * gout[0] / static_cast<double>(diff.size());
      for (std::size_t i = 0; i < diff.size(); ++i) gp[i] += c * diff[i];
      break;
    }
  }
}

}  // namespace adaptkit
