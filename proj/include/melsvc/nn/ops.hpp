// Copyright 2026 The melsvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "melsvc/nn/tape.hpp"

namespace melsvc::nn {

namespace detail {
inline void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw stage_error("autograd", "operands recorded on different tapes");
}
inline void require_shape(bool ok, const char* op) {
  if (!ok) throw data_error("shape", std::string("shape mismatch in ") + op);
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_shape(a.cols() == b.rows(), "matmul");
  Tape& t = *a.tape;
  Mat out = a.value() * b.value();
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return t.push(std::move(out), ng, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

/// a * b^T.
inline Var matmul_nt(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_shape(a.cols() == b.cols(), "matmul_nt");
  Tape& t = *a.tape;
  Mat out = a.value() * b.value().transpose();
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return t.push(std::move(out), ng, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

inline Var add(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape& t = *a.tape;
  Mat out = a.value() + b.value();
  return t.push(std::move(out), t.needs_grad(a.id) || t.needs_grad(b.id), [a = a.id, b = b.id](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

inline Var sub(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape& t = *a.tape;
  Mat out = a.value() - b.value();
  return t.push(std::move(out), t.needs_grad(a.id) || t.needs_grad(b.id), [a = a.id, b = b.id](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, -t.grad(self));
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Tape& t = *a.tape;
  Mat out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), t.needs_grad(a.id) || t.needs_grad(b.id), [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

/// x + row, with a 1 x D row broadcast over rows.
inline Var add_row(Var x, Var row) {
  detail::same_tape(x, row);
  detail::require_shape(row.rows() == 1 && row.cols() == x.cols(), "add_row");
  Tape& t = *x.tape;
  Mat out = x.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), t.needs_grad(x.id) || t.needs_grad(row.id), [x = x.id, r = row.id](Tape& t, int self) {
    t.accumulate(x, t.grad(self));
    if (t.needs_grad(r)) t.accumulate(r, t.grad(self).colwise().sum());
  });
}

inline Var add_const(Var x, const Mat& c) {
  detail::require_shape(c.rows() == x.rows() && c.cols() == x.cols(), "add_const");
  Tape& t = *x.tape;
  Mat out = x.value() + c;
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) { t.accumulate(x, t.grad(self)); });
}

inline Var scale(Var x, double s) {
  Tape& t = *x.tape;
  Mat out = x.value() * s;
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, s](Tape& t, int self) { t.accumulate(x, t.grad(self) * s); });
}

/// x * w(0, index), where w is a row vector of scalars.
inline Var scale_by_entry(Var x, Var w, Eigen::Index index) {
  detail::same_tape(x, w);
  detail::require_shape(w.rows() == 1 && index < w.cols(), "scale_by_entry");
  Tape& t = *x.tape;
  Mat out = x.value() * w.value()(0, index);
  return t.push(std::move(out), t.needs_grad(x.id) || t.needs_grad(w.id), [x = x.id, w = w.id, index](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(x)) t.accumulate(x, g * t.value(w)(0, index));
    if (t.needs_grad(w)) {
      Mat gw = Mat::Zero(1, t.value(w).cols());
      gw(0, index) = g.cwiseProduct(t.value(x)).sum();
      t.accumulate(w, gw);
    }
  });
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  Mat out = x.value().cwiseMax(0.0);
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    t.accumulate(x, (t.value(x).array() > 0.0).cast<double>().matrix().cwiseProduct(t.grad(self)));
  });
}

inline Var leaky_relu(Var x, double slope = 0.2) {
  Tape& t = *x.tape;
  Mat out = x.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, slope](Tape& t, int self) {
    const Mat d = t.value(x).unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
    t.accumulate(x, d.cwiseProduct(t.grad(self)));
  });
}

inline Var sigmoid(Var x) {
  Tape& t = *x.tape;
  Mat out = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.accumulate(x, t.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

inline Var tanh(Var x) {
  Tape& t = *x.tape;
  Mat out = x.value().array().tanh().matrix();
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.accumulate(x, t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

/// Row-wise softmax.
inline Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  Mat out = x.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    Mat gx = y.cwiseProduct((g.colwise() - dots));
    t.accumulate(x, gx);
  });
}

/// Per-row layer normalization with a learned 1 x D gain and bias.
inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
  detail::same_tape(x, gamma);
  detail::require_shape(gamma.cols() == x.cols() && beta.cols() == x.cols(), "layer_norm");
  Tape& t = *x.tape;
  const Mat& xv = x.value();
  const Eigen::Index d = xv.cols();
  Eigen::VectorXd mean = xv.rowwise().mean();
  Mat centered = xv.colwise() - mean;
  Eigen::VectorXd inv_std = (centered.array().square().rowwise().sum() / static_cast<double>(d) + eps).rsqrt();
  Mat xhat = centered.array().colwise() * inv_std.array();
  Mat out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  const bool ng = t.needs_grad(x.id) || t.needs_grad(gamma.id) || t.needs_grad(beta.id);
  return t.push(std::move(out), ng,
                [x = x.id, g_id = gamma.id, b_id = beta.id, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
                  const Mat& g = t.grad(self);
                  if (t.needs_grad(g_id)) t.accumulate(g_id, g.cwiseProduct(xhat).colwise().sum());
                  if (t.needs_grad(b_id)) t.accumulate(b_id, g.colwise().sum());
                  if (t.needs_grad(x)) {
                    const Mat dxhat = (g.array().rowwise() * t.value(g_id).row(0).array()).matrix();
                    const double d = static_cast<double>(dxhat.cols());
                    const Eigen::VectorXd m1 = dxhat.rowwise().sum() / d;
                    const Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / d;
                    Mat dx = dxhat.colwise() - m1;
                    dx -= (xhat.array().colwise() * m2.array()).matrix();
                    dx = (dx.array().colwise() * inv_std.array()).matrix();
                    t.accumulate(x, dx);
                  }
                });
}

/// Per-column normalization over time followed by a 1 x D affine:
/// y = gamma * (x - mean_t) / (std_t + eps) + beta, population std.
inline Var instance_norm_time(Var x, Var gamma, Var beta, double eps = 1e-5) {
  detail::same_tape(x, gamma);
  detail::require_shape(gamma.cols() == x.cols() && beta.cols() == x.cols(), "instance_norm_time");
  if (x.rows() < 2) throw data_error("degenerate-statistics", "instance norm needs at least 2 frames");
  Tape& t = *x.tape;
  const Mat& xv = x.value();
  const double n = static_cast<double>(xv.rows());
  Eigen::RowVectorXd mean = xv.colwise().mean();
  Mat centered = xv.rowwise() - mean;
  Eigen::RowVectorXd std = (centered.array().square().colwise().sum() / n).sqrt();
  Eigen::RowVectorXd denom = std.array() + eps;
  Mat normalized = (centered.array().rowwise() / denom.array()).matrix();
  Mat out = (normalized.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  const bool ng = t.needs_grad(x.id) || t.needs_grad(gamma.id) || t.needs_grad(beta.id);
  return t.push(std::move(out), ng,
                [x = x.id, g_id = gamma.id, b_id = beta.id, centered = std::move(centered), std = std::move(std),
                 denom = std::move(denom), normalized = std::move(normalized), n](Tape& t, int self) {
                  const Mat& g = t.grad(self);
                  if (t.needs_grad(g_id)) t.accumulate(g_id, g.cwiseProduct(normalized).colwise().sum());
                  if (t.needs_grad(b_id)) t.accumulate(b_id, g.colwise().sum());
                  if (!t.needs_grad(x)) return;
                  const Eigen::RowVectorXd gamma_row = t.value(g_id).row(0);
                  Mat dx(g.rows(), g.cols());
                  for (Eigen::Index c = 0; c < g.cols(); ++c) {
                    const Eigen::VectorXd gc = g.col(c) * gamma_row(c);
                    const Eigen::VectorXd xc = centered.col(c);
                    Eigen::VectorXd d_centered = gc / denom(c);
                    d_centered.array() -= d_centered.mean();
                    if (std(c) > 0.0) {
                      const double d_std = -(gc.cwiseProduct(xc)).sum() / (denom(c) * denom(c));
                      d_centered += xc * (d_std / (n * std(c)));
                    }
                    dx.col(c) = d_centered;
                  }
                  t.accumulate(x, dx);
                });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw data_error("shape", "concat of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index cols = 0;
  bool ng = false;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    detail::require_shape(p.rows() == parts[0].rows(), "concat_cols");
    cols += p.cols();
    ng = ng || t.needs_grad(p.id);
  }
  Mat out(parts[0].rows(), cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    layout.emplace_back(p.id, c);
    c += p.cols();
  }
  return t.push(std::move(out), ng, [layout](Tape& t, int self) {
    const Mat& g = t.grad(self);
    for (const auto& [id, start] : layout) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleCols(start, t.value(id).cols()));
    }
  });
}

inline Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  detail::require_shape(start >= 0 && start + count <= x.cols(), "slice_cols");
  Tape& t = *x.tape;
  Mat out = x.value().middleCols(start, count);
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, start, count](Tape& t, int self) {
    Mat g = Mat::Zero(t.value(x).rows(), t.value(x).cols());
    g.middleCols(start, count) = t.grad(self);
    t.accumulate(x, g);
  });
}

inline Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  detail::require_shape(start >= 0 && start + count <= x.rows(), "slice_rows");
  Tape& t = *x.tape;
  Mat out = x.value().middleRows(start, count);
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, start, count](Tape& t, int self) {
    Mat g = Mat::Zero(t.value(x).rows(), t.value(x).cols());
    g.middleRows(start, count) = t.grad(self);
    t.accumulate(x, g);
  });
}

/// A * x for a constant matrix A (e.g. a time-interpolation operator).
inline Var left_apply(const Mat& a, Var x) {
  detail::require_shape(a.cols() == x.rows(), "left_apply");
  Tape& t = *x.tape;
  Mat out = a * x.value();
  return t.push(std::move(out), t.needs_grad(x.id), [a, x = x.id](Tape& t, int self) {
    t.accumulate(x, a.transpose() * t.grad(self));
  });
}

/// Mean over rows, 1 x D.
inline Var mean_rows(Var x) {
  Tape& t = *x.tape;
  Mat out = x.value().colwise().mean();
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    const double n = static_cast<double>(t.value(x).rows());
    Mat g = t.grad(self).replicate(t.value(x).rows(), 1) / n;
    t.accumulate(x, g);
  });
}

inline Var mean_all(Var x) {
  Tape& t = *x.tape;
  Mat out(1, 1);
  out(0, 0) = x.value().mean();
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id](Tape& t, int self) {
    const Mat& v = t.value(x);
    t.accumulate(x, Mat::Constant(v.rows(), v.cols(), t.grad(self)(0, 0) / static_cast<double>(v.size())));
  });
}

/// Sum of scalar (1x1) nodes with weights.
inline Var weighted_sum_scalars(const std::vector<std::pair<Var, double>>& terms) {
  if (terms.empty()) throw data_error("shape", "empty scalar sum");
  Tape& t = *terms[0].first.tape;
  Mat out = Mat::Zero(1, 1);
  bool ng = false;
  std::vector<std::pair<int, double>> ids;
  for (const auto& [v, w] : terms) {
    detail::require_shape(v.value().size() == 1, "weighted_sum_scalars");
    out(0, 0) += w * v.scalar();
    ng = ng || t.needs_grad(v.id);
    ids.emplace_back(v.id, w);
  }
  return t.push(std::move(out), ng, [ids](Tape& t, int self) {
    for (const auto& [id, w] : ids) t.accumulate(id, t.grad(self) * w);
  });
}

/// Mean of |pred - target| over rows where mask > 0 (first column only is
/// used when pred is T x 1). Returns 0 with no gradient when the mask is empty.
inline Var masked_l1(Var pred, const Mat& target, const Eigen::VectorXd& mask) {
  detail::require_shape(pred.rows() == target.rows() && pred.cols() == target.cols() && mask.size() == pred.rows(),
                        "masked_l1");
  Tape& t = *pred.tape;
  const double denom = mask.sum() * static_cast<double>(pred.cols());
  Mat out = Mat::Zero(1, 1);
  if (denom <= 0.0) return t.push(std::move(out), false, nullptr);
  const Mat diff = pred.value() - target;
  out(0, 0) = (diff.cwiseAbs().array().colwise() * mask.array()).sum() / denom;
  return t.push(std::move(out), t.needs_grad(pred.id), [p = pred.id, diff, mask, denom](Tape& t, int self) {
    Mat g = diff.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    g = (g.array().colwise() * mask.array()).matrix() * (t.grad(self)(0, 0) / denom);
    t.accumulate(p, g);
  });
}

/// Mean absolute difference against a constant target.
inline Var l1_loss(Var pred, const Mat& target) {
  return masked_l1(pred, target, Eigen::VectorXd::Ones(pred.rows()));
}

/// Mean binary cross-entropy from logits.
inline Var bce_with_logits(Var logits, const Mat& target) {
  detail::require_shape(logits.rows() == target.rows() && logits.cols() == target.cols(), "bce_with_logits");
  Tape& t = *logits.tape;
  const Mat& z = logits.value();
  Mat out(1, 1);
  // log(1 + exp(-|z|)) + max(z, 0) - z * y
  out(0, 0) = (z.array().abs().unaryExpr([](double v) { return std::log1p(std::exp(-v)); }) + z.array().max(0.0) -
               z.array() * target.array()).mean();
  return t.push(std::move(out), t.needs_grad(logits.id), [l = logits.id, target](Tape& t, int self) {
    const Mat& z = t.value(l);
    const Mat sig = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    t.accumulate(l, (sig - target) * (t.grad(self)(0, 0) / static_cast<double>(z.size())));
  });
}

/// mean((x - c)^2), the least-squares GAN building block.
inline Var mse_to(Var x, double c) {
  Tape& t = *x.tape;
  Mat out(1, 1);
  out(0, 0) = (x.value().array() - c).square().mean();
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, c](Tape& t, int self) {
    const Mat& v = t.value(x);
    t.accumulate(x, ((v.array() - c) * (2.0 * t.grad(self)(0, 0) / static_cast<double>(v.size()))).matrix());
  });
}

/// Inverted dropout; identity outside training or when p == 0.
inline Var dropout(Var x, double p) {
  Tape& t = *x.tape;
  if (!t.training() || p <= 0.0 || t.rng() == nullptr) return x;
  Mat mask(x.rows(), x.cols());
  Rng& rng = *t.rng();
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng.uniform() < p ? 0.0 : 1.0 / (1.0 - p);
  Mat out = x.value().cwiseProduct(mask);
  return t.push(std::move(out), t.needs_grad(x.id), [x = x.id, mask = std::move(mask)](Tape& t, int self) {
    t.accumulate(x, t.grad(self).cwiseProduct(mask));
  });
}

/// Rows X[(t*stride - pad) + j] for j < kernel stacked into T_out x (kernel*C),
/// zero outside the input.
inline Mat im2col(const Mat& x, int kernel, int stride, int pad) {
  const Eigen::Index t_in = x.rows(), c = x.cols();
  const Eigen::Index t_out = (t_in + 2 * pad - kernel) / stride + 1;
  Mat cols = Mat::Zero(std::max<Eigen::Index>(t_out, 0), kernel * c);
  for (Eigen::Index o = 0; o < t_out; ++o) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = o * stride - pad + j;
      if (src >= 0 && src < t_in) cols.block(o, j * c, 1, c) = x.row(src);
    }
  }
  return cols;
}

inline Mat col2im(const Mat& cols, Eigen::Index t_in, Eigen::Index c, int kernel, int stride, int pad) {
  Mat x = Mat::Zero(t_in, c);
  for (Eigen::Index o = 0; o < cols.rows(); ++o) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = o * stride - pad + j;
      if (src >= 0 && src < t_in) x.row(src) += cols.block(o, j * c, 1, c);
    }
  }
  return x;
}

/// 1-D convolution over time. x: T x C_in, w: (kernel*C_in) x C_out, b: 1 x C_out.
inline Var conv1d(Var x, Var w, Var b, int kernel, int stride, int pad) {
  detail::same_tape(x, w);
  detail::require_shape(w.rows() == kernel * x.cols() && b.cols() == w.cols(), "conv1d");
  if (x.rows() + 2 * pad < kernel) throw data_error("short-input", "conv1d input shorter than its kernel");
  Tape& t = *x.tape;
  Mat cols = im2col(x.value(), kernel, stride, pad);
  Mat out = cols * w.value();
  out.rowwise() += b.value().row(0);
  const bool ng = t.needs_grad(x.id) || t.needs_grad(w.id) || t.needs_grad(b.id);
  if (!ng) return t.push(std::move(out), false, nullptr);
  return t.push(std::move(out), ng,
                [x = x.id, w = w.id, b = b.id, cols = std::move(cols), kernel, stride, pad](Tape& t, int self) {
                  const Mat& g = t.grad(self);
                  if (t.needs_grad(w)) t.accumulate(w, cols.transpose() * g);
                  if (t.needs_grad(b)) t.accumulate(b, g.colwise().sum());
                  if (t.needs_grad(x)) {
                    const Mat gcols = g * t.value(w).transpose();
                    t.accumulate(x, col2im(gcols, t.value(x).rows(), t.value(x).cols(), kernel, stride, pad));
                  }
                });
}

}  // namespace melsvc::nn
