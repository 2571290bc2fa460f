#include "sef/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sef {

namespace {

void ensure_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by op '") +
                               op + "'");
    }
  }
}

std::vector<double>& grad_buffer(const NodePtr& n) {
  if (n->grad.size() != n->size()) n->grad.assign(n->size(), 0.0);
  return n->grad;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<double>& Tensor::grad() { return grad_buffer(node_); }

Tensor make_param(std::vector<std::size_t> shape, std::vector<double> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = true;
  n->op = "param";
  if (n->value.size() != n->size()) throw ConfigError("param shape/data mismatch");
  return Tensor(n);
}

Tensor make_const(std::vector<std::size_t> shape, std::vector<double> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = false;
  n->op = "const";
  if (n->value.size() != n->size()) throw ConfigError("const shape/data mismatch");
  return Tensor(n);
}

Tensor make_zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(n->size(), 0.0);
  n->requires_grad = requires_grad;
  n->op = requires_grad ? "param" : "const";
  return Tensor(n);
}

void zero_grad(Tensor& t) {
  auto& g = grad_buffer(t.node());
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tape::output(std::vector<std::size_t> shape, std::vector<double> values,
                    const char* op, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = grad_ && requires_grad;
  n->op = op;
  if (n->value.size() != n->size()) {
    throw std::logic_error(std::string("op '") + op + "' shape/data mismatch");
  }
  ensure_finite(op, n->value);
  return Tensor(n);
}

void Tape::record(const Tensor& out, std::function<void()> back) {
  if (grad_ && out.requires_grad()) {
    steps_.push_back({out.node(), std::move(back)});
  }
}

void Tape::backward(const Tensor& loss, bool validate_finite) {
  if (!grad_) throw std::logic_error("backward() on a no-grad tape");
  if (loss.size() != 1) throw ConfigError("backward expects a scalar loss");
  grad_buffer(loss.node())[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    if (validate_finite) {
      for (double g : grad_buffer(it->out)) {
        if (!std::isfinite(g)) {
          throw std::runtime_error(std::string("non-finite gradient at op '") +
                                   it->out->op + "'");
        }
      }
    }
    it->back();
  }
}

Tensor Tape::lookup_rows(const Tensor& table, const std::vector<int>& indices,
                         int frozen_row) {
  if (table.shape().size() != 2) throw ConfigError("lookup_rows: table must be 2-d");
  const std::size_t rows = table.rows(), d = table.cols();
  std::vector<double> out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
      throw DataError("lookup_rows: index out of range");
    }
    std::copy_n(table.value().begin() + idx * d, d, out.begin() + i * d);
  }
  Tensor result = output({indices.size(), d}, std::move(out), "lookup_rows",
                         table.requires_grad());
  record(result, [t = table.node(), r = result.node(), indices, frozen_row, d] {
    auto& tg = grad_buffer(t);
    const auto& rg = grad_buffer(r);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] == frozen_row) continue;
      for (std::size_t c = 0; c < d; ++c) tg[indices[i] * d + c] += rg[i * d + c];
    }
  });
  return result;
}

Tensor Tape::concat_cols(std::span<const Tensor> mats) {
  if (mats.empty()) throw ConfigError("concat_cols: no inputs");
  const std::size_t n = mats[0].rows();
  std::size_t total = 0;
  bool rg = false;
  for (const auto& m : mats) {
    if (m.shape().size() != 2 || m.rows() != n) {
      throw ConfigError("concat_cols: row count mismatch");
    }
    total += m.cols();
    rg = rg || m.requires_grad();
  }
  std::vector<double> out(n * total);
  std::size_t off = 0;
  for (const auto& m : mats) {
    const std::size_t c = m.cols();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(m.value().begin() + r * c, c, out.begin() + r * total + off);
    }
    off += c;
  }
  Tensor result = output({n, total}, std::move(out), "concat_cols", rg);
  std::vector<NodePtr> ins;
  for (const auto& m : mats) ins.push_back(m.node());
  record(result, [ins, r = result.node(), n, total] {
    const auto& rg2 = grad_buffer(r);
    std::size_t off2 = 0;
    for (const auto& in : ins) {
      const std::size_t c = in->shape[1];
      if (in->requires_grad) {
        auto& ig = grad_buffer(in);
        for (std::size_t row = 0; row < n; ++row) {
          for (std::size_t j = 0; j < c; ++j) {
            ig[row * c + j] += rg2[row * total + off2 + j];
          }
        }
      }
      off2 += c;
    }
  });
  return result;
}

Tensor Tape::concat_vecs(std::span<const Tensor> vecs) {
  if (vecs.empty()) throw ConfigError("concat_vecs: no inputs");
  std::vector<double> out;
  bool rg = false;
  for (const auto& v : vecs) {
    if (v.shape().size() != 1) throw ConfigError("concat_vecs: inputs must be 1-d");
    out.insert(out.end(), v.value().begin(), v.value().end());
    rg = rg || v.requires_grad();
  }
  const std::size_t total = out.size();
  Tensor result = output({total}, std::move(out), "concat_vecs", rg);
  std::vector<NodePtr> ins;
  for (const auto& v : vecs) ins.push_back(v.node());
  record(result, [ins, o = result.node()] {
    const auto& og = grad_buffer(o);
    std::size_t off = 0;
    for (const auto& in : ins) {
      if (in->requires_grad) {
        auto& ig = grad_buffer(in);
        for (std::size_t i = 0; i < in->value.size(); ++i) ig[i] += og[off + i];
      }
      off += in->value.size();
    }
  });
  return result;
}

Tensor Tape::row(const Tensor& mat, std::size_t r) {
  if (mat.shape().size() != 2 || r >= mat.rows()) throw ConfigError("row: out of range");
  const std::size_t d = mat.cols();
  std::vector<double> out(mat.value().begin() + r * d,
                          mat.value().begin() + (r + 1) * d);
  Tensor result = output({d}, std::move(out), "row", mat.requires_grad());
  record(result, [m = mat.node(), o = result.node(), r, d] {
    auto& mg = grad_buffer(m);
    const auto& og = grad_buffer(o);
    for (std::size_t c = 0; c < d; ++c) mg[r * d + c] += og[c];
  });
  return result;
}

Tensor Tape::stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ConfigError("stack_rows: no inputs");
  const std::size_t d = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool rg = false;
  for (const auto& v : rows) {
    if (v.size() != d) throw ConfigError("stack_rows: width mismatch");
    out.insert(out.end(), v.value().begin(), v.value().end());
    rg = rg || v.requires_grad();
  }
  Tensor result = output({rows.size(), d}, std::move(out), "stack_rows", rg);
  std::vector<NodePtr> ins;
  for (const auto& v : rows) ins.push_back(v.node());
  record(result, [ins, o = result.node(), d] {
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!ins[i]->requires_grad) continue;
      auto& ig = grad_buffer(ins[i]);
      for (std::size_t c = 0; c < d; ++c) ig[c] += og[i * d + c];
    }
  });
  return result;
}

Tensor Tape::stack_scalars(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw ConfigError("stack_scalars: no inputs");
  std::vector<double> out;
  bool rg = false;
  for (const auto& s : scalars) {
    if (s.size() != 1) throw ConfigError("stack_scalars: inputs must be scalar");
    out.push_back(s.at(0));
    rg = rg || s.requires_grad();
  }
  Tensor result = output({scalars.size()}, std::move(out), "stack_scalars", rg);
  std::vector<NodePtr> ins;
  for (const auto& s : scalars) ins.push_back(s.node());
  record(result, [ins, o = result.node()] {
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (ins[i]->requires_grad) grad_buffer(ins[i])[0] += og[i];
    }
  });
  return result;
}

Tensor Tape::matvec(const Tensor& w, const Tensor& x) {
  if (w.shape().size() != 2 || x.shape().size() != 1 || w.cols() != x.size()) {
    throw ConfigError("matvec: shape mismatch");
  }
  const std::size_t m = w.rows(), n = w.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w.at(i, j) * x.at(j);
    out[i] = s;
  }
  Tensor result = output({m}, std::move(out), "matvec",
                         w.requires_grad() || x.requires_grad());
  record(result, [wn = w.node(), xn = x.node(), o = result.node(), m, n] {
    const auto& og = grad_buffer(o);
    if (wn->requires_grad) {
      auto& wg = grad_buffer(wn);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) wg[i * n + j] += og[i] * xn->value[j];
      }
    }
    if (xn->requires_grad) {
      auto& xg = grad_buffer(xn);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) xg[j] += og[i] * wn->value[i * n + j];
      }
    }
  });
  return result;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ConfigError("add: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  Tensor result = output(a.shape(), std::move(out), "add",
                         a.requires_grad() || b.requires_grad());
  record(result, [an = a.node(), bn = b.node(), o = result.node()] {
    const auto& og = grad_buffer(o);
    if (an->requires_grad) {
      auto& ag = grad_buffer(an);
      for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
    }
    if (bn->requires_grad) {
      auto& bg = grad_buffer(bn);
      for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
    }
  });
  return result;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ConfigError("mul: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  Tensor result = output(a.shape(), std::move(out), "mul",
                         a.requires_grad() || b.requires_grad());
  record(result, [an = a.node(), bn = b.node(), o = result.node()] {
    const auto& og = grad_buffer(o);
    if (an->requires_grad) {
      auto& ag = grad_buffer(an);
      for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& bg = grad_buffer(bn);
      for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * an->value[i];
    }
  });
  return result;
}

Tensor Tape::axpb(const Tensor& x, double a, double b) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x.at(i) + b;
  Tensor result = output(x.shape(), std::move(out), "axpb", x.requires_grad());
  record(result, [xn = x.node(), o = result.node(), a] {
    auto& xg = grad_buffer(xn);
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < og.size(); ++i) xg[i] += a * og[i];
  });
  return result;
}

Tensor Tape::tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.at(i));
  Tensor result = output(x.shape(), std::move(out), "tanh", x.requires_grad());
  record(result, [xn = x.node(), o = result.node()] {
    auto& xg = grad_buffer(xn);
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < og.size(); ++i) {
      xg[i] += og[i] * (1.0 - o->value[i] * o->value[i]);
    }
  });
  return result;
}

Tensor Tape::sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(x.at(i));
  Tensor result = output(x.shape(), std::move(out), "sigmoid", x.requires_grad());
  record(result, [xn = x.node(), o = result.node()] {
    auto& xg = grad_buffer(xn);
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < og.size(); ++i) {
      xg[i] += og[i] * o->value[i] * (1.0 - o->value[i]);
    }
  });
  return result;
}

Tensor Tape::softmax(const Tensor& logits) {
  if (logits.shape().size() != 1) throw ConfigError("softmax: expects a vector");
  const std::size_t n = logits.size();
  double mx = logits.at(0);
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.at(i));
  std::vector<double> out(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(logits.at(i) - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  Tensor result = output({n}, std::move(out), "softmax", logits.requires_grad());
  record(result, [xn = logits.node(), o = result.node(), n] {
    auto& xg = grad_buffer(xn);
    const auto& og = grad_buffer(o);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += og[i] * o->value[i];
    for (std::size_t i = 0; i < n; ++i) xg[i] += o->value[i] * (og[i] - dot);
  });
  return result;
}

Tensor Tape::conv1d(const Tensor& seq, const Tensor& filters) {
  if (seq.shape().size() != 2 || filters.shape().size() != 2) {
    throw ConfigError("conv1d: expects 2-d seq and filters");
  }
  const std::size_t n = seq.rows(), d = seq.cols();
  const std::size_t f = filters.rows(), kd = filters.cols();
  if (d == 0 || kd % d != 0) {
    throw ConfigError("conv1d: filter length is not a multiple of the token width");
  }
  const std::size_t k = kd / d;
  if (k < 1 || n < 1) throw ConfigError("conv1d: empty input");
  std::vector<double> out(n * f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t wmax = std::min(k, n - i);  // rows beyond n are zero pad
    for (std::size_t j = 0; j < f; ++j) {
      double s = 0.0;
      for (std::size_t w = 0; w < wmax; ++w) {
        const double* xrow = seq.value().data() + (i + w) * d;
        const double* frow = filters.value().data() + j * kd + w * d;
        for (std::size_t c = 0; c < d; ++c) s += frow[c] * xrow[c];
      }
      out[i * f + j] = s;
    }
  }
  Tensor result = output({n, f}, std::move(out), "conv1d",
                         seq.requires_grad() || filters.requires_grad());
  record(result, [sn = seq.node(), fn = filters.node(), o = result.node(), n, d, f,
                  k, kd] {
    const auto& og = grad_buffer(o);
    if (fn->requires_grad) {
      auto& fg = grad_buffer(fn);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t wmax = std::min(k, n - i);
        for (std::size_t j = 0; j < f; ++j) {
          const double g = og[i * f + j];
          if (g == 0.0) continue;
          for (std::size_t w = 0; w < wmax; ++w) {
            const double* xrow = sn->value.data() + (i + w) * d;
            double* frow = fg.data() + j * kd + w * d;
            for (std::size_t c = 0; c < d; ++c) frow[c] += g * xrow[c];
          }
        }
      }
    }
    if (sn->requires_grad) {
      auto& sg = grad_buffer(sn);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t wmax = std::min(k, n - i);
        for (std::size_t j = 0; j < f; ++j) {
          const double g = og[i * f + j];
          if (g == 0.0) continue;
          for (std::size_t w = 0; w < wmax; ++w) {
            double* xrow = sg.data() + (i + w) * d;
            const double* frow = fn->value.data() + j * kd + w * d;
            for (std::size_t c = 0; c < d; ++c) xrow[c] += g * frow[c];
          }
        }
      }
    }
  });
  return result;
}

namespace {

// Lowest-index argmax of column j over rows [lo, hi] of an {n,f} matrix.
std::size_t col_argmax(const std::vector<double>& v, std::size_t f, std::size_t j,
                       std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i <= hi; ++i) {
    if (v[i * f + j] > v[best * f + j]) best = i;
  }
  return best;
}

}  // namespace

Tensor Tape::global_max_pool(const Tensor& scores) {
  if (scores.shape().size() != 2 || scores.rows() == 0) {
    throw ConfigError("global_max_pool: empty input");
  }
  const std::size_t n = scores.rows(), f = scores.cols();
  std::vector<double> out(f);
  std::vector<std::size_t> arg(f);
  for (std::size_t j = 0; j < f; ++j) {
    arg[j] = col_argmax(scores.value(), f, j, 0, n - 1);
    out[j] = scores.at(arg[j], j);
  }
  Tensor result = output({f}, std::move(out), "global_max_pool",
                         scores.requires_grad());
  record(result, [sn = scores.node(), o = result.node(), arg = std::move(arg), f] {
    auto& sg = grad_buffer(sn);
    const auto& og = grad_buffer(o);
    for (std::size_t j = 0; j < f; ++j) sg[arg[j] * f + j] += og[j];
  });
  return result;
}

Tensor Tape::piecewise_max_pool(const Tensor& scores, Span e1, Span e2) {
  if (scores.shape().size() != 2 || scores.rows() == 0) {
    throw ConfigError("piecewise_max_pool: empty input");
  }
  const std::size_t n = scores.rows(), f = scores.cols();
  auto check = [n](Span s) {
    if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= n) {
      throw DataError("piecewise_max_pool: span out of bounds");
    }
  };
  check(e1);
  check(e2);
  const Span first = (e2.start < e1.start) ? e2 : e1;
  const Span second = (e2.start < e1.start) ? e1 : e2;
  const std::size_t seg_lo[3] = {0, static_cast<std::size_t>(first.start),
                                 static_cast<std::size_t>(second.start)};
  const std::size_t seg_hi[3] = {static_cast<std::size_t>(first.end),
                                 static_cast<std::size_t>(second.end), n - 1};
  std::vector<double> out(3 * f);
  std::vector<std::size_t> arg(3 * f);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t j = 0; j < f; ++j) {
      arg[s * f + j] = col_argmax(scores.value(), f, j, seg_lo[s], seg_hi[s]);
      out[s * f + j] = scores.at(arg[s * f + j], j);
    }
  }
  Tensor result = output({3 * f}, std::move(out), "piecewise_max_pool",
                         scores.requires_grad());
  record(result, [sn = scores.node(), o = result.node(), arg = std::move(arg), f] {
    auto& sg = grad_buffer(sn);
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < og.size(); ++i) sg[arg[i] * f + i % f] += og[i];
  });
  return result;
}

Tensor Tape::weighted_sum_rows(const Tensor& weights, const Tensor& mat) {
  if (weights.shape().size() != 1 || mat.shape().size() != 2 ||
      weights.size() != mat.rows()) {
    throw ConfigError("weighted_sum_rows: shape mismatch");
  }
  const std::size_t n = mat.rows(), d = mat.cols();
  std::vector<double> out(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < d; ++c) out[c] += weights.at(t) * mat.at(t, c);
  }
  Tensor result = output({d}, std::move(out), "weighted_sum_rows",
                         weights.requires_grad() || mat.requires_grad());
  record(result, [wn = weights.node(), mn = mat.node(), o = result.node(), n, d] {
    const auto& og = grad_buffer(o);
    if (wn->requires_grad) {
      auto& wg = grad_buffer(wn);
      for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += og[c] * mn->value[t * d + c];
        wg[t] += s;
      }
    }
    if (mn->requires_grad) {
      auto& mg = grad_buffer(mn);
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < d; ++c) mg[t * d + c] += wn->value[t] * og[c];
      }
    }
  });
  return result;
}

Tensor Tape::scale_rows(const Tensor& mat, const Tensor& weights) {
  if (weights.shape().size() != 1 || mat.shape().size() != 2 ||
      weights.size() != mat.rows()) {
    throw ConfigError("scale_rows: shape mismatch");
  }
  const std::size_t n = mat.rows(), d = mat.cols();
  std::vector<double> out(n * d);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < d; ++c) out[t * d + c] = weights.at(t) * mat.at(t, c);
  }
  Tensor result = output({n, d}, std::move(out), "scale_rows",
                         weights.requires_grad() || mat.requires_grad());
  record(result, [wn = weights.node(), mn = mat.node(), o = result.node(), n, d] {
    const auto& og = grad_buffer(o);
    if (mn->requires_grad) {
      auto& mg = grad_buffer(mn);
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < d; ++c) mg[t * d + c] += wn->value[t] * og[t * d + c];
      }
    }
    if (wn->requires_grad) {
      auto& wg = grad_buffer(wn);
      for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += og[t * d + c] * mn->value[t * d + c];
        wg[t] += s;
      }
    }
  });
  return result;
}

Tensor Tape::dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : scale;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i];
  Tensor result = output(x.shape(), std::move(out), "dropout", x.requires_grad());
  record(result, [xn = x.node(), o = result.node(), mask = std::move(mask)] {
    auto& xg = grad_buffer(xn);
    const auto& og = grad_buffer(o);
    for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i] * mask[i];
  });
  return result;
}

Tensor Tape::ce_mse_loss(const Tensor& probs, const std::vector<double>& teacher,
                         int label) {
  if (probs.shape().size() != 1 || probs.size() != teacher.size()) {
    throw ConfigError("ce_mse_loss: shape mismatch");
  }
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw ConfigError("ce_mse_loss: label out of range");
  }
  static constexpr double kClamp = 1e-12;
  double p_true = probs.at(label);
  if (p_true < kClamp) {
    ++clamp_events_;
    p_true = kClamp;
  }
  double loss = -std::log(p_true);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double diff = probs.at(j) - teacher[j];
    loss += diff * diff;
  }
  Tensor result = output({1}, {loss}, "ce_mse_loss", probs.requires_grad());
  record(result, [pn = probs.node(), o = result.node(), teacher, label] {
    auto& pg = grad_buffer(pn);
    const double g = grad_buffer(o)[0];
    for (std::size_t j = 0; j < pn->value.size(); ++j) {
      pg[j] += g * 2.0 * (pn->value[j] - teacher[j]);
    }
    pg[label] += g * (-1.0 / std::max(pn->value[label], kClamp));
  });
  return result;
}

Tensor gru_sequence(Tape& tape, const Tensor& seq, const GruCell& cell,
                    GruDirection direction) {
  if (seq.shape().size() != 2 || seq.rows() == 0) {
    throw ConfigError("gru_sequence: expects a nonempty {n,d} sequence");
  }
  const std::size_t n = seq.rows();
  const std::size_t h = cell.hidden_size();
  Tensor hidden = make_zeros({h});
  std::vector<Tensor> states(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = direction == GruDirection::kForward ? step : n - 1 - step;
    Tensor x = tape.row(seq, t);
    Tensor z = tape.sigmoid(tape.add(tape.linear(cell.w_update, x, cell.b_update),
                                     tape.matvec(cell.u_update, hidden)));
    Tensor r = tape.sigmoid(tape.add(tape.linear(cell.w_reset, x, cell.b_reset),
                                     tape.matvec(cell.u_reset, hidden)));
    Tensor cand = tape.tanh(tape.add(tape.linear(cell.w_cand, x, cell.b_cand),
                                     tape.matvec(cell.u_cand, tape.mul(r, hidden))));
    hidden = tape.add(tape.mul(z, hidden),
                      tape.mul(tape.axpb(z, -1.0, 1.0), cand));
    states[t] = hidden;
  }
  return tape.stack_rows(states);
}

Tensor bigru_sequence(Tape& tape, const Tensor& seq, const GruCell& fwd,
                      const GruCell& bwd) {
  const Tensor f = gru_sequence(tape, seq, fwd, GruDirection::kForward);
  const Tensor b = gru_sequence(tape, seq, bwd, GruDirection::kBackward);
  const Tensor parts[] = {f, b};
  return tape.concat_cols(parts);
}

GradCheckResult check_gradients(std::span<const NamedParam> params,
                                const std::function<Tensor(Tape&)>& forward,
                                double eps) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    zero_grad(t);
  }
  Tape tape(true);
  Tensor loss = forward(tape);
  if (loss.size() != 1) throw ConfigError("check_gradients: loss must be scalar");
  tape.backward(loss, /*validate_finite=*/true);

  GradCheckResult result;
  for (const auto& p : params) {
    auto& values = p.tensor.node()->value;
    const auto& analytic = p.tensor.node()->grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      Tape t1(false);
      const double up = forward(t1).at(0);
      values[i] = orig - eps;
      Tape t2(false);
      const double down = forward(t2).at(0);
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace sef
