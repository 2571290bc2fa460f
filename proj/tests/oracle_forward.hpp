#pragma once

// Test-only reference forwards: straight-line double arithmetic over the raw
// parameter buffers, written independently of the tape machinery it checks.

#include <cmath>
#include <vector>

#include "sef/students.hpp"

namespace sef::oracle {

using Vec = std::vector<double>;

inline Vec softmax(const Vec& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  Vec out(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

inline Vec affine(const Vec& w, const Vec& b, const Vec& x) {
  const std::size_t m = b.size(), n = x.size();
  Vec out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * x[j];
    out[i] = s;
  }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// n x (dw + 2du) token matrix.
inline Vec token_matrix(const EncodedSample& s, const StudentParams& p) {
  const int dw = p.dims.word_dim, du = p.dims.pos_dim, pm = p.dims.pos_max;
  const int n = static_cast<int>(s.token_ids.size());
  const int width = dw + 2 * du;
  Vec out(static_cast<std::size_t>(n) * width);
  auto pos_row = [pm](int t, int start) {
    const int d = t - start;
    return (d < -pm || d > pm) ? 2 * pm + 1 : pm + d;
  };
  const auto& wt = p.emb.word_table.value();
  const auto& p1 = p.emb.pos1_table.value();
  const auto& p2 = p.emb.pos2_table.value();
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < dw; ++j) out[t * width + j] = wt[s.token_ids[t] * dw + j];
    const int r1 = pos_row(t, s.e1.start), r2 = pos_row(t, s.e2.start);
    for (int j = 0; j < du; ++j) out[t * width + dw + j] = p1[r1 * du + j];
    for (int j = 0; j < du; ++j) out[t * width + dw + du + j] = p2[r2 * du + j];
  }
  return out;
}

// tanh(conv) with k-1 zero rows appended; returns n x f.
inline Vec conv_tanh(const Vec& x, int n, int width, const Vec& filters, int f, int k) {
  Vec out(static_cast<std::size_t>(n) * f, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) {
      double s = 0;
      for (int w = 0; w < k && i + w < n; ++w) {
        for (int c = 0; c < width; ++c) {
          s += filters[(j * k + w) * width + c] * x[(i + w) * width + c];
        }
      }
      out[i * f + j] = std::tanh(s);
    }
  }
  return out;
}

inline Vec col_max(const Vec& scores, int f, int lo, int hi) {
  Vec out(f);
  for (int j = 0; j < f; ++j) {
    double best = scores[lo * f + j];
    for (int i = lo + 1; i <= hi; ++i) best = std::max(best, scores[i * f + j]);
    out[j] = best;
  }
  return out;
}

inline Vec piecewise_max(const Vec& scores, int n, int f, Span e1, Span e2) {
  const Span first = (e2.start < e1.start) ? e2 : e1;
  const Span second = (e2.start < e1.start) ? e1 : e2;
  Vec out;
  for (const auto& [lo, hi] : {std::pair{0, first.end},
                               std::pair{first.start, second.end},
                               std::pair{second.start, n - 1}}) {
    const Vec seg = col_max(scores, f, lo, hi);
    out.insert(out.end(), seg.begin(), seg.end());
  }
  return out;
}

inline Vec cnn_probs(const EncodedSample& s, const StudentParams& p) {
  const int n = static_cast<int>(s.token_ids.size());
  const int width = p.dims.token_width();
  const Vec x = token_matrix(s, p);
  const Vec conv = conv_tanh(x, n, width, p.conv_filters.value(), p.dims.filters,
                             p.dims.kernel);
  const Vec feat = col_max(conv, p.dims.filters, 0, n - 1);
  return softmax(affine(p.out_w.value(), p.out_b.value(), feat));
}

inline Vec pcnn_probs(const EncodedSample& s, const StudentParams& p) {
  const int n = static_cast<int>(s.token_ids.size());
  const Vec x = token_matrix(s, p);
  const Vec conv = conv_tanh(x, n, p.dims.token_width(), p.conv_filters.value(),
                             p.dims.filters, p.dims.kernel);
  const Vec feat = piecewise_max(conv, n, p.dims.filters, s.e1, s.e2);
  return softmax(affine(p.out_w.value(), p.out_b.value(), feat));
}

inline Vec ea_attentive(const EncodedSample& s, const StudentParams& p, Span entity) {
  const int n = static_cast<int>(s.token_ids.size());
  const int dw = p.dims.word_dim;
  const auto& wt = p.emb.word_table.value();
  Vec scores(n);
  for (int t = 0; t < n; ++t) {
    Vec pair(2 * dw);
    for (int j = 0; j < dw; ++j) pair[j] = wt[s.token_ids[t] * dw + j];
    for (int j = 0; j < dw; ++j) {
      pair[dw + j] = wt[s.token_ids[entity.end] * dw + j];
    }
    Vec hidden = affine(p.att_w1.value(), p.att_b1.value(), pair);
    for (double& h : hidden) h = std::tanh(h);
    scores[t] = affine(p.att_w2.value(), p.att_b2.value(), hidden)[0];
  }
  const Vec weights = softmax(scores);
  Vec out(dw, 0.0);
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < dw; ++j) out[j] += weights[t] * wt[s.token_ids[t] * dw + j];
  }
  return out;
}

inline Vec ea_probs(const EncodedSample& s, const StudentParams& p) {
  const int n = static_cast<int>(s.token_ids.size());
  const Vec x = token_matrix(s, p);
  const Vec conv = conv_tanh(x, n, p.dims.token_width(), p.conv_filters.value(),
                             p.dims.filters, p.dims.kernel);
  Vec feat = col_max(conv, p.dims.filters, 0, n - 1);
  const Vec a1 = ea_attentive(s, p, s.e1);
  const Vec a2 = ea_attentive(s, p, s.e2);
  feat.insert(feat.end(), a1.begin(), a1.end());
  feat.insert(feat.end(), a2.begin(), a2.end());
  return softmax(affine(p.out_w.value(), p.out_b.value(), feat));
}

// One GRU direction; returns n x h in sentence order.
inline Vec gru_pass(const Vec& x, int n, int width, const GruCell& cell, bool fwd) {
  const int h = static_cast<int>(cell.hidden_size());
  Vec states(static_cast<std::size_t>(n) * h, 0.0);
  Vec hidden(h, 0.0);
  for (int step = 0; step < n; ++step) {
    const int t = fwd ? step : n - 1 - step;
    Vec xt(x.begin() + t * width, x.begin() + (t + 1) * width);
    Vec z = affine(cell.w_update.value(), cell.b_update.value(), xt);
    Vec r = affine(cell.w_reset.value(), cell.b_reset.value(), xt);
    for (int i = 0; i < h; ++i) {
      double zu = 0, ru = 0;
      for (int j = 0; j < h; ++j) {
        zu += cell.u_update.value()[i * h + j] * hidden[j];
        ru += cell.u_reset.value()[i * h + j] * hidden[j];
      }
      z[i] = sigmoid(z[i] + zu);
      r[i] = sigmoid(r[i] + ru);
    }
    Vec cand = affine(cell.w_cand.value(), cell.b_cand.value(), xt);
    for (int i = 0; i < h; ++i) {
      double cu = 0;
      for (int j = 0; j < h; ++j) {
        cu += cell.u_cand.value()[i * h + j] * (r[j] * hidden[j]);
      }
      cand[i] = std::tanh(cand[i] + cu);
    }
    for (int i = 0; i < h; ++i) {
      hidden[i] = z[i] * hidden[i] + (1.0 - z[i]) * cand[i];
    }
    for (int i = 0; i < h; ++i) states[t * h + i] = hidden[i];
  }
  return states;
}

inline Vec bgwa_probs(const EncodedSample& s, const StudentParams& p) {
  const int n = static_cast<int>(s.token_ids.size());
  const int width = p.dims.token_width();
  const int h = p.dims.gru_hidden;
  const Vec x = token_matrix(s, p);
  const Vec hf = gru_pass(x, n, width, p.gru_fwd, true);
  const Vec hb = gru_pass(x, n, width, p.gru_bwd, false);
  Vec hiddens(static_cast<std::size_t>(n) * 2 * h);
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < h; ++i) {
      hiddens[t * 2 * h + i] = hf[t * h + i];
      hiddens[t * 2 * h + h + i] = hb[t * h + i];
    }
  }
  Vec scores(n);
  for (int t = 0; t < n; ++t) {
    Vec ht(hiddens.begin() + t * 2 * h, hiddens.begin() + (t + 1) * 2 * h);
    Vec hid = affine(p.att_w1.value(), p.att_b1.value(), ht);
    for (double& v : hid) v = std::tanh(v);
    scores[t] = affine(p.att_w2.value(), p.att_b2.value(), hid)[0];
  }
  const Vec weights = softmax(scores);
  Vec scaled(hiddens.size());
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < 2 * h; ++i) {
      scaled[t * 2 * h + i] = weights[t] * hiddens[t * 2 * h + i];
    }
  }
  const Vec conv = conv_tanh(scaled, n, 2 * h, p.bgwa_filters.value(),
                             p.dims.filters, p.dims.kernel);
  const Vec feat = piecewise_max(conv, n, p.dims.filters, s.e1, s.e2);
  return softmax(affine(p.out_w.value(), p.out_b.value(), feat));
}

inline Vec forward_probs(const EncodedSample& s, const StudentParams& p) {
  switch (p.arch) {
    case Architecture::kCnn: return cnn_probs(s, p);
    case Architecture::kPcnn: return pcnn_probs(s, p);
    case Architecture::kEa: return ea_probs(s, p);
    case Architecture::kBgwa: return bgwa_probs(s, p);
  }
  return {};
}

}  // namespace sef::oracle
