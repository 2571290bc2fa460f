#include "sef/students.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sef {

Architecture architecture_from_string(const std::string& name) {
  if (name == "cnn") return Architecture::kCnn;
  if (name == "pcnn") return Architecture::kPcnn;
  if (name == "ea") return Architecture::kEa;
  if (name == "bgwa") return Architecture::kBgwa;
  throw ConfigError("unknown architecture: " + name);
}

std::string architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::kCnn: return "cnn";
    case Architecture::kPcnn: return "pcnn";
    case Architecture::kEa: return "ea";
    case Architecture::kBgwa: return "bgwa";
  }
  return "cnn";
}

EncodedSample encode_sample(const RelationSample& sample, const Vocabulary& vocab) {
  EncodedSample e;
  e.token_ids.reserve(sample.tokens.size());
  for (const auto& t : sample.tokens) e.token_ids.push_back(vocab.lookup(t));
  e.e1 = sample.e1;
  e.e2 = sample.e2;
  e.label = sample.ds_label;
  return e;
}

namespace {

Tensor init_tensor(std::vector<std::size_t> shape, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-0.1, 0.1);
  return make_param(std::move(shape), std::move(v));
}

GruCell init_gru(std::size_t input, std::size_t hidden, Rng& rng) {
  GruCell c;
  c.w_update = init_tensor({hidden, input}, rng);
  c.u_update = init_tensor({hidden, hidden}, rng);
  c.b_update = init_tensor({hidden}, rng);
  c.w_reset = init_tensor({hidden, input}, rng);
  c.u_reset = init_tensor({hidden, hidden}, rng);
  c.b_reset = init_tensor({hidden}, rng);
  c.w_cand = init_tensor({hidden, input}, rng);
  c.u_cand = init_tensor({hidden, hidden}, rng);
  c.b_cand = init_tensor({hidden}, rng);
  return c;
}

void append_gru_params(std::vector<NamedParam>& out, const std::string& prefix,
                       const GruCell& c) {
  out.push_back({prefix + ".w_update", c.w_update});
  out.push_back({prefix + ".u_update", c.u_update});
  out.push_back({prefix + ".b_update", c.b_update});
  out.push_back({prefix + ".w_reset", c.w_reset});
  out.push_back({prefix + ".u_reset", c.u_reset});
  out.push_back({prefix + ".b_reset", c.b_reset});
  out.push_back({prefix + ".w_cand", c.w_cand});
  out.push_back({prefix + ".u_cand", c.u_cand});
  out.push_back({prefix + ".b_cand", c.b_cand});
}

int position_row(int t, int entity_start, int pos_max) {
  const int dist = t - entity_start;
  if (dist < -pos_max || dist > pos_max) return 2 * pos_max + 1;  // clip bucket
  return pos_max + dist;
}

}  // namespace

StudentParams init_student(Architecture arch, const ModelDims& dims,
                           int num_classes, int vocab_size, Rng& rng) {
  if (num_classes < 2) throw ConfigError("need at least two relation classes");
  StudentParams p;
  p.arch = arch;
  p.dims = dims;
  p.num_classes = num_classes;
  Rng init = rng.substream("init");

  const auto v = static_cast<std::size_t>(vocab_size);
  const auto dw = static_cast<std::size_t>(dims.word_dim);
  const auto du = static_cast<std::size_t>(dims.pos_dim);
  const auto d = static_cast<std::size_t>(dims.token_width());
  const auto fk = static_cast<std::size_t>(dims.filters);
  const auto k = static_cast<std::size_t>(dims.kernel);
  const auto c = static_cast<std::size_t>(num_classes);

  p.emb.word_table = init_tensor({v, dw}, init);
  for (std::size_t j = 0; j < dw; ++j) {
    p.emb.word_table.value()[Vocabulary::kPad * dw + j] = 0.0;
  }
  p.emb.pos1_table = init_tensor({static_cast<std::size_t>(dims.pos_rows()), du}, init);
  p.emb.pos2_table = init_tensor({static_cast<std::size_t>(dims.pos_rows()), du}, init);

  std::size_t feature_width = 0;
  switch (arch) {
    case Architecture::kCnn:
      p.conv_filters = init_tensor({fk, k * d}, init);
      feature_width = fk;
      break;
    case Architecture::kPcnn:
      p.conv_filters = init_tensor({fk, k * d}, init);
      feature_width = 3 * fk;
      break;
    case Architecture::kEa: {
      p.conv_filters = init_tensor({fk, k * d}, init);
      const auto da = static_cast<std::size_t>(dims.att_hidden);
      p.att_w1 = init_tensor({da, 2 * dw}, init);
      p.att_b1 = init_tensor({da}, init);
      p.att_w2 = init_tensor({1, da}, init);
      p.att_b2 = init_tensor({1}, init);
      feature_width = fk + 2 * dw;
      break;
    }
    case Architecture::kBgwa: {
      const auto h = static_cast<std::size_t>(dims.gru_hidden);
      const auto da = static_cast<std::size_t>(dims.att_hidden);
      p.gru_fwd = init_gru(d, h, init);
      p.gru_bwd = init_gru(d, h, init);
      p.att_w1 = init_tensor({da, 2 * h}, init);
      p.att_b1 = init_tensor({da}, init);
      p.att_w2 = init_tensor({1, da}, init);
      p.att_b2 = init_tensor({1}, init);
      p.bgwa_filters = init_tensor({fk, k * 2 * h}, init);
      feature_width = 3 * fk;
      break;
    }
  }
  p.out_w = init_tensor({c, feature_width}, init);
  p.out_b = init_tensor({c}, init);
  return p;
}

std::vector<NamedParam> StudentParams::named_params() const {
  std::vector<NamedParam> out;
  out.push_back({"word_table", emb.word_table});
  out.push_back({"pos1_table", emb.pos1_table});
  out.push_back({"pos2_table", emb.pos2_table});
  switch (arch) {
    case Architecture::kCnn:
    case Architecture::kPcnn:
      out.push_back({"conv_filters", conv_filters});
      break;
    case Architecture::kEa:
      out.push_back({"conv_filters", conv_filters});
      out.push_back({"att_w1", att_w1});
      out.push_back({"att_b1", att_b1});
      out.push_back({"att_w2", att_w2});
      out.push_back({"att_b2", att_b2});
      break;
    case Architecture::kBgwa:
      append_gru_params(out, "gru_fwd", gru_fwd);
      append_gru_params(out, "gru_bwd", gru_bwd);
      out.push_back({"att_w1", att_w1});
      out.push_back({"att_b1", att_b1});
      out.push_back({"att_w2", att_w2});
      out.push_back({"att_b2", att_b2});
      out.push_back({"bgwa_filters", bgwa_filters});
      break;
  }
  out.push_back({"out_w", out_w});
  out.push_back({"out_b", out_b});
  return out;
}

namespace {

Tensor copy_tensor(const Tensor& t, bool trainable) {
  if (!t.valid()) return Tensor();
  return trainable ? make_param(t.shape(), t.value())
                   : make_const(t.shape(), t.value());
}

GruCell copy_gru(const GruCell& c, bool trainable) {
  GruCell out;
  out.w_update = copy_tensor(c.w_update, trainable);
  out.u_update = copy_tensor(c.u_update, trainable);
  out.b_update = copy_tensor(c.b_update, trainable);
  out.w_reset = copy_tensor(c.w_reset, trainable);
  out.u_reset = copy_tensor(c.u_reset, trainable);
  out.b_reset = copy_tensor(c.b_reset, trainable);
  out.w_cand = copy_tensor(c.w_cand, trainable);
  out.u_cand = copy_tensor(c.u_cand, trainable);
  out.b_cand = copy_tensor(c.b_cand, trainable);
  return out;
}

}  // namespace

StudentParams StudentParams::clone(bool trainable) const {
  StudentParams out;
  out.arch = arch;
  out.dims = dims;
  out.num_classes = num_classes;
  out.emb.word_table = copy_tensor(emb.word_table, trainable);
  out.emb.pos1_table = copy_tensor(emb.pos1_table, trainable);
  out.emb.pos2_table = copy_tensor(emb.pos2_table, trainable);
  out.conv_filters = copy_tensor(conv_filters, trainable);
  out.att_w1 = copy_tensor(att_w1, trainable);
  out.att_b1 = copy_tensor(att_b1, trainable);
  out.att_w2 = copy_tensor(att_w2, trainable);
  out.att_b2 = copy_tensor(att_b2, trainable);
  out.gru_fwd = copy_gru(gru_fwd, trainable);
  out.gru_bwd = copy_gru(gru_bwd, trainable);
  out.bgwa_filters = copy_tensor(bgwa_filters, trainable);
  out.out_w = copy_tensor(out_w, trainable);
  out.out_b = copy_tensor(out_b, trainable);
  return out;
}

namespace {

struct TokenMatrices {
  Tensor all;    // n x (dw + 2du)
  Tensor words;  // n x dw
};

TokenMatrices token_matrices(Tape& tape, const EncodedSample& sample,
                             const StudentParams& params) {
  const int n = static_cast<int>(sample.token_ids.size());
  if (n < 1) throw DataError("empty sample");
  std::vector<int> pos1(n), pos2(n);
  for (int t = 0; t < n; ++t) {
    pos1[t] = position_row(t, sample.e1.start, params.dims.pos_max);
    pos2[t] = position_row(t, sample.e2.start, params.dims.pos_max);
  }
  TokenMatrices m;
  m.words = tape.lookup_rows(params.emb.word_table, sample.token_ids,
                             Vocabulary::kPad);
  const Tensor parts[] = {m.words,
                          tape.lookup_rows(params.emb.pos1_table, pos1),
                          tape.lookup_rows(params.emb.pos2_table, pos2)};
  m.all = tape.concat_cols(parts);
  return m;
}

// Penultimate feature -> dropout (train only) -> output layer -> softmax.
Tensor classify(Tape& tape, const Tensor& feature, const StudentParams& params,
                const ForwardOptions& opts) {
  Tensor f = feature;
  if (opts.train && params.dims.dropout > 0.0) {
    if (opts.dropout_rng == nullptr) {
      throw ConfigError("training forward needs a dropout rng");
    }
    f = tape.dropout(f, params.dims.dropout, *opts.dropout_rng);
  }
  return tape.softmax(tape.linear(params.out_w, f, params.out_b));
}

// Scalar attention scores over positions: softmax_t(FF2(tanh(FF1(row_t)))).
Tensor position_attention(Tape& tape, const Tensor& rows, const Tensor& w1,
                          const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  const std::size_t n = rows.rows();
  std::vector<Tensor> scores;
  scores.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Tensor hidden = tape.tanh(tape.linear(w1, tape.row(rows, t), b1));
    scores.push_back(tape.linear(w2, hidden, b2));
  }
  return tape.softmax(tape.stack_scalars(scores));
}

}  // namespace

Tensor token_vectors(Tape& tape, const EncodedSample& sample,
                     const StudentParams& params) {
  return token_matrices(tape, sample, params).all;
}

Tensor cnn_forward(Tape& tape, const EncodedSample& sample,
                   const StudentParams& params, const ForwardOptions& opts) {
  const Tensor x = token_vectors(tape, sample, params);
  const Tensor conv = tape.tanh(tape.conv1d(x, params.conv_filters));
  const Tensor feature = tape.global_max_pool(conv);
  return classify(tape, feature, params, opts);
}

Tensor pcnn_forward(Tape& tape, const EncodedSample& sample,
                    const StudentParams& params, const ForwardOptions& opts) {
  const Tensor x = token_vectors(tape, sample, params);
  const Tensor conv = tape.tanh(tape.conv1d(x, params.conv_filters));
  const Tensor feature = tape.piecewise_max_pool(conv, sample.e1, sample.e2);
  return classify(tape, feature, params, opts);
}

Tensor ea_forward(Tape& tape, const EncodedSample& sample,
                  const StudentParams& params, const ForwardOptions& opts) {
  const TokenMatrices m = token_matrices(tape, sample, params);
  const Tensor conv = tape.tanh(tape.conv1d(m.all, params.conv_filters));
  const Tensor global = tape.global_max_pool(conv);

  // Per entity: concatenate the entity's last-token word embedding to every
  // word embedding, score each position through the shared two-layer net,
  // and average word embeddings under the softmaxed scores.
  auto attentive = [&](const Span& entity) {
    const Tensor last = tape.row(m.words, static_cast<std::size_t>(entity.end));
    const std::size_t n = m.words.rows();
    std::vector<Tensor> scores;
    scores.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Tensor pair_parts[] = {tape.row(m.words, t), last};
      const Tensor pair = tape.concat_vecs(pair_parts);
      const Tensor hidden = tape.tanh(tape.linear(params.att_w1, pair, params.att_b1));
      scores.push_back(tape.linear(params.att_w2, hidden, params.att_b2));
    }
    const Tensor weights = tape.softmax(tape.stack_scalars(scores));
    return tape.weighted_sum_rows(weights, m.words);
  };

  const Tensor att1 = attentive(sample.e1);
  const Tensor att2 = attentive(sample.e2);
  const Tensor feature_parts[] = {global, att1, att2};
  const Tensor feature = tape.concat_vecs(feature_parts);
  return classify(tape, feature, params, opts);
}

Tensor bgwa_forward(Tape& tape, const EncodedSample& sample,
                    const StudentParams& params, const ForwardOptions& opts) {
  const Tensor x = token_vectors(tape, sample, params);
  const Tensor hiddens = bigru_sequence(tape, x, params.gru_fwd, params.gru_bwd);
  const Tensor weights = position_attention(tape, hiddens, params.att_w1,
                                            params.att_b1, params.att_w2,
                                            params.att_b2);
  const Tensor scaled = tape.scale_rows(hiddens, weights);
  const Tensor conv = tape.tanh(tape.conv1d(scaled, params.bgwa_filters));
  const Tensor feature = tape.piecewise_max_pool(conv, sample.e1, sample.e2);
  return classify(tape, feature, params, opts);
}

Tensor student_forward(Tape& tape, const EncodedSample& sample,
                       const StudentParams& params, const ForwardOptions& opts) {
  switch (params.arch) {
    case Architecture::kCnn: return cnn_forward(tape, sample, params, opts);
    case Architecture::kPcnn: return pcnn_forward(tape, sample, params, opts);
    case Architecture::kEa: return ea_forward(tape, sample, params, opts);
    case Architecture::kBgwa: return bgwa_forward(tape, sample, params, opts);
  }
  throw ConfigError("unknown architecture");
}

std::vector<double> predict_probs(const StudentParams& params,
                                  const EncodedSample& sample) {
  Tape tape(false);
  return student_forward(tape, sample, params).value();
}

std::size_t load_pretrained_embeddings(const std::string& path,
                                       const Vocabulary& vocab,
                                       StudentParams& params) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  const auto dw = static_cast<std::size_t>(params.dims.word_dim);
  auto& table = params.emb.word_table.value();
  std::string line;
  std::size_t loaded = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() != dw) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dw) + " values");
    }
    const int idx = vocab.lookup(word);
    if (idx == Vocabulary::kUnk && word != "<UNK>") continue;
    if (idx == Vocabulary::kPad) continue;  // PAD row stays zero
    std::copy(values.begin(), values.end(), table.begin() + idx * dw);
    ++loaded;
  }
  return loaded;
}

}  // namespace sef
