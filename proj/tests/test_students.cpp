#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "oracle_forward.hpp"
#include "sef/students.hpp"

using namespace sef;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.word_dim = 4;
  d.pos_dim = 2;
  d.pos_max = 8;
  d.filters = 3;
  d.kernel = 2;
  d.gru_hidden = 3;
  d.att_hidden = 3;
  d.dropout = 0.0;
  return d;
}

EncodedSample tiny_sample(int n = 6, int vocab = 10, std::uint64_t seed = 3) {
  Rng rng(seed);
  EncodedSample s;
  for (int t = 0; t < n; ++t) {
    // real encodings never contain PAD (index 0); its row is frozen, so a
    // finite-difference probe of it would disagree with the zero gradient
    s.token_ids.push_back(2 + static_cast<int>(rng.below(vocab - 2)));
  }
  s.e1 = Span{1, 1};
  s.e2 = Span{n - 2, n - 1};
  s.label = 1;
  return s;
}

StudentParams tiny_model(Architecture arch, std::uint64_t seed = 5,
                         int num_classes = 4, int vocab = 10) {
  Rng rng(seed);
  return init_student(arch, tiny_dims(), num_classes, vocab, rng);
}

constexpr Architecture kAll[] = {Architecture::kCnn, Architecture::kPcnn,
                                 Architecture::kEa, Architecture::kBgwa};

}  // namespace

TEST_CASE("token vectors have width d_w + 2 d_u and use the center row at zero distance") {
  ModelDims dims;  // stock dimensions: 50 + 2*5
  dims.dropout = 0.0;
  Rng rng(1);
  StudentParams p = init_student(Architecture::kCnn, dims, 3, 20, rng);
  EncodedSample s = tiny_sample(5, 20);
  s.e1 = Span{2, 2};
  Tape tape;
  Tensor x = token_vectors(tape, s, p);
  CHECK(x.cols() == 60);
  CHECK(x.rows() == 5);

  // token at the e1 start has distance 0 -> center row of pos1_table
  const auto& pos1 = p.emb.pos1_table.value();
  const int center = dims.pos_max;
  for (int j = 0; j < dims.pos_dim; ++j) {
    CHECK(x.at(2, dims.word_dim + j) ==
          doctest::Approx(pos1[center * dims.pos_dim + j]).epsilon(1e-12));
  }
}

TEST_CASE("far-away tokens fall into the clip bucket row") {
  ModelDims dims = tiny_dims();
  dims.pos_max = 8;
  Rng rng(2);
  StudentParams p = init_student(Architecture::kCnn, dims, 3, 40, rng);
  EncodedSample s = tiny_sample(30, 40);
  s.e1 = Span{29, 29};  // token 0 is 29 before the start, beyond pos_max=8
  s.e2 = Span{1, 1};
  Tape tape;
  Tensor x = token_vectors(tape, s, p);
  const int bucket = 2 * dims.pos_max + 1;
  const auto& pos1 = p.emb.pos1_table.value();
  for (int j = 0; j < dims.pos_dim; ++j) {
    CHECK(x.at(0, dims.word_dim + j) ==
          doctest::Approx(pos1[bucket * dims.pos_dim + j]).epsilon(1e-12));
  }
}

TEST_CASE("PAD word row is zero after init and never receives gradient") {
  StudentParams p = tiny_model(Architecture::kCnn);
  const int dw = p.dims.word_dim;
  for (int j = 0; j < dw; ++j) {
    CHECK(p.emb.word_table.value()[Vocabulary::kPad * dw + j] == 0.0);
  }
  EncodedSample s = tiny_sample();
  s.token_ids[0] = Vocabulary::kPad;
  Tape tape;
  Tensor w = p.emb.word_table;
  zero_grad(w);
  Tensor probs = cnn_forward(tape, s, p);
  tape.backward(tape.ce_mse_loss(probs, {0.25, 0.25, 0.25, 0.25}, 0));
  for (int j = 0; j < dw; ++j) {
    CHECK(p.emb.word_table.node()->grad[Vocabulary::kPad * dw + j] == 0.0);
  }
}

TEST_CASE("every architecture outputs a probability simplex") {
  const EncodedSample s = tiny_sample();
  for (Architecture arch : kAll) {
    const StudentParams p = tiny_model(arch);
    const std::vector<double> probs = predict_probs(p, s);
    REQUIRE(probs.size() == 4);
    double sum = 0;
    for (double v : probs) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("forward passes match the independent reference to 1e-6") {
  for (Architecture arch : kAll) {
    for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
      const StudentParams p = tiny_model(arch, seed);
      const EncodedSample s = tiny_sample(7, 10, seed + 100);
      const std::vector<double> got = predict_probs(p, s);
      const std::vector<double> want = oracle::forward_probs(s, p);
      REQUIRE(got.size() == want.size());
      for (std::size_t j = 0; j < got.size(); ++j) {
        CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("zero output layer gives the uniform distribution") {
  for (Architecture arch : kAll) {
    StudentParams p = tiny_model(arch);
    std::fill(p.out_w.value().begin(), p.out_w.value().end(), 0.0);
    std::fill(p.out_b.value().begin(), p.out_b.value().end(), 0.0);
    const std::vector<double> probs = predict_probs(p, tiny_sample());
    for (double v : probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("pcnn with whole-sentence entities replicates the cnn feature threefold") {
  StudentParams p = tiny_model(Architecture::kPcnn);
  EncodedSample s = tiny_sample();
  const int n = static_cast<int>(s.token_ids.size());
  s.e1 = Span{0, n - 1};
  s.e2 = Span{0, n - 1};
  Tape tape;
  const Tensor x = token_vectors(tape, s, p);
  const Tensor conv = tape.tanh(tape.conv1d(x, p.conv_filters));
  const Tensor pieces = tape.piecewise_max_pool(conv, s.e1, s.e2);
  const Tensor global = tape.global_max_pool(conv);
  const int f = p.dims.filters;
  for (int seg = 0; seg < 3; ++seg) {
    for (int j = 0; j < f; ++j) {
      CHECK(pieces.at(seg * f + j) == global.at(j));
    }
  }
}

TEST_CASE("ea attention weights sum to one and n=1 attends to the single word") {
  StudentParams p = tiny_model(Architecture::kEa);
  EncodedSample s;
  s.token_ids = {4};
  s.e1 = Span{0, 0};
  s.e2 = Span{0, 0};
  s.label = 0;
  // with one position, softmax weight is 1, so the attentive feature is that
  // word's embedding; check through the oracle decomposition
  const oracle::Vec att = oracle::ea_attentive(s, p, s.e1);
  const int dw = p.dims.word_dim;
  for (int j = 0; j < dw; ++j) {
    CHECK(att[j] ==
          doctest::Approx(p.emb.word_table.value()[4 * dw + j]).epsilon(1e-12));
  }
  // attention over several positions sums to 1 by construction (softmax);
  // the full forward still matches the reference
  const EncodedSample multi = tiny_sample();
  const auto got = predict_probs(p, multi);
  const auto want = oracle::ea_probs(multi, p);
  for (std::size_t j = 0; j < got.size(); ++j) {
    CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-6));
  }
}

TEST_CASE("bgwa with zero gru weights still yields a valid simplex") {
  StudentParams p = tiny_model(Architecture::kBgwa);
  for (auto& np : p.named_params()) {
    if (np.name.rfind("gru_", 0) == 0) {
      std::fill(np.tensor.value().begin(), np.tensor.value().end(), 0.0);
    }
  }
  // zero hiddens -> uniform attention -> zero scaled hiddens; the output is
  // the softmax of the output bias
  const std::vector<double> probs = predict_probs(p, tiny_sample());
  oracle::Vec logits = p.out_b.value();
  const oracle::Vec want = oracle::softmax(logits);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    CHECK(probs[j] == doctest::Approx(want[j]).epsilon(1e-9));
  }
}

TEST_CASE("eval-mode forward is bit-reproducible") {
  for (Architecture arch : kAll) {
    const StudentParams p = tiny_model(arch);
    const EncodedSample s = tiny_sample();
    const auto a = predict_probs(p, s);
    const auto b = predict_probs(p, s);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
  }
}

TEST_CASE("permuting output rows permutes probabilities identically") {
  const StudentParams p = tiny_model(Architecture::kCnn);
  const EncodedSample s = tiny_sample();
  const auto base = predict_probs(p, s);

  // swap classes 1 and 3 in the output layer
  StudentParams q = p.clone(true);
  const std::size_t width = q.out_w.cols();
  for (std::size_t j = 0; j < width; ++j) {
    std::swap(q.out_w.value()[1 * width + j], q.out_w.value()[3 * width + j]);
  }
  std::swap(q.out_b.value()[1], q.out_b.value()[3]);
  const auto permuted = predict_probs(q, s);
  CHECK(permuted[1] == doctest::Approx(base[3]).epsilon(1e-12));
  CHECK(permuted[3] == doctest::Approx(base[1]).epsilon(1e-12));
  CHECK(permuted[0] == doctest::Approx(base[0]).epsilon(1e-12));
  CHECK(permuted[2] == doctest::Approx(base[2]).epsilon(1e-12));
}

TEST_CASE("zeroed position tables make the cnn ignore entity placement") {
  StudentParams p = tiny_model(Architecture::kCnn);
  std::fill(p.emb.pos1_table.value().begin(), p.emb.pos1_table.value().end(), 0.0);
  std::fill(p.emb.pos2_table.value().begin(), p.emb.pos2_table.value().end(), 0.0);
  EncodedSample s = tiny_sample();
  const auto a = predict_probs(p, s);
  s.e1 = Span{0, 0};
  s.e2 = Span{2, 2};
  const auto b = predict_probs(p, s);
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
  }
}

TEST_CASE("training-mode forward without an rng is rejected") {
  StudentParams p = tiny_model(Architecture::kCnn);
  p.dims.dropout = 0.5;
  Tape tape;
  ForwardOptions opts;
  opts.train = true;
  CHECK_THROWS_AS(cnn_forward(tape, tiny_sample(), p, opts), ConfigError);
}

TEST_CASE("gradient check passes for all four architectures at tiny config") {
  for (Architecture arch : kAll) {
    StudentParams p = tiny_model(arch);
    const EncodedSample s = tiny_sample(6);
    const std::vector<double> teacher = {0.4, 0.3, 0.2, 0.1};
    auto forward = [&](Tape& tape) {
      const Tensor probs = student_forward(tape, s, p);
      return tape.ce_mse_loss(probs, teacher, s.label);
    };
    const auto params = p.named_params();
    const GradCheckResult r = check_gradients(params, forward);
    INFO(architecture_name(arch), " worst: ", r.worst_param, "[", r.worst_index,
         "]");
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("pretrained embeddings overwrite matching rows only") {
  StudentParams p = tiny_model(Architecture::kCnn, 5, 4, 4);
  std::vector<RelationSample> samples(1);
  samples[0].tokens = {"alpha", "beta"};
  const Vocabulary vocab = Vocabulary::build(samples);  // alpha=2, beta=3
  const std::string path = "/tmp/sef_test_embeddings.txt";
  {
    std::ofstream out(path);
    out << "alpha 1 2 3 4\n";
    out << "missing 9 9 9 9\n";
  }
  const auto before_beta = std::vector<double>(
      p.emb.word_table.value().begin() + 3 * 4,
      p.emb.word_table.value().begin() + 4 * 4);
  const std::size_t loaded = load_pretrained_embeddings(path, vocab, p);
  CHECK(loaded == 1);
  CHECK(p.emb.word_table.value()[2 * 4 + 0] == 1.0);
  CHECK(p.emb.word_table.value()[2 * 4 + 3] == 4.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(p.emb.word_table.value()[3 * 4 + j] == before_beta[j]);
  }
  std::remove(path.c_str());
}
