#pragma once

#include <string>
#include <vector>

#include "sef/autodiff.hpp"
#include "sef/corpus.hpp"
#include "sef/rng.hpp"

namespace sef {

enum class Architecture { kCnn, kPcnn, kEa, kBgwa };

Architecture architecture_from_string(const std::string& name);
std::string architecture_name(Architecture arch);

struct ModelDims {
  int word_dim = 50;     // token embedding width
  int pos_dim = 5;       // each positional embedding width
  int pos_max = 50;      // distance clip radius; one extra bucket beyond it
  int filters = 230;
  int kernel = 3;
  int gru_hidden = 115;  // per direction; 2h matches the conv feature budget
  int att_hidden = 50;   // attention scorer hidden width
  double dropout = 0.5;

  int token_width() const { return word_dim + 2 * pos_dim; }
  int pos_rows() const { return 2 * pos_max + 2; }
};

// Word table plus two positional tables. Row layout of a positional table:
// clipped distance d in [-pos_max, pos_max] -> row pos_max + d; anything
// farther maps to the final clip-bucket row.
struct EmbeddingTables {
  Tensor word_table;  // |V| x word_dim; PAD row zero and frozen
  Tensor pos1_table;  // pos_rows x pos_dim
  Tensor pos2_table;
};

// Sample resolved against a vocabulary, ready for the encoders.
struct EncodedSample {
  std::vector<int> token_ids;
  Span e1;
  Span e2;
  int label = 0;
};

EncodedSample encode_sample(const RelationSample& sample, const Vocabulary& vocab);

struct StudentParams {
  Architecture arch = Architecture::kCnn;
  ModelDims dims;
  int num_classes = 0;
  EmbeddingTables emb;

  Tensor conv_filters;                    // CNN / PCNN / EA global path
  Tensor att_w1, att_b1, att_w2, att_b2;  // EA and BGWA attention scorer
  GruCell gru_fwd, gru_bwd;               // BGWA only
  Tensor bgwa_filters;                    // conv over scaled Bi-GRU hiddens
  Tensor out_w, out_b;

  // All trainable tensors in a fixed order (checkpointing, optimizer, EMA,
  // gradient checks all iterate this list).
  std::vector<NamedParam> named_params() const;

  // Deep copy; trainable=false detaches the copy from any optimizer use.
  StudentParams clone(bool trainable) const;
};

// Uniform(-0.1, 0.1) init for every trainable tensor except the PAD row.
StudentParams init_student(Architecture arch, const ModelDims& dims,
                           int num_classes, int vocab_size, Rng& rng);

struct ForwardOptions {
  bool train = false;   // enables dropout on the penultimate feature
  Rng* dropout_rng = nullptr;
};

// Row t is w_t || u1_t || u2_t with distances measured to each entity's
// start token.
Tensor token_vectors(Tape& tape, const EncodedSample& sample,
                     const StudentParams& params);

Tensor cnn_forward(Tape& tape, const EncodedSample& sample,
                   const StudentParams& params, const ForwardOptions& opts = {});
Tensor pcnn_forward(Tape& tape, const EncodedSample& sample,
                    const StudentParams& params, const ForwardOptions& opts = {});
Tensor ea_forward(Tape& tape, const EncodedSample& sample,
                  const StudentParams& params, const ForwardOptions& opts = {});
Tensor bgwa_forward(Tape& tape, const EncodedSample& sample,
                    const StudentParams& params, const ForwardOptions& opts = {});

// Dispatch on params.arch; returns the class-probability simplex.
Tensor student_forward(Tape& tape, const EncodedSample& sample,
                       const StudentParams& params, const ForwardOptions& opts = {});

// Eval-mode probabilities as plain doubles (no tape kept).
std::vector<double> predict_probs(const StudentParams& params,
                                  const EncodedSample& sample);

// Text format, one line per word: token then word_dim reals. Words absent
// from the file keep their random init; PAD stays zero.
std::size_t load_pretrained_embeddings(const std::string& path,
                                       const Vocabulary& vocab,
                                       StudentParams& params);

}  // namespace sef
