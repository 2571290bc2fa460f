#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sef/corpus.hpp"
#include "sef/evaluation.hpp"
#include "sef/noise_filter.hpp"
#include "sef/students.hpp"

namespace sef {

// EMA mirror of the student. Shape-identical at all times; only ema_update
// ever writes to it, the optimizer never touches it.
struct TeacherState {
  StudentParams params;
};

// Gaussian ramp-up of the EMA decay:
//   T = E * ceil(L / B)        (L = initial training-set size)
//   p = 1 - min(step_idx, T)/T
//   alpha = exp(-5 p^2) * alpha_max
struct AlphaSchedule {
  long long ramp_steps = 1;  // T
  double alpha_max = 0.9;

  static AlphaSchedule from_corpus(int ramp_epochs, std::size_t initial_size,
                                   int batch_size, double alpha_max);
};

double alpha_at(long long step_idx, const AlphaSchedule& schedule);

struct LossComponents {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  bool clamped = false;  // some student prob of the true class hit the floor
};

// L = L_ce + L_mse over a batch of row-simplex probability matrices. The
// teacher matrix is a constant target (no gradient path exists here at all;
// this is the logging/oracle form of the tape's ce_mse_loss).
LossComponents combined_loss(const std::vector<std::vector<double>>& student_probs,
                             const std::vector<std::vector<double>>& teacher_probs,
                             const std::vector<int>& labels);

// teacher := alpha * teacher + (1 - alpha) * student, elementwise over every
// trainable tensor. Shape mismatch is fatal.
void ema_update(TeacherState& teacher, const StudentParams& student, double alpha);

struct AdagradState {
  std::vector<std::vector<double>> accum;  // aligned with named_params order

  static AdagradState for_params(const std::vector<NamedParam>& params);
};

// accum += grad^2; param -= lr * grad / sqrt(accum + 1e-8). Returns false
// (and updates nothing) if any gradient is non-finite.
bool adagrad_step(const std::vector<NamedParam>& params, AdagradState& state,
                  double lr);

struct TrainConfig {
  Architecture arch = Architecture::kCnn;
  ModelDims dims;
  int batch_size = 50;
  double alpha_max = 0.9;
  int ramp_epochs = 5;       // E
  int top_k = 3;             // K
  double learning_rate = 0.01;
  int max_epochs = 30;
  int patience = 5;
  bool filtering = true;     // false reproduces the no-filter ablation
  double split_ratio = 0.9;  // train fraction; the rest is validation
  std::uint64_t seed = 1;
  std::string embeddings_path;  // optional pretrained word vectors
};

struct EpochRecord {
  int epoch = 0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double val_f1 = 0.0;
  std::size_t active_size = 0;     // samples trained on this epoch
  long long filtered_none = 0;     // dropped by the filter run after this epoch
  long long filtered_valid = 0;
  double alpha_end = 0.0;          // alpha used by the epoch's last step
  double seconds = 0.0;            // wall clock; manifest only, never logged
};

struct TrainResult {
  TeacherState teacher;        // best-validation-F1 teacher snapshot
  StudentParams student_final;
  AdagradState adagrad;
  ActiveSet active;            // mask in force when training stopped
  Vocabulary vocab;
  long long step_idx = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_threshold = 0.0;
  EvalResult best_eval;
  std::vector<EpochRecord> log;
  std::vector<FilterDecision> final_decisions;  // last in-loop filter pass
  std::size_t clamp_events = 0;
};

// The student-teacher loop: per batch, update the student on the combined
// loss, then blend the teacher; per epoch, evaluate the teacher on the
// validation split and (when continuing, with filtering on) rebuild the
// active set from the entire initial training corpus.
TrainResult train(const TrainConfig& config, const CorpusSplit& split,
                  const RelationSchema& schema);

}  // namespace sef
