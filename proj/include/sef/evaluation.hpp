#pragma once

#include <utility>
#include <vector>

#include "sef/students.hpp"

namespace sef {

// Precision/recall/F1 over valid relations only. None predictions and None
// gold labels never count as true positives.
struct EvalResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  long long tp = 0, fp = 0, fn = 0;
  struct PerRelation {
    long long tp = 0, fp = 0, fn = 0;
  };
  std::vector<PerRelation> per_relation;  // indexed by relation
};

struct ScoredPrediction {
  int argmax = 0;      // ties break to the lowest index
  double max_prob = 0.0;
};

ScoredPrediction score_prediction(const std::vector<double>& probs);

// None stays None at any threshold; a valid argmax below the threshold is
// demoted to None.
int apply_threshold(const std::vector<double>& probs, int none_index,
                    double threshold);

EvalResult evaluate_predictions(const std::vector<ScoredPrediction>& preds,
                                const std::vector<int>& gold, int num_classes,
                                int none_index, double threshold);

// Sweeps the observed max-probabilities (plus 0 and 1) and returns the
// threshold maximizing F1; ties resolve to the smallest threshold.
std::pair<double, EvalResult> select_threshold(
    const std::vector<ScoredPrediction>& preds, const std::vector<int>& gold,
    int num_classes, int none_index);

// Model-level wrappers (teacher or student in eval mode).
std::vector<ScoredPrediction> predict_scored(
    const StudentParams& model, const std::vector<EncodedSample>& samples);
EvalResult evaluate_model(const StudentParams& model,
                          const std::vector<EncodedSample>& samples,
                          int none_index, double threshold);
std::pair<double, EvalResult> select_threshold_model(
    const StudentParams& model, const std::vector<EncodedSample>& samples,
    int none_index);

}  // namespace sef
