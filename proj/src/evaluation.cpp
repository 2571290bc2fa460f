#include "sef/evaluation.hpp"

#include <algorithm>

#include "sef/parallel.hpp"

namespace sef {

ScoredPrediction score_prediction(const std::vector<double>& probs) {
  ScoredPrediction p;
  p.argmax = 0;
  p.max_prob = probs.at(0);
  for (std::size_t j = 1; j < probs.size(); ++j) {
    if (probs[j] > p.max_prob) {
      p.max_prob = probs[j];
      p.argmax = static_cast<int>(j);
    }
  }
  return p;
}

int apply_threshold(const std::vector<double>& probs, int none_index,
                    double threshold) {
  const ScoredPrediction p = score_prediction(probs);
  if (p.argmax == none_index) return none_index;
  if (p.max_prob < threshold) return none_index;
  return p.argmax;
}

EvalResult evaluate_predictions(const std::vector<ScoredPrediction>& preds,
                                const std::vector<int>& gold, int num_classes,
                                int none_index, double threshold) {
  if (preds.size() != gold.size()) throw ConfigError("predictions/gold mismatch");
  EvalResult r;
  r.threshold = threshold;
  r.per_relation.resize(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int pred = preds[i].argmax;
    if (pred != none_index && preds[i].max_prob < threshold) pred = none_index;
    const int g = gold[i];
    if (pred != none_index) {
      if (pred == g) {
        ++r.tp;
        ++r.per_relation[g].tp;
      } else {
        ++r.fp;
        ++r.per_relation[pred].fp;
        if (g != none_index) {
          ++r.fn;
          ++r.per_relation[g].fn;
        }
      }
    } else if (g != none_index) {
      ++r.fn;
      ++r.per_relation[g].fn;
    }
  }
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

std::pair<double, EvalResult> select_threshold(
    const std::vector<ScoredPrediction>& preds, const std::vector<int>& gold,
    int num_classes, int none_index) {
  if (preds.empty()) throw ConfigError("select_threshold: empty validation set");
  std::vector<double> candidates = {0.0, 1.0};
  for (const auto& p : preds) candidates.push_back(p.max_prob);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  double best_threshold = candidates.front();
  EvalResult best;
  bool have = false;
  for (double t : candidates) {
    EvalResult r = evaluate_predictions(preds, gold, num_classes, none_index, t);
    if (!have || r.f1 > best.f1) {  // ties keep the smallest threshold
      best = r;
      best_threshold = t;
      have = true;
    }
  }
  return {best_threshold, best};
}

std::vector<ScoredPrediction> predict_scored(
    const StudentParams& model, const std::vector<EncodedSample>& samples) {
  std::vector<ScoredPrediction> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = score_prediction(predict_probs(model, samples[i]));
  });
  return out;
}

EvalResult evaluate_model(const StudentParams& model,
                          const std::vector<EncodedSample>& samples,
                          int none_index, double threshold) {
  std::vector<int> gold(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) gold[i] = samples[i].label;
  return evaluate_predictions(predict_scored(model, samples), gold,
                              model.num_classes, none_index, threshold);
}

std::pair<double, EvalResult> select_threshold_model(
    const StudentParams& model, const std::vector<EncodedSample>& samples,
    int none_index) {
  std::vector<int> gold(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) gold[i] = samples[i].label;
  return select_threshold(predict_scored(model, samples), gold,
                          model.num_classes, none_index);
}

}  // namespace sef
