#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sef/students.hpp"

namespace sef {

// Per-iteration mask over the INITIAL training corpus. Rebuilt from scratch
// each epoch, so a sample dropped once can be readmitted later.
struct ActiveSet {
  std::vector<std::uint8_t> mask;  // 1 = train on it next epoch
  int epoch = 0;                   // the epoch this mask feeds
  std::vector<long long> filtered_per_relation;
  long long filtered_none = 0;
  long long filtered_valid = 0;

  std::size_t active_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }

  static ActiveSet all_active(std::size_t corpus_size, int num_classes) {
    ActiveSet a;
    a.mask.assign(corpus_size, 1);
    a.epoch = 1;
    a.filtered_per_relation.assign(num_classes, 0);
    return a;
  }
};

struct RankedRelation {
  int relation = 0;
  double prob = 0.0;
};

enum class FilterReason { kClean, kNoneMismatch, kNotInTopK };
const char* filter_reason_name(FilterReason reason);

struct FilterDecision {
  std::string id;
  bool kept = true;
  FilterReason reason = FilterReason::kClean;
  std::vector<RankedRelation> teacher_top;  // descending prob, ties by index
};

// Top-k by probability; ties break to the ascending relation index.
std::vector<RankedRelation> rank_topk(const std::vector<double>& probs, int k);
std::vector<RankedRelation> predict_topk(const StudentParams& teacher,
                                         const EncodedSample& sample, int k);

// Filtering rules over precomputed probability rows:
//   None-labeled:  kept iff the teacher argmax is None (strict).
//   valid-labeled: kept iff the label is in the teacher's top-k (lenient).
// Stateless with respect to any previous mask.
ActiveSet filter_probs(const std::vector<std::vector<double>>& probs,
                       const std::vector<int>& labels, int num_classes,
                       int none_index, int k, int epoch);

// Runs the teacher in eval mode over the entire initial corpus.
ActiveSet filter_corpus(const StudentParams& teacher,
                        const std::vector<EncodedSample>& corpus,
                        int none_index, int k, int epoch);

// Same pass, but keeps the per-sample audit trail.
std::vector<FilterDecision> filter_report(
    const StudentParams& teacher, const std::vector<RelationSample>& samples,
    const std::vector<EncodedSample>& encoded, int none_index, int k);

ActiveSet active_from_decisions(const std::vector<FilterDecision>& decisions,
                                const std::vector<EncodedSample>& encoded,
                                int num_classes, int none_index, int epoch);

}  // namespace sef
