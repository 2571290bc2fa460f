#include "sef/noise_filter.hpp"

#include <algorithm>

#include "sef/parallel.hpp"

namespace sef {

const char* filter_reason_name(FilterReason reason) {
  switch (reason) {
    case FilterReason::kClean: return "clean";
    case FilterReason::kNoneMismatch: return "none-mismatch";
    case FilterReason::kNotInTopK: return "not-in-topk";
  }
  return "clean";
}

std::vector<RankedRelation> rank_topk(const std::vector<double>& probs, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > probs.size()) {
    throw ConfigError("top-k must be in [1, C]");
  }
  std::vector<RankedRelation> ranked(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    ranked[j] = {static_cast<int>(j), probs[j]};
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedRelation& a, const RankedRelation& b) {
                     return a.prob > b.prob;
                   });
  ranked.resize(k);
  return ranked;
}

std::vector<RankedRelation> predict_topk(const StudentParams& teacher,
                                         const EncodedSample& sample, int k) {
  return rank_topk(predict_probs(teacher, sample), k);
}

namespace {

struct RuleResult {
  bool kept;
  FilterReason reason;
};

RuleResult apply_rules(const std::vector<RankedRelation>& top, int label,
                       int none_index) {
  if (label == none_index) {
    const bool kept = top.front().relation == none_index;
    return {kept, kept ? FilterReason::kClean : FilterReason::kNoneMismatch};
  }
  for (const auto& r : top) {
    if (r.relation == label) return {true, FilterReason::kClean};
  }
  return {false, FilterReason::kNotInTopK};
}

}  // namespace

ActiveSet filter_probs(const std::vector<std::vector<double>>& probs,
                       const std::vector<int>& labels, int num_classes,
                       int none_index, int k, int epoch) {
  if (probs.size() != labels.size()) throw ConfigError("probs/labels mismatch");
  ActiveSet out;
  out.epoch = epoch;
  out.mask.assign(probs.size(), 0);
  out.filtered_per_relation.assign(num_classes, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto top = rank_topk(probs[i], k);
    const RuleResult r = apply_rules(top, labels[i], none_index);
    out.mask[i] = r.kept ? 1 : 0;
    if (!r.kept) {
      ++out.filtered_per_relation[labels[i]];
      if (labels[i] == none_index) {
        ++out.filtered_none;
      } else {
        ++out.filtered_valid;
      }
    }
  }
  return out;
}

ActiveSet filter_corpus(const StudentParams& teacher,
                        const std::vector<EncodedSample>& corpus,
                        int none_index, int k, int epoch) {
  std::vector<std::vector<double>> probs(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    probs[i] = predict_probs(teacher, corpus[i]);
  });
  std::vector<int> labels(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) labels[i] = corpus[i].label;
  return filter_probs(probs, labels, teacher.num_classes, none_index, k, epoch);
}

ActiveSet active_from_decisions(const std::vector<FilterDecision>& decisions,
                                const std::vector<EncodedSample>& encoded,
                                int num_classes, int none_index, int epoch) {
  if (decisions.size() != encoded.size()) {
    throw ConfigError("decisions/encoded mismatch");
  }
  ActiveSet out;
  out.epoch = epoch;
  out.mask.assign(decisions.size(), 0);
  out.filtered_per_relation.assign(num_classes, 0);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    out.mask[i] = decisions[i].kept ? 1 : 0;
    if (!decisions[i].kept) {
      ++out.filtered_per_relation[encoded[i].label];
      if (encoded[i].label == none_index) {
        ++out.filtered_none;
      } else {
        ++out.filtered_valid;
      }
    }
  }
  return out;
}

std::vector<FilterDecision> filter_report(
    const StudentParams& teacher, const std::vector<RelationSample>& samples,
    const std::vector<EncodedSample>& encoded, int none_index, int k) {
  if (samples.size() != encoded.size()) throw ConfigError("samples/encoded mismatch");
  std::vector<FilterDecision> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    FilterDecision d;
    d.id = samples[i].id;
    d.teacher_top = predict_topk(teacher, encoded[i], k);
    const RuleResult r = apply_rules(d.teacher_top, encoded[i].label, none_index);
    d.kept = r.kept;
    d.reason = r.reason;
    out[i] = std::move(d);
  });
  return out;
}

}  // namespace sef
