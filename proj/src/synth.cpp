#include "sef/synth.hpp"

#include <cmath>
#include <cstdio>

#include "sef/rng.hpp"

namespace sef {

namespace {

std::string rel_name(int r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rel%02d", r);
  return buf;
}

void validate(const SynthConfig& c) {
  if (c.pos_noise_rate < 0.0 || c.pos_noise_rate > 1.0 ||
      c.neg_noise_rate < 0.0 || c.neg_noise_rate > 1.0) {
    throw ConfigError("noise rates must be in [0,1]");
  }
  if (c.valid_relations < 1) throw ConfigError("need at least one valid relation");
  if (c.samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (c.vocab_size < 1 || c.entity_pool < 1) throw ConfigError("empty token pools");
  if (c.min_tokens < 6 || c.max_tokens < c.min_tokens) {
    throw ConfigError("sentence length range must satisfy 6 <= min <= max");
  }
  if (c.none_ratio < 0.0) throw ConfigError("none_ratio must be >= 0");
  if (c.cues_per_relation < 1) throw ConfigError("cues_per_relation must be >= 1");
}

struct SentenceLayout {
  std::vector<std::string> tokens;
  Span first;   // physically first entity span
  Span second;  // physically second entity span
};

SentenceLayout make_sentence(const SynthConfig& c, Rng& rng) {
  SentenceLayout s;
  const int n = rng.int_in(c.min_tokens, c.max_tokens);
  s.tokens.resize(n);
  for (auto& t : s.tokens) {
    t = "w" + std::to_string(rng.below(static_cast<std::uint64_t>(c.vocab_size)));
  }
  const int l1 = rng.int_in(1, 2), l2 = rng.int_in(1, 2);
  // Two disjoint spans with at least one token strictly between them, so a
  // cue always has somewhere to sit.
  int s1 = 0, s2 = 0;
  for (;;) {
    s1 = rng.int_in(0, n - l1);
    s2 = rng.int_in(0, n - l2);
    const int lo_end = (s1 < s2 ? s1 + l1 - 1 : s2 + l2 - 1);
    const int hi_start = (s1 < s2 ? s2 : s1);
    if (s1 != s2 && hi_start - lo_end >= 2) break;
  }
  const int ent1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.entity_pool)));
  const int ent2 = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.entity_pool)));
  for (int j = 0; j < l1; ++j) {
    s.tokens[s1 + j] = "ent" + std::to_string(ent1) + "_" + std::to_string(j);
  }
  for (int j = 0; j < l2; ++j) {
    s.tokens[s2 + j] = "ent" + std::to_string(ent2) + "_" + std::to_string(j);
  }
  const Span span1{s1, s1 + l1 - 1}, span2{s2, s2 + l2 - 1};
  s.first = (s1 < s2) ? span1 : span2;
  s.second = (s1 < s2) ? span2 : span1;
  return s;
}

void place_cue(SentenceLayout& s, const std::string& cue, Rng& rng) {
  const int lo = s.first.end + 1, hi = s.second.start - 1;
  const int pos = rng.int_in(lo, hi);
  s.tokens[pos] = cue;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  validate(config);

  SynthCorpus corpus;
  std::vector<std::string> names = {"None"};
  for (int r = 0; r < config.valid_relations; ++r) names.push_back(rel_name(r));
  corpus.schema = RelationSchema(std::move(names));

  corpus.cues.resize(corpus.schema.size());
  for (int r = 0; r < config.valid_relations; ++r) {
    const int rel_idx = corpus.schema.index_of(rel_name(r));
    for (int j = 0; j < config.cues_per_relation; ++j) {
      corpus.cues[rel_idx].push_back("cue_" + rel_name(r) + "_" +
                                     std::to_string(j));
    }
  }

  Rng rng = Rng(seed).substream("synth");
  std::size_t counter = 0;
  auto next_id = [&counter] {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%06zu", counter++);
    return std::string(buf);
  };

  auto pick_cue = [&](int rel_idx, Rng& r) {
    const auto& list = corpus.cues[rel_idx];
    return list[r.below(list.size())];
  };

  // Positives, class by class.
  for (int r = 0; r < config.valid_relations; ++r) {
    const int rel_idx = corpus.schema.index_of(rel_name(r));
    for (int i = 0; i < config.samples_per_class; ++i) {
      SentenceLayout layout = make_sentence(config, rng);
      const bool noisy = rng.bernoulli(config.pos_noise_rate);
      if (!noisy) place_cue(layout, pick_cue(rel_idx, rng), rng);
      RelationSample sample;
      sample.id = next_id();
      sample.tokens = std::move(layout.tokens);
      const bool e1_first = rng.bernoulli(0.5);
      sample.e1 = e1_first ? layout.first : layout.second;
      sample.e2 = e1_first ? layout.second : layout.first;
      sample.ds_label = rel_idx;
      sample.noise_truth = noisy;
      corpus.samples.push_back(std::move(sample));
    }
  }

  // None samples.
  const auto positives =
      static_cast<long long>(config.valid_relations) * config.samples_per_class;
  const auto none_count = static_cast<long long>(
      std::llround(config.none_ratio * static_cast<double>(positives)));
  for (long long i = 0; i < none_count; ++i) {
    SentenceLayout layout = make_sentence(config, rng);
    const bool noisy = rng.bernoulli(config.neg_noise_rate);
    if (noisy) {
      const int hidden = rng.int_in(0, config.valid_relations - 1);
      place_cue(layout, pick_cue(corpus.schema.index_of(rel_name(hidden)), rng), rng);
    }
    RelationSample sample;
    sample.id = next_id();
    sample.tokens = std::move(layout.tokens);
    const bool e1_first = rng.bernoulli(0.5);
    sample.e1 = e1_first ? layout.first : layout.second;
    sample.e2 = e1_first ? layout.second : layout.first;
    sample.ds_label = corpus.schema.none_index();
    sample.noise_truth = noisy;
    corpus.samples.push_back(std::move(sample));
  }

  return corpus;
}

}  // namespace sef
