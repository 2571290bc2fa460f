#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sef/corpus.hpp"

namespace sef {

// Synthetic distant-supervision corpus with ground-truth noise labels.
//
// Every valid relation owns a small set of cue tokens. A clean positive
// sentence contains a cue of its label between (or adjacent to) the two
// entities; a noisy positive carries the label but no cue at all. A clean
// None sentence has no cue; a noisy None contains a cue of some relation the
// knowledge base missed. A cue-matching classifier therefore scores F1 = 1 on
// the noise-free subset, which is what makes filter quality measurable.
struct SynthConfig {
  int valid_relations = 24;
  int vocab_size = 500;          // filler word pool
  int entity_pool = 120;
  int samples_per_class = 200;
  double pos_noise_rate = 0.0;   // fraction of positives without their cue
  double neg_noise_rate = 0.0;   // fraction of None samples hiding a cue
  double none_ratio = 2.34;      // None count = round(ratio * positives)
  int min_tokens = 8;
  int max_tokens = 16;
  int cues_per_relation = 2;
};

struct SynthCorpus {
  std::vector<RelationSample> samples;
  RelationSchema schema;
  // cue tokens per relation index (empty list at the None index); a pure
  // function of the config, so independently seeded corpora share semantics.
  std::vector<std::vector<std::string>> cues;
};

SynthCorpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace sef
