#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sef/common.hpp"

namespace sef {

// Ordered relation inventory. Index order is fixed for a run: softmax outputs,
// labels, and reports all use these indices.
class RelationSchema {
 public:
  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> relations);

  static RelationSchema load(const std::string& path);
  void save(const std::string& path) const;

  int index_of(const std::string& name) const;  // -1 if unknown
  const std::string& name(int index) const { return relations_.at(index); }
  const std::vector<std::string>& relations() const { return relations_; }
  int none_index() const { return none_index_; }
  int size() const { return static_cast<int>(relations_.size()); }
  bool is_none(int index) const { return index == none_index_; }

  bool operator==(const RelationSchema& other) const {
    return relations_ == other.relations_;
  }

 private:
  std::vector<std::string> relations_;
  std::unordered_map<std::string, int> index_;
  int none_index_ = -1;
};

// One sentence with two marked entity spans and a distant-supervision label.
// Spans are inclusive 0-based token indices; argument order is significant.
struct RelationSample {
  std::string id;
  std::vector<std::string> tokens;
  Span e1;
  Span e2;
  int ds_label = 0;
  std::optional<bool> noise_truth;  // synthetic corpora only

  bool operator==(const RelationSample& other) const {
    return id == other.id && tokens == other.tokens &&
           e1.start == other.e1.start && e1.end == other.e1.end &&
           e2.start == other.e2.start && e2.end == other.e2.end &&
           ds_label == other.ds_label && noise_truth == other.noise_truth;
  }
};

constexpr int kMaxSentenceTokens = 100;

// UTF-8 JSONL, one sample per line, fields exactly:
//   id, tokens, e1, e2, relation, optional noise_truth.
// Longer sentences are truncated to kMaxSentenceTokens with a warning; spans
// are then validated against the truncated length.
std::vector<RelationSample> load_corpus(const std::string& path,
                                        const RelationSchema& schema);
void save_corpus(const std::string& path,
                 const std::vector<RelationSample>& samples,
                 const RelationSchema& schema);

// Word -> embedding-row map with fixed PAD and UNK entries. PAD's embedding
// row is all-zero and frozen.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // Insertion order of first occurrence over the given samples.
  static Vocabulary build(const std::vector<RelationSample>& samples);

  int add(const std::string& word);
  int lookup(const std::string& word) const;  // kUnk for unseen words
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct CorpusSplit {
  std::vector<RelationSample> train;
  std::vector<RelationSample> validation;
  std::uint64_t seed = 0;
};

// Deterministic shuffle by seed, then split; same seed gives an identical
// split. Train size is round(ratio * N).
CorpusSplit split_train_valid(const std::vector<RelationSample>& samples,
                              double ratio, std::uint64_t seed);

}  // namespace sef
