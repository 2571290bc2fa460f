#include "sef/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "sef/rng.hpp"

namespace sef {

using nlohmann::json;

RelationSchema::RelationSchema(std::vector<std::string> relations)
    : relations_(std::move(relations)) {
  if (relations_.size() < 2) {
    throw ConfigError("schema needs at least one valid relation plus None");
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (!index_.emplace(relations_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate relation name: " + relations_[i]);
    }
    if (relations_[i] == "None") none_index_ = static_cast<int>(i);
  }
  if (none_index_ < 0) throw ConfigError("schema must contain the None relation");
}

RelationSchema RelationSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("schema file " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("relations") || !j["relations"].is_array()) {
    throw DataError("schema file must be an object with a relations array");
  }
  std::vector<std::string> names;
  for (const auto& r : j["relations"]) {
    if (!r.is_string()) throw DataError("relation names must be strings");
    names.push_back(r.get<std::string>());
  }
  return RelationSchema(std::move(names));
}

void RelationSchema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  json j;
  j["relations"] = relations_;
  out << j.dump(2) << "\n";
}

int RelationSchema::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

namespace {

Span parse_span(const json& j, const char* field, const std::string& id) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer()) {
    throw DataError("sample " + id + ": " + field + " must be [start,end] ints");
  }
  return Span{j[0].get<int>(), j[1].get<int>()};
}

void validate_span(Span s, std::size_t n, const char* field, const std::string& id) {
  if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= n) {
    throw DataError("sample " + id + ": " + field + " span out of range");
  }
}

}  // namespace

std::vector<RelationSample> load_corpus(const std::string& path,
                                        const RelationSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<RelationSample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::size_t truncated = 0;
  static const std::vector<std::string> known_fields = {
      "id", "tokens", "e1", "e2", "relation", "noise_truth"};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw DataError("corpus line " + std::to_string(line_no) + ": not an object");
    }
    for (const auto& [key, _] : j.items()) {
      if (std::find(known_fields.begin(), known_fields.end(), key) ==
          known_fields.end()) {
        throw DataError("corpus line " + std::to_string(line_no) +
                        ": unknown field '" + key + "'");
      }
    }
    for (const char* required : {"id", "tokens", "e1", "e2", "relation"}) {
      if (!j.contains(required)) {
        throw DataError("corpus line " + std::to_string(line_no) +
                        ": missing field '" + required + "'");
      }
    }
    RelationSample s;
    if (!j["id"].is_string()) {
      throw DataError("corpus line " + std::to_string(line_no) + ": id must be a string");
    }
    s.id = j["id"].get<std::string>();
    if (!j["tokens"].is_array() || j["tokens"].empty()) {
      throw DataError("sample " + s.id + ": tokens must be a nonempty string array");
    }
    for (const auto& t : j["tokens"]) {
      if (!t.is_string()) throw DataError("sample " + s.id + ": tokens must be strings");
      s.tokens.push_back(t.get<std::string>());
    }
    if (s.tokens.size() > kMaxSentenceTokens) {
      s.tokens.resize(kMaxSentenceTokens);
      ++truncated;
    }
    s.e1 = parse_span(j["e1"], "e1", s.id);
    s.e2 = parse_span(j["e2"], "e2", s.id);
    validate_span(s.e1, s.tokens.size(), "e1", s.id);
    validate_span(s.e2, s.tokens.size(), "e2", s.id);
    if (!j["relation"].is_string()) {
      throw DataError("sample " + s.id + ": relation must be a string");
    }
    const std::string rel = j["relation"].get<std::string>();
    s.ds_label = schema.index_of(rel);
    if (s.ds_label < 0) {
      throw DataError("sample " + s.id + ": unknown relation '" + rel + "'");
    }
    if (j.contains("noise_truth")) {
      if (!j["noise_truth"].is_boolean()) {
        throw DataError("sample " + s.id + ": noise_truth must be a boolean");
      }
      s.noise_truth = j["noise_truth"].get<bool>();
    }
    samples.push_back(std::move(s));
  }
  if (truncated > 0) {
    std::cerr << "warning: truncated " << truncated << " sentence(s) to "
              << kMaxSentenceTokens << " tokens in " << path << "\n";
  }
  return samples;
}

void save_corpus(const std::string& path,
                 const std::vector<RelationSample>& samples,
                 const RelationSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& s : samples) {
    json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    j["e1"] = {s.e1.start, s.e1.end};
    j["e2"] = {s.e2.start, s.e2.end};
    j["relation"] = schema.name(s.ds_label);
    if (s.noise_truth.has_value()) j["noise_truth"] = *s.noise_truth;
    out << j.dump() << "\n";
  }
}

Vocabulary::Vocabulary() {
  add("<PAD>");
  add("<UNK>");
}

Vocabulary Vocabulary::build(const std::vector<RelationSample>& samples) {
  Vocabulary v;
  for (const auto& s : samples) {
    for (const auto& t : s.tokens) v.add(t);
  }
  return v;
}

int Vocabulary::add(const std::string& word) {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(words_.size());
  words_.push_back(word);
  index_.emplace(word, idx);
  return idx;
}

int Vocabulary::lookup(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

CorpusSplit split_train_valid(const std::vector<RelationSample>& samples,
                              double ratio, std::uint64_t seed) {
  if (samples.size() < 2) throw ConfigError("need at least 2 samples to split");
  if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("split ratio must be in (0,1)");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(seed).substream("split");
  rng.shuffle(order);
  const auto train_count = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(samples.size())));
  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? split.train : split.validation).push_back(samples[order[i]]);
  }
  return split;
}

}  // namespace sef
