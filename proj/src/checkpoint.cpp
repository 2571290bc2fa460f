#include "sef/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace sef {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'E', 'F', 'C', 'K', 'P', 'T', '\1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_string(std::istream& in) {
  std::string s(read_u64(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
std::vector<double> read_doubles(std::istream& in) {
  std::vector<double> v(read_u64(in));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  return v;
}

void write_params(std::ostream& out, const std::vector<NamedParam>& params) {
  write_u64(out, params.size());
  for (const auto& p : params) {
    write_string(out, p.name);
    write_u64(out, p.tensor.shape().size());
    for (auto d : p.tensor.shape()) write_u64(out, d);
    write_doubles(out, p.tensor.value());
  }
}

void read_params_into(std::istream& in, const std::vector<NamedParam>& params) {
  const std::uint64_t count = read_u64(in);
  if (count != params.size()) throw DataError("checkpoint: parameter count mismatch");
  for (const auto& p : params) {
    const std::string name = read_string(in);
    if (name != p.name) {
      throw DataError("checkpoint: expected parameter '" + p.name + "', found '" +
                      name + "'");
    }
    std::vector<std::size_t> shape(read_u64(in));
    for (auto& d : shape) d = read_u64(in);
    if (shape != p.tensor.shape()) {
      throw DataError("checkpoint: shape mismatch for '" + name + "'");
    }
    p.tensor.node()->value = read_doubles(in);
    if (p.tensor.node()->value.size() != p.tensor.size()) {
      throw DataError("checkpoint: truncated data for '" + name + "'");
    }
  }
}

json dims_to_json(const ModelDims& d) {
  return json{{"word_dim", d.word_dim},     {"pos_dim", d.pos_dim},
              {"pos_max", d.pos_max},       {"filters", d.filters},
              {"kernel", d.kernel},         {"gru_hidden", d.gru_hidden},
              {"att_hidden", d.att_hidden}, {"dropout", d.dropout}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.word_dim = j.value("word_dim", d.word_dim);
  d.pos_dim = j.value("pos_dim", d.pos_dim);
  d.pos_max = j.value("pos_max", d.pos_max);
  d.filters = j.value("filters", d.filters);
  d.kernel = j.value("kernel", d.kernel);
  d.gru_hidden = j.value("gru_hidden", d.gru_hidden);
  d.att_hidden = j.value("att_hidden", d.att_hidden);
  d.dropout = j.value("dropout", d.dropout);
  return d;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["arch"] = architecture_name(c.arch);
  j["dims"] = dims_to_json(c.dims);
  j["batch_size"] = c.batch_size;
  j["alpha_max"] = c.alpha_max;
  j["ramp_epochs"] = c.ramp_epochs;
  j["top_k"] = c.top_k;
  j["learning_rate"] = c.learning_rate;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["filtering"] = c.filtering;
  j["split_ratio"] = c.split_ratio;
  j["seed"] = c.seed;
  j["embeddings_path"] = c.embeddings_path;
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  TrainConfig c;
  if (j.contains("arch")) c.arch = architecture_from_string(j["arch"]);
  if (j.contains("dims")) c.dims = dims_from_json(j["dims"]);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.alpha_max = j.value("alpha_max", c.alpha_max);
  c.ramp_epochs = j.value("ramp_epochs", c.ramp_epochs);
  c.top_k = j.value("top_k", c.top_k);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.filtering = j.value("filtering", c.filtering);
  c.split_ratio = j.value("split_ratio", c.split_ratio);
  c.seed = j.value("seed", c.seed);
  c.embeddings_path = j.value("embeddings_path", c.embeddings_path);
  return c;
}

Checkpoint checkpoint_from_result(const TrainConfig& config,
                                  const RelationSchema& schema,
                                  const TrainResult& result,
                                  const std::string& manifest_id) {
  Checkpoint c;
  c.manifest_id = manifest_id;
  c.config = config;
  c.schema = schema;
  c.vocab = result.vocab;
  c.student = result.student_final;
  c.teacher = result.teacher.params;
  c.adagrad = result.adagrad;
  c.step_idx = result.step_idx;
  c.epochs_run = result.epochs_run;
  c.best_epoch = result.best_epoch;
  c.best_threshold = result.best_threshold;
  c.best_f1 = result.best_eval.f1;
  c.active_mask = result.active.mask;
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_string(out, ckpt.manifest_id);
  write_string(out, train_config_to_json(ckpt.config));
  write_string(out, json(ckpt.schema.relations()).dump());

  write_u64(out, ckpt.vocab.words().size());
  for (const auto& w : ckpt.vocab.words()) write_string(out, w);

  write_params(out, ckpt.student.named_params());
  write_params(out, ckpt.teacher.named_params());

  write_u64(out, ckpt.adagrad.accum.size());
  for (const auto& acc : ckpt.adagrad.accum) write_doubles(out, acc);

  write_u64(out, static_cast<std::uint64_t>(ckpt.step_idx));
  write_u32(out, static_cast<std::uint32_t>(ckpt.epochs_run));
  write_u32(out, static_cast<std::uint32_t>(ckpt.best_epoch));
  write_f64(out, ckpt.best_threshold);
  write_f64(out, ckpt.best_f1);

  write_u64(out, ckpt.active_mask.size());
  out.write(reinterpret_cast<const char*>(ckpt.active_mask.data()),
            static_cast<std::streamsize>(ckpt.active_mask.size()));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  if (read_u32(in) != kVersion) throw DataError("unsupported checkpoint version");

  Checkpoint c;
  c.manifest_id = read_string(in);
  c.config = train_config_from_json(read_string(in));
  const json schema_json = json::parse(read_string(in));
  c.schema = RelationSchema(schema_json.get<std::vector<std::string>>());

  const std::uint64_t word_count = read_u64(in);
  std::vector<std::string> words(word_count);
  for (auto& w : words) w = read_string(in);
  if (words.size() < 2 || words[0] != "<PAD>" || words[1] != "<UNK>") {
    throw DataError("checkpoint: malformed vocabulary");
  }
  for (std::size_t i = 2; i < words.size(); ++i) c.vocab.add(words[i]);

  Rng scratch(0);  // shapes only; values are overwritten from the file
  c.student = init_student(c.config.arch, c.config.dims, c.schema.size(),
                           c.vocab.size(), scratch);
  c.teacher = init_student(c.config.arch, c.config.dims, c.schema.size(),
                           c.vocab.size(), scratch);
  read_params_into(in, c.student.named_params());
  read_params_into(in, c.teacher.named_params());

  const std::uint64_t accum_count = read_u64(in);
  if (accum_count != c.student.named_params().size()) {
    throw DataError("checkpoint: optimizer state mismatch");
  }
  c.adagrad.accum.resize(accum_count);
  for (auto& acc : c.adagrad.accum) acc = read_doubles(in);

  c.step_idx = static_cast<long long>(read_u64(in));
  c.epochs_run = static_cast<int>(read_u32(in));
  c.best_epoch = static_cast<int>(read_u32(in));
  c.best_threshold = read_f64(in);
  c.best_f1 = read_f64(in);

  c.active_mask.resize(read_u64(in));
  in.read(reinterpret_cast<char*>(c.active_mask.data()),
          static_cast<std::streamsize>(c.active_mask.size()));
  if (!in) throw DataError("checkpoint truncated: " + path);
  return c;
}

}  // namespace sef
