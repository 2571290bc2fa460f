#pragma once

#include <string>

#include "sef/self_ensemble.hpp"

namespace sef {

// Versioned binary container for a finished training run. Doubles are stored
// as raw IEEE-754 little-endian bytes, so save/load round-trips exactly and
// identical runs produce identical files.
struct Checkpoint {
  std::string manifest_id;
  TrainConfig config;
  RelationSchema schema;
  Vocabulary vocab;
  StudentParams student;        // final-epoch student
  StudentParams teacher;        // best-validation teacher (the deployed model)
  AdagradState adagrad;
  long long step_idx = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_threshold = 0.0;
  double best_f1 = 0.0;
  std::vector<std::uint8_t> active_mask;
};

Checkpoint checkpoint_from_result(const TrainConfig& config,
                                  const RelationSchema& schema,
                                  const TrainResult& result,
                                  const std::string& manifest_id);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// TrainConfig <-> JSON (config files, manifests, checkpoint header).
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& json_text);

}  // namespace sef
