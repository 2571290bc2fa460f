#include "sef/self_ensemble.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

namespace sef {

AlphaSchedule AlphaSchedule::from_corpus(int ramp_epochs, std::size_t initial_size,
                                         int batch_size, double alpha_max) {
  if (ramp_epochs < 1 || batch_size < 1 || initial_size == 0) {
    throw ConfigError("alpha schedule needs E >= 1, B >= 1, nonempty corpus");
  }
  if (alpha_max < 0.0 || alpha_max >= 1.0) {
    throw ConfigError("alpha_max must be in [0, 1)");
  }
  AlphaSchedule s;
  const auto steps_per_epoch = static_cast<long long>(
      (initial_size + static_cast<std::size_t>(batch_size) - 1) /
      static_cast<std::size_t>(batch_size));
  s.ramp_steps = static_cast<long long>(ramp_epochs) * steps_per_epoch;
  s.alpha_max = alpha_max;
  return s;
}

double alpha_at(long long step_idx, const AlphaSchedule& schedule) {
  if (schedule.ramp_steps < 1) throw ConfigError("alpha schedule: T must be >= 1");
  const double clipped =
      static_cast<double>(std::min(std::max(step_idx, 0ll), schedule.ramp_steps));
  const double p = 1.0 - clipped / static_cast<double>(schedule.ramp_steps);
  return std::exp(-5.0 * p * p) * schedule.alpha_max;
}

LossComponents combined_loss(const std::vector<std::vector<double>>& student_probs,
                             const std::vector<std::vector<double>>& teacher_probs,
                             const std::vector<int>& labels) {
  const std::size_t b = student_probs.size();
  if (b == 0 || teacher_probs.size() != b || labels.size() != b) {
    throw ConfigError("combined_loss: batch size mismatch");
  }
  constexpr double kClamp = 1e-12;
  LossComponents out;
  for (std::size_t i = 0; i < b; ++i) {
    const auto& s = student_probs[i];
    const auto& t = teacher_probs[i];
    if (s.size() != t.size()) throw ConfigError("combined_loss: class count mismatch");
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= s.size()) {
      throw ConfigError("combined_loss: label out of range");
    }
    double p_true = s[label];
    if (p_true < kClamp) {
      out.clamped = true;
      p_true = kClamp;
    }
    out.ce -= std::log(p_true);
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double diff = s[j] - t[j];
      out.mse += diff * diff;
    }
  }
  out.ce /= static_cast<double>(b);
  out.mse /= static_cast<double>(b);
  out.total = out.ce + out.mse;
  return out;
}

void ema_update(TeacherState& teacher, const StudentParams& student, double alpha) {
  const auto t_params = teacher.params.named_params();
  const auto s_params = student.named_params();
  if (t_params.size() != s_params.size()) {
    throw ConfigError("ema_update: parameter lists differ");
  }
  for (std::size_t i = 0; i < t_params.size(); ++i) {
    auto& tv = t_params[i].tensor.node()->value;
    const auto& sv = s_params[i].tensor.node()->value;
    if (t_params[i].tensor.shape() != s_params[i].tensor.shape()) {
      throw ConfigError("ema_update: shape mismatch at " + t_params[i].name);
    }
    for (std::size_t j = 0; j < tv.size(); ++j) {
      tv[j] = alpha * tv[j] + (1.0 - alpha) * sv[j];
    }
  }
}

AdagradState AdagradState::for_params(const std::vector<NamedParam>& params) {
  AdagradState s;
  s.accum.reserve(params.size());
  for (const auto& p : params) s.accum.emplace_back(p.tensor.size(), 0.0);
  return s;
}

bool adagrad_step(const std::vector<NamedParam>& params, AdagradState& state,
                  double lr) {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (state.accum.size() != params.size()) {
    throw ConfigError("adagrad state does not match parameter list");
  }
  constexpr double kEps = 1e-8;
  for (const auto& p : params) {
    for (double g : p.tensor.node()->grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].tensor.node()->value;
    auto& grad = params[i].tensor.node()->grad;
    if (grad.size() != value.size()) continue;  // never reached in a backward pass
    auto& acc = state.accum[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      acc[j] += grad[j] * grad[j];
      value[j] -= lr * grad[j] / std::sqrt(acc[j] + kEps);
    }
  }
  return true;
}

TrainResult train(const TrainConfig& config, const CorpusSplit& split,
                  const RelationSchema& schema) {
  if (split.train.empty()) throw ConfigError("empty training split");
  if (split.validation.empty()) throw ConfigError("empty validation split");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (config.top_k < 1 || config.top_k > schema.size()) {
    throw ConfigError("top-k must be in [1, C]");
  }

  TrainResult result;
  Rng root(config.seed);

  result.vocab = Vocabulary::build(split.train);
  StudentParams student = init_student(config.arch, config.dims, schema.size(),
                                       result.vocab.size(), root);
  if (!config.embeddings_path.empty()) {
    load_pretrained_embeddings(config.embeddings_path, result.vocab, student);
  }
  TeacherState teacher{student.clone(false)};

  std::vector<EncodedSample> train_set(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    train_set[i] = encode_sample(split.train[i], result.vocab);
  }
  std::vector<EncodedSample> valid_set(split.validation.size());
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    valid_set[i] = encode_sample(split.validation[i], result.vocab);
  }

  // T is pinned to the INITIAL corpus size; filtering never changes it.
  const AlphaSchedule schedule = AlphaSchedule::from_corpus(
      config.ramp_epochs, train_set.size(), config.batch_size, config.alpha_max);

  const auto params = student.named_params();
  AdagradState adagrad = AdagradState::for_params(params);
  ActiveSet active = ActiveSet::all_active(train_set.size(), schema.size());
  Rng dropout_rng = root.substream("dropout");

  long long step_idx = 0;
  double best_f1 = -1.0;
  int epochs_since_best = 0;
  double last_alpha = 0.0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order;
    order.reserve(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      if (active.mask[i]) order.push_back(i);
    }
    Rng shuffle_rng = root.substream("shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    const std::size_t epoch_active = order.size();

    std::size_t skipped_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto b = static_cast<double>(stop - start);

      Tape tape(true);
      ForwardOptions opts;
      opts.train = true;
      opts.dropout_rng = &dropout_rng;
      std::vector<Tensor> sample_losses;
      sample_losses.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const EncodedSample& sample = train_set[order[i]];
        const Tensor probs = student_forward(tape, sample, student, opts);
        const std::vector<double> target = predict_probs(teacher.params, sample);
        sample_losses.push_back(tape.ce_mse_loss(probs, target, sample.label));
      }
      Tensor loss = sample_losses.front();
      for (std::size_t i = 1; i < sample_losses.size(); ++i) {
        loss = tape.add(loss, sample_losses[i]);
      }
      loss = tape.axpb(loss, 1.0 / b, 0.0);

      for (const auto& p : params) {
        Tensor t = p.tensor;
        zero_grad(t);
      }
      tape.backward(loss);
      result.clamp_events += tape.clamp_events();

      if (!adagrad_step(params, adagrad, config.learning_rate)) {
        ++skipped_batches;
        continue;  // batch skipped entirely; not an optimization step
      }
      last_alpha = alpha_at(step_idx, schedule);
      ema_update(teacher, student, last_alpha);
      ++step_idx;
    }
    if (skipped_batches > 0) {
      std::cerr << "warning: epoch " << epoch << ": skipped " << skipped_batches
                << " batch(es) with non-finite gradients\n";
    }

    auto [threshold, eval] =
        select_threshold_model(teacher.params, valid_set, schema.none_index());

    const bool improved = eval.f1 > best_f1;
    if (improved) {
      best_f1 = eval.f1;
      epochs_since_best = 0;
      result.teacher = TeacherState{teacher.params.clone(false)};
      result.best_epoch = epoch;
      result.best_threshold = threshold;
      result.best_eval = eval;
    } else {
      ++epochs_since_best;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.val_precision = eval.precision;
    record.val_recall = eval.recall;
    record.val_f1 = eval.f1;
    record.active_size = epoch_active;
    record.alpha_end = last_alpha;

    result.epochs_run = epoch;
    const bool stop = epoch == config.max_epochs || epochs_since_best >= config.patience;
    if (!stop && config.filtering) {
      auto decisions = filter_report(teacher.params, split.train, train_set,
                                     schema.none_index(), config.top_k);
      active = active_from_decisions(decisions, train_set, schema.size(),
                                     schema.none_index(), epoch + 1);
      result.final_decisions = std::move(decisions);
      record.filtered_none = active.filtered_none;
      record.filtered_valid = active.filtered_valid;
      if (active.active_count() == 0) {
        result.log.push_back(record);
        throw std::runtime_error(
            "filtering removed every training sample at epoch " +
            std::to_string(epoch) + "; the teacher disagrees with all labels");
      }
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
            .count();
    result.log.push_back(record);
    if (stop) break;
  }

  result.student_final = student;
  result.adagrad = std::move(adagrad);
  result.active = std::move(active);
  result.step_idx = step_idx;
  return result;
}

}  // namespace sef
