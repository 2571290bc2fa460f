#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sef/checkpoint.hpp"
#include "sef/corpus.hpp"
#include "sef/evaluation.hpp"
#include "sef/noise_filter.hpp"
#include "sef/self_ensemble.hpp"
#include "sef/synth.hpp"

namespace py = pybind11;

namespace {

sef::TrainConfig config_from_kwargs(const py::dict& kwargs) {
  sef::TrainConfig c;
  for (auto item : kwargs) {
    const auto key = item.first.cast<std::string>();
    if (key == "arch") {
      c.arch = sef::architecture_from_string(item.second.cast<std::string>());
    } else if (key == "batch_size") {
      c.batch_size = item.second.cast<int>();
    } else if (key == "alpha_max") {
      c.alpha_max = item.second.cast<double>();
    } else if (key == "ramp_epochs") {
      c.ramp_epochs = item.second.cast<int>();
    } else if (key == "top_k") {
      c.top_k = item.second.cast<int>();
    } else if (key == "learning_rate") {
      c.learning_rate = item.second.cast<double>();
    } else if (key == "max_epochs") {
      c.max_epochs = item.second.cast<int>();
    } else if (key == "patience") {
      c.patience = item.second.cast<int>();
    } else if (key == "filtering") {
      c.filtering = item.second.cast<bool>();
    } else if (key == "split_ratio") {
      c.split_ratio = item.second.cast<double>();
    } else if (key == "seed") {
      c.seed = item.second.cast<std::uint64_t>();
    } else if (key == "embeddings_path") {
      c.embeddings_path = item.second.cast<std::string>();
    } else if (key == "word_dim") {
      c.dims.word_dim = item.second.cast<int>();
    } else if (key == "pos_dim") {
      c.dims.pos_dim = item.second.cast<int>();
    } else if (key == "pos_max") {
      c.dims.pos_max = item.second.cast<int>();
    } else if (key == "filters") {
      c.dims.filters = item.second.cast<int>();
    } else if (key == "kernel") {
      c.dims.kernel = item.second.cast<int>();
    } else if (key == "gru_hidden") {
      c.dims.gru_hidden = item.second.cast<int>();
    } else if (key == "att_hidden") {
      c.dims.att_hidden = item.second.cast<int>();
    } else if (key == "dropout") {
      c.dims.dropout = item.second.cast<double>();
    } else {
      throw sef::ConfigError("unknown config key: " + key);
    }
  }
  return c;
}

py::dict eval_to_dict(const sef::EvalResult& r) {
  py::dict d;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["threshold"] = r.threshold;
  d["tp"] = r.tp;
  d["fp"] = r.fp;
  d["fn"] = r.fn;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "self-ensemble filtering for distantly supervised relation extraction";

  py::register_exception<sef::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<sef::DataError>(m, "DataError", PyExc_ValueError);

  m.def(
      "alpha_at",
      [](long long step_idx, long long ramp_steps, double alpha_max) {
        sef::AlphaSchedule s;
        s.ramp_steps = ramp_steps;
        s.alpha_max = alpha_max;
        return sef::alpha_at(step_idx, s);
      },
      py::arg("step_idx"), py::arg("ramp_steps"), py::arg("alpha_max") = 0.9,
      "Gaussian ramp-up of the EMA decay: exp(-5 p^2) * alpha_max");

  m.def(
      "ramp_steps",
      [](int ramp_epochs, std::size_t initial_size, int batch_size) {
        return sef::AlphaSchedule::from_corpus(ramp_epochs, initial_size,
                                               batch_size, 0.9)
            .ramp_steps;
      },
      py::arg("ramp_epochs"), py::arg("initial_size"), py::arg("batch_size"),
      "T = E * ceil(L / B)");

  m.def(
      "combined_loss",
      [](const std::vector<std::vector<double>>& student,
         const std::vector<std::vector<double>>& teacher,
         const std::vector<int>& labels) {
        const sef::LossComponents c = sef::combined_loss(student, teacher, labels);
        py::dict d;
        d["total"] = c.total;
        d["ce"] = c.ce;
        d["mse"] = c.mse;
        d["clamped"] = c.clamped;
        return d;
      },
      py::arg("student_probs"), py::arg("teacher_probs"), py::arg("labels"),
      "Cross-entropy plus consistency MSE, averaged over the batch");

  m.def(
      "apply_threshold",
      [](const std::vector<double>& probs, int none_index, double threshold) {
        return sef::apply_threshold(probs, none_index, threshold);
      },
      py::arg("probs"), py::arg("none_index"), py::arg("threshold"));

  m.def(
      "rank_topk",
      [](const std::vector<double>& probs, int k) {
        std::vector<std::pair<int, double>> out;
        for (const auto& r : sef::rank_topk(probs, k)) {
          out.emplace_back(r.relation, r.prob);
        }
        return out;
      },
      py::arg("probs"), py::arg("k"));

  m.def(
      "filter_probs",
      [](const std::vector<std::vector<double>>& probs,
         const std::vector<int>& labels, int num_classes, int none_index, int k) {
        const sef::ActiveSet a =
            sef::filter_probs(probs, labels, num_classes, none_index, k, 0);
        py::dict d;
        d["mask"] = std::vector<bool>(a.mask.begin(), a.mask.end());
        d["filtered_none"] = a.filtered_none;
        d["filtered_valid"] = a.filtered_valid;
        return d;
      },
      py::arg("probs"), py::arg("labels"), py::arg("num_classes"),
      py::arg("none_index"), py::arg("k"),
      "Strict None rule, lenient top-k rule over probability rows");

  m.def(
      "evaluate",
      [](const std::vector<std::vector<double>>& probs,
         const std::vector<int>& gold, int num_classes, int none_index,
         double threshold) {
        std::vector<sef::ScoredPrediction> preds(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
          preds[i] = sef::score_prediction(probs[i]);
        }
        return eval_to_dict(sef::evaluate_predictions(preds, gold, num_classes,
                                                      none_index, threshold));
      },
      py::arg("probs"), py::arg("gold"), py::arg("num_classes"),
      py::arg("none_index"), py::arg("threshold"));

  m.def(
      "select_threshold",
      [](const std::vector<std::vector<double>>& probs,
         const std::vector<int>& gold, int num_classes, int none_index) {
        std::vector<sef::ScoredPrediction> preds(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
          preds[i] = sef::score_prediction(probs[i]);
        }
        auto [t, r] = sef::select_threshold(preds, gold, num_classes, none_index);
        return py::make_tuple(t, eval_to_dict(r));
      },
      py::arg("probs"), py::arg("gold"), py::arg("num_classes"),
      py::arg("none_index"));

  m.def(
      "generate_synthetic",
      [](int relations, int samples_per_class, double pos_noise, double neg_noise,
         double none_ratio, std::uint64_t seed, const std::string& out_dir) {
        sef::SynthConfig c;
        c.valid_relations = relations;
        c.samples_per_class = samples_per_class;
        c.pos_noise_rate = pos_noise;
        c.neg_noise_rate = neg_noise;
        c.none_ratio = none_ratio;
        const sef::SynthCorpus corpus = sef::generate_synthetic(c, seed);
        sef::save_corpus(out_dir + "/corpus.jsonl", corpus.samples, corpus.schema);
        corpus.schema.save(out_dir + "/schema.json");
        py::dict d;
        d["samples"] = corpus.samples.size();
        d["relations"] = corpus.schema.relations();
        return d;
      },
      py::arg("relations"), py::arg("samples_per_class"), py::arg("pos_noise"),
      py::arg("neg_noise"), py::arg("none_ratio") = 2.34, py::arg("seed") = 1,
      py::arg("out_dir") = ".",
      "Write a synthetic noisy corpus (corpus.jsonl + schema.json)");

  m.def(
      "train",
      [](const std::string& corpus_path, const std::string& schema_path,
         const py::kwargs& kwargs) {
        const sef::TrainConfig config = config_from_kwargs(kwargs);
        const sef::RelationSchema schema = sef::RelationSchema::load(schema_path);
        const auto samples = sef::load_corpus(corpus_path, schema);
        const auto split =
            sef::split_train_valid(samples, config.split_ratio, config.seed);
        const sef::TrainResult result = sef::train(config, split, schema);
        py::dict d;
        d["best_epoch"] = result.best_epoch;
        d["best_threshold"] = result.best_threshold;
        d["best_val"] = eval_to_dict(result.best_eval);
        d["epochs_run"] = result.epochs_run;
        d["steps"] = result.step_idx;
        py::list log;
        for (const auto& r : result.log) {
          py::dict e;
          e["epoch"] = r.epoch;
          e["val_f1"] = r.val_f1;
          e["active_size"] = r.active_size;
          e["filtered_none"] = r.filtered_none;
          e["filtered_valid"] = r.filtered_valid;
          e["alpha_end"] = r.alpha_end;
          log.append(e);
        }
        d["log"] = log;
        return d;
      },
      py::arg("corpus"), py::arg("schema"),
      "Run the student-teacher loop on a corpus file; config via kwargs");

  m.def(
      "evaluate_checkpoint",
      [](const std::string& checkpoint_path, const std::string& corpus_path,
         double threshold) {
        const sef::Checkpoint ckpt = sef::load_checkpoint(checkpoint_path);
        const auto samples = sef::load_corpus(corpus_path, ckpt.schema);
        std::vector<sef::EncodedSample> encoded(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
          encoded[i] = sef::encode_sample(samples[i], ckpt.vocab);
        }
        const double t = threshold < 0.0 ? ckpt.best_threshold : threshold;
        return eval_to_dict(
            sef::evaluate_model(ckpt.teacher, encoded, ckpt.schema.none_index(), t));
      },
      py::arg("checkpoint"), py::arg("corpus"), py::arg("threshold") = -1.0,
      "Evaluate a trained checkpoint; threshold < 0 uses the stored one");

  m.attr("__version__") = "1.0.0";
}
