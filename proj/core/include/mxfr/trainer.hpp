#pragma once

#include <iosfwd>
#include <string>

#include "mxfr/corpus.hpp"
#include "mxfr/encoding.hpp"
#include "mxfr/evalx.hpp"
#include "mxfr/model.hpp"

namespace mxfr {

enum class SelectionPolicy { Final, BestDevAccuracy };

struct TrainConfig {
  int epochs = 300;
  size_t batch_size = 20;
  uint64_t seed = 0;
  int eval_every = 10;
  SelectionPolicy selection = SelectionPolicy::BestDevAccuracy;
  double rho = 0.95;
  double eps = 1e-6;
  double dropout = 0.0;    // 0 = off (the default; matches the reference run)
  double grad_clip = 0.0;  // 0 = off
  std::ostream* log = nullptr;  // TSV: epoch, train_loss, dev_acc, dev_ed
};

struct Checkpoint {
  static constexpr uint32_t kFormatVersion = 1;
  ModelConfig model_config;
  SymbolVocab vocab;
  ParamStore params;
  int epoch = 0;
  double dev_accuracy = -1.0;       // -1 when never evaluated
  double dev_edit_distance = -1.0;
  uint64_t rng_digest = 0;
};

struct DevMetrics {
  double accuracy = 0.0;
  double mean_edit_distance = 0.0;
  double loss = 0.0;
};

// Trains on the mixed source+target stream (one global shuffle per epoch),
// evaluating on dev every eval_every epochs and always at the final epoch.
// Returns the checkpoint chosen by the selection policy. Fully deterministic
// for a fixed (split, config, seed).
Checkpoint train(const DatasetSplit& split, ModelConfig model_config,
                 const TrainConfig& train_config);

// Greedy-decodes every dev sample and reports accuracy, mean edit distance
// and mean per-sample loss. Errors on an empty dev list.
DevMetrics evaluate_dev(const Checkpoint& checkpoint,
                        const std::vector<Sample>& dev_samples);

Seq2SeqModel model_from_checkpoint(const Checkpoint& checkpoint);

// Binary checkpoint file: magic "MXFR", format version, vocab section,
// config section (key=value lines), tensor section, trailing FNV-1a
// checksum of all preceding bytes.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mxfr
