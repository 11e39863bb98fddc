#pragma once

#include <map>
#include <string>
#include <vector>

#include "mxfr/corpus.hpp"
#include "mxfr/evalx.hpp"
#include "mxfr/trainer.hpp"

namespace mxfr {

enum class ExperimentKind { Transfer, Shot, Cipher, LearningCurve, Monolingual };

// Declarative description of one experiment run. Parsed from a line-oriented
// `key = value` spec file; every key can be overridden by a same-named CLI
// flag (flags win).
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Transfer;
  std::vector<std::string> source_languages;
  std::string target_language;
  size_t n_s = 12000;
  size_t n_t = 50;
  size_t dev_size = 1600;
  size_t test_size = 10000;
  uint64_t seed = 1;
  uint64_t cipher_seed = 0;  // 0 = derive from the master seed
  bool identity_cipher = false;
  bool exclude_overlapping_lemmata = false;
  bool combined_sources = false;  // pool all sources into one train set
  std::map<std::string, std::string> data_paths;  // language -> corpus file
  std::vector<size_t> extra_curve_sizes;
  std::string out_dir;

  int hidden_size = 100;
  int embedding_size = 300;
  TrainConfig train;

  static ExperimentSpec from_file(const std::string& path);
  // Applies one `key=value` override; throws UsageError on unknown keys.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

struct ResultRow {
  std::string source_label;  // "0", a language code, or "<code>-ciph"
  std::string target;
  size_t n_t = 0;
  double accuracy = 0.0;
  double mean_edit_distance = 0.0;
  std::string checkpoint_path;  // empty when not written to disk
  double wall_seconds = 0.0;
};

struct ShotResult {
  std::string source_label;
  EvalReport report;
  double wall_seconds = 0.0;
};

using SamplePools = std::map<std::string, std::vector<Sample>>;

// Loads every corpus file named in spec.data_paths.
SamplePools load_pools(const ExperimentSpec& spec);

struct CellOutput {
  ResultRow row;
  Checkpoint checkpoint;
  std::string train_log;          // TSV lines from the trainer
  uint64_t target_stream_digest;  // digest of the target-language train part
};

// One training cell: one (source condition, n_t) pair, trained and evaluated
// on the shared test set.
CellOutput run_cell(const ExperimentSpec& spec, const std::string& source_label,
                    const std::vector<Sample>& source_pool,
                    const std::vector<Sample>& target_pool, size_t n_s,
                    size_t n_t, const CipherMap* cipher);

std::vector<CellOutput> run_transfer(const ExperimentSpec& spec,
                                     const SamplePools& pools);
std::vector<CellOutput> run_learning_curve(const ExperimentSpec& spec,
                                           const SamplePools& pools,
                                           std::vector<std::string>* warnings);
std::vector<ShotResult> run_shot(const ExperimentSpec& spec,
                                 const SamplePools& pools);
// Pairs of (original, ciphered) rows for the single source language.
std::vector<CellOutput> run_cipher(const ExperimentSpec& spec,
                                   const SamplePools& pools);

// Dispatches on spec.kind, runs every cell, and writes results.tsv,
// summary.txt, train.log, checkpoints and manifest.txt under spec.out_dir.
void run_experiment(const ExperimentSpec& spec);

std::string kind_name(ExperimentKind kind);

}  // namespace mxfr
