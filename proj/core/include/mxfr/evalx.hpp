#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mxfr/corpus.hpp"

namespace mxfr {

struct ClassMetrics {
  size_t n = 0;
  double accuracy = 0.0;
  double mean_edit_distance = 0.0;
};

struct EvalReport {
  size_t n = 0;
  double accuracy = 0.0;
  double mean_edit_distance = 0.0;
  std::optional<ClassMetrics> one_shot;
  std::optional<ClassMetrics> zero_shot;
};

// Levenshtein distance with unit costs, over Unicode scalar values.
size_t edit_distance(const std::string& a, const std::string& b);

// Exact code-point-level match rate; throws on empty or mismatched lengths.
double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds);

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds);

// Per-shot-class breakdown plus pooled figures. predictions[i] corresponds
// to eval_samples[i]. An empty class is reported with n = 0 and no averages.
EvalReport shot_report(const std::vector<ShotEvalSample>& eval_samples,
                       const std::vector<std::string>& predictions);

// TSV line "n<TAB>acc<TAB>ed" with fixed precision (accuracy 4 decimals,
// ED 2 decimals).
std::string report_tsv(const EvalReport& report);

// Human-readable aligned table.
std::string report_table(const EvalReport& report);

}  // namespace mxfr
