#include "mxfr/evalx.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "mxfr/errors.hpp"
#include "mxfr/utf8.hpp"

namespace mxfr {

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<char32_t> s = utf8::decode(a);
  std::vector<char32_t> t = utf8::decode(b);
  const size_t m = s.size(), n = t.size();
  std::vector<size_t> prev(n + 1), cur(n + 1);
  for (size_t j = 0; j <= n; ++j) prev[j] = j;
  for (size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= n; ++j) {
      size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    throw DataError("accuracy: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(golds.size()) +
                    " golds");
  if (predictions.empty()) throw DataError("accuracy: empty input");
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == golds[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds) {
  EvalReport r;
  r.n = predictions.size();
  r.accuracy = accuracy(predictions, golds);
  size_t total_ed = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    total_ed += edit_distance(predictions[i], golds[i]);
  r.mean_edit_distance =
      static_cast<double>(total_ed) / static_cast<double>(r.n);
  return r;
}

EvalReport shot_report(const std::vector<ShotEvalSample>& eval_samples,
                       const std::vector<std::string>& predictions) {
  if (eval_samples.size() != predictions.size())
    throw DataError("shot_report: sample/prediction count mismatch");
  std::vector<std::string> golds;
  golds.reserve(eval_samples.size());
  for (const auto& e : eval_samples) golds.push_back(e.sample.form);
  EvalReport r = evaluate(predictions, golds);

  auto class_metrics = [&](ShotClass cls) {
    ClassMetrics m;
    size_t hits = 0, total_ed = 0;
    for (size_t i = 0; i < eval_samples.size(); ++i) {
      if (eval_samples[i].shot != cls) continue;
      ++m.n;
      if (predictions[i] == golds[i]) ++hits;
      total_ed += edit_distance(predictions[i], golds[i]);
    }
    if (m.n > 0) {
      m.accuracy = static_cast<double>(hits) / static_cast<double>(m.n);
      m.mean_edit_distance =
          static_cast<double>(total_ed) / static_cast<double>(m.n);
    }
    return m;
  };
  r.one_shot = class_metrics(ShotClass::OneShot);
  r.zero_shot = class_metrics(ShotClass::ZeroShot);
  return r;
}

namespace {

std::string fmt(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

std::string report_tsv(const EvalReport& report) {
  std::string out = std::to_string(report.n) + "\t" +
                    fmt(report.accuracy, 4) + "\t" +
                    fmt(report.mean_edit_distance, 2);
  return out;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "subset" << std::right << std::setw(8)
     << "n" << std::setw(8) << "acc" << std::setw(8) << "ed" << "\n";
  auto line = [&](const std::string& name, size_t n, double acc, double ed) {
    os << std::left << std::setw(12) << name << std::right << std::setw(8) << n
       << std::setw(8) << fmt(acc, 2) << std::setw(8) << fmt(ed, 2) << "\n";
  };
  line("all", report.n, report.accuracy, report.mean_edit_distance);
  if (report.one_shot && report.one_shot->n > 0)
    line("one-shot", report.one_shot->n, report.one_shot->accuracy,
         report.one_shot->mean_edit_distance);
  if (report.zero_shot && report.zero_shot->n > 0)
    line("zero-shot", report.zero_shot->n, report.zero_shot->accuracy,
         report.zero_shot->mean_edit_distance);
  return os.str();
}

}  // namespace mxfr
