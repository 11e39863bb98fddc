#include "mxfr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mxfr/errors.hpp"
#include "mxfr/rng.hpp"
#include "mxfr/utf8.hpp"

namespace mxfr {

namespace {

constexpr uint64_t kTrainSeedStream = 2000;
constexpr uint64_t kCipherSeedStream = 3000;
constexpr uint64_t kShotEvalStream = 4000;

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("expected a boolean, got '" + v + "'");
}

uint64_t sample_digest(uint64_t h, const Sample& s) {
  auto mix = [&h](const std::string& text) {
    h = fnv1a64(text.data(), text.size(), h);
    h = fnv1a64("\x1f", 1, h);
  };
  mix(s.language.code);
  mix(s.lemma);
  mix(s.tag.key());
  mix(s.form);
  return h;
}

std::string fmt(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Transfer: return "transfer";
    case ExperimentKind::Shot: return "shot";
    case ExperimentKind::Cipher: return "cipher";
    case ExperimentKind::LearningCurve: return "learning_curve";
    case ExperimentKind::Monolingual: return "monolingual";
  }
  return "?";
}

void ExperimentSpec::set(const std::string& key, const std::string& value) {
  if (key == "kind") {
    if (value == "transfer") kind = ExperimentKind::Transfer;
    else if (value == "shot") kind = ExperimentKind::Shot;
    else if (value == "cipher") kind = ExperimentKind::Cipher;
    else if (value == "curve" || value == "learning_curve")
      kind = ExperimentKind::LearningCurve;
    else if (value == "monolingual") kind = ExperimentKind::Monolingual;
    else throw UsageError("unknown experiment kind '" + value + "'");
  } else if (key == "sources") {
    source_languages = split_csv(value);
  } else if (key == "target") {
    target_language = value;
  } else if (key == "n_s") {
    n_s = std::stoul(value);
  } else if (key == "n_t") {
    n_t = std::stoul(value);
  } else if (key == "dev_size") {
    dev_size = std::stoul(value);
  } else if (key == "test_size") {
    test_size = std::stoul(value);
  } else if (key == "seed") {
    seed = std::stoull(value);
  } else if (key == "cipher_seed") {
    cipher_seed = std::stoull(value);
  } else if (key == "identity_cipher") {
    identity_cipher = parse_bool(value);
  } else if (key == "exclude_overlapping_lemmata") {
    exclude_overlapping_lemmata = parse_bool(value);
  } else if (key == "combined_sources") {
    combined_sources = parse_bool(value);
  } else if (key == "curve_sizes") {
    extra_curve_sizes.clear();
    for (const std::string& v : split_csv(value))
      extra_curve_sizes.push_back(std::stoul(v));
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "hidden_size") {
    hidden_size = std::stoi(value);
  } else if (key == "embedding_size") {
    embedding_size = std::stoi(value);
  } else if (key == "epochs") {
    train.epochs = std::stoi(value);
  } else if (key == "batch_size") {
    train.batch_size = std::stoul(value);
  } else if (key == "eval_every") {
    train.eval_every = std::stoi(value);
  } else if (key == "selection") {
    if (value == "final") train.selection = SelectionPolicy::Final;
    else if (value == "best-dev-accuracy")
      train.selection = SelectionPolicy::BestDevAccuracy;
    else throw UsageError("unknown selection policy '" + value + "'");
  } else if (key == "rho") {
    train.rho = std::stod(value);
  } else if (key == "eps") {
    train.eps = std::stod(value);
  } else if (key == "dropout") {
    train.dropout = std::stod(value);
  } else if (key == "grad_clip") {
    train.grad_clip = std::stod(value);
  } else if (key.rfind("data.", 0) == 0) {
    data_paths[key.substr(5)] = value;
  } else {
    throw UsageError("unknown spec key '" + key + "'");
  }
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open spec file: " + path);
  ExperimentSpec spec;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(line_no) +
                       ": expected 'key = value'");
    try {
      spec.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return spec;
}

void ExperimentSpec::validate() const {
  if (target_language.empty()) throw UsageError("spec: target is required");
  if (kind == ExperimentKind::Monolingual && !source_languages.empty())
    throw UsageError("spec: monolingual kind forbids source languages");
  if (kind == ExperimentKind::Cipher && source_languages.size() != 1)
    throw UsageError("spec: cipher kind requires exactly one source language");
}

SamplePools load_pools(const ExperimentSpec& spec) {
  SamplePools pools;
  for (const auto& [lang, path] : spec.data_paths)
    pools[lang] = load_unimorph(path, LanguageCode(lang));
  return pools;
}

namespace {

const std::vector<Sample>& pool_for(const SamplePools& pools,
                                    const std::string& lang) {
  auto it = pools.find(lang);
  if (it == pools.end())
    throw DataError("no corpus loaded for language '" + lang + "'");
  return it->second;
}

static const std::vector<Sample> kEmptyPool;

}  // namespace

CellOutput run_cell(const ExperimentSpec& spec, const std::string& source_label,
                    const std::vector<Sample>& source_pool,
                    const std::vector<Sample>& target_pool, size_t n_s,
                    size_t n_t, const CipherMap* cipher) {
  double t0 = now_seconds();
  DatasetSplit split = sample_transfer_dataset(
      source_pool, target_pool, n_s, n_t, spec.dev_size, spec.test_size,
      spec.seed, spec.exclude_overlapping_lemmata);

  if (cipher) {
    const std::string target = split.meta.target_language;
    for (Sample& s : split.train)
      if (s.language.code != target) s = apply_cipher(s, *cipher);
  }

  uint64_t digest = 0xCBF29CE484222325ULL;
  for (const Sample& s : split.train)
    if (s.language.code == split.meta.target_language)
      digest = sample_digest(digest, s);

  ModelConfig mc;
  mc.hidden_size = spec.hidden_size;
  mc.embedding_size = spec.embedding_size;
  mc.input_vocab_size = 1;   // filled by train() from the vocabulary
  mc.output_vocab_size = 1;

  TrainConfig tc = spec.train;
  tc.seed = derive_seed(spec.seed, kTrainSeedStream);
  std::ostringstream log;
  tc.log = &log;

  Checkpoint cp = train(split, mc, tc);

  Seq2SeqModel model = model_from_checkpoint(cp);
  std::vector<std::string> preds, golds;
  for (const Sample& s : split.test) {
    EncodedSample e = encode_sample(s, cp.vocab);
    preds.push_back(model
                        .greedy_decode(e.input_ids, cp.vocab,
                                       cp.model_config.max_decode_length)
                        .form);
    golds.push_back(s.form);
  }
  EvalReport rep = evaluate(preds, golds);

  CellOutput out;
  out.row.source_label = source_label;
  out.row.target = split.meta.target_language;
  out.row.n_t = n_t;
  out.row.accuracy = rep.accuracy;
  out.row.mean_edit_distance = rep.mean_edit_distance;
  out.row.wall_seconds = now_seconds() - t0;
  out.checkpoint = std::move(cp);
  out.train_log = log.str();
  out.target_stream_digest = digest;
  return out;
}

std::vector<CellOutput> run_transfer(const ExperimentSpec& spec,
                                     const SamplePools& pools) {
  const std::vector<Sample>& target_pool =
      pool_for(pools, spec.target_language);
  std::vector<CellOutput> cells;
  if (spec.source_languages.empty()) {
    cells.push_back(
        run_cell(spec, "0", kEmptyPool, target_pool, 0, spec.n_t, nullptr));
    return cells;
  }
  if (spec.combined_sources) {
    std::vector<Sample> merged;
    std::string label;
    for (const std::string& lang : spec.source_languages) {
      const std::vector<Sample>& p = pool_for(pools, lang);
      merged.insert(merged.end(), p.begin(), p.end());
      if (!label.empty()) label += "+";
      label += lang;
    }
    cells.push_back(run_cell(spec, label, merged, target_pool, spec.n_s,
                             spec.n_t, nullptr));
    return cells;
  }
  for (const std::string& lang : spec.source_languages)
    cells.push_back(run_cell(spec, lang, pool_for(pools, lang), target_pool,
                             spec.n_s, spec.n_t, nullptr));
  return cells;
}

std::vector<CellOutput> run_learning_curve(const ExperimentSpec& spec,
                                           const SamplePools& pools,
                                           std::vector<std::string>* warnings) {
  const std::vector<Sample>& target_pool =
      pool_for(pools, spec.target_language);
  std::vector<size_t> sizes = learning_curve_sizes();
  for (size_t extra : spec.extra_curve_sizes)
    if (std::find(sizes.begin(), sizes.end(), extra) == sizes.end())
      sizes.push_back(extra);
  std::sort(sizes.begin(), sizes.end());

  std::string label = "0";
  const std::vector<Sample>* source_pool = &kEmptyPool;
  size_t n_s = 0;
  if (!spec.source_languages.empty()) {
    if (spec.source_languages.size() != 1)
      throw UsageError("learning curve expects at most one source language");
    label = spec.source_languages[0];
    source_pool = &pool_for(pools, label);
    n_s = spec.n_s;
  }

  std::vector<CellOutput> cells;
  for (size_t n_t : sizes) {
    if (target_pool.size() < n_t + spec.dev_size + spec.test_size) {
      if (warnings)
        warnings->push_back("skipped n_t=" + std::to_string(n_t) +
                            ": target pool has only " +
                            std::to_string(target_pool.size()) + " samples");
      continue;
    }
    cells.push_back(
        run_cell(spec, label, *source_pool, target_pool, n_s, n_t, nullptr));
  }
  return cells;
}

namespace {

ShotResult run_shot_cell(const ExperimentSpec& spec,
                         const std::string& source_label,
                         const std::vector<Sample>& source_pool, size_t n_s,
                         const std::vector<Sample>& target_pool) {
  double t0 = now_seconds();
  ShotSplit shot = make_shot_split(target_pool, spec.seed);

  // Dev for model selection and the reported eval set are disjoint seeded
  // draws from the annotated pool.
  std::vector<size_t> order(shot.eval.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, kShotEvalStream));
  rng.shuffle(order);
  size_t dev_n = std::min(spec.dev_size, shot.eval.size() / 4);
  std::vector<Sample> dev;
  std::vector<ShotEvalSample> eval_set;
  for (size_t k = 0; k < order.size(); ++k) {
    if (k < dev_n)
      dev.push_back(shot.eval[order[k]].sample);
    else if (eval_set.size() < spec.test_size)
      eval_set.push_back(shot.eval[order[k]]);
  }
  if (eval_set.empty()) throw DataError("shot split left no eval samples");

  DatasetSplit split;
  split.meta.target_language = spec.target_language;
  split.meta.seed = spec.seed;
  split.meta.n_t = shot.train.size();
  if (n_s > 0) {
    if (source_pool.size() < n_s)
      throw DataError("insufficient source pool: required " +
                      std::to_string(n_s) + ", available " +
                      std::to_string(source_pool.size()));
    Rng source_rng(derive_seed(spec.seed, 1));
    for (size_t idx : source_rng.sample_indices(source_pool.size(), n_s))
      split.train.push_back(source_pool[idx]);
    split.meta.source_language = source_pool.front().language.code;
    split.meta.n_s = n_s;
  }
  split.train.insert(split.train.end(), shot.train.begin(), shot.train.end());
  split.dev = dev;
  for (const ShotEvalSample& e : eval_set) split.test.push_back(e.sample);

  ModelConfig mc;
  mc.hidden_size = spec.hidden_size;
  mc.embedding_size = spec.embedding_size;
  mc.input_vocab_size = 1;
  mc.output_vocab_size = 1;
  TrainConfig tc = spec.train;
  tc.seed = derive_seed(spec.seed, kTrainSeedStream);

  Checkpoint cp = train(split, mc, tc);
  Seq2SeqModel model = model_from_checkpoint(cp);
  std::vector<std::string> preds;
  for (const ShotEvalSample& e : eval_set) {
    EncodedSample enc = encode_sample(e.sample, cp.vocab);
    preds.push_back(model
                        .greedy_decode(enc.input_ids, cp.vocab,
                                       cp.model_config.max_decode_length)
                        .form);
  }
  ShotResult result;
  result.source_label = source_label;
  result.report = shot_report(eval_set, preds);
  result.wall_seconds = now_seconds() - t0;
  return result;
}

}  // namespace

std::vector<ShotResult> run_shot(const ExperimentSpec& spec,
                                 const SamplePools& pools) {
  const std::vector<Sample>& target_pool =
      pool_for(pools, spec.target_language);
  std::vector<ShotResult> results;
  if (spec.source_languages.empty()) {
    results.push_back(run_shot_cell(spec, "0", kEmptyPool, 0, target_pool));
    return results;
  }
  for (const std::string& lang : spec.source_languages)
    results.push_back(run_shot_cell(spec, lang, pool_for(pools, lang),
                                    spec.n_s, target_pool));
  return results;
}

std::vector<CellOutput> run_cipher(const ExperimentSpec& spec,
                                   const SamplePools& pools) {
  if (spec.source_languages.size() != 1)
    throw UsageError("cipher experiment requires exactly one source language");
  const std::string& source = spec.source_languages[0];
  const std::vector<Sample>& source_pool = pool_for(pools, source);
  const std::vector<Sample>& target_pool =
      pool_for(pools, spec.target_language);

  std::set<char32_t> char_domain;
  std::set<std::string> subtag_domain;
  for (const Sample& s : source_pool) {
    for (char32_t cp : utf8::decode(s.lemma)) char_domain.insert(cp);
    for (char32_t cp : utf8::decode(s.form)) char_domain.insert(cp);
    for (const std::string& sub : s.tag.subtags) subtag_domain.insert(sub);
  }
  CipherMap cipher;
  if (spec.identity_cipher) {
    cipher.seed = 0;
    for (char32_t cp : char_domain) cipher.char_map[cp] = cp;
    for (const std::string& sub : subtag_domain) cipher.subtag_map[sub] = sub;
  } else {
    uint64_t cseed = spec.cipher_seed != 0
                         ? spec.cipher_seed
                         : derive_seed(spec.seed, kCipherSeedStream);
    cipher = make_cipher(char_domain, subtag_domain, cseed);
  }

  std::vector<CellOutput> cells;
  cells.push_back(run_cell(spec, source, source_pool, target_pool, spec.n_s,
                           spec.n_t, nullptr));
  cells.push_back(run_cell(spec, source + "-ciph", source_pool, target_pool,
                           spec.n_s, spec.n_t, &cipher));
  return cells;
}

namespace {

void write_rows_outputs(const ExperimentSpec& spec,
                        std::vector<CellOutput>& cells,
                        const std::vector<std::string>& warnings) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  std::ofstream results(fs::path(spec.out_dir) / "results.tsv");
  std::ofstream summary(fs::path(spec.out_dir) / "summary.txt");
  std::ofstream train_log(fs::path(spec.out_dir) / "train.log");
  std::ofstream manifest(fs::path(spec.out_dir) / "manifest.txt");

  results << "source\ttarget\tn_t\tacc\ted\tcheckpoint\n";
  summary << "experiment: " << kind_name(spec.kind) << "  target: "
          << spec.target_language << "  seed: " << spec.seed << "\n\n";
  summary << std::left << std::setw(12) << "source" << std::right
          << std::setw(8) << "n_t" << std::setw(8) << "acc" << std::setw(8)
          << "ed" << "\n";
  for (CellOutput& cell : cells) {
    std::string ckpt_name = "checkpoint_" + cell.row.source_label + "_" +
                            std::to_string(cell.row.n_t) + ".mxfr";
    fs::path ckpt = fs::path(spec.out_dir) / ckpt_name;
    save_checkpoint(cell.checkpoint, ckpt.string());
    cell.row.checkpoint_path = ckpt_name;
    results << cell.row.source_label << "\t" << cell.row.target << "\t"
            << cell.row.n_t << "\t" << fmt(cell.row.accuracy, 4) << "\t"
            << fmt(cell.row.mean_edit_distance, 2) << "\t" << ckpt_name
            << "\n";
    summary << std::left << std::setw(12) << cell.row.source_label
            << std::right << std::setw(8) << cell.row.n_t << std::setw(8)
            << fmt(cell.row.accuracy, 2) << std::setw(8)
            << fmt(cell.row.mean_edit_distance, 2) << "\n";
    std::istringstream log(cell.train_log);
    std::string line;
    while (std::getline(log, line))
      train_log << cell.row.source_label << "\t" << cell.row.n_t << "\t"
                << line << "\n";
    manifest << "cell " << cell.row.source_label << " n_t=" << cell.row.n_t
             << " target_stream_digest=" << std::hex
             << cell.target_stream_digest << std::dec
             << " wall_seconds=" << fmt(cell.row.wall_seconds, 1) << "\n";
  }
  for (const std::string& w : warnings) {
    summary << "warning: " << w << "\n";
    manifest << "warning: " << w << "\n";
  }
  manifest << "seed=" << spec.seed << "\n";
  manifest << "kind=" << kind_name(spec.kind) << "\n";
  manifest << "n_s=" << spec.n_s << " n_t=" << spec.n_t
           << " dev_size=" << spec.dev_size << " test_size=" << spec.test_size
           << "\n";
  manifest << "hidden_size=" << spec.hidden_size
           << " embedding_size=" << spec.embedding_size
           << " epochs=" << spec.train.epochs
           << " batch_size=" << spec.train.batch_size << "\n";
  for (const auto& [lang, path] : spec.data_paths) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream buf;
    buf << f.rdbuf();
    std::string bytes = buf.str();
    manifest << "data." << lang << "=" << path << " digest=" << std::hex
             << fnv1a64(bytes.data(), bytes.size()) << std::dec << "\n";
  }

  // Learning-curve runs additionally get a plot-ready CSV.
  if (spec.kind == ExperimentKind::LearningCurve) {
    std::ofstream curve(fs::path(spec.out_dir) / "curve.csv");
    curve << "n_t,accuracy,edit_distance\n";
    for (const CellOutput& cell : cells)
      curve << cell.row.n_t << "," << fmt(cell.row.accuracy, 4) << ","
            << fmt(cell.row.mean_edit_distance, 2) << "\n";
  }
}

}  // namespace

void run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.out_dir.empty()) throw UsageError("out_dir is required");
  SamplePools pools = load_pools(spec);

  if (spec.kind == ExperimentKind::Shot) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    std::vector<ShotResult> results = run_shot(spec, pools);
    std::ofstream out(fs::path(spec.out_dir) / "results.tsv");
    std::ofstream summary(fs::path(spec.out_dir) / "summary.txt");
    out << "source\ttarget\tclass\tn\tacc\ted\n";
    summary << "experiment: shot  target: " << spec.target_language
            << "  seed: " << spec.seed << "\n\n";
    for (const ShotResult& r : results) {
      auto row = [&](const std::string& cls, const ClassMetrics& m) {
        out << r.source_label << "\t" << spec.target_language << "\t" << cls
            << "\t" << m.n << "\t" << fmt(m.accuracy, 4) << "\t"
            << fmt(m.mean_edit_distance, 2) << "\n";
      };
      ClassMetrics pooled{r.report.n, r.report.accuracy,
                          r.report.mean_edit_distance};
      row("all", pooled);
      if (r.report.one_shot) row("one-shot", *r.report.one_shot);
      if (r.report.zero_shot) row("zero-shot", *r.report.zero_shot);
      summary << "source " << r.source_label << ":\n"
              << report_table(r.report) << "\n";
    }
    return;
  }

  std::vector<std::string> warnings;
  std::vector<CellOutput> cells;
  switch (spec.kind) {
    case ExperimentKind::Transfer:
    case ExperimentKind::Monolingual:
      cells = run_transfer(spec, pools);
      break;
    case ExperimentKind::LearningCurve:
      cells = run_learning_curve(spec, pools, &warnings);
      break;
    case ExperimentKind::Cipher:
      cells = run_cipher(spec, pools);
      break;
    case ExperimentKind::Shot:
      break;  // handled above
  }
  write_rows_outputs(spec, cells, warnings);
}

}  // namespace mxfr
