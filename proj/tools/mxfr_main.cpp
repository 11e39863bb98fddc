// Command-line front end: dataset preparation, training, decoding,
// evaluation, the experiment harness and a gradient self-check.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mxfr/errors.hpp"
#include "mxfr/experiment.hpp"
#include "mxfr/evalx.hpp"
#include "mxfr/model.hpp"
#include "mxfr/optim.hpp"
#include "mxfr/trainer.hpp"

namespace fs = std::filesystem;
using namespace mxfr;

namespace {

// Spec file plus flag overrides; flags are applied after the file, so they
// win.
struct SpecArgs {
  std::string spec_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

const std::vector<std::string> kSpecKeys = {
    "sources",    "target",        "n_s",
    "n_t",        "dev_size",      "test_size",
    "seed",       "cipher_seed",   "identity_cipher",
    "exclude_overlapping_lemmata", "combined_sources",
    "curve_sizes", "out_dir",      "hidden_size",
    "embedding_size", "epochs",    "batch_size",
    "eval_every", "selection",     "rho",
    "eps",        "dropout",       "grad_clip"};

void add_spec_options(CLI::App* cmd, SpecArgs& args) {
  cmd->add_option("--spec", args.spec_path, "experiment spec file (key = value lines)");
  for (const std::string& key : kSpecKeys) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); },
        "override spec key '" + key + "'");
  }
  cmd->add_option_function<std::vector<std::string>>(
      "--data",
      [&args](const std::vector<std::string>& pairs) {
        for (const std::string& p : pairs) {
          size_t eq = p.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--data", "expected lang=path, got '" + p + "'");
          args.overrides.emplace_back("data." + p.substr(0, eq), p.substr(eq + 1));
        }
      },
      "corpus file as lang=path (repeatable)");
}

ExperimentSpec build_spec(const SpecArgs& args) {
  ExperimentSpec spec;
  if (!args.spec_path.empty()) spec = ExperimentSpec::from_file(args.spec_path);
  for (const auto& [k, v] : args.overrides) spec.set(k, v);
  return spec;
}

void write_split_tsv(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const Sample& s : samples)
    out << s.language.code << "\t" << s.lemma << "\t" << s.form << "\t"
        << s.tag.key() << "\n";
}

// Builds the one split a non-harness subcommand works on: the first listed
// source (if any) plus the target.
DatasetSplit build_single_split(const ExperimentSpec& spec, const SamplePools& pools) {
  auto target_it = pools.find(spec.target_language);
  if (target_it == pools.end())
    throw UsageError("no --data entry for target language '" + spec.target_language + "'");
  static const std::vector<Sample> empty;
  const std::vector<Sample>* source = &empty;
  size_t n_s = 0;
  if (!spec.source_languages.empty()) {
    if (spec.source_languages.size() > 1)
      throw UsageError("this subcommand takes at most one source language");
    auto it = pools.find(spec.source_languages[0]);
    if (it == pools.end())
      throw UsageError("no --data entry for source language '" + spec.source_languages[0] + "'");
    source = &it->second;
    n_s = spec.n_s;
  }
  return sample_transfer_dataset(*source, target_it->second, n_s, spec.n_t,
                                 spec.dev_size, spec.test_size, spec.seed,
                                 spec.exclude_overlapping_lemmata);
}

int cmd_prepare(const SpecArgs& args) {
  ExperimentSpec spec = build_spec(args);
  if (spec.out_dir.empty()) throw UsageError("prepare: out_dir is required");
  SamplePools pools = load_pools(spec);
  DatasetSplit split = build_single_split(spec, pools);
  fs::create_directories(spec.out_dir);
  write_split_tsv((fs::path(spec.out_dir) / "train.tsv").string(), split.train);
  write_split_tsv((fs::path(spec.out_dir) / "dev.tsv").string(), split.dev);
  write_split_tsv((fs::path(spec.out_dir) / "test.tsv").string(), split.test);
  std::ofstream meta(fs::path(spec.out_dir) / "meta.txt");
  meta << "target=" << split.meta.target_language << "\n"
       << "source=" << split.meta.source_language << "\n"
       << "n_s=" << split.meta.n_s << "\nn_t=" << split.meta.n_t << "\n"
       << "dev_size=" << split.dev.size() << "\ntest_size=" << split.test.size()
       << "\nseed=" << split.meta.seed << "\n";
  std::cout << "wrote " << split.train.size() << " train, " << split.dev.size()
            << " dev, " << split.test.size() << " test samples to "
            << spec.out_dir << "\n";
  return 0;
}

int cmd_train(const SpecArgs& args, const std::string& checkpoint_out) {
  ExperimentSpec spec = build_spec(args);
  SamplePools pools = load_pools(spec);
  DatasetSplit split = build_single_split(spec, pools);

  ModelConfig mc;
  mc.hidden_size = spec.hidden_size;
  mc.embedding_size = spec.embedding_size;
  TrainConfig tc = spec.train;
  tc.seed = derive_seed(spec.seed, 2000);
  tc.log = &std::cout;
  Checkpoint cp = train(split, mc, tc);

  std::string out = checkpoint_out.empty() ? "checkpoint.mxfr" : checkpoint_out;
  save_checkpoint(cp, out);
  std::cout << "saved " << out << " (epoch " << cp.epoch;
  if (cp.dev_accuracy >= 0)
    std::cout << ", dev acc " << cp.dev_accuracy << ", dev ED "
              << cp.dev_edit_distance;
  std::cout << ")\n";
  return 0;
}

int cmd_decode(const std::string& checkpoint_path, const std::string& input_path,
               const std::string& output_path, int beam_width) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Seq2SeqModel model = model_from_checkpoint(cp);

  std::istream* in = &std::cin;
  std::ifstream fin;
  if (input_path != "-") {
    fin.open(input_path);
    if (!fin) throw DataError("cannot open " + input_path);
    in = &fin;
  }
  std::ostream* out = &std::cout;
  std::ofstream fout;
  if (!output_path.empty() && output_path != "-") {
    fout.open(output_path);
    if (!fout) throw DataError("cannot write " + output_path);
    out = &fout;
  }

  std::string line;
  size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.empty()) {
      *out << "\n";
      continue;
    }
    std::istringstream ls(line);
    std::string lang, lemma, tag;
    if (!std::getline(ls, lang, '\t') || !std::getline(ls, lemma, '\t') ||
        !std::getline(ls, tag, '\t'))
      throw DataError(input_path + ":" + std::to_string(line_no) +
                      ": expected language<TAB>lemma<TAB>tag");
    Sample s;
    s.language = LanguageCode(lang);
    s.lemma = lemma;
    s.tag = parse_tag(tag);
    std::vector<int> ids = encode_input(s, cp.vocab);
    DecodeResult r =
        beam_width > 1
            ? model.beam_decode(ids, cp.vocab, beam_width,
                                cp.model_config.max_decode_length)
            : model.greedy_decode(ids, cp.vocab,
                                  cp.model_config.max_decode_length);
    *out << lang << "\t" << lemma << "\t" << tag << "\t" << r.form << "\n";
  }
  return 0;
}

// Gold data is either plain UniMorph TSV (lemma, form, tag; needs
// --language) or the 4-column split format `prepare` writes (language,
// lemma, form, tag).
std::vector<Sample> load_gold(const std::string& path,
                              const std::string& language) {
  std::ifstream probe(path);
  if (!probe) throw DataError("cannot open " + path);
  std::string first;
  while (std::getline(probe, first))
    if (!first.empty() && first[0] != '#') break;
  size_t tabs = static_cast<size_t>(std::count(first.begin(), first.end(), '\t'));
  if (tabs != 3) {
    if (language.empty())
      throw UsageError("--language is required for 3-column UniMorph files");
    return load_unimorph(path, LanguageCode(language));
  }
  std::ifstream in(path);
  std::vector<Sample> samples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Sample s;
    std::string lang, tag;
    if (!std::getline(ls, lang, '\t') || !std::getline(ls, s.lemma, '\t') ||
        !std::getline(ls, s.form, '\t') || !std::getline(ls, tag))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected language<TAB>lemma<TAB>form<TAB>tag");
    s.language = LanguageCode(lang);
    s.tag = parse_tag(tag);
    if (language.empty() || lang == language) samples.push_back(s);
  }
  return samples;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& language, int beam_width) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Seq2SeqModel model = model_from_checkpoint(cp);
  std::vector<Sample> samples = load_gold(data_path, language);
  if (samples.empty()) throw DataError(data_path + ": no samples");
  std::vector<std::string> preds, golds;
  for (const Sample& s : samples) {
    std::vector<int> ids = encode_input(s, cp.vocab);
    DecodeResult r =
        beam_width > 1
            ? model.beam_decode(ids, cp.vocab, beam_width,
                                cp.model_config.max_decode_length)
            : model.greedy_decode(ids, cp.vocab,
                                  cp.model_config.max_decode_length);
    preds.push_back(r.form);
    golds.push_back(s.form);
  }
  EvalReport rep = evaluate(preds, golds);
  std::cout << report_table(rep);
  std::cout << report_tsv(rep) << "\n";
  return 0;
}

int cmd_exp(const SpecArgs& args, ExperimentKind kind) {
  ExperimentSpec spec = build_spec(args);
  spec.kind = kind;
  run_experiment(spec);
  std::ifstream summary(fs::path(spec.out_dir) / "summary.txt");
  std::cout << summary.rdbuf();
  std::cout << "results written to " << spec.out_dir << "\n";
  return 0;
}

// Self-check: analytic gradients of the full loss on a tiny model against
// central finite differences.
int cmd_gradcheck(int hidden, int embedding, uint64_t seed, double tol) {
  std::vector<Sample> samples;
  const char* lemmas[] = {"aba", "bcb", "cac"};
  const char* forms[] = {"abax", "bcby", "cacz"};
  const char* tags[] = {"N;SG", "N;PL", "V;SG"};
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.language = LanguageCode("xx");
    s.lemma = lemmas[i];
    s.form = forms[i];
    s.tag = parse_tag(tags[i]);
    samples.push_back(s);
  }
  SymbolVocab vocab = SymbolVocab::build(samples);
  ModelConfig mc;
  mc.hidden_size = hidden;
  mc.embedding_size = embedding;
  mc.input_vocab_size = vocab.input_size();
  mc.output_vocab_size = vocab.output_size();
  mc.max_decode_length = 8;
  Seq2SeqModel model(mc);
  model.init(seed);

  std::vector<EncodedSample> encoded;
  for (const Sample& s : samples) encoded.push_back(encode_sample(s, vocab));

  auto f = [&](ParamStore& store, bool want_grads) {
    double total = 0.0;
    for (const EncodedSample& e : encoded) {
      Tape tape;
      NodeId loss = model.sequence_nll(tape, e);
      total += tape.value(loss).data[0];
      if (want_grads) {
        tape.backward(loss);
        tape.accumulate_grads(store);
      }
    }
    return total;
  };
  GradCheckReport rep = grad_check(model.params(), f);
  std::cout << "max relative error " << rep.max_rel_err << " at "
            << rep.worst.param << "[" << rep.worst.coordinate << "] (analytic "
            << rep.worst.analytic << ", numeric " << rep.worst.numeric << ")\n";
  if (!rep.passed(tol)) {
    std::cout << "FAIL (tolerance " << tol << ")\n";
    throw NumericalError("gradient check failed");
  }
  std::cout << "PASS (tolerance " << tol << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual morphological paradigm completion"};
  app.require_subcommand(1);

  SpecArgs prep_args;
  CLI::App* prepare = app.add_subcommand("prepare", "sample and write dataset splits");
  add_spec_options(prepare, prep_args);

  SpecArgs train_args;
  std::string train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "train one model on one split");
  add_spec_options(train_cmd, train_args);
  train_cmd->add_option("--checkpoint", train_out, "checkpoint output path");

  std::string dec_ckpt, dec_in = "-", dec_out;
  int dec_beam = 1;
  CLI::App* decode = app.add_subcommand(
      "decode", "predict forms for language<TAB>lemma<TAB>tag lines");
  decode->add_option("--checkpoint", dec_ckpt)->required();
  decode->add_option("--input", dec_in, "input TSV ('-' = stdin)");
  decode->add_option("--output", dec_out, "output TSV (default stdout)");
  decode->add_option("--beam", dec_beam, "beam width (1 = greedy)");

  std::string eval_ckpt, eval_data, eval_lang;
  int eval_beam = 1;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "score a checkpoint on gold data");
  evaluate_cmd->add_option("--checkpoint", eval_ckpt)->required();
  evaluate_cmd
      ->add_option("--data", eval_data,
                   "gold TSV: UniMorph 3-column or prepare's 4-column format")
      ->required();
  evaluate_cmd->add_option("--language", eval_lang,
                           "language code (required for 3-column files)");
  evaluate_cmd->add_option("--beam", eval_beam, "beam width (1 = greedy)");

  CLI::App* exp = app.add_subcommand("exp", "run a full experiment");
  exp->require_subcommand(1);
  SpecArgs transfer_args, shot_args, cipher_args, curve_args;
  add_spec_options(exp->add_subcommand("transfer", "source-language comparison"),
                   transfer_args);
  add_spec_options(exp->add_subcommand("shot", "one-/zero-shot tag split"),
                   shot_args);
  add_spec_options(exp->add_subcommand("cipher", "true source vs ciphered source"),
                   cipher_args);
  add_spec_options(exp->add_subcommand("curve", "target-size learning curve"),
                   curve_args);

  int gc_hidden = 4, gc_embedding = 5;
  uint64_t gc_seed = 7;
  double gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--hidden", gc_hidden);
  gradcheck->add_option("--embedding", gc_embedding);
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--tol", gc_tol);

  try {
    app.parse(argc, argv);
    if (prepare->parsed()) return cmd_prepare(prep_args);
    if (train_cmd->parsed()) return cmd_train(train_args, train_out);
    if (decode->parsed()) return cmd_decode(dec_ckpt, dec_in, dec_out, dec_beam);
    if (evaluate_cmd->parsed())
      return cmd_evaluate(eval_ckpt, eval_data, eval_lang, eval_beam);
    if (exp->parsed()) {
      CLI::App* sub = exp->get_subcommands().front();
      if (sub->get_name() == "transfer") return cmd_exp(transfer_args, ExperimentKind::Transfer);
      if (sub->get_name() == "shot") return cmd_exp(shot_args, ExperimentKind::Shot);
      if (sub->get_name() == "cipher") return cmd_exp(cipher_args, ExperimentKind::Cipher);
      return cmd_exp(curve_args, ExperimentKind::LearningCurve);
    }
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_hidden, gc_embedding, gc_seed, gc_tol);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
