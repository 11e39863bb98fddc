#include "mxfr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "mxfr/errors.hpp"
#include "mxfr/utf8.hpp"

namespace mxfr {

namespace {

// Seed streams within one training run.
constexpr uint64_t kInitStream = 10;
constexpr uint64_t kEpochStreamBase = 100;
constexpr uint64_t kDropoutStream = 50;

int longest_form_cps(const std::vector<Sample>& samples) {
  size_t longest = 0;
  for (const Sample& s : samples)
    longest = std::max(longest, utf8::decode(s.form).size());
  return static_cast<int>(longest);
}

void clip_grads(ParamStore& store, double clip) {
  double sq = 0.0;
  for (const auto& [name, g] : store.grads)
    for (double v : g.data) sq += v * v;
  double norm = std::sqrt(sq);
  if (norm <= clip) return;
  double scale = clip / norm;
  for (auto& [name, g] : store.grads)
    for (double& v : g.data) v *= scale;
}

}  // namespace

Checkpoint train(const DatasetSplit& split, ModelConfig model_config,
                 const TrainConfig& train_config) {
  if (split.train.empty()) throw DataError("train split is empty");

  std::vector<Sample> all = split.train;
  all.insert(all.end(), split.dev.begin(), split.dev.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  SymbolVocab vocab = SymbolVocab::build(all);

  model_config.input_vocab_size = vocab.input_size();
  model_config.output_vocab_size = vocab.output_size();
  model_config.max_decode_length = longest_form_cps(split.train) + 5;

  Seq2SeqModel model(model_config);
  model.init(derive_seed(train_config.seed, kInitStream));
  AdaDeltaState opt = AdaDeltaState::init(model.params(), train_config.rho,
                                          train_config.eps);

  std::vector<EncodedSample> encoded;
  encoded.reserve(split.train.size());
  for (const Sample& s : split.train) encoded.push_back(encode_sample(s, vocab));

  auto make_checkpoint = [&](int epoch, double dev_acc, double dev_ed) {
    Checkpoint cp;
    cp.model_config = model_config;
    cp.vocab = vocab;
    cp.params = model.params();
    cp.epoch = epoch;
    cp.dev_accuracy = dev_acc;
    cp.dev_edit_distance = dev_ed;
    cp.rng_digest = derive_seed(train_config.seed, kEpochStreamBase + epoch);
    return cp;
  };

  const bool have_dev = !split.dev.empty();
  bool track_best = train_config.selection == SelectionPolicy::BestDevAccuracy
                    && have_dev;
  Checkpoint best;
  bool have_best = false;

  Rng dropout_rng(derive_seed(train_config.seed, kDropoutStream));

  if (train_config.log && train_config.epochs > 0)
    *train_config.log << "epoch\ttrain_loss\tdev_acc\tdev_ed\n";

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    uint64_t shuffle_seed =
        derive_seed(train_config.seed, kEpochStreamBase + epoch);
    std::vector<Batch> batches =
        make_batches(encoded, train_config.batch_size, shuffle_seed, true);
    double epoch_loss = 0.0;
    size_t n_samples = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      model.params().zero_grads();
      double batch_loss = 0.0;
      for (size_t row = 0; row < batch.size(); ++row) {
        EncodedSample e = batch_row(batch, row);
        Tape tape;
        NodeId loss =
            train_config.dropout > 0.0
                ? model.sequence_nll_dropout(tape, e, train_config.dropout,
                                             dropout_rng)
                : model.sequence_nll(tape, e);
        double lv = tape.value(loss).at(0);
        if (!std::isfinite(lv))
          throw NumericalError("non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(bi));
        batch_loss += lv;
        // mean over the batch keeps the update scale size-independent
        tape.backward(loss, 1.0 / static_cast<double>(batch.size()));
        tape.accumulate_grads(model.params());
      }
      if (train_config.grad_clip > 0.0)
        clip_grads(model.params(), train_config.grad_clip);
      adadelta_step(model.params(), opt);
      epoch_loss += batch_loss;
      n_samples += batch.size();
    }
    double train_loss = epoch_loss / static_cast<double>(n_samples);

    bool eval_now =
        have_dev && (epoch % train_config.eval_every == 0 ||
                     epoch == train_config.epochs);
    double dev_acc = -1.0, dev_ed = -1.0;
    if (eval_now) {
      Checkpoint current = make_checkpoint(epoch, -1.0, -1.0);
      DevMetrics m = evaluate_dev(current, split.dev);
      dev_acc = m.accuracy;
      dev_ed = m.mean_edit_distance;
      if (track_best) {
        // ties broken by lower dev edit distance, then earlier epoch
        bool better = !have_best || dev_acc > best.dev_accuracy ||
                      (dev_acc == best.dev_accuracy &&
                       dev_ed < best.dev_edit_distance);
        if (better) {
          current.dev_accuracy = dev_acc;
          current.dev_edit_distance = dev_ed;
          best = std::move(current);
          have_best = true;
        }
      }
    }
    if (train_config.log) {
      std::ostream& os = *train_config.log;
      os << epoch << "\t" << std::fixed << std::setprecision(6) << train_loss
         << "\t";
      if (eval_now)
        os << std::setprecision(4) << dev_acc << "\t" << std::setprecision(2)
           << dev_ed;
      else
        os << "-\t-";
      os << "\n";
    }
  }

  if (track_best && have_best) return best;
  Checkpoint last = make_checkpoint(train_config.epochs, -1.0, -1.0);
  if (have_dev && train_config.epochs > 0) {
    DevMetrics m = evaluate_dev(last, split.dev);
    last.dev_accuracy = m.accuracy;
    last.dev_edit_distance = m.mean_edit_distance;
  }
  return last;
}

Seq2SeqModel model_from_checkpoint(const Checkpoint& checkpoint) {
  Seq2SeqModel model(checkpoint.model_config);
  model.init(0);
  for (auto& [name, t] : model.params().params) {
    auto it = checkpoint.params.params.find(name);
    if (it == checkpoint.params.params.end())
      throw DataError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape != t.shape)
      throw DataError("checkpoint parameter '" + name + "' has shape " +
                      it->second.shape_str() + ", expected " + t.shape_str());
    t = it->second;
  }
  return model;
}

DevMetrics evaluate_dev(const Checkpoint& checkpoint,
                        const std::vector<Sample>& dev_samples) {
  if (dev_samples.empty())
    throw DataError("evaluate_dev: empty dev list");
  Seq2SeqModel model = model_from_checkpoint(checkpoint);
  std::vector<std::string> preds, golds;
  double total_loss = 0.0;
  for (const Sample& s : dev_samples) {
    EncodedSample e = encode_sample(s, checkpoint.vocab);
    DecodeResult r = model.greedy_decode(
        e.input_ids, checkpoint.vocab, checkpoint.model_config.max_decode_length);
    preds.push_back(r.form);
    golds.push_back(s.form);
    Tape tape;
    total_loss += tape.value(model.sequence_nll(tape, e)).at(0);
  }
  DevMetrics m;
  EvalReport rep = evaluate(preds, golds);
  m.accuracy = rep.accuracy;
  m.mean_edit_distance = rep.mean_edit_distance;
  m.loss = total_loss / static_cast<double>(dev_samples.size());
  return m;
}

}  // namespace mxfr
