#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mxfr/encoding.hpp"
#include "mxfr/errors.hpp"
#include "mxfr/model.hpp"
#include "support/synthlang.hpp"

using namespace mxfr;

namespace {

ModelConfig small_config(const SymbolVocab& vocab, int hidden, int embedding) {
  ModelConfig c;
  c.hidden_size = hidden;
  c.embedding_size = embedding;
  c.input_vocab_size = vocab.input_size();
  c.output_vocab_size = vocab.output_size();
  c.max_decode_length = 20;
  return c;
}

struct Fixture {
  std::vector<Sample> samples;
  SymbolVocab vocab;
  Seq2SeqModel model;

  explicit Fixture(int hidden = 8, int embedding = 8, uint64_t seed = 5,
                   size_t n = 25)
      : samples(synth::toy_corpus(n, 3)),
        vocab(SymbolVocab::build(samples)),
        model(small_config(vocab, hidden, embedding)) {
    model.init(seed);
  }
};

}  // namespace

TEST_CASE("initialization shapes and identity structure") {
  Fixture f;
  ParamStore& p = f.model.params();
  CHECK(p.params.at("E_in").shape ==
        std::vector<int>{f.vocab.input_size(), 8});
  CHECK(p.params.at("enc_fwd.Wz").shape == std::vector<int>{8, 8});
  CHECK(p.params.at("attn.U").shape == std::vector<int>{8, 16});
  CHECK(p.params.at("out.W").rows() == f.vocab.output_size());

  // Identity init everywhere except the decoder GRU matrices.
  const Tensor& wz = p.params.at("enc_fwd.Wz");
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(wz.at(i, j) == (i == j ? 1.0 : 0.0));
  const Tensor& dz = p.params.at("dec.Uz");
  bool any_off_identity = false;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      CHECK(std::abs(dz.at(i, j)) < 0.08);
      if (dz.at(i, j) != (i == j ? 1.0 : 0.0)) any_off_identity = true;
    }
  CHECK(any_off_identity);

  for (const auto& [name, t] : p.params)
    if (name.ends_with(".bz") || name.ends_with(".br") || name.ends_with(".bh"))
      for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("gru cell with zero weights halves the previous state") {
  Fixture f;
  ParamStore& p = f.model.params();
  for (const std::string& n :
       {"enc_fwd.Wz", "enc_fwd.Uz", "enc_fwd.Wr", "enc_fwd.Ur", "enc_fwd.Wh",
        "enc_fwd.Uh"})
    p.params.at(n).fill(0.0);
  Tape tape;
  Tensor h0({8});
  for (int i = 0; i < 8; ++i) h0.at(i) = 0.1 * (i + 1);
  Tensor x({8});
  NodeId h1 = f.model.gru_cell(tape, tape.constant(x), tape.constant(h0),
                               "enc_fwd");
  // z = sigmoid(0) = 0.5, candidate = tanh(0) = 0, so h = 0.5 h_prev.
  for (int i = 0; i < 8; ++i)
    CHECK(tape.value(h1).at(i) == doctest::Approx(0.05 * (i + 1)).epsilon(1e-12));
}

TEST_CASE("attention weights are a distribution and context is convex") {
  Fixture f;
  std::vector<int> ids = encode_input(f.samples[0], f.vocab);
  Tape tape;
  EncoderStates enc = f.model.encode(tape, ids);
  CHECK(enc.rows.size() == ids.size());

  Tensor s0({8});
  auto [alpha, ctx] = f.model.attend(tape, tape.constant(s0), enc);
  const Tensor& a = tape.value(alpha);
  double sum = 0.0;
  for (double v : a.data) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  const Tensor& c = tape.value(ctx);
  for (int d = 0; d < c.size(); ++d) {
    double lo = 1e18, hi = -1e18;
    for (NodeId r : enc.rows) {
      lo = std::min(lo, tape.value(r).at(d));
      hi = std::max(hi, tape.value(r).at(d));
    }
    CHECK(c.at(d) >= lo - 1e-12);
    CHECK(c.at(d) <= hi + 1e-12);
  }
}

TEST_CASE("equal attention scores give uniform weights") {
  Fixture f;
  // Zeroing the scoring vector makes every score identical.
  f.model.params().params.at("attn.v").fill(0.0);
  std::vector<int> ids = encode_input(f.samples[0], f.vocab);
  Tape tape;
  EncoderStates enc = f.model.encode(tape, ids);
  Tensor s0({8});
  auto [alpha, ctx] = f.model.attend(tape, tape.constant(s0), enc);
  const Tensor& a = tape.value(alpha);
  for (double v : a.data)
    CHECK(v == doctest::Approx(1.0 / static_cast<double>(ids.size()))
                   .epsilon(1e-12));
}

TEST_CASE("decode steps emit normalized distributions") {
  Fixture f;
  std::vector<int> ids = encode_input(f.samples[0], f.vocab);
  Tape tape;
  EncoderStates enc = f.model.encode(tape, ids);
  Tensor s0({8});
  NodeId state = tape.constant(s0);
  int prev = SymbolVocab::kBow;
  for (int step = 0; step < 4; ++step) {
    auto res = f.model.decode_step(tape, prev, state, enc);
    const Tensor& lp = tape.value(res.log_probs);
    double sum = 0.0;
    for (double v : lp.data)
      if (std::isfinite(v)) sum += std::exp(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isinf(lp.at(SymbolVocab::kPad)));
    CHECK(std::isinf(lp.at(SymbolVocab::kBow)));
    state = res.state;
    prev = SymbolVocab::kEow;
  }
}

TEST_CASE("uniform loss anchor with zeroed output layer") {
  Fixture f;
  f.model.params().params.at("out.W").fill(0.0);
  f.model.params().params.at("out.b").fill(0.0);
  int k = 0;
  for (bool b : f.model.output_support())
    if (b) ++k;
  CHECK(k == f.vocab.output_size() - 2);

  for (size_t i = 0; i < 5; ++i) {
    EncodedSample e = encode_sample(f.samples[i], f.vocab);
    Tape tape;
    NodeId loss = f.model.sequence_nll(tape, e);
    double len = static_cast<double>(e.target_ids.size() - 1);  // no BOW
    CHECK(tape.value(loss).data[0] ==
          doctest::Approx(len * std::log(static_cast<double>(k)))
              .epsilon(1e-9));
  }
}

TEST_CASE("full-model gradient check on a tiny configuration") {
  Fixture f(4, 5, 7, 6);
  std::vector<EncodedSample> encoded;
  for (size_t i = 0; i < 3; ++i)
    encoded.push_back(encode_sample(f.samples[i], f.vocab));
  auto loss_fn = [&](ParamStore& store, bool want_grads) {
    double total = 0.0;
    for (const EncodedSample& e : encoded) {
      Tape tape;
      NodeId loss = f.model.sequence_nll(tape, e);
      total += tape.value(loss).data[0];
      if (want_grads) {
        tape.backward(loss);
        tape.accumulate_grads(store);
      }
    }
    return total;
  };
  GradCheckReport rep = grad_check(f.model.params(), loss_fn);
  // Looser than the acceptance gate: some coordinates here have gradients
  // near the central-difference noise floor for h = 1e-5.
  CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("greedy decoding is deterministic and stops at EOW") {
  Fixture f;
  std::vector<int> ids = encode_input(f.samples[0], f.vocab);
  DecodeResult a = f.model.greedy_decode(ids, f.vocab, 20);
  DecodeResult b = f.model.greedy_decode(ids, f.vocab, 20);
  CHECK(a.form == b.form);
  CHECK(a.log_prob == b.log_prob);
  CHECK(a.log_prob <= 0.0);

  DecodeResult short_run = f.model.greedy_decode(ids, f.vocab, 2);
  CHECK(short_run.truncated);
  CHECK(short_run.form.size() <= 2 * 4);  // at most max_len code points
}

TEST_CASE("greedy decoding can record attention") {
  Fixture f;
  std::vector<int> ids = encode_input(f.samples[0], f.vocab);
  DecodeResult r = f.model.greedy_decode(ids, f.vocab, 20, true);
  CHECK(!r.attention_history.empty());
  for (const std::vector<double>& step : r.attention_history) {
    REQUIRE(step.size() == ids.size());
    double sum = 0.0;
    for (double v : step) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("beam width one equals greedy on random inputs") {
  Fixture f;
  for (size_t i = 0; i < f.samples.size(); ++i) {
    std::vector<int> ids = encode_input(f.samples[i], f.vocab);
    DecodeResult g = f.model.greedy_decode(ids, f.vocab, 15);
    DecodeResult b = f.model.beam_decode(ids, f.vocab, 1, 15);
    CHECK(g.form == b.form);
    CHECK(g.log_prob == doctest::Approx(b.log_prob).epsilon(1e-12));
  }
}

TEST_CASE("wide beam finds the exhaustive-search optimum on a toy model") {
  // Three output characters, max length 3: enumerate all 3^0..3^3 forms.
  std::vector<Sample> tiny;
  for (const char* lf : {"a", "b", "c"}) {
    Sample s;
    s.language = LanguageCode("xx");
    s.lemma = lf;
    s.form = lf;
    s.tag = parse_tag("X");
    tiny.push_back(s);
  }
  SymbolVocab vocab = SymbolVocab::build(tiny);
  ModelConfig mc;
  mc.hidden_size = 6;
  mc.embedding_size = 6;
  mc.input_vocab_size = vocab.input_size();
  mc.output_vocab_size = vocab.output_size();
  mc.max_decode_length = 3;
  Seq2SeqModel model(mc);
  model.init(11);

  // Score one candidate form by teacher forcing.
  auto score = [&](const Sample& input, const std::string& form) {
    Sample s = input;
    s.form = form;
    EncodedSample e = encode_sample(s, vocab);
    Tape tape;
    NodeId nll = model.sequence_nll(tape, e);
    return -tape.value(nll).data[0];
  };

  // With decode budget 3, every form of up to 2 characters still fits its
  // closing EOW; a width-64 beam explores that space exhaustively.
  std::vector<std::string> alphabet = {"a", "b", "c"};
  for (const Sample& input : tiny) {
    std::vector<std::string> candidates = {""};
    std::vector<std::string> all;
    for (int len = 0; len <= 2; ++len) {
      all.insert(all.end(), candidates.begin(), candidates.end());
      std::vector<std::string> next;
      for (const std::string& c : candidates)
        for (const std::string& ch : alphabet) next.push_back(c + ch);
      candidates = next;
    }
    std::string best;
    double best_score = -1e18;
    for (const std::string& cand : all) {
      double sc = score(input, cand);
      if (sc > best_score) {
        best_score = sc;
        best = cand;
      }
    }
    DecodeResult beam = model.beam_decode(encode_input(input, vocab), vocab,
                                          64, 3);
    CHECK(beam.form == best);
    CHECK(beam.log_prob == doctest::Approx(best_score).epsilon(1e-9));
  }
}

TEST_CASE("per-sample loss is identical inside and outside a batch") {
  Fixture f;
  std::vector<EncodedSample> encoded;
  for (const Sample& s : f.samples) encoded.push_back(encode_sample(s, f.vocab));
  std::vector<Batch> batches = make_batches(encoded, 8, 4, true);
  for (const Batch& b : batches) {
    for (size_t r = 0; r < b.size(); ++r) {
      EncodedSample row = batch_row(b, r);
      Tape t1, t2;
      double from_batch = t1.value(f.model.sequence_nll(t1, row)).data[0];
      // Find the matching original sample.
      for (const EncodedSample& e : encoded) {
        if (e.input_ids == row.input_ids && e.target_ids == row.target_ids) {
          double plain = t2.value(f.model.sequence_nll(t2, e)).data[0];
          CHECK(from_batch == plain);
          break;
        }
      }
    }
  }
}

TEST_CASE("dropout loss reduces to plain loss at rate zero") {
  Fixture f;
  EncodedSample e = encode_sample(f.samples[0], f.vocab);
  Tape t1, t2;
  Rng rng(9);
  double plain = t1.value(f.model.sequence_nll(t1, e)).data[0];
  double dropped = t2.value(f.model.sequence_nll_dropout(t2, e, 0.0, rng)).data[0];
  CHECK(plain == doctest::Approx(dropped).epsilon(1e-12));
}
