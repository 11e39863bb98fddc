#include "mxfr/model.hpp"

#include <algorithm>
#include <cmath>

#include "mxfr/errors.hpp"

namespace mxfr {

namespace {

const char* kGruPrefixes[] = {"enc_fwd", "enc_bwd", "dec"};

std::vector<std::string> gru_param_names(const std::string& prefix) {
  std::vector<std::string> names;
  for (const char* gate : {"z", "r", "h"}) {
    names.push_back(prefix + ".W" + gate);
    names.push_back(prefix + ".U" + gate);
    names.push_back(prefix + ".b" + gate);
  }
  return names;
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(ModelConfig config) : config_(config) {
  if (config_.hidden_size < 1 || config_.embedding_size < 1 ||
      config_.input_vocab_size < 1 || config_.output_vocab_size < 1 ||
      config_.max_decode_length < 1)
    throw UsageError("model config dimensions must be positive");
}

void Seq2SeqModel::init(uint64_t seed) {
  const int h = config_.hidden_size;
  const int e = config_.embedding_size;

  params_ = ParamStore{};
  params_.add("E_in", identity_init(config_.input_vocab_size, e));
  params_.add("E_out", identity_init(config_.output_vocab_size, e));

  auto add_gru = [&](const std::string& prefix, int x_dim) {
    for (const char* gate : {"z", "r", "h"}) {
      params_.add(prefix + ".W" + gate, identity_init(h, x_dim));
      params_.add(prefix + ".U" + gate, identity_init(h, h));
      params_.add(prefix + ".b" + gate, Tensor({h}));
    }
  };
  add_gru("enc_fwd", e);
  add_gru("enc_bwd", e);
  add_gru("dec", e + 2 * h);

  params_.add("init.W", identity_init(h, h));
  params_.add("init.b", Tensor({h}));
  params_.add("attn.W", identity_init(h, h));
  params_.add("attn.U", identity_init(h, 2 * h));
  {
    // vectors get the leading row of a truncated identity
    Tensor v({h});
    v.at(0) = 1.0;
    params_.add("attn.v", std::move(v));
  }
  params_.add("out.W",
              identity_init(config_.output_vocab_size, e + h + 2 * h));
  params_.add("out.b", Tensor({config_.output_vocab_size}));

  // The decoder GRU matrices are the one group exempt from identity
  // initialization; they get a seeded uniform draw.
  Rng rng(seed);
  const double r = config_.decoder_init_range;
  for (const char* gate : {"z", "r", "h"}) {
    for (const char* kind : {".W", ".U"}) {
      Tensor& t = params_.param(std::string("dec") + kind + gate);
      for (double& x : t.data) x = rng.uniform(-r, r);
    }
  }
}

NodeId Seq2SeqModel::embed_input(Tape& tape, int id) {
  return tape.row(tape.param(params_, "E_in"), id);
}

NodeId Seq2SeqModel::embed_output(Tape& tape, int id) {
  return tape.row(tape.param(params_, "E_out"), id);
}

NodeId Seq2SeqModel::gru_cell(Tape& tape, NodeId x, NodeId h_prev,
                              const std::string& prefix) {
  bool known = false;
  for (const char* p : kGruPrefixes) known = known || prefix == p;
  if (!known) throw NumericalError("unknown GRU parameter group: " + prefix);

  auto gate = [&](const char* g) {
    return tape.add(
        tape.add(tape.matvec(tape.param(params_, prefix + ".W" + g), x),
                 tape.matvec(tape.param(params_, prefix + ".U" + g), h_prev)),
        tape.param(params_, prefix + ".b" + g));
  };
  NodeId z = tape.sigmoid_(gate("z"));
  NodeId r = tape.sigmoid_(gate("r"));
  NodeId h_tilde = tape.tanh_(tape.add(
      tape.add(tape.matvec(tape.param(params_, prefix + ".Wh"), x),
               tape.matvec(tape.param(params_, prefix + ".Uh"),
                           tape.mul(r, h_prev))),
      tape.param(params_, prefix + ".bh")));
  // h = (1-z) * h_prev + z * h_tilde
  return tape.add(tape.sub(h_prev, tape.mul(z, h_prev)), tape.mul(z, h_tilde));
}

EncoderStates Seq2SeqModel::encode(Tape& tape,
                                   const std::vector<int>& input_ids) {
  const int n = static_cast<int>(input_ids.size());
  if (n < 1) throw NumericalError("encode: empty input");
  std::vector<NodeId> embeds(n);
  for (int i = 0; i < n; ++i) embeds[i] = embed_input(tape, input_ids[i]);

  NodeId zero = tape.constant(Tensor({config_.hidden_size}));
  std::vector<NodeId> fwd(n), bwd(n);
  NodeId h = zero;
  for (int i = 0; i < n; ++i) {
    h = gru_cell(tape, embeds[i], h, "enc_fwd");
    fwd[i] = h;
  }
  h = zero;
  for (int i = n - 1; i >= 0; --i) {
    h = gru_cell(tape, embeds[i], h, "enc_bwd");
    bwd[i] = h;
  }

  EncoderStates enc;
  enc.mask.assign(n, true);
  enc.backward_final = bwd[0];
  NodeId attn_u = tape.param(params_, "attn.U");
  for (int i = 0; i < n; ++i) {
    enc.rows.push_back(tape.concat({fwd[i], bwd[i]}));
    enc.attn_proj.push_back(tape.matvec(attn_u, enc.rows.back()));
  }
  return enc;
}

std::pair<NodeId, NodeId> Seq2SeqModel::attend(Tape& tape, NodeId s_prev,
                                               const EncoderStates& enc) {
  NodeId ws = tape.matvec(tape.param(params_, "attn.W"), s_prev);
  NodeId v = tape.param(params_, "attn.v");
  std::vector<NodeId> scores;
  scores.reserve(enc.rows.size());
  for (size_t i = 0; i < enc.rows.size(); ++i)
    scores.push_back(tape.dot(v, tape.tanh_(tape.add(ws, enc.attn_proj[i]))));
  NodeId alpha = tape.masked_softmax(tape.stack(scores), enc.mask);
  NodeId context = tape.weighted_sum(alpha, enc.rows);
  return {alpha, context};
}

std::vector<bool> Seq2SeqModel::output_support() const {
  std::vector<bool> support(config_.output_vocab_size, true);
  support[SymbolVocab::kBow] = false;
  support[SymbolVocab::kPad] = false;
  return support;
}

Seq2SeqModel::StepResult Seq2SeqModel::decode_step(Tape& tape, int y_prev_id,
                                                   NodeId s_prev,
                                                   const EncoderStates& enc) {
  auto [alpha, context] = attend(tape, s_prev, enc);
  NodeId y_embed = embed_output(tape, y_prev_id);
  NodeId x = tape.concat({y_embed, context});
  NodeId s = gru_cell(tape, x, s_prev, "dec");
  NodeId features = tape.concat({y_embed, s, context});
  NodeId logits = tape.add(tape.matvec(tape.param(params_, "out.W"), features),
                           tape.param(params_, "out.b"));
  NodeId log_probs = tape.log_softmax_support(logits, output_support());
  return StepResult{s, log_probs, alpha};
}

NodeId Seq2SeqModel::initial_decoder_state(Tape& tape,
                                           const EncoderStates& enc) {
  return tape.tanh_(
      tape.add(tape.matvec(tape.param(params_, "init.W"), enc.backward_final),
               tape.param(params_, "init.b")));
}

NodeId Seq2SeqModel::sequence_nll(Tape& tape, const EncodedSample& sample) {
  const std::vector<int>& target = sample.target_ids;
  if (target.size() < 2 || target.front() != SymbolVocab::kBow ||
      target.back() != SymbolVocab::kEow)
    throw NumericalError("sequence_nll: target not framed by BOW/EOW");
  EncoderStates enc = encode(tape, sample.input_ids);
  NodeId s = initial_decoder_state(tape, enc);
  std::vector<NodeId> step_losses;
  for (size_t t = 1; t < target.size(); ++t) {
    StepResult step = decode_step(tape, target[t - 1], s, enc);
    s = step.state;
    step_losses.push_back(tape.pick(step.log_probs, target[t]));
  }
  // loss = -sum_t log p(y_t)
  NodeId total = step_losses[0];
  for (size_t i = 1; i < step_losses.size(); ++i)
    total = tape.add(total, step_losses[i]);
  NodeId zero = tape.constant(Tensor({1}));
  return tape.sub(zero, total);
}

NodeId Seq2SeqModel::sequence_nll_dropout(Tape& tape,
                                          const EncodedSample& sample,
                                          double rate, Rng& rng) {
  if (rate <= 0.0) return sequence_nll(tape, sample);
  if (rate >= 1.0) throw UsageError("dropout rate must be in [0, 1)");
  const double keep = 1.0 - rate;
  auto dropped = [&](NodeId v) {
    Tensor mask({tape.value(v).shape[0]});
    for (double& m : mask.data)
      m = rng.uniform(0.0, 1.0) < keep ? 1.0 / keep : 0.0;
    return tape.mul(v, tape.constant(std::move(mask)));
  };

  const std::vector<int>& target = sample.target_ids;
  if (target.size() < 2 || target.front() != SymbolVocab::kBow ||
      target.back() != SymbolVocab::kEow)
    throw NumericalError("sequence_nll: target not framed by BOW/EOW");

  // Same graph as sequence_nll but with dropout on every embedding vector.
  const int n = static_cast<int>(sample.input_ids.size());
  std::vector<NodeId> embeds(n);
  for (int i = 0; i < n; ++i)
    embeds[i] = dropped(embed_input(tape, sample.input_ids[i]));
  NodeId zero_h = tape.constant(Tensor({config_.hidden_size}));
  std::vector<NodeId> fwd(n), bwd(n);
  NodeId h = zero_h;
  for (int i = 0; i < n; ++i) {
    h = gru_cell(tape, embeds[i], h, "enc_fwd");
    fwd[i] = h;
  }
  h = zero_h;
  for (int i = n - 1; i >= 0; --i) {
    h = gru_cell(tape, embeds[i], h, "enc_bwd");
    bwd[i] = h;
  }
  EncoderStates enc;
  enc.mask.assign(n, true);
  enc.backward_final = bwd[0];
  NodeId attn_u = tape.param(params_, "attn.U");
  for (int i = 0; i < n; ++i) {
    enc.rows.push_back(tape.concat({fwd[i], bwd[i]}));
    enc.attn_proj.push_back(tape.matvec(attn_u, enc.rows.back()));
  }

  NodeId s = initial_decoder_state(tape, enc);
  std::vector<NodeId> step_losses;
  for (size_t t = 1; t < target.size(); ++t) {
    auto [alpha, context] = attend(tape, s, enc);
    NodeId y_embed = dropped(embed_output(tape, target[t - 1]));
    NodeId x = tape.concat({y_embed, context});
    s = gru_cell(tape, x, s, "dec");
    NodeId features = tape.concat({y_embed, s, context});
    NodeId logits =
        tape.add(tape.matvec(tape.param(params_, "out.W"), features),
                 tape.param(params_, "out.b"));
    NodeId log_probs = tape.log_softmax_support(logits, output_support());
    step_losses.push_back(tape.pick(log_probs, target[t]));
  }
  NodeId total = step_losses[0];
  for (size_t i = 1; i < step_losses.size(); ++i)
    total = tape.add(total, step_losses[i]);
  return tape.sub(tape.constant(Tensor({1})), total);
}

DecodeResult Seq2SeqModel::greedy_decode(const std::vector<int>& input_ids,
                                         const SymbolVocab& vocab, int max_len,
                                         bool keep_attention) const {
  Seq2SeqModel& self = const_cast<Seq2SeqModel&>(*this);
  Tape tape;
  EncoderStates enc = self.encode(tape, input_ids);
  NodeId s = self.initial_decoder_state(tape, enc);

  DecodeResult result;
  std::vector<int> chars;
  int y_prev = SymbolVocab::kBow;
  bool ended = false;
  for (int t = 0; t < max_len; ++t) {
    StepResult step = self.decode_step(tape, y_prev, s, enc);
    s = step.state;
    const Tensor& lp = tape.value(step.log_probs);
    int best = -1;
    for (int i = 0; i < lp.shape[0]; ++i) {
      if (!std::isfinite(lp.at(i))) continue;
      if (best < 0 || lp.at(i) > lp.at(best)) best = i;  // ties: lowest id
    }
    result.log_prob += lp.at(best);
    if (keep_attention) {
      const Tensor& a = tape.value(step.alpha);
      result.attention_history.emplace_back(a.data.begin(), a.data.end());
    }
    if (best == SymbolVocab::kEow) {
      ended = true;
      break;
    }
    chars.push_back(best);
    y_prev = best;
  }
  result.truncated = !ended;
  result.form = decode_output(chars, vocab);
  return result;
}

DecodeResult Seq2SeqModel::beam_decode(const std::vector<int>& input_ids,
                                       const SymbolVocab& vocab,
                                       int beam_width, int max_len) const {
  if (beam_width < 1) throw UsageError("beam_width must be >= 1");
  Seq2SeqModel& self = const_cast<Seq2SeqModel&>(*this);
  Tape tape;
  EncoderStates enc = self.encode(tape, input_ids);

  struct Hyp {
    std::vector<int> chars;
    NodeId state;
    int last_id;
    double log_prob;
  };
  struct Done {
    std::vector<int> chars;
    double log_prob;
  };

  std::vector<Hyp> live;
  live.push_back(
      Hyp{{}, self.initial_decoder_state(tape, enc), SymbolVocab::kBow, 0.0});
  std::vector<Done> pool;

  for (int t = 0; t < max_len && !live.empty(); ++t) {
    struct Cand {
      double log_prob;
      size_t hyp;
      int symbol;
      NodeId state;
    };
    std::vector<Cand> cands;
    for (size_t hi = 0; hi < live.size(); ++hi) {
      StepResult step = self.decode_step(tape, live[hi].last_id,
                                         live[hi].state, enc);
      const Tensor& lp = tape.value(step.log_probs);
      for (int i = 0; i < lp.shape[0]; ++i) {
        if (!std::isfinite(lp.at(i))) continue;
        cands.push_back(
            Cand{live[hi].log_prob + lp.at(i), hi, i, step.state});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) {
                       if (a.log_prob != b.log_prob)
                         return a.log_prob > b.log_prob;
                       if (a.symbol != b.symbol) return a.symbol < b.symbol;
                       return a.hyp < b.hyp;
                     });
    // Top beam_width candidates; EOW ones retire to the pool, the rest stay
    // on the beam.
    std::vector<Hyp> next;
    int taken = 0;
    for (const Cand& c : cands) {
      if (taken >= beam_width) break;
      ++taken;
      if (c.symbol == SymbolVocab::kEow) {
        pool.push_back(Done{live[c.hyp].chars, c.log_prob});
        continue;
      }
      Hyp h;
      h.chars = live[c.hyp].chars;
      h.chars.push_back(c.symbol);
      h.state = c.state;
      h.last_id = c.symbol;
      h.log_prob = c.log_prob;
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  DecodeResult result;
  if (!pool.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < pool.size(); ++i)
      if (pool[i].log_prob > pool[best].log_prob) best = i;
    result.form = decode_output(pool[best].chars, vocab);
    result.log_prob = pool[best].log_prob;
    result.truncated = false;
  } else {
    if (live.empty())
      throw NumericalError("beam search produced no hypotheses");
    size_t best = 0;
    for (size_t i = 1; i < live.size(); ++i)
      if (live[i].log_prob > live[best].log_prob) best = i;
    result.form = decode_output(live[best].chars, vocab);
    result.log_prob = live[best].log_prob;
    result.truncated = true;
  }
  return result;
}

}  // namespace mxfr
