#pragma once

#include <string>
#include <vector>

#include "mxfr/encoding.hpp"
#include "mxfr/optim.hpp"
#include "mxfr/rng.hpp"
#include "mxfr/tape.hpp"

namespace mxfr {

struct ModelConfig {
  int hidden_size = 100;
  int embedding_size = 300;
  int input_vocab_size = 0;
  int output_vocab_size = 0;
  int max_decode_length = 40;
  // Range of the uniform draw for the decoder GRU matrices, the one set of
  // weights exempt from identity initialization.
  double decoder_init_range = 0.08;
};

// Per-position encoder states: row i concatenates the forward and backward
// hidden states at input position i.
struct EncoderStates {
  std::vector<NodeId> rows;   // each of size 2*hidden
  // U_a * H_i per position, precomputed once so each decode step only pays
  // for the state-dependent half of the attention score.
  std::vector<NodeId> attn_proj;
  NodeId backward_final = -1;
  std::vector<bool> mask;
};

struct DecodeResult {
  std::string form;
  double log_prob = 0.0;
  bool truncated = false;
  std::vector<std::vector<double>> attention_history;  // kept when requested
};

// Character-level attentional encoder-decoder: shared input embeddings over
// language tags, subtags and characters; bidirectional GRU encoder;
// unidirectional GRU decoder with additive attention; affine+softmax output
// layer over target characters.
class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(ModelConfig config);

  // Identity initialization everywhere except the six decoder GRU matrices,
  // which get seeded uniform(-range, range). Biases zero.
  void init(uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // One GRU step; `prefix` selects the parameter group ("enc_fwd",
  // "enc_bwd" or "dec").
  NodeId gru_cell(Tape& tape, NodeId x, NodeId h_prev,
                  const std::string& prefix);

  EncoderStates encode(Tape& tape, const std::vector<int>& input_ids);

  // Additive attention: scores v . tanh(W s_prev + U H_i), masked softmax,
  // context = weighted sum of rows. Returns (alpha, context).
  std::pair<NodeId, NodeId> attend(Tape& tape, NodeId s_prev,
                                   const EncoderStates& enc);

  // One decoder step: context, GRU update, log-probabilities over the output
  // vocabulary (PAD and BOW are excluded from the softmax support).
  struct StepResult {
    NodeId state;
    NodeId log_probs;
    NodeId alpha;
  };
  StepResult decode_step(Tape& tape, int y_prev_id, NodeId s_prev,
                         const EncoderStates& enc);

  // Teacher-forced negative log-likelihood of one encoded sample.
  NodeId sequence_nll(Tape& tape, const EncodedSample& sample);

  // Loss with inverted dropout (rate in [0,1)) on input and decoder
  // embeddings; used only behind the trainer's dropout flag.
  NodeId sequence_nll_dropout(Tape& tape, const EncodedSample& sample,
                              double rate, Rng& rng);

  DecodeResult greedy_decode(const std::vector<int>& input_ids,
                             const SymbolVocab& vocab, int max_len,
                             bool keep_attention = false) const;

  DecodeResult beam_decode(const std::vector<int>& input_ids,
                           const SymbolVocab& vocab, int beam_width,
                           int max_len) const;

  std::vector<bool> output_support() const;

 private:
  NodeId initial_decoder_state(Tape& tape, const EncoderStates& enc);
  NodeId embed_input(Tape& tape, int id);
  NodeId embed_output(Tape& tape, int id);

  ModelConfig config_;
  ParamStore params_;
};

}  // namespace mxfr
