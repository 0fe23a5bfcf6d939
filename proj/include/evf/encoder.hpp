#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "evf/autodiff.hpp"
#include "evf/params.hpp"

namespace evf {

// Reserved token ids shared by the packer and the synthetic generator.
inline constexpr int kBosId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kFirstContentId = 2;
inline constexpr int kNumOptions = 4;

enum class Pooling { FirstToken, Mean };

struct EncoderConfig {
  int blocks = 4;       // number of transformer blocks (pooled outputs are exposed per block)
  int width = 32;       // hidden size
  int heads = 2;
  int vocab_size = 64;
  int max_len = 64;
  int ffn_dim = 64;
  Pooling pooling = Pooling::FirstToken;
  double init_std = 0.02;

  void validate() const {
    if (blocks < 1) throw ContractError("encoder: blocks must be >= 1");
    if (heads < 1 || width % heads != 0)
      throw ContractError("encoder: width " + std::to_string(width) +
                          " not divisible by heads " + std::to_string(heads));
    if (vocab_size <= kFirstContentId)
      throw ContractError("encoder: vocab_size too small for reserved ids");
    if (max_len < 5) throw ContractError("encoder: max_len too small");
    if (ffn_dim < 1) throw ContractError("encoder: ffn_dim must be >= 1");
  }
};

// One packed sequence: [BOS] context [SEP] question option [SEP].
// Segment 0 covers BOS + context + first SEP; segment 1 the rest.
struct PackedInput {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> sep_positions;  // the two separator indices
};

// Packs context sentences plus question and option, truncating context
// tokens from the end when the budget is exceeded. Question and option are
// never truncated.
inline PackedInput pack(const std::vector<std::vector<int>>& context,
                        const std::vector<int>& question, const std::vector<int>& option,
                        int max_len) {
  if (option.empty()) throw ContractError("pack: option must be non-empty");
  const int overhead = 3 + static_cast<int>(question.size()) + static_cast<int>(option.size());
  if (overhead > max_len)
    throw ContractError("pack: question+option need " + std::to_string(overhead) +
                        " tokens but max_len is " + std::to_string(max_len));
  int budget = max_len - overhead;

  PackedInput p;
  p.token_ids.push_back(kBosId);
  for (const auto& sent : context) {
    for (int tok : sent) {
      if (budget == 0) break;
      p.token_ids.push_back(tok);
      --budget;
    }
    if (budget == 0) break;
  }
  p.sep_positions.push_back(static_cast<int>(p.token_ids.size()));
  p.token_ids.push_back(kSepId);
  p.segment_ids.assign(p.token_ids.size(), 0);
  p.token_ids.insert(p.token_ids.end(), question.begin(), question.end());
  p.token_ids.insert(p.token_ids.end(), option.begin(), option.end());
  p.sep_positions.push_back(static_cast<int>(p.token_ids.size()));
  p.token_ids.push_back(kSepId);
  p.segment_ids.resize(p.token_ids.size(), 1);
  return p;
}

// Inverse view of pack(): the (possibly truncated) context token stream and
// the question+option stream, recovered from the separator layout.
inline std::pair<std::vector<int>, std::vector<int>> unpack(const PackedInput& p) {
  if (p.sep_positions.size() != 2) throw ContractError("unpack: malformed separators");
  const int s0 = p.sep_positions[0], s1 = p.sep_positions[1];
  std::vector<int> ctx(p.token_ids.begin() + 1, p.token_ids.begin() + s0);
  std::vector<int> qo(p.token_ids.begin() + s0 + 1, p.token_ids.begin() + s1);
  return {ctx, qo};
}

// Parameter ids for one transformer block.
struct BlockParamIds {
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln1_gain, ln1_bias;
  int w1, b1, w2, b2;
  int ln2_gain, ln2_bias;
};

struct EncoderParamIds {
  int tok_embed, pos_embed, seg_embed;
  int emb_ln_gain, emb_ln_bias;
  std::vector<BlockParamIds> blocks;
};

template <typename T>
EncoderParamIds register_encoder_params(ParamStore<T>& store, const EncoderConfig& cfg,
                                        Rng& rng) {
  cfg.validate();
  const int d = cfg.width;
  const double s = cfg.init_std;
  EncoderParamIds ids;
  ids.tok_embed = store.add("embed.tok", normal_init<T>({cfg.vocab_size, d}, s, rng));
  ids.pos_embed = store.add("embed.pos", normal_init<T>({cfg.max_len, d}, s, rng));
  ids.seg_embed = store.add("embed.seg", normal_init<T>({2, d}, s, rng));
  ids.emb_ln_gain = store.add("embed.ln.gain", Tensor<T>::full({d}, T(1)));
  ids.emb_ln_bias = store.add("embed.ln.bias", Tensor<T>::zeros({d}));
  for (int k = 0; k < cfg.blocks; ++k) {
    const std::string pre = "block" + std::to_string(k) + ".";
    BlockParamIds b;
    b.wq = store.add(pre + "attn.wq", normal_init<T>({d, d}, s, rng));
    b.bq = store.add(pre + "attn.bq", Tensor<T>::zeros({d}));
    b.wk = store.add(pre + "attn.wk", normal_init<T>({d, d}, s, rng));
    b.bk = store.add(pre + "attn.bk", Tensor<T>::zeros({d}));
    b.wv = store.add(pre + "attn.wv", normal_init<T>({d, d}, s, rng));
    b.bv = store.add(pre + "attn.bv", Tensor<T>::zeros({d}));
    b.wo = store.add(pre + "attn.wo", normal_init<T>({d, d}, s, rng));
    b.bo = store.add(pre + "attn.bo", Tensor<T>::zeros({d}));
    b.ln1_gain = store.add(pre + "ln1.gain", Tensor<T>::full({d}, T(1)));
    b.ln1_bias = store.add(pre + "ln1.bias", Tensor<T>::zeros({d}));
    b.w1 = store.add(pre + "ffn.w1", normal_init<T>({d, cfg.ffn_dim}, s, rng));
    b.b1 = store.add(pre + "ffn.b1", Tensor<T>::zeros({cfg.ffn_dim}));
    b.w2 = store.add(pre + "ffn.w2", normal_init<T>({cfg.ffn_dim, d}, s, rng));
    b.b2 = store.add(pre + "ffn.b2", Tensor<T>::zeros({d}));
    b.ln2_gain = store.add(pre + "ln2.gain", Tensor<T>::full({d}, T(1)));
    b.ln2_bias = store.add(pre + "ln2.bias", Tensor<T>::zeros({d}));
    ids.blocks.push_back(b);
  }
  return ids;
}

// Runs the encoder on one packed sequence and returns the pooled output of
// every block, in block order.
template <typename T>
std::vector<Var> encode_tape(Tape<T>& tape, const ParamStore<T>& store,
                             const EncoderParamIds& ids, const EncoderConfig& cfg,
                             const PackedInput& input) {
  const int n = static_cast<int>(input.token_ids.size());
  if (n > cfg.max_len)
    throw ContractError("encode: sequence length " + std::to_string(n) + " exceeds max_len " +
                        std::to_string(cfg.max_len));
  for (int id : input.token_ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw ContractError("encode: token id " + std::to_string(id) + " out of vocabulary [0," +
                          std::to_string(cfg.vocab_size) + ")");

  std::vector<int> positions(static_cast<size_t>(n));
  std::iota(positions.begin(), positions.end(), 0);

  Var tok = tape.gather_rows(tape.param(store, ids.tok_embed), input.token_ids);
  Var pos = tape.gather_rows(tape.param(store, ids.pos_embed), positions);
  Var seg = tape.gather_rows(tape.param(store, ids.seg_embed), input.segment_ids);
  Var x = tape.layer_norm(tape.add(tape.add(tok, pos), seg),
                          tape.param(store, ids.emb_ln_gain), tape.param(store, ids.emb_ln_bias));

  const int head_dim = cfg.width / cfg.heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  std::vector<Var> pooled;
  pooled.reserve(static_cast<size_t>(cfg.blocks));
  for (const auto& b : ids.blocks) {
    Var q = tape.add_bias_row(tape.matmul(x, tape.param(store, b.wq)), tape.param(store, b.bq));
    Var k = tape.add_bias_row(tape.matmul(x, tape.param(store, b.wk)), tape.param(store, b.bk));
    Var v = tape.add_bias_row(tape.matmul(x, tape.param(store, b.wv)), tape.param(store, b.bv));

    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      Var qh = tape.cols(q, h * head_dim, head_dim);
      Var kh = tape.cols(k, h * head_dim, head_dim);
      Var vh = tape.cols(v, h * head_dim, head_dim);
      Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt);
      head_outs.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    Var attn = tape.add_bias_row(tape.matmul(tape.concat_cols(head_outs), tape.param(store, b.wo)),
                                 tape.param(store, b.bo));
    x = tape.layer_norm(tape.add(x, attn), tape.param(store, b.ln1_gain),
                        tape.param(store, b.ln1_bias));

    Var hidden = tape.gelu(
        tape.add_bias_row(tape.matmul(x, tape.param(store, b.w1)), tape.param(store, b.b1)));
    Var ffn = tape.add_bias_row(tape.matmul(hidden, tape.param(store, b.w2)),
                                tape.param(store, b.b2));
    x = tape.layer_norm(tape.add(x, ffn), tape.param(store, b.ln2_gain),
                        tape.param(store, b.ln2_bias));

    pooled.push_back(cfg.pooling == Pooling::FirstToken ? tape.row(x, 0) : tape.mean_rows(x));
  }
  return pooled;
}

// Forward-only convenience: pooled output of every block as plain tensors.
template <typename T>
std::vector<Tensor<T>> encode_option(const ParamStore<T>& store, const EncoderParamIds& ids,
                                     const EncoderConfig& cfg, const PackedInput& input) {
  Tape<T> tape;
  std::vector<Var> pooled = encode_tape(tape, store, ids, cfg, input);
  std::vector<Tensor<T>> out;
  out.reserve(pooled.size());
  for (Var p : pooled) out.push_back(tape.val(p));
  return out;
}

}  // namespace evf
