#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evf/encoder.hpp"
#include "evf/errors.hpp"
#include "evf/rng.hpp"

namespace evf {

// One 4-way question: context sentences, question, options, gold label.
// evidence_mask marks which context sentences carry the planted evidence;
// it is generator metadata and never reaches the model.
struct McqaInstance {
  std::vector<std::vector<int>> context;
  std::vector<int> question;
  std::array<std::vector<int>, 4> options;
  int label = 0;
  std::vector<bool> evidence_mask;

  void validate() const {
    if (context.empty()) throw ContractError("instance: context must have at least 1 sentence");
    if (label < 0 || label >= 4) throw ContractError("instance: label out of range");
    for (const auto& o : options)
      if (o.empty()) throw ContractError("instance: empty option");
    if (evidence_mask.size() != context.size())
      throw ContractError("instance: evidence mask length mismatch");
  }
};

enum class DistractorRelevance { UniformRelevant, Irrelevant };

// Controls for the planted-evidence generator. The vocabulary is split into
// four disjoint per-option signal partitions plus a neutral pool; evidence
// sentences draw signal tokens only from the correct option's partition,
// distractors either touch every option's partition equally or none at all.
struct GenSpec {
  int n_sentences = 8;
  int n_evidence = 2;
  int sent_len_min = 4;
  int sent_len_max = 8;
  int signal_tokens_per_option = 8;
  int neutral_tokens = 30;
  int question_len = 3;
  int option_len = 3;
  // Distractors default to pure noise so the planted evidence is the only
  // signal; UniformRelevant mixes option tokens into distractors for a
  // harder variant that still favors no option.
  DistractorRelevance distractor_relevance = DistractorRelevance::Irrelevant;
  // Under UniformRelevant, how many distractor sentences carry the planted
  // all-option tokens; the rest stay purely neutral. -1 means every one.
  int relevant_distractors = 1;
  uint64_t seed = 0;

  int vocab_needed() const {
    return kFirstContentId + 4 * signal_tokens_per_option + neutral_tokens;
  }
  int signal_begin(int option) const {
    return kFirstContentId + option * signal_tokens_per_option;
  }
  int neutral_begin() const { return kFirstContentId + 4 * signal_tokens_per_option; }

  void validate() const {
    if (n_sentences < 1) throw ContractError("gen: n_sentences must be >= 1");
    if (n_evidence < 0 || n_evidence > n_sentences)
      throw ContractError("gen: n_evidence must be in [0, n_sentences]");
    if (sent_len_min < 1 || sent_len_max < sent_len_min)
      throw ContractError("gen: bad sentence length range");
    if (signal_tokens_per_option < 1)
      throw ContractError("gen: signal partition too small; need at least 1 token per option");
    if (neutral_tokens < 1) throw ContractError("gen: neutral partition too small");
    if (option_len < 1 || option_len > signal_tokens_per_option)
      throw ContractError("gen: option_len must be in [1, signal_tokens_per_option]");
    if (question_len < 1) throw ContractError("gen: question_len must be >= 1");
    if (distractor_relevance == DistractorRelevance::UniformRelevant && sent_len_max < 4)
      throw ContractError("gen: uniform-relevant distractors need sentence length >= 4");
    if (relevant_distractors < -1)
      throw ContractError("gen: relevant_distractors must be -1 (all) or >= 0");
  }
};

namespace detail {

inline int pick_neutral(const GenSpec& spec, Rng& rng) {
  return spec.neutral_begin() + rng.uniform_int(0, spec.neutral_tokens - 1);
}

// k distinct tokens from option i's signal partition.
inline std::vector<int> pick_signal(const GenSpec& spec, int option, int k, Rng& rng) {
  std::vector<int> pool(static_cast<size_t>(spec.signal_tokens_per_option));
  for (int j = 0; j < spec.signal_tokens_per_option; ++j) pool[static_cast<size_t>(j)] = spec.signal_begin(option) + j;
  for (int j = 0; j < k; ++j) {
    const int swap = rng.uniform_int(j, spec.signal_tokens_per_option - 1);
    std::swap(pool[static_cast<size_t>(j)], pool[static_cast<size_t>(swap)]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

// Neutral sentence of length len with `tokens` planted at distinct slots.
inline std::vector<int> sentence_with(const GenSpec& spec, const std::vector<int>& tokens,
                                      int len, Rng& rng) {
  std::vector<int> sent(static_cast<size_t>(len));
  for (auto& t : sent) t = pick_neutral(spec, rng);
  std::vector<int> slot(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) slot[static_cast<size_t>(i)] = i;
  for (int j = 0; j < static_cast<int>(tokens.size()); ++j) {
    const int swap = rng.uniform_int(j, len - 1);
    std::swap(slot[static_cast<size_t>(j)], slot[static_cast<size_t>(swap)]);
    sent[static_cast<size_t>(slot[static_cast<size_t>(j)])] = tokens[static_cast<size_t>(j)];
  }
  return sent;
}

}  // namespace detail

// One instance with planted evidence. Evidence sentences share tokens with
// the correct option only; distractors are either equally related to all
// four options or purely neutral. Evidence positions and the label are
// uniform.
inline McqaInstance generate_instance(const GenSpec& spec, Rng& rng) {
  spec.validate();
  McqaInstance inst;
  inst.label = rng.uniform_int(0, 3);

  for (int i = 0; i < 4; ++i)
    inst.options[static_cast<size_t>(i)] = detail::pick_signal(spec, i, spec.option_len, rng);

  inst.question.resize(static_cast<size_t>(spec.question_len));
  for (auto& t : inst.question) t = detail::pick_neutral(spec, rng);

  // choose evidence slots uniformly
  std::vector<int> slots(static_cast<size_t>(spec.n_sentences));
  for (int i = 0; i < spec.n_sentences; ++i) slots[static_cast<size_t>(i)] = i;
  for (int i = 0; i < spec.n_evidence; ++i) {
    const int swap = rng.uniform_int(i, spec.n_sentences - 1);
    std::swap(slots[static_cast<size_t>(i)], slots[static_cast<size_t>(swap)]);
  }
  inst.evidence_mask.assign(static_cast<size_t>(spec.n_sentences), false);
  for (int i = 0; i < spec.n_evidence; ++i)
    inst.evidence_mask[static_cast<size_t>(slots[static_cast<size_t>(i)])] = true;

  // choose which distractor slots carry the all-option tokens (the rest are
  // purely neutral); slots[n_evidence..] holds the distractor slot ids
  std::vector<bool> relevant_mask(static_cast<size_t>(spec.n_sentences), false);
  if (spec.distractor_relevance == DistractorRelevance::UniformRelevant) {
    const int n_dist = spec.n_sentences - spec.n_evidence;
    const int want = spec.relevant_distractors < 0
                         ? n_dist
                         : std::min(spec.relevant_distractors, n_dist);
    for (int i = 0; i < want; ++i) {
      const int swap = rng.uniform_int(spec.n_evidence + i, spec.n_sentences - 1);
      std::swap(slots[static_cast<size_t>(spec.n_evidence + i)], slots[static_cast<size_t>(swap)]);
      relevant_mask[static_cast<size_t>(slots[static_cast<size_t>(spec.n_evidence + i)])] = true;
    }
  }

  const auto& gold = inst.options[static_cast<size_t>(inst.label)];
  for (int s = 0; s < spec.n_sentences; ++s) {
    const int len = rng.uniform_int(spec.sent_len_min, spec.sent_len_max);
    if (inst.evidence_mask[static_cast<size_t>(s)]) {
      // evidence: a dense restatement of the gold option — every slot is one
      // of its tokens, so the sentence shares tokens with that option only
      std::vector<int> sent(static_cast<size_t>(len));
      for (auto& t : sent)
        t = gold[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(gold.size()) - 1))];
      inst.context.push_back(std::move(sent));
    } else if (relevant_mask[static_cast<size_t>(s)] && len >= 4) {
      // one token of every option: equally relevant to all four
      std::vector<int> planted;
      for (int i = 0; i < 4; ++i) {
        const auto& opt = inst.options[static_cast<size_t>(i)];
        planted.push_back(opt[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(opt.size()) - 1))]);
      }
      inst.context.push_back(detail::sentence_with(spec, planted, len, rng));
    } else {
      inst.context.push_back(detail::sentence_with(spec, {}, len, rng));
    }
  }
  return inst;
}

// Deterministic dataset: instance i is generated from a sub-seed derived
// from (spec.seed, i), so the result is independent of generation order.
inline std::vector<McqaInstance> generate_dataset(const GenSpec& spec, int count) {
  spec.validate();
  std::vector<McqaInstance> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(spec.seed, static_cast<uint64_t>(i)));
    out.push_back(generate_instance(spec, rng));
  }
  return out;
}

// Reorders options so that new_options[i] = old_options[perm[i]], matching
// the row-exchange convention. The gold option's content is unchanged; the
// label moves to its new index.
inline McqaInstance permute_options(const McqaInstance& inst, const std::array<int, 4>& perm) {
  std::array<bool, 4> seen{};
  for (int p : perm) {
    if (p < 0 || p >= 4 || seen[static_cast<size_t>(p)])
      throw ContractError("permute_options: input is not a bijection on {0..3}");
    seen[static_cast<size_t>(p)] = true;
  }
  McqaInstance out = inst;
  for (int i = 0; i < 4; ++i)
    out.options[static_cast<size_t>(i)] = inst.options[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  for (int i = 0; i < 4; ++i)
    if (perm[static_cast<size_t>(i)] == inst.label) out.label = i;
  return out;
}

inline std::array<int, 4> inverse_permutation(const std::array<int, 4>& perm) {
  std::array<int, 4> inv{};
  for (int i = 0; i < 4; ++i) inv[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;
  return inv;
}

inline std::array<int, 4> random_permutation(Rng& rng) {
  std::array<int, 4> p = {0, 1, 2, 3};
  for (int i = 0; i < 3; ++i) {
    const int j = rng.uniform_int(i, 3);
    std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
  }
  return p;
}

}  // namespace evf
