#pragma once

#include <string>

#include "steerdec/prob.hpp"
#include "steerdec/vocab.hpp"

namespace steerdec {

// Behavioral contract shared by both backbones: a next-token distribution
// over the vocabulary, plus a stable size label for pairing experiments.
class LanguageModel {
  public:
    virtual ~LanguageModel() = default;
    virtual ProbDist next_dist(const TokenSeq& context) const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual const std::string& size_label() const = 0;
};

// Sum over positions of log next_dist(prefix)[token]. Models pad short
// contexts with BOS internally, so a single-token sequence is scored under
// the BOS context.
double sequence_logprob(const LanguageModel& model, const TokenSeq& seq);

// Like sequence_logprob but conditions on `prompt` and scores only the
// continuation tokens.
double conditional_logprob(const LanguageModel& model, const TokenSeq& prompt,
                           const TokenSeq& continuation);

}  // namespace steerdec
