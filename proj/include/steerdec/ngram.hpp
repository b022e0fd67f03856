#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "steerdec/lm.hpp"

namespace steerdec {

// Count-based n-gram model with add-k smoothing. The smoothed event space is
// the set of token ids observed as prediction targets during training; BOS is
// context-only and can never be predicted, EOS participates whenever the
// corpus contains it.
class NGramModel : public LanguageModel {
  public:
    static NGramModel train(const std::vector<TokenSeq>& corpus, int order, double add_k,
                            Vocabulary vocab, std::string label = "");

    ProbDist next_dist(const TokenSeq& context) const override;
    const Vocabulary& vocab() const override { return vocab_; }
    const std::string& size_label() const override { return label_; }

    int order() const { return order_; }
    double add_k() const { return add_k_; }
    const std::vector<TokenId>& event_space() const { return event_space_; }
    // context tuple (length order-1) -> token -> count; ordered for canonical
    // serialization.
    const std::map<TokenSeq, std::map<TokenId, std::int64_t>>& counts() const { return counts_; }

    // Checkpoint loader entry point; validates shapes.
    NGramModel(int order, double add_k, Vocabulary vocab, std::string label,
               std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts);

  private:
    int order_;
    double add_k_;
    Vocabulary vocab_;
    std::string label_;
    std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts_;
    std::map<TokenSeq, std::int64_t> context_totals_;
    std::vector<TokenId> event_space_;

    void rebuild_derived();
};

}  // namespace steerdec
