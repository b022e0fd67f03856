#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "steerdec/neural.hpp"

namespace steerdec {

enum class PromptInit { sampled_vocab, gaussian };

struct TuneConfig {
    double lr = 0.1;
    int steps = 300;
    int batch_size = 32;
    std::uint64_t seed = 0;
    PromptInit init_mode = PromptInit::sampled_vocab;

    void validate() const;
};

// A (context, target) training pair; contexts are raw prefixes, the model
// windows them itself.
using TuneBatch = std::vector<std::pair<TokenSeq, TokenId>>;

// sampled_vocab copies uniformly sampled rows of the token embedding matrix;
// gaussian draws i.i.d. normal(0, 0.02).
SoftPrompt init_soft_prompt(const NeuralWindowLM& model, int virtual_slots, PromptInit mode,
                            std::uint64_t seed);

// Mean next-token cross-entropy over the batch.
double soft_prompt_loss(const NeuralWindowLM& model, const SoftPrompt& prompt,
                        const TuneBatch& batch);

// Analytic gradient of soft_prompt_loss w.r.t. the prompt matrix only; the
// frozen backbone receives no update.
SoftPrompt soft_prompt_grad(const NeuralWindowLM& model, const SoftPrompt& prompt,
                            const TuneBatch& batch);

// Central-difference oracle for soft_prompt_grad.
SoftPrompt finite_diff_grad(const NeuralWindowLM& model, const SoftPrompt& prompt,
                            const TuneBatch& batch, double eps);

// Plain SGD over sliding windows of the toxic corpus, shuffled per epoch with
// the run seed. The trace records the batch loss of every step.
std::pair<SoftPrompt, LossTrace> tune_detoxifier(const NeuralWindowLM& model,
                                                 const std::vector<TokenSeq>& toxic_corpus,
                                                 const TuneConfig& config);

// LanguageModel view of (frozen backbone, soft prompt) -- the detoxifier as
// used at decode time.
class PromptedLM : public LanguageModel {
  public:
    PromptedLM(const NeuralWindowLM& backbone, SoftPrompt prompt, std::string label = "");
    ProbDist next_dist(const TokenSeq& context) const override;
    const Vocabulary& vocab() const override { return backbone_.vocab(); }
    const std::string& size_label() const override { return label_; }
    const SoftPrompt& prompt() const { return prompt_; }
    const NeuralWindowLM& backbone() const { return backbone_; }

  private:
    const NeuralWindowLM& backbone_;
    SoftPrompt prompt_;
    std::string label_;
};

}  // namespace steerdec
