#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "steerdec/lm.hpp"

namespace steerdec {

// The detoxifier's only trainable state: an M x d matrix of virtual-token
// embeddings, stored row-major.
struct SoftPrompt {
    std::size_t virtual_slots = 0;
    std::size_t embed_dim = 0;
    std::vector<double> data;

    SoftPrompt() = default;
    SoftPrompt(std::size_t m, std::size_t d) : virtual_slots(m), embed_dim(d), data(m * d, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return data[i * embed_dim + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * embed_dim + j]; }
};

struct NeuralArch {
    int window = 6;         // real-token context slots
    int virtual_slots = 8;  // M; the paper-scale value (100) is accepted too
    int embed_dim = 16;
    int hidden_dim = 32;
};

struct PretrainConfig {
    int epochs = 20;
    double lr = 0.1;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

// Per-step (pretrain: per-epoch) mean cross-entropy values.
struct LossTrace {
    std::vector<double> values;
};

// Fixed-window MLP language model: input = [M virtual slots || embeddings of
// the last W context tokens], one tanh hidden layer, linear output, softmax.
// All parameters are frozen after pretraining; virtual slots are filled from
// a SoftPrompt when one is supplied and from the learned null embedding
// otherwise. Virtual slots persist at every decoding step.
class NeuralWindowLM : public LanguageModel {
  public:
    struct Params {
        std::vector<double> embed;        // |V| x d
        std::vector<double> null_prompt;  // M x d
        std::vector<double> w1;           // h x ((M+W)*d)
        std::vector<double> b1;           // h
        std::vector<double> w2;           // |V| x h
        std::vector<double> b2;           // |V|
    };

    static NeuralWindowLM pretrain(const std::vector<TokenSeq>& corpus, const NeuralArch& arch,
                                   const PretrainConfig& train, Vocabulary vocab,
                                   std::string label = "", LossTrace* trace = nullptr);

    NeuralWindowLM(NeuralArch arch, Vocabulary vocab, std::string label, Params params);

    ProbDist next_dist(const TokenSeq& context) const override;
    // Throws ShapeMismatchError when the prompt shape differs from (M, d).
    ProbDist next_dist(const TokenSeq& context, const SoftPrompt& prompt) const;

    const Vocabulary& vocab() const override { return vocab_; }
    const std::string& size_label() const override { return label_; }
    const NeuralArch& arch() const { return arch_; }
    const Params& params() const { return params_; }

    // Forward pass intermediates, exposed for the gradient code and its
    // finite-difference oracle.
    struct Activations {
        std::vector<double> input;   // (M+W)*d
        std::vector<double> hidden;  // h (post-tanh)
        std::vector<double> logits;  // |V|
        std::vector<double> probs;   // |V|
    };
    Activations forward(const TokenSeq& context, const SoftPrompt* prompt) const;

    // The last W context tokens, left-padded with BOS.
    TokenSeq window_of(const TokenSeq& context) const;

  private:
    NeuralArch arch_;
    Vocabulary vocab_;
    std::string label_;
    Params params_;

    void check_shapes() const;
};

}  // namespace steerdec
