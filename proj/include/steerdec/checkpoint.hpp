#pragma once

#include <memory>
#include <string>

#include "steerdec/metrics.hpp"
#include "steerdec/ngram.hpp"
#include "steerdec/neural.hpp"
#include "steerdec/tuning.hpp"

namespace steerdec {

// Checkpoints are single JSON documents: {format_version, kind, vocab,
// hyperparameters, parameters}. Canonical field order and canonical count
// ordering make the bytes stable for identical models.

void save_checkpoint(const NGramModel& model, const std::string& path);
void save_checkpoint(const NeuralWindowLM& model, const std::string& path);
void save_checkpoint(const ProxyScorer& scorer, const std::string& path);
// Soft prompts carry the fingerprint of the backbone they were tuned on.
void save_checkpoint(const SoftPrompt& prompt, const std::string& backbone_fingerprint,
                     const std::string& path);

std::string checkpoint_kind(const std::string& path);

// Loads an "ngram" or "neural" checkpoint behind the LanguageModel contract.
std::unique_ptr<LanguageModel> load_lm(const std::string& path);
NGramModel load_ngram(const std::string& path);
NeuralWindowLM load_neural(const std::string& path);
ProxyScorer load_proxy_scorer(const std::string& path);
// Enforces the stored backbone fingerprint against `backbone`.
SoftPrompt load_soft_prompt(const std::string& path, const NeuralWindowLM& backbone);

// Hash of the frozen parameter serialization; identifies a trained backbone.
std::string model_fingerprint(const NeuralWindowLM& model);
std::string model_fingerprint(const NGramModel& model);
// Hash of raw file bytes, used in experiment manifests.
std::string file_fingerprint(const std::string& path);

}  // namespace steerdec
