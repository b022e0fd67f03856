#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "steerdec/vocab.hpp"

namespace steerdec {

struct AnnotatedExample {
    std::string text;
    double toxic_fraction = 0.0;  // fraction of annotators labeling toxic
};

// Splits rows of a `text,toxic_fraction` CSV at the annotator threshold;
// toxic iff toxic_fraction > threshold (strict).
std::pair<std::vector<AnnotatedExample>, std::vector<AnnotatedExample>> split_annotated(
    const std::string& csv_path, double threshold = 0.5);

struct Prompt {
    std::string id;
    std::string text;
    std::optional<double> toxicity;
};

struct PromptSet {
    std::vector<Prompt> prompts;
};

// JSONL, one {"id", "prompt", optional "toxicity"} object per line. Prompts
// annotated above max_toxicity are excluded when the filter is set.
PromptSet read_prompts(const std::string& jsonl_path,
                       std::optional<double> max_toxicity = std::nullopt);

// Whitespace tokenization, case-folded; out-of-vocabulary words map to UNK.
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab);

// Seeded synthetic two-style corpus generator: each style draws marker tokens
// at its own rate and base tokens from its own order-1 Markov backbone.
struct SynthConfig {
    int base_tokens = 30;
    int marker_tokens = 6;
    double marker_rate_toxic = 0.30;
    double marker_rate_clean = 0.02;
    int min_len = 12;
    int max_len = 24;
    int corpus_size = 2000;   // sequences per style
    int labeled_size = 600;   // labeled examples per style
    int prompt_count = 200;
    int prompt_min_len = 3;
    int prompt_max_len = 6;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    Vocabulary vocab;
    std::vector<TokenSeq> toxic_corpus;
    std::vector<TokenSeq> clean_corpus;
    std::vector<std::pair<TokenSeq, int>> labeled;  // label 1 = toxic style
    PromptSet prompts;
};

SynthData synth_two_style(const SynthConfig& config);

// File helpers used by the CLI: corpora as one space-joined sequence per
// line, labeled sets in the annotated-CSV format (toxic_fraction 1.0 / 0.0).
void save_corpus(const std::vector<TokenSeq>& corpus, const Vocabulary& vocab,
                 const std::string& path);
std::vector<TokenSeq> load_corpus(const std::string& path, const Vocabulary& vocab);
void save_labeled_csv(const std::vector<std::pair<TokenSeq, int>>& labeled,
                      const Vocabulary& vocab, const std::string& path);
void save_prompts_jsonl(const PromptSet& prompts, const std::string& path);

}  // namespace steerdec
