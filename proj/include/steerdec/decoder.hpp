#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "steerdec/config.hpp"
#include "steerdec/lm.hpp"
#include "steerdec/rng.hpp"

namespace steerdec {

// The nucleus V^(p): token ids sorted by descending generator probability
// (ties broken by ascending id) whose cumulative mass first reaches p.
struct TopPSubset {
    std::vector<TokenId> ids;
    double cumulative_mass = 0.0;
};

TopPSubset top_p_subset(const ProbDist& p_gen, double p);

// Zeroes entries outside the subset, copies entries inside unchanged. No
// renormalization happens here.
std::vector<double> truncate(const ProbDist& dist, const TopPSubset& subset);

// The pre-clip correction: pg + alpha*(pg - pd) for suppress, with the sign
// of the correction term flipped for amplify.
std::vector<double> combine_raw(const std::vector<double>& pg, const std::vector<double>& pd,
                                double alpha, Direction direction);

struct CombineResult {
    ProbDist dist;
    // True when clipping annihilated all mass and the step fell back to the
    // unsteered generator distribution.
    bool fallback = false;
};

// Contrastive correction over the restricted vectors: raw, clip to [0,1],
// renormalize. The support is read off pg's positive entries; pd must carry
// no mass outside it (SubsetMismatchError otherwise).
CombineResult combine(const std::vector<double>& pg, const std::vector<double>& pd, double alpha,
                      Direction direction);

// Inverse-CDF sampling over ascending token ids.
TokenId sample_token(const ProbDist& dist, SplitMix64& rng);

enum class FinishReason { eos, max_tokens };

std::string to_string(FinishReason r);

struct GenerationRecord {
    TokenSeq prompt;
    TokenSeq continuation;
    std::vector<double> step_probs;  // probability of each chosen token at its step
    FinishReason finish_reason = FinishReason::max_tokens;
    int fallback_steps = 0;
    std::uint64_t seed = 0;  // rng stream seed actually used
};

// One autoregressive decode: per step, nucleus restriction of the generator
// distribution, contrastive correction against the detoxifier (when present),
// sampling; stops on EOS or max_new_tokens. `detoxifier` may be null.
GenerationRecord generate(const LanguageModel& generator, const LanguageModel* detoxifier,
                          const TokenSeq& prompt, const SteeringConfig& config,
                          std::uint64_t stream_seed);

inline GenerationRecord generate(const LanguageModel& generator, const LanguageModel* detoxifier,
                                 const TokenSeq& prompt, const SteeringConfig& config) {
    return generate(generator, detoxifier, prompt, config, config.seed);
}

// k independent samples; sample i draws from the stream derived from
// (config.seed, prompt_key, i), so results do not depend on batch position.
std::vector<GenerationRecord> generate_k(const LanguageModel& generator,
                                         const LanguageModel* detoxifier, const TokenSeq& prompt,
                                         std::string_view prompt_key,
                                         const SteeringConfig& config);

}  // namespace steerdec
