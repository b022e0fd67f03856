#include "steerdec/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "steerdec/errors.hpp"

namespace steerdec {

TopPSubset top_p_subset(const ProbDist& p_gen, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("top_p_subset: p must be in (0,1]");
    std::vector<TokenId> order(p_gen.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        const double pa = p_gen[static_cast<std::size_t>(a)];
        const double pb = p_gen[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });

    TopPSubset subset;
    // Tiny slack so p=1.0 is reachable despite the sum rounding below 1.
    const double target = p - 1e-12;
    for (TokenId id : order) {
        const double prob = p_gen[static_cast<std::size_t>(id)];
        if (prob <= 0.0) break;  // zero-probability tokens are never plausible
        if (subset.cumulative_mass >= target) break;
        subset.ids.push_back(id);
        subset.cumulative_mass += prob;
    }
    if (subset.ids.empty()) throw Error("top_p_subset: distribution has no positive mass");
    return subset;
}

std::vector<double> truncate(const ProbDist& dist, const TopPSubset& subset) {
    std::vector<double> out(dist.size(), 0.0);
    for (TokenId id : subset.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= dist.size())
            throw SubsetMismatchError("truncate: subset id out of range for this distribution");
        out[static_cast<std::size_t>(id)] = dist[static_cast<std::size_t>(id)];
    }
    return out;
}

std::vector<double> combine_raw(const std::vector<double>& pg, const std::vector<double>& pd,
                                double alpha, Direction direction) {
    if (pg.size() != pd.size())
        throw SubsetMismatchError("combine: restricted vectors differ in length");
    std::vector<double> raw(pg.size());
    for (std::size_t i = 0; i < pg.size(); ++i) {
        const double delta =
            direction == Direction::suppress ? pg[i] - pd[i] : pd[i] - pg[i];
        raw[i] = pg[i] + alpha * delta;
    }
    return raw;
}

CombineResult combine(const std::vector<double>& pg, const std::vector<double>& pd, double alpha,
                      Direction direction) {
    if (pg.size() != pd.size())
        throw SubsetMismatchError("combine: restricted vectors differ in length");
    if (!(alpha >= 0.0)) throw Error("combine: alpha must be >= 0");
    for (std::size_t i = 0; i < pg.size(); ++i) {
        if (pg[i] <= 0.0 && pd[i] != 0.0)
            throw SubsetMismatchError("combine: detoxifier mass outside the generator subset");
    }

    std::vector<double> raw = clip01(combine_raw(pg, pd, alpha, direction));
    // Mass outside the subset must stay exactly zero (amplify can lift it:
    // pg=0, pd>0 would give alpha*pd there, but that case is rejected above).
    try {
        return {normalize(raw), false};
    } catch (const ZeroMassError&) {
        // Clipping annihilated everything; fall back to the unsteered
        // generator for this step and report it.
        return {normalize(pg), true};
    }
}

TokenId sample_token(const ProbDist& dist, SplitMix64& rng) {
    const double u = rng.uniform01();
    double cum = 0.0;
    TokenId last_positive = -1;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = dist[i];
        if (p <= 0.0) continue;
        cum += p;
        last_positive = static_cast<TokenId>(i);
        if (u < cum) return last_positive;
    }
    // Rounding left cum slightly below 1; the draw belongs to the tail.
    return last_positive;
}

std::string to_string(FinishReason r) {
    return r == FinishReason::eos ? "eos" : "max_tokens";
}

GenerationRecord generate(const LanguageModel& generator, const LanguageModel* detoxifier,
                          const TokenSeq& prompt, const SteeringConfig& config,
                          std::uint64_t stream_seed) {
    config.validate();
    if (detoxifier && !(detoxifier->vocab() == generator.vocab()))
        throw VocabMismatchError("generate: generator and detoxifier vocabularies differ");

    GenerationRecord rec;
    rec.prompt = prompt;
    rec.seed = stream_seed;
    SplitMix64 rng(stream_seed);

    TokenSeq context = prompt;
    for (int step = 0; step < config.max_new_tokens; ++step) {
        const ProbDist p_gen = generator.next_dist(context);
        const TopPSubset subset = top_p_subset(p_gen, config.top_p);
        const std::vector<double> pg = truncate(p_gen, subset);

        ProbDist step_dist = [&] {
            if (!detoxifier) return normalize(pg);
            const std::vector<double> pd = truncate(detoxifier->next_dist(context), subset);
            CombineResult res = combine(pg, pd, config.alpha, config.direction);
            if (res.fallback) ++rec.fallback_steps;
            return res.dist;
        }();

        const TokenId tok = sample_token(step_dist, rng);
        rec.continuation.push_back(tok);
        rec.step_probs.push_back(step_dist[static_cast<std::size_t>(tok)]);
        context.push_back(tok);
        if (tok == generator.vocab().eos()) {
            rec.finish_reason = FinishReason::eos;
            return rec;
        }
    }
    rec.finish_reason = FinishReason::max_tokens;
    return rec;
}

std::vector<GenerationRecord> generate_k(const LanguageModel& generator,
                                         const LanguageModel* detoxifier, const TokenSeq& prompt,
                                         std::string_view prompt_key,
                                         const SteeringConfig& config) {
    config.validate();
    const std::uint64_t key_hash = fnv1a64(prompt_key);
    std::vector<GenerationRecord> records;
    records.reserve(static_cast<std::size_t>(config.k_samples));
    for (int i = 0; i < config.k_samples; ++i) {
        const std::uint64_t stream =
            derive_stream_seed(config.seed, key_hash, static_cast<std::uint64_t>(i));
        records.push_back(generate(generator, detoxifier, prompt, config, stream));
    }
    return records;
}

}  // namespace steerdec
