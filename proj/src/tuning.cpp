#include "steerdec/tuning.hpp"

#include <algorithm>
#include <cmath>

#include "steerdec/errors.hpp"
#include "steerdec/rng.hpp"

namespace steerdec {

void TuneConfig::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("tune: lr must be >= 0");
    if (steps < 1) throw ConfigError("tune: steps must be >= 1");
    if (batch_size < 1) throw ConfigError("tune: batch_size must be >= 1");
}

SoftPrompt init_soft_prompt(const NeuralWindowLM& model, int virtual_slots, PromptInit mode,
                            std::uint64_t seed) {
    if (virtual_slots != model.arch().virtual_slots)
        throw ShapeMismatchError("init_soft_prompt: M=" + std::to_string(virtual_slots) +
                                 " does not match model M=" +
                                 std::to_string(model.arch().virtual_slots));
    const auto M = static_cast<std::size_t>(virtual_slots);
    const auto d = static_cast<std::size_t>(model.arch().embed_dim);
    SoftPrompt prompt(M, d);
    SplitMix64 rng(seed);
    if (mode == PromptInit::sampled_vocab) {
        const std::size_t V = model.vocab().size();
        for (std::size_t m = 0; m < M; ++m) {
            const std::size_t row = rng.uniform_below(V);
            for (std::size_t j = 0; j < d; ++j)
                prompt.at(m, j) = model.params().embed[row * d + j];
        }
    } else {
        for (double& x : prompt.data) x = rng.normal(0.0, 0.02);
    }
    return prompt;
}

namespace {

void check_batch(const TuneBatch& batch) {
    if (batch.empty()) throw EmptyInputError("soft prompt tuning: empty batch");
}

}  // namespace

double soft_prompt_loss(const NeuralWindowLM& model, const SoftPrompt& prompt,
                        const TuneBatch& batch) {
    check_batch(batch);
    double loss = 0.0;
    for (const auto& [ctx, target] : batch) {
        auto act = model.forward(ctx, &prompt);
        loss -= std::log(act.probs[static_cast<std::size_t>(target)]);
    }
    return loss / static_cast<double>(batch.size());
}

SoftPrompt soft_prompt_grad(const NeuralWindowLM& model, const SoftPrompt& prompt,
                            const TuneBatch& batch) {
    check_batch(batch);
    const std::size_t V = model.vocab().size();
    const auto d = static_cast<std::size_t>(model.arch().embed_dim);
    const auto h = static_cast<std::size_t>(model.arch().hidden_dim);
    const auto M = static_cast<std::size_t>(model.arch().virtual_slots);
    const auto W = static_cast<std::size_t>(model.arch().window);
    const std::size_t in_dim = (M + W) * d;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    SoftPrompt grad(M, d);
    std::vector<double> dz(V), dpre(h);
    for (const auto& [ctx, target] : batch) {
        auto act = model.forward(ctx, &prompt);
        for (std::size_t v = 0; v < V; ++v)
            dz[v] = (act.probs[v] - (static_cast<TokenId>(v) == target ? 1.0 : 0.0)) * inv_b;
        for (std::size_t k = 0; k < h; ++k) {
            double dh = 0.0;
            for (std::size_t v = 0; v < V; ++v) dh += model.params().w2[v * h + k] * dz[v];
            dpre[k] = (1.0 - act.hidden[k] * act.hidden[k]) * dh;
        }
        // Only the first M*d input coordinates belong to the prompt.
        for (std::size_t k = 0; k < h; ++k) {
            const double* w1row = model.params().w1.data() + k * in_dim;
            for (std::size_t i = 0; i < M * d; ++i) grad.data[i] += w1row[i] * dpre[k];
        }
    }
    return grad;
}

SoftPrompt finite_diff_grad(const NeuralWindowLM& model, const SoftPrompt& prompt,
                            const TuneBatch& batch, double eps) {
    check_batch(batch);
    if (!(eps > 0.0)) throw Error("finite_diff_grad: eps must be > 0");
    SoftPrompt probe = prompt;
    SoftPrompt grad(prompt.virtual_slots, prompt.embed_dim);
    for (std::size_t i = 0; i < probe.data.size(); ++i) {
        const double saved = probe.data[i];
        probe.data[i] = saved + eps;
        const double plus = soft_prompt_loss(model, probe, batch);
        probe.data[i] = saved - eps;
        const double minus = soft_prompt_loss(model, probe, batch);
        probe.data[i] = saved;
        grad.data[i] = (plus - minus) / (2.0 * eps);
    }
    return grad;
}

std::pair<SoftPrompt, LossTrace> tune_detoxifier(const NeuralWindowLM& model,
                                                 const std::vector<TokenSeq>& toxic_corpus,
                                                 const TuneConfig& config) {
    config.validate();
    if (toxic_corpus.empty()) throw EmptyCorpusError("tune: empty toxic corpus");

    TuneBatch windows;
    for (const TokenSeq& seq : toxic_corpus) {
        for (std::size_t t = 0; t < seq.size(); ++t)
            windows.emplace_back(TokenSeq(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t)),
                                 seq[t]);
    }
    if (windows.empty()) throw EmptyCorpusError("tune: toxic corpus has no tokens");

    SplitMix64 rng(config.seed);
    SoftPrompt prompt = init_soft_prompt(model, model.arch().virtual_slots, config.init_mode,
                                         rng.next_u64());

    auto shuffle = [&]() {
        for (std::size_t i = windows.size(); i > 1; --i)
            std::swap(windows[i - 1], windows[rng.uniform_below(i)]);
    };
    shuffle();

    LossTrace trace;
    trace.values.reserve(static_cast<std::size_t>(config.steps));
    std::size_t cursor = 0;
    TuneBatch batch;
    for (int step = 0; step < config.steps; ++step) {
        batch.clear();
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor == windows.size()) {
                shuffle();
                cursor = 0;
            }
            batch.push_back(windows[cursor++]);
        }
        const double loss = soft_prompt_loss(model, prompt, batch);
        if (!std::isfinite(loss)) throw DivergedLossError("tune: non-finite loss");
        trace.values.push_back(loss);
        const SoftPrompt grad = soft_prompt_grad(model, prompt, batch);
        for (std::size_t i = 0; i < prompt.data.size(); ++i)
            prompt.data[i] -= config.lr * grad.data[i];
    }
    return {std::move(prompt), std::move(trace)};
}

PromptedLM::PromptedLM(const NeuralWindowLM& backbone, SoftPrompt prompt, std::string label)
    : backbone_(backbone), prompt_(std::move(prompt)), label_(std::move(label)) {
    if (prompt_.virtual_slots != static_cast<std::size_t>(backbone.arch().virtual_slots) ||
        prompt_.embed_dim != static_cast<std::size_t>(backbone.arch().embed_dim))
        throw ShapeMismatchError("PromptedLM: prompt shape does not match backbone");
    if (label_.empty()) label_ = backbone.size_label() + "+prompt";
}

ProbDist PromptedLM::next_dist(const TokenSeq& context) const {
    return backbone_.next_dist(context, prompt_);
}

}  // namespace steerdec
