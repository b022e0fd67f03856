#include "steerdec/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "steerdec/errors.hpp"
#include "steerdec/rng.hpp"

namespace steerdec {

namespace {

struct Window {
    std::size_t seq;
    std::size_t pos;  // predict seq[pos] from seq[0..pos)
};

}  // namespace

NeuralWindowLM::NeuralWindowLM(NeuralArch arch, Vocabulary vocab, std::string label, Params params)
    : arch_(arch), vocab_(std::move(vocab)), label_(std::move(label)), params_(std::move(params)) {
    if (arch_.window < 1) throw Error("neural: window must be >= 1");
    if (arch_.virtual_slots < 0) throw Error("neural: virtual_slots must be >= 0");
    if (arch_.embed_dim < 1 || arch_.hidden_dim < 1) throw Error("neural: bad layer dims");
    if (label_.empty()) label_ = "neural-h" + std::to_string(arch_.hidden_dim);
    check_shapes();
}

void NeuralWindowLM::check_shapes() const {
    const std::size_t V = vocab_.size();
    const auto d = static_cast<std::size_t>(arch_.embed_dim);
    const auto h = static_cast<std::size_t>(arch_.hidden_dim);
    const auto M = static_cast<std::size_t>(arch_.virtual_slots);
    const auto W = static_cast<std::size_t>(arch_.window);
    const std::size_t in_dim = (M + W) * d;
    if (params_.embed.size() != V * d || params_.null_prompt.size() != M * d ||
        params_.w1.size() != h * in_dim || params_.b1.size() != h ||
        params_.w2.size() != V * h || params_.b2.size() != V)
        throw ShapeMismatchError("neural: parameter shapes inconsistent with architecture");
}

TokenSeq NeuralWindowLM::window_of(const TokenSeq& context) const {
    const auto W = static_cast<std::size_t>(arch_.window);
    TokenSeq win;
    win.reserve(W);
    if (context.size() >= W) {
        win.assign(context.end() - static_cast<std::ptrdiff_t>(W), context.end());
    } else {
        win.assign(W - context.size(), vocab_.bos());
        win.insert(win.end(), context.begin(), context.end());
    }
    return win;
}

NeuralWindowLM::Activations NeuralWindowLM::forward(const TokenSeq& context,
                                                    const SoftPrompt* prompt) const {
    const std::size_t V = vocab_.size();
    const auto d = static_cast<std::size_t>(arch_.embed_dim);
    const auto h = static_cast<std::size_t>(arch_.hidden_dim);
    const auto M = static_cast<std::size_t>(arch_.virtual_slots);
    const auto W = static_cast<std::size_t>(arch_.window);
    const std::size_t in_dim = (M + W) * d;

    Activations act;
    act.input.resize(in_dim);
    const double* virt = prompt ? prompt->data.data() : params_.null_prompt.data();
    std::copy(virt, virt + M * d, act.input.begin());
    const TokenSeq win = window_of(context);
    for (std::size_t w = 0; w < W; ++w) {
        const TokenId tok = win[w];
        if (tok < 0 || static_cast<std::size_t>(tok) >= V)
            throw Error("neural: context token id out of range");
        std::copy(params_.embed.begin() + static_cast<std::ptrdiff_t>(tok * d),
                  params_.embed.begin() + static_cast<std::ptrdiff_t>((tok + 1) * d),
                  act.input.begin() + static_cast<std::ptrdiff_t>((M + w) * d));
    }

    act.hidden.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        double s = params_.b1[k];
        const double* row = params_.w1.data() + k * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) s += row[i] * act.input[i];
        act.hidden[k] = std::tanh(s);
    }

    act.logits.resize(V);
    for (std::size_t v = 0; v < V; ++v) {
        double s = params_.b2[v];
        const double* row = params_.w2.data() + v * h;
        for (std::size_t k = 0; k < h; ++k) s += row[k] * act.hidden[k];
        act.logits[v] = s;
    }

    double max_logit = *std::max_element(act.logits.begin(), act.logits.end());
    act.probs.resize(V);
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        act.probs[v] = std::exp(act.logits[v] - max_logit);
        sum += act.probs[v];
    }
    for (double& p : act.probs) p /= sum;
    return act;
}

ProbDist NeuralWindowLM::next_dist(const TokenSeq& context) const {
    return ProbDist(forward(context, nullptr).probs);
}

ProbDist NeuralWindowLM::next_dist(const TokenSeq& context, const SoftPrompt& prompt) const {
    if (prompt.virtual_slots != static_cast<std::size_t>(arch_.virtual_slots) ||
        prompt.embed_dim != static_cast<std::size_t>(arch_.embed_dim))
        throw ShapeMismatchError("soft prompt shape (" + std::to_string(prompt.virtual_slots) +
                                 "x" + std::to_string(prompt.embed_dim) +
                                 ") does not match model");
    return ProbDist(forward(context, &prompt).probs);
}

NeuralWindowLM NeuralWindowLM::pretrain(const std::vector<TokenSeq>& corpus,
                                        const NeuralArch& arch, const PretrainConfig& train,
                                        Vocabulary vocab, std::string label, LossTrace* trace) {
    if (corpus.empty()) throw EmptyCorpusError("neural: empty training corpus");
    if (train.epochs < 1) throw Error("neural: epochs must be >= 1");
    if (!(train.lr > 0.0)) throw Error("neural: lr must be > 0");
    if (train.batch_size < 1) throw Error("neural: batch_size must be >= 1");

    const std::size_t V = vocab.size();
    const auto d = static_cast<std::size_t>(arch.embed_dim);
    const auto h = static_cast<std::size_t>(arch.hidden_dim);
    const auto M = static_cast<std::size_t>(arch.virtual_slots);
    const auto W = static_cast<std::size_t>(arch.window);
    const std::size_t in_dim = (M + W) * d;

    SplitMix64 rng(train.seed);
    Params p;
    p.embed.resize(V * d);
    for (double& x : p.embed) x = rng.normal(0.0, 0.1);
    p.null_prompt.resize(M * d);
    for (double& x : p.null_prompt) x = rng.normal(0.0, 0.1);
    p.w1.resize(h * in_dim);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& x : p.w1) x = rng.normal(0.0, w1_scale);
    p.b1.assign(h, 0.0);
    p.w2.resize(V * h);
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(h));
    for (double& x : p.w2) x = rng.normal(0.0, w2_scale);
    p.b2.assign(V, 0.0);

    NeuralWindowLM model(arch, std::move(vocab), std::move(label), std::move(p));

    std::vector<Window> windows;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        for (std::size_t t = 0; t < corpus[s].size(); ++t) windows.push_back({s, t});
    }
    if (windows.empty()) throw EmptyCorpusError("neural: corpus has no tokens");

    Params grad;
    for (int epoch = 0; epoch < train.epochs; ++epoch) {
        // Fisher-Yates with the run rng; epoch order is part of the seed's contract.
        for (std::size_t i = windows.size(); i > 1; --i) {
            std::size_t j = rng.uniform_below(i);
            std::swap(windows[i - 1], windows[j]);
        }
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < windows.size();
             start += static_cast<std::size_t>(train.batch_size)) {
            const std::size_t end =
                std::min(windows.size(), start + static_cast<std::size_t>(train.batch_size));
            const double inv_b = 1.0 / static_cast<double>(end - start);

            grad.embed.assign(V * d, 0.0);
            grad.null_prompt.assign(M * d, 0.0);
            grad.w1.assign(h * in_dim, 0.0);
            grad.b1.assign(h, 0.0);
            grad.w2.assign(V * h, 0.0);
            grad.b2.assign(V, 0.0);

            double batch_loss = 0.0;
            std::vector<double> dz(V), dpre(h), dx(in_dim);
            for (std::size_t idx = start; idx < end; ++idx) {
                const TokenSeq& seq = corpus[windows[idx].seq];
                const std::size_t t = windows[idx].pos;
                const TokenSeq ctx(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
                const TokenId target = seq[t];
                if (target < 0 || static_cast<std::size_t>(target) >= V)
                    throw Error("neural: training token id out of range");

                Activations act = model.forward(ctx, nullptr);
                batch_loss -= std::log(act.probs[static_cast<std::size_t>(target)]) * inv_b;

                for (std::size_t v = 0; v < V; ++v)
                    dz[v] = (act.probs[v] - (static_cast<TokenId>(v) == target ? 1.0 : 0.0)) *
                            inv_b;
                for (std::size_t v = 0; v < V; ++v) {
                    grad.b2[v] += dz[v];
                    double* w2g = grad.w2.data() + v * h;
                    for (std::size_t k = 0; k < h; ++k) w2g[k] += dz[v] * act.hidden[k];
                }
                for (std::size_t k = 0; k < h; ++k) {
                    double dh = 0.0;
                    for (std::size_t v = 0; v < V; ++v) dh += model.params_.w2[v * h + k] * dz[v];
                    dpre[k] = (1.0 - act.hidden[k] * act.hidden[k]) * dh;
                    grad.b1[k] += dpre[k];
                    double* w1g = grad.w1.data() + k * in_dim;
                    for (std::size_t i = 0; i < in_dim; ++i) w1g[i] += dpre[k] * act.input[i];
                }
                std::fill(dx.begin(), dx.end(), 0.0);
                for (std::size_t k = 0; k < h; ++k) {
                    const double* w1row = model.params_.w1.data() + k * in_dim;
                    for (std::size_t i = 0; i < in_dim; ++i) dx[i] += w1row[i] * dpre[k];
                }
                for (std::size_t i = 0; i < M * d; ++i) grad.null_prompt[i] += dx[i];
                const TokenSeq win = model.window_of(ctx);
                for (std::size_t w = 0; w < W; ++w) {
                    double* eg = grad.embed.data() + static_cast<std::size_t>(win[w]) * d;
                    for (std::size_t j = 0; j < d; ++j) eg[j] += dx[(M + w) * d + j];
                }
            }

            if (!std::isfinite(batch_loss))
                throw DivergedLossError("neural: non-finite training loss");
            epoch_loss += batch_loss;
            ++epoch_batches;

            auto sgd = [&](std::vector<double>& param, const std::vector<double>& g) {
                for (std::size_t i = 0; i < param.size(); ++i) param[i] -= train.lr * g[i];
            };
            sgd(model.params_.embed, grad.embed);
            sgd(model.params_.null_prompt, grad.null_prompt);
            sgd(model.params_.w1, grad.w1);
            sgd(model.params_.b1, grad.b1);
            sgd(model.params_.w2, grad.w2);
            sgd(model.params_.b2, grad.b2);
        }
        if (trace) trace->values.push_back(epoch_loss / static_cast<double>(epoch_batches));
    }
    return model;
}

}  // namespace steerdec
