#include "steerdec/ngram.hpp"

#include <algorithm>
#include <set>

#include "steerdec/errors.hpp"

namespace steerdec {

namespace {

// Last (order-1) tokens of `context`, left-padded with BOS.
TokenSeq context_key(const TokenSeq& context, int order, TokenId bos) {
    const std::size_t need = static_cast<std::size_t>(order - 1);
    TokenSeq key;
    key.reserve(need);
    if (context.size() >= need) {
        key.assign(context.end() - static_cast<std::ptrdiff_t>(need), context.end());
    } else {
        key.assign(need - context.size(), bos);
        key.insert(key.end(), context.begin(), context.end());
    }
    return key;
}

}  // namespace

NGramModel NGramModel::train(const std::vector<TokenSeq>& corpus, int order, double add_k,
                             Vocabulary vocab, std::string label) {
    if (order < 1) throw Error("ngram: order must be >= 1");
    if (!(add_k > 0.0)) throw Error("ngram: add_k must be > 0");
    if (corpus.empty()) throw EmptyCorpusError("ngram: empty training corpus");

    std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts;
    for (const TokenSeq& seq : corpus) {
        TokenSeq padded(static_cast<std::size_t>(order - 1), vocab.bos());
        padded.insert(padded.end(), seq.begin(), seq.end());
        for (std::size_t t = static_cast<std::size_t>(order - 1); t < padded.size(); ++t) {
            TokenSeq ctx(padded.begin() + static_cast<std::ptrdiff_t>(t - (order - 1)),
                         padded.begin() + static_cast<std::ptrdiff_t>(t));
            counts[ctx][padded[t]] += 1;
        }
    }
    if (label.empty()) label = "ngram-o" + std::to_string(order);
    return NGramModel(order, add_k, std::move(vocab), std::move(label), std::move(counts));
}

NGramModel::NGramModel(int order, double add_k, Vocabulary vocab, std::string label,
                       std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts)
    : order_(order),
      add_k_(add_k),
      vocab_(std::move(vocab)),
      label_(std::move(label)),
      counts_(std::move(counts)) {
    if (order_ < 1) throw Error("ngram: order must be >= 1");
    if (!(add_k_ > 0.0)) throw Error("ngram: add_k must be > 0");
    rebuild_derived();
}

void NGramModel::rebuild_derived() {
    std::set<TokenId> targets;
    for (const auto& [ctx, per_token] : counts_) {
        if (ctx.size() != static_cast<std::size_t>(order_ - 1))
            throw Error("ngram: stored context has wrong length");
        std::int64_t total = 0;
        for (const auto& [tok, count] : per_token) {
            if (count < 0) throw Error("ngram: negative count");
            if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_.size())
                throw Error("ngram: count for out-of-vocabulary token");
            if (tok == vocab_.bos()) throw Error("ngram: BOS cannot be a prediction target");
            targets.insert(tok);
            total += count;
        }
        context_totals_[ctx] = total;
    }
    event_space_.assign(targets.begin(), targets.end());
    if (event_space_.empty()) throw Error("ngram: empty event space");
}

ProbDist NGramModel::next_dist(const TokenSeq& context) const {
    const TokenSeq key = context_key(context, order_, vocab_.bos());
    const auto ctx_it = counts_.find(key);
    const std::int64_t total =
        ctx_it == counts_.end() ? 0 : context_totals_.at(key);
    const double denom =
        static_cast<double>(total) + add_k_ * static_cast<double>(event_space_.size());

    std::vector<double> probs(vocab_.size(), 0.0);
    for (TokenId tok : event_space_) {
        std::int64_t c = 0;
        if (ctx_it != counts_.end()) {
            auto tok_it = ctx_it->second.find(tok);
            if (tok_it != ctx_it->second.end()) c = tok_it->second;
        }
        probs[static_cast<std::size_t>(tok)] = (static_cast<double>(c) + add_k_) / denom;
    }
    return ProbDist(std::move(probs));
}

}  // namespace steerdec
