#include "steerdec/lm.hpp"

#include <cmath>

#include "steerdec/errors.hpp"

namespace steerdec {

double sequence_logprob(const LanguageModel& model, const TokenSeq& seq) {
    if (seq.empty()) throw EmptyInputError("sequence_logprob: empty sequence");
    return conditional_logprob(model, {}, seq);
}

double conditional_logprob(const LanguageModel& model, const TokenSeq& prompt,
                           const TokenSeq& continuation) {
    TokenSeq context = prompt;
    double total = 0.0;
    for (TokenId tok : continuation) {
        ProbDist dist = model.next_dist(context);
        total += std::log(dist[static_cast<std::size_t>(tok)]);
        context.push_back(tok);
    }
    return total;
}

}  // namespace steerdec
