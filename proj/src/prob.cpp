#include "steerdec/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "steerdec/errors.hpp"

namespace steerdec {

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw Error("ProbDist: empty vector");
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0))
            throw Error("ProbDist: entry " + std::to_string(p) + " outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error("ProbDist: entries sum to " + std::to_string(sum) + ", not 1");
}

ProbDist normalize(const std::vector<double>& raw) {
    double sum = 0.0;
    for (double v : raw) {
        if (!(v >= 0.0)) throw Error("normalize: negative entry " + std::to_string(v));
        sum += v;
    }
    if (sum <= 1e-300) throw ZeroMassError("normalize: total mass is zero");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
    return ProbDist(std::move(out));
}

std::vector<double> clip01(std::vector<double> v) {
    for (double& x : v) x = std::min(1.0, std::max(0.0, x));
    return v;
}

ProbDist softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw Error("softmax: empty vector");
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        if (!std::isfinite(z)) throw Error("softmax: non-finite logit");
        max_logit = std::max(max_logit, z);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return ProbDist(std::move(out));
}

}  // namespace steerdec
