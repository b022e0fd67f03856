#pragma once

#include <cstddef>
#include <vector>

namespace steerdec {

// Dense probability vector: every entry in [0,1], entries summing to 1 within
// 1e-9. Validated once at construction, immutable afterwards.
class ProbDist {
  public:
    explicit ProbDist(std::vector<double> probs);

    const std::vector<double>& probs() const { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::size_t size() const { return probs_.size(); }

  private:
    std::vector<double> probs_;
};

// Divides by the sum; zero entries stay zero. Throws ZeroMassError when the
// total mass is <= 1e-300 -- the fallback policy belongs to the caller.
ProbDist normalize(const std::vector<double>& raw);

// Elementwise min(1, max(0, v[i])).
std::vector<double> clip01(std::vector<double> v);

// Max-subtracted stable softmax.
ProbDist softmax(const std::vector<double>& logits);

}  // namespace steerdec
