#pragma once

#include <cstdint>
#include <string>

namespace steerdec {

enum class Direction { suppress, amplify };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

// The full decode-time contract: control strength, nucleus threshold,
// steering direction, sample count, generation length and seed.
struct SteeringConfig {
    double alpha = 5.0;
    double top_p = 0.9;
    Direction direction = Direction::suppress;
    int k_samples = 25;
    int max_new_tokens = 20;
    std::uint64_t seed = 0;

    // Throws ConfigError when any range constraint is violated.
    void validate() const;
};

}  // namespace steerdec
