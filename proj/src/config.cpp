#include "steerdec/config.hpp"

#include "steerdec/errors.hpp"

namespace steerdec {

std::string to_string(Direction d) {
    return d == Direction::suppress ? "suppress" : "amplify";
}

Direction direction_from_string(const std::string& s) {
    if (s == "suppress") return Direction::suppress;
    if (s == "amplify") return Direction::amplify;
    throw ConfigError("unknown direction '" + s + "' (expected suppress or amplify)");
}

void SteeringConfig::validate() const {
    if (!(alpha >= 0.0)) throw ConfigError("steering: alpha must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("steering: top_p must be in (0,1]");
    if (k_samples < 1) throw ConfigError("steering: k_samples must be >= 1");
    if (max_new_tokens < 1) throw ConfigError("steering: max_new_tokens must be >= 1");
}

}  // namespace steerdec
