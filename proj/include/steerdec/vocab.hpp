#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace steerdec {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Bijection between token strings and contiguous ids [0, size), with reserved
// BOS/EOS/UNK specials. Immutable after construction.
class Vocabulary {
  public:
    Vocabulary(std::vector<std::string> tokens, TokenId bos, TokenId eos, TokenId unk);

    // Convenience constructor: prepends "<bos>", "<eos>", "<unk>" to `words`.
    static Vocabulary with_specials(const std::vector<std::string>& words);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenId id) const;
    std::optional<TokenId> id_of(const std::string& token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    TokenId bos() const { return bos_; }
    TokenId eos() const { return eos_; }
    TokenId unk() const { return unk_; }
    bool is_special(TokenId id) const { return id == bos_ || id == eos_ || id == unk_; }
    std::size_t non_special_count() const { return tokens_.size() - 3; }

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && bos_ == other.bos_ && eos_ == other.eos_ &&
               unk_ == other.unk_;
    }

    // Text format: header line `#specials bos=<id> eos=<id> unk=<id>`, then
    // one token per line in id order.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId bos_, eos_, unk_;
};

}  // namespace steerdec
