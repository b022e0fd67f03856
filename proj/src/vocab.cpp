#include "steerdec/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "steerdec/errors.hpp"

namespace steerdec {

namespace {

bool has_whitespace(const std::string& s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId bos, TokenId eos, TokenId unk)
    : tokens_(std::move(tokens)), bos_(bos), eos_(eos), unk_(unk) {
    const auto n = static_cast<TokenId>(tokens_.size());
    for (TokenId id : {bos_, eos_, unk_}) {
        if (id < 0 || id >= n) throw Error("vocabulary: special id out of range");
    }
    if (bos_ == eos_ || bos_ == unk_ || eos_ == unk_)
        throw Error("vocabulary: BOS, EOS, UNK must be distinct");
    if (tokens_.size() < 5) throw Error("vocabulary: need at least 2 non-special tokens");
    index_.reserve(tokens_.size());
    for (TokenId id = 0; id < n; ++id) {
        const auto& tok = tokens_[static_cast<std::size_t>(id)];
        if (tok.empty() || has_whitespace(tok))
            throw Error("vocabulary: token '" + tok + "' is empty or contains whitespace");
        if (!index_.emplace(tok, id).second)
            throw Error("vocabulary: duplicate token '" + tok + "'");
    }
}

Vocabulary Vocabulary::with_specials(const std::vector<std::string>& words) {
    std::vector<std::string> tokens = {"<bos>", "<eos>", "<unk>"};
    tokens.insert(tokens.end(), words.begin(), words.end());
    return Vocabulary(std::move(tokens), 0, 1, 2);
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw Error("vocabulary: token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "#specials bos=" << bos_ << " eos=" << eos_ << " unk=" << unk_ << "\n";
    for (const auto& tok : tokens_) out << tok << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty vocabulary file", 1);
    TokenId bos = -1, eos = -1, unk = -1;
    if (std::sscanf(header.c_str(), "#specials bos=%d eos=%d unk=%d", &bos, &eos, &unk) != 3)
        throw ParseError("expected '#specials bos=<id> eos=<id> unk=<id>' header", 1);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens), bos, eos, unk);
}

}  // namespace steerdec
