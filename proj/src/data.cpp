#include "steerdec/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "steerdec/errors.hpp"
#include "steerdec/rng.hpp"

namespace steerdec {

namespace {

// Minimal RFC-4180 row parser: comma-separated, double quotes with "" escapes.
std::vector<std::string> parse_csv_row(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            if (!field.empty()) throw ParseError("unexpected quote mid-field", line_no);
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
        ++i;
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

std::pair<std::vector<AnnotatedExample>, std::vector<AnnotatedExample>> split_annotated(
    const std::string& csv_path, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("split_annotated: threshold must be in [0,1]");
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + csv_path + "'");

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "text,toxic_fraction")
        throw ParseError("header must be exactly 'text,toxic_fraction'", line_no);

    std::vector<AnnotatedExample> toxic, nontoxic;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = parse_csv_row(line, line_no);
        if (fields.size() != 2) throw ParseError("expected 2 fields", line_no);
        double fraction = 0.0;
        const auto [ptr, ec] = std::from_chars(
            fields[1].data(), fields[1].data() + fields[1].size(), fraction);
        if (ec != std::errc() || ptr != fields[1].data() + fields[1].size())
            throw ParseError("toxic_fraction '" + fields[1] + "' is not a number", line_no);
        if (!(fraction >= 0.0 && fraction <= 1.0))
            throw ParseError("toxic_fraction must be in [0,1]", line_no);
        AnnotatedExample ex{fields[0], fraction};
        // "more than 50% of the annotators": strictly greater.
        (fraction > threshold ? toxic : nontoxic).push_back(std::move(ex));
    }
    return {std::move(toxic), std::move(nontoxic)};
}

PromptSet read_prompts(const std::string& jsonl_path, std::optional<double> max_toxicity) {
    std::ifstream in(jsonl_path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + jsonl_path + "'");
    PromptSet set;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw ParseError("not a JSON object", line_no);
        if (!obj.contains("id") || !obj["id"].is_string())
            throw ParseError("missing string field 'id'", line_no);
        if (!obj.contains("prompt") || !obj["prompt"].is_string())
            throw ParseError("missing string field 'prompt'", line_no);
        Prompt p;
        p.id = obj["id"].get<std::string>();
        p.text = obj["prompt"].get<std::string>();
        if (obj.contains("toxicity")) {
            if (!obj["toxicity"].is_number())
                throw ParseError("'toxicity' must be a number", line_no);
            p.toxicity = obj["toxicity"].get<double>();
        }
        if (!seen_ids.insert(p.id).second)
            throw ParseError("duplicate prompt id '" + p.id + "'", line_no);
        if (max_toxicity && p.toxicity && *p.toxicity > *max_toxicity) continue;
        set.prompts.push_back(std::move(p));
    }
    return set;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
    TokenSeq out;
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        const auto id = vocab.id_of(word);
        out.push_back(id ? *id : vocab.unk());
        word.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return out;
}

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += vocab.token(seq[i]);
    }
    return out;
}

void SynthConfig::validate() const {
    if (base_tokens < 2) throw ConfigError("synth: base_tokens must be >= 2");
    if (marker_tokens < 1) throw ConfigError("synth: marker_tokens must be >= 1");
    if (!(marker_rate_toxic > 0.0 && marker_rate_toxic < 1.0))
        throw ConfigError("synth: marker_rate_toxic must be in (0,1)");
    if (!(marker_rate_clean >= 0.0 && marker_rate_clean < 1.0))
        throw ConfigError("synth: marker_rate_clean must be in [0,1)");
    if (!(marker_rate_toxic > marker_rate_clean))
        throw ConfigError("synth: toxic marker rate must exceed the clean rate");
    if (min_len < 1 || max_len < min_len) throw ConfigError("synth: bad length range");
    if (prompt_min_len < 1 || prompt_max_len < prompt_min_len)
        throw ConfigError("synth: bad prompt length range");
    if (corpus_size < 1 || labeled_size < 1 || prompt_count < 1)
        throw ConfigError("synth: sizes must be >= 1");
}

namespace {

// Row-stochastic transition matrix plus an initial distribution over the
// base-token section, drawn once per style.
struct MarkovBackbone {
    std::vector<double> initial;     // n
    std::vector<double> transition;  // n x n, row-major

    static MarkovBackbone draw(int n, SplitMix64& rng) {
        MarkovBackbone mb;
        auto draw_row = [&](std::vector<double>& row) {
            double sum = 0.0;
            for (double& x : row) {
                x = rng.uniform(0.1, 1.0);
                sum += x;
            }
            for (double& x : row) x /= sum;
        };
        mb.initial.resize(static_cast<std::size_t>(n));
        draw_row(mb.initial);
        mb.transition.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<double> row(static_cast<std::size_t>(n));
            draw_row(row);
            std::copy(row.begin(), row.end(),
                      mb.transition.begin() + static_cast<std::ptrdiff_t>(i) * n);
        }
        return mb;
    }

    int step(int state, SplitMix64& rng) const {
        const int n = static_cast<int>(initial.size());
        const double* row = state < 0 ? initial.data()
                                      : transition.data() + static_cast<std::size_t>(state) * n;
        const double u = rng.uniform01();
        double cum = 0.0;
        for (int j = 0; j < n; ++j) {
            cum += row[j];
            if (u < cum) return j;
        }
        return n - 1;
    }
};

}  // namespace

SynthData synth_two_style(const SynthConfig& config) {
    config.validate();
    std::vector<std::string> words;
    for (int i = 0; i < config.base_tokens; ++i) words.push_back("w" + std::to_string(i));
    for (int i = 0; i < config.marker_tokens; ++i) words.push_back("bad" + std::to_string(i));
    Vocabulary vocab = Vocabulary::with_specials(words);
    const TokenId base_offset = 3;  // specials occupy ids 0..2
    const TokenId marker_offset = base_offset + config.base_tokens;

    SplitMix64 rng(config.seed);
    const MarkovBackbone clean_mb = MarkovBackbone::draw(config.base_tokens, rng);
    const MarkovBackbone toxic_mb = MarkovBackbone::draw(config.base_tokens, rng);

    auto draw_sequence = [&](const MarkovBackbone& mb, double marker_rate, int min_len,
                             int max_len) {
        const int len = min_len + static_cast<int>(rng.uniform_below(
                                      static_cast<std::uint64_t>(max_len - min_len + 1)));
        TokenSeq seq;
        seq.reserve(static_cast<std::size_t>(len));
        int state = -1;
        for (int t = 0; t < len; ++t) {
            if (rng.uniform01() < marker_rate) {
                seq.push_back(marker_offset + static_cast<TokenId>(rng.uniform_below(
                                                  static_cast<std::uint64_t>(config.marker_tokens))));
            } else {
                state = mb.step(state, rng);
                seq.push_back(base_offset + static_cast<TokenId>(state));
            }
        }
        return seq;
    };

    SynthData data{std::move(vocab), {}, {}, {}, {}};
    for (int i = 0; i < config.corpus_size; ++i)
        data.toxic_corpus.push_back(
            draw_sequence(toxic_mb, config.marker_rate_toxic, config.min_len, config.max_len));
    for (int i = 0; i < config.corpus_size; ++i)
        data.clean_corpus.push_back(
            draw_sequence(clean_mb, config.marker_rate_clean, config.min_len, config.max_len));
    for (int i = 0; i < config.labeled_size; ++i)
        data.labeled.emplace_back(
            draw_sequence(toxic_mb, config.marker_rate_toxic, config.min_len, config.max_len), 1);
    for (int i = 0; i < config.labeled_size; ++i)
        data.labeled.emplace_back(
            draw_sequence(clean_mb, config.marker_rate_clean, config.min_len, config.max_len), 0);
    for (int i = 0; i < config.prompt_count; ++i) {
        // Nontoxic prompts: clean backbone, no markers.
        const TokenSeq seq =
            draw_sequence(clean_mb, 0.0, config.prompt_min_len, config.prompt_max_len);
        char id[16];
        std::snprintf(id, sizeof(id), "p%04d", i);
        data.prompts.prompts.push_back(Prompt{id, detokenize(seq, data.vocab), std::nullopt});
    }
    return data;
}

void save_corpus(const std::vector<TokenSeq>& corpus, const Vocabulary& vocab,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const TokenSeq& seq : corpus) out << detokenize(seq, vocab) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<TokenSeq> load_corpus(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<TokenSeq> corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        corpus.push_back(tokenize(line, vocab));
    }
    return corpus;
}

void save_labeled_csv(const std::vector<std::pair<TokenSeq, int>>& labeled,
                      const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "text,toxic_fraction\n";
    for (const auto& [seq, label] : labeled)
        out << csv_quote(detokenize(seq, vocab)) << "," << (label == 1 ? "1.0" : "0.0") << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

void save_prompts_jsonl(const PromptSet& prompts, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const Prompt& p : prompts.prompts) {
        nlohmann::ordered_json obj;
        obj["id"] = p.id;
        obj["prompt"] = p.text;
        if (p.toxicity) obj["toxicity"] = *p.toxicity;
        out << obj.dump() << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace steerdec
