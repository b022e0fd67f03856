#include "steerdec/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "steerdec/errors.hpp"
#include "steerdec/rng.hpp"

namespace steerdec {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

ordered_json vocab_to_json(const Vocabulary& vocab) {
    ordered_json j;
    j["tokens"] = vocab.tokens();
    j["bos"] = vocab.bos();
    j["eos"] = vocab.eos();
    j["unk"] = vocab.unk();
    return j;
}

Vocabulary vocab_from_json(const ordered_json& j) {
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>(), j.at("bos").get<TokenId>(),
                      j.at("eos").get<TokenId>(), j.at("unk").get<TokenId>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

ordered_json read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    ordered_json j = ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("checkpoint '" + path + "' is not valid JSON", 1);
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
        throw ConfigError("checkpoint '" + path + "': unsupported format_version");
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ConfigError("checkpoint '" + path + "': missing kind");
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ordered_json ngram_params_json(const NGramModel& model) {
    // Triples [context ids..., token, count] sorted lexicographically; the
    // ordered maps inside the model already iterate in canonical order.
    ordered_json triples = ordered_json::array();
    for (const auto& [ctx, per_token] : model.counts()) {
        for (const auto& [tok, count] : per_token) {
            ordered_json triple = ordered_json::array();
            triple.push_back(ctx);
            triple.push_back(tok);
            triple.push_back(count);
            triples.push_back(std::move(triple));
        }
    }
    ordered_json params;
    params["counts"] = std::move(triples);
    return params;
}

ordered_json neural_params_json(const NeuralWindowLM& model) {
    ordered_json params;
    params["embed"] = model.params().embed;
    params["null_prompt"] = model.params().null_prompt;
    params["w1"] = model.params().w1;
    params["b1"] = model.params().b1;
    params["w2"] = model.params().w2;
    params["b2"] = model.params().b2;
    return params;
}

}  // namespace

void save_checkpoint(const NGramModel& model, const std::string& path) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "ngram";
    j["vocab"] = vocab_to_json(model.vocab());
    j["hyperparameters"] = {{"order", model.order()},
                            {"add_k", model.add_k()},
                            {"label", model.size_label()}};
    j["parameters"] = ngram_params_json(model);
    write_file(path, j.dump() + "\n");
}

void save_checkpoint(const NeuralWindowLM& model, const std::string& path) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "neural";
    j["vocab"] = vocab_to_json(model.vocab());
    j["hyperparameters"] = {{"window", model.arch().window},
                            {"virtual_slots", model.arch().virtual_slots},
                            {"embed_dim", model.arch().embed_dim},
                            {"hidden_dim", model.arch().hidden_dim},
                            {"label", model.size_label()}};
    j["parameters"] = neural_params_json(model);
    write_file(path, j.dump() + "\n");
}

void save_checkpoint(const ProxyScorer& scorer, const std::string& path) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "proxy_scorer";
    j["vocab"] = vocab_to_json(scorer.vocab());
    j["hyperparameters"] = ordered_json::object();
    j["parameters"] = {{"weights", scorer.weights()}, {"bias", scorer.bias()}};
    write_file(path, j.dump() + "\n");
}

void save_checkpoint(const SoftPrompt& prompt, const std::string& backbone_fingerprint,
                     const std::string& path) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "soft_prompt";
    j["hyperparameters"] = {{"virtual_slots", prompt.virtual_slots},
                            {"embed_dim", prompt.embed_dim}};
    j["backbone_fingerprint"] = backbone_fingerprint;
    j["parameters"] = {{"embeddings", prompt.data}};
    write_file(path, j.dump() + "\n");
}

std::string checkpoint_kind(const std::string& path) {
    return read_checkpoint(path)["kind"].get<std::string>();
}

NGramModel load_ngram(const std::string& path) {
    ordered_json j = read_checkpoint(path);
    if (j["kind"] != "ngram") throw ConfigError("checkpoint '" + path + "' is not an ngram model");
    Vocabulary vocab = vocab_from_json(j.at("vocab"));
    const auto& hp = j.at("hyperparameters");
    std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts;
    for (const auto& triple : j.at("parameters").at("counts")) {
        if (!triple.is_array() || triple.size() != 3)
            throw ConfigError("checkpoint '" + path + "': malformed count triple");
        counts[triple[0].get<TokenSeq>()][triple[1].get<TokenId>()] =
            triple[2].get<std::int64_t>();
    }
    return NGramModel(hp.at("order").get<int>(), hp.at("add_k").get<double>(), std::move(vocab),
                      hp.at("label").get<std::string>(), std::move(counts));
}

NeuralWindowLM load_neural(const std::string& path) {
    ordered_json j = read_checkpoint(path);
    if (j["kind"] != "neural")
        throw ConfigError("checkpoint '" + path + "' is not a neural model");
    Vocabulary vocab = vocab_from_json(j.at("vocab"));
    const auto& hp = j.at("hyperparameters");
    NeuralArch arch{hp.at("window").get<int>(), hp.at("virtual_slots").get<int>(),
                    hp.at("embed_dim").get<int>(), hp.at("hidden_dim").get<int>()};
    const auto& p = j.at("parameters");
    NeuralWindowLM::Params params{
        p.at("embed").get<std::vector<double>>(),  p.at("null_prompt").get<std::vector<double>>(),
        p.at("w1").get<std::vector<double>>(),     p.at("b1").get<std::vector<double>>(),
        p.at("w2").get<std::vector<double>>(),     p.at("b2").get<std::vector<double>>()};
    return NeuralWindowLM(arch, std::move(vocab), hp.at("label").get<std::string>(),
                          std::move(params));
}

std::unique_ptr<LanguageModel> load_lm(const std::string& path) {
    const std::string kind = checkpoint_kind(path);
    if (kind == "ngram") return std::make_unique<NGramModel>(load_ngram(path));
    if (kind == "neural") return std::make_unique<NeuralWindowLM>(load_neural(path));
    throw ConfigError("checkpoint '" + path + "': kind '" + kind +
                      "' is not a language model");
}

ProxyScorer load_proxy_scorer(const std::string& path) {
    ordered_json j = read_checkpoint(path);
    if (j["kind"] != "proxy_scorer")
        throw ConfigError("checkpoint '" + path + "' is not a proxy scorer");
    Vocabulary vocab = vocab_from_json(j.at("vocab"));
    const auto& p = j.at("parameters");
    return ProxyScorer(p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>(),
                       std::move(vocab));
}

SoftPrompt load_soft_prompt(const std::string& path, const NeuralWindowLM& backbone) {
    ordered_json j = read_checkpoint(path);
    if (j["kind"] != "soft_prompt")
        throw ConfigError("checkpoint '" + path + "' is not a soft prompt");
    const std::string stored = j.at("backbone_fingerprint").get<std::string>();
    const std::string actual = model_fingerprint(backbone);
    if (stored != actual)
        throw FingerprintMismatchError("soft prompt '" + path + "' was tuned on backbone " +
                                       stored + ", got " + actual);
    const auto& hp = j.at("hyperparameters");
    SoftPrompt prompt(hp.at("virtual_slots").get<std::size_t>(),
                      hp.at("embed_dim").get<std::size_t>());
    prompt.data = j.at("parameters").at("embeddings").get<std::vector<double>>();
    if (prompt.data.size() != prompt.virtual_slots * prompt.embed_dim)
        throw ShapeMismatchError("soft prompt '" + path + "': embedding size mismatch");
    return prompt;
}

std::string model_fingerprint(const NeuralWindowLM& model) {
    return hex64(fnv1a64(neural_params_json(model).dump()));
}

std::string model_fingerprint(const NGramModel& model) {
    return hex64(fnv1a64(ngram_params_json(model).dump()));
}

std::string file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex64(fnv1a64(buf.str()));
}

}  // namespace steerdec
