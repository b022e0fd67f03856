#include "steerdec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "steerdec/checkpoint.hpp"
#include "steerdec/errors.hpp"

namespace steerdec {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void require_exists(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::string experiment_dir(const ExperimentConfig& config) {
    const fs::path dir = fs::path(config.out_dir) / config.experiment_name;
    fs::create_directories(dir);
    return dir.string();
}

void write_manifest(const ExperimentConfig& config, const ordered_json& fingerprints,
                    const std::vector<std::string>& outputs, const std::string& dir) {
    ordered_json manifest;
    manifest["experiment_name"] = config.experiment_name;
    manifest["seed"] = config.steering.seed;
    manifest["config"] = config.to_json();
    manifest["checkpoint_fingerprints"] = fingerprints;
    ordered_json names = ordered_json::array();
    for (const std::string& path : outputs) names.push_back(fs::path(path).filename().string());
    manifest["outputs"] = std::move(names);
    write_text((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig cfg;
    auto need_string = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
            throw ConfigError(std::string("config: missing string field '") + key + "'");
        return j[key].get<std::string>();
    };
    cfg.experiment_name = need_string("experiment_name");
    cfg.generator_ckpt = need_string("generator");
    cfg.eval_lm_ckpt = need_string("eval_lm");
    cfg.scorer_ckpt = need_string("scorer");
    cfg.prompts_path = need_string("prompts");
    cfg.out_dir = need_string("out_dir");
    if (j.contains("detoxifier") && !j["detoxifier"].is_null())
        cfg.detoxifier_ckpt = j["detoxifier"].get<std::string>();
    if (j.contains("detoxifier_prompt") && !j["detoxifier_prompt"].is_null())
        cfg.detoxifier_prompt_ckpt = j["detoxifier_prompt"].get<std::string>();
    if (j.contains("scorer_url") && !j["scorer_url"].is_null())
        cfg.scorer_url = j["scorer_url"].get<std::string>();
    if (j.contains("prompt_max_toxicity") && !j["prompt_max_toxicity"].is_null())
        cfg.prompt_max_toxicity = j["prompt_max_toxicity"].get<double>();
    if (j.contains("report_formats"))
        cfg.report_formats = j["report_formats"].get<std::vector<std::string>>();

    if (!j.contains("steering") || !j["steering"].is_object())
        throw ConfigError("config: missing 'steering' object");
    const auto& s = j["steering"];
    if (s.contains("alpha")) cfg.steering.alpha = s["alpha"].get<double>();
    if (s.contains("top_p")) cfg.steering.top_p = s["top_p"].get<double>();
    if (s.contains("direction"))
        cfg.steering.direction = direction_from_string(s["direction"].get<std::string>());
    if (s.contains("k_samples")) cfg.steering.k_samples = s["k_samples"].get<int>();
    if (s.contains("max_new_tokens")) cfg.steering.max_new_tokens = s["max_new_tokens"].get<int>();
    if (!s.contains("seed")) throw ConfigError("config: steering.seed is required");
    cfg.steering.seed = s["seed"].get<std::uint64_t>();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    ordered_json j = ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    return from_json(j);
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["experiment_name"] = experiment_name;
    j["generator"] = generator_ckpt;
    j["detoxifier"] = detoxifier_ckpt ? ordered_json(*detoxifier_ckpt) : ordered_json(nullptr);
    j["detoxifier_prompt"] =
        detoxifier_prompt_ckpt ? ordered_json(*detoxifier_prompt_ckpt) : ordered_json(nullptr);
    j["eval_lm"] = eval_lm_ckpt;
    j["scorer"] = scorer_ckpt;
    j["scorer_url"] = scorer_url ? ordered_json(*scorer_url) : ordered_json(nullptr);
    j["prompts"] = prompts_path;
    j["prompt_max_toxicity"] =
        prompt_max_toxicity ? ordered_json(*prompt_max_toxicity) : ordered_json(nullptr);
    j["out_dir"] = out_dir;
    ordered_json s;
    s["alpha"] = steering.alpha;
    s["top_p"] = steering.top_p;
    s["direction"] = to_string(steering.direction);
    s["k_samples"] = steering.k_samples;
    s["max_new_tokens"] = steering.max_new_tokens;
    s["seed"] = steering.seed;
    j["steering"] = std::move(s);
    j["report_formats"] = report_formats;
    return j;
}

void ExperimentConfig::validate() const {
    if (experiment_name.empty()) throw ConfigError("config: experiment_name must not be empty");
    steering.validate();
    require_exists(generator_ckpt, "generator checkpoint");
    require_exists(eval_lm_ckpt, "eval_lm checkpoint");
    require_exists(scorer_ckpt, "scorer checkpoint");
    require_exists(prompts_path, "prompt set");
    if (detoxifier_ckpt) require_exists(*detoxifier_ckpt, "detoxifier checkpoint");
    if (detoxifier_prompt_ckpt) {
        if (!detoxifier_ckpt)
            throw ConfigError("config: detoxifier_prompt requires a detoxifier backbone");
        require_exists(*detoxifier_prompt_ckpt, "detoxifier prompt checkpoint");
    }
    for (const std::string& fmt : report_formats) {
        if (fmt != "tsv" && fmt != "json")
            throw ConfigError("config: unknown report format '" + fmt + "'");
    }
}

ExperimentBundle load_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentBundle bundle;
    bundle.generator = load_lm(config.generator_ckpt);
    bundle.fingerprints["generator"] = file_fingerprint(config.generator_ckpt);

    if (config.detoxifier_ckpt) {
        if (config.detoxifier_prompt_ckpt) {
            auto backbone = std::make_unique<NeuralWindowLM>(load_neural(*config.detoxifier_ckpt));
            SoftPrompt prompt = load_soft_prompt(*config.detoxifier_prompt_ckpt, *backbone);
            bundle.detoxifier = std::make_unique<PromptedLM>(*backbone, std::move(prompt));
            bundle.detoxifier_backbone = std::move(backbone);
            bundle.fingerprints["detoxifier_prompt"] =
                file_fingerprint(*config.detoxifier_prompt_ckpt);
        } else {
            bundle.detoxifier = load_lm(*config.detoxifier_ckpt);
        }
        bundle.fingerprints["detoxifier"] = file_fingerprint(*config.detoxifier_ckpt);
        if (!(bundle.detoxifier->vocab() == bundle.generator->vocab()))
            throw VocabMismatchError("generator '" + config.generator_ckpt +
                                     "' and detoxifier '" + *config.detoxifier_ckpt +
                                     "' have different vocabularies");
    }

    bundle.eval_lm = load_lm(config.eval_lm_ckpt);
    bundle.fingerprints["eval_lm"] = file_fingerprint(config.eval_lm_ckpt);
    if (!(bundle.eval_lm->vocab() == bundle.generator->vocab()))
        throw VocabMismatchError("generator and eval_lm have different vocabularies");

    // Scorer precedence: env var, then config url, then the proxy checkpoint.
    std::string url;
    if (const char* env = std::getenv("STEERDEC_SCORER_URL"); env && *env) url = env;
    else if (config.scorer_url) url = *config.scorer_url;
    if (!url.empty()) {
        ExternalScorerConfig ext;
        ext.url = url;
        bundle.scorer = std::make_unique<ExternalScorer>(ext, bundle.generator->vocab());
        bundle.fingerprints["scorer"] = "external:" + url;
    } else {
        auto proxy = load_proxy_scorer(config.scorer_ckpt);
        if (!(proxy.vocab() == bundle.generator->vocab()))
            throw VocabMismatchError("generator and scorer have different vocabularies");
        bundle.scorer = std::make_unique<ProxyScorer>(std::move(proxy));
        bundle.fingerprints["scorer"] = file_fingerprint(config.scorer_ckpt);
    }

    bundle.prompts = read_prompts(config.prompts_path, config.prompt_max_toxicity);
    if (bundle.prompts.prompts.empty()) throw ConfigError("prompt set is empty after filtering");
    return bundle;
}

EvalOutcome evaluate(const LanguageModel& generator, const LanguageModel* detoxifier,
                     const LanguageModel& eval_lm, const ToxicityScorer& scorer,
                     const PromptSet& prompts, const SteeringConfig& steering) {
    steering.validate();
    if (prompts.prompts.empty()) throw EmptyInputError("evaluate: no prompts");

    EvalOutcome outcome;
    std::vector<std::vector<double>> score_table;
    std::vector<TokenSeq> all_continuations;
    std::vector<TokenSeq> all_prompt_tokens;
    const Vocabulary& vocab = generator.vocab();

    for (const Prompt& prompt : prompts.prompts) {
        const TokenSeq prompt_tokens = tokenize(prompt.text, vocab);
        const auto records = generate_k(generator, detoxifier, prompt_tokens, prompt.id, steering);
        std::vector<double> scores;
        scores.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            const GenerationRecord& rec = records[i];
            scores.push_back(scorer.score(rec.continuation));
            all_continuations.push_back(rec.continuation);
            all_prompt_tokens.push_back(prompt_tokens);

            ordered_json line;
            line["prompt_id"] = prompt.id;
            line["sample_index"] = i;
            line["prompt_text"] = prompt.text;
            line["continuation_text"] = detokenize(rec.continuation, vocab);
            line["finish_reason"] = to_string(rec.finish_reason);
            line["fallback_steps"] = rec.fallback_steps;
            line["seed"] = rec.seed;
            outcome.record_lines.push_back(line.dump());
        }
        score_table.push_back(std::move(scores));
    }

    outcome.report.avg_max_toxicity = avg_max_toxicity(score_table);
    outcome.report.toxicity_probability = toxicity_probability(score_table);
    outcome.report.perplexity = perplexity(eval_lm, all_continuations, all_prompt_tokens);
    outcome.report.distinct_2 = distinct_n(all_continuations, 2);
    outcome.report.distinct_3 = distinct_n(all_continuations, 3);
    outcome.report.prompt_count = static_cast<int>(prompts.prompts.size());
    outcome.report.k = steering.k_samples;
    return outcome;
}

std::string report_tsv(const EvalReport& report) {
    std::ostringstream out;
    out << "avg_max_toxicity\ttoxicity_prob\tppl\tdist2\tdist3\tprompts\tk\n";
    out << fmt6(report.avg_max_toxicity) << '\t' << fmt6(report.toxicity_probability) << '\t'
        << fmt6(report.perplexity) << '\t' << fmt6(report.distinct_2) << '\t'
        << fmt6(report.distinct_3) << '\t' << report.prompt_count << '\t' << report.k << '\n';
    return out.str();
}

ordered_json report_json(const EvalReport& report) {
    ordered_json j;
    j["avg_max_toxicity"] = report.avg_max_toxicity;
    j["toxicity_probability"] = report.toxicity_probability;
    j["perplexity"] = report.perplexity;
    j["distinct_2"] = report.distinct_2;
    j["distinct_3"] = report.distinct_3;
    j["prompt_count"] = report.prompt_count;
    j["k"] = report.k;
    return j;
}

std::vector<std::string> emit_eval_outputs(const ExperimentConfig& config,
                                           const EvalOutcome& outcome) {
    const std::string dir = experiment_dir(config);
    std::vector<std::string> outputs;

    std::string records;
    for (const std::string& line : outcome.record_lines) records += line + "\n";
    const std::string records_path = (fs::path(dir) / "records.jsonl").string();
    write_text(records_path, records);
    outputs.push_back(records_path);

    for (const std::string& fmt : config.report_formats) {
        if (fmt == "tsv") {
            const std::string path = (fs::path(dir) / "report.tsv").string();
            write_text(path, report_tsv(outcome.report));
            outputs.push_back(path);
        } else if (fmt == "json") {
            ordered_json j = report_json(outcome.report);
            j["config"] = config.to_json();
            const std::string path = (fs::path(dir) / "report.json").string();
            write_text(path, j.dump(2) + "\n");
            outputs.push_back(path);
        }
    }
    return outputs;
}

EvalOutcome run_eval(const ExperimentConfig& config) {
    const ExperimentBundle bundle = load_experiment(config);
    EvalOutcome outcome = evaluate(*bundle.generator, bundle.detoxifier.get(), *bundle.eval_lm,
                                   *bundle.scorer, bundle.prompts, config.steering);
    const auto outputs = emit_eval_outputs(config, outcome);
    write_manifest(config, bundle.fingerprints, outputs, experiment_dir(config));
    return outcome;
}

double select_alpha(std::vector<std::pair<double, double>> alpha_to_toxicity, double delta) {
    if (alpha_to_toxicity.empty()) throw EmptyInputError("select_alpha: no grid rows");
    if (!(delta > 0.0)) throw ConfigError("select_alpha: delta must be > 0");
    std::sort(alpha_to_toxicity.begin(), alpha_to_toxicity.end());
    for (std::size_t i = 1; i < alpha_to_toxicity.size(); ++i) {
        if (alpha_to_toxicity[i].first == alpha_to_toxicity[i - 1].first)
            throw ConfigError("select_alpha: duplicate alpha value");
    }
    double min_toxicity = alpha_to_toxicity.front().second;
    for (const auto& [alpha, toxicity] : alpha_to_toxicity)
        min_toxicity = std::min(min_toxicity, toxicity);
    for (const auto& [alpha, toxicity] : alpha_to_toxicity) {
        if (toxicity - min_toxicity < delta) return alpha;
    }
    return alpha_to_toxicity.back().first;  // unreachable: the minimum qualifies
}

std::vector<double> default_alpha_grid() {
    return {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0};
}

GridResult alpha_grid(const ExperimentConfig& config, const std::vector<double>& alphas,
                      double delta) {
    if (alphas.empty()) throw ConfigError("alpha_grid: alpha list must not be empty");
    for (std::size_t i = 1; i < alphas.size(); ++i) {
        if (!(alphas[i] > alphas[i - 1]))
            throw ConfigError("alpha_grid: alpha list must be strictly increasing");
    }
    const ExperimentBundle bundle = load_experiment(config);

    GridResult grid;
    grid.delta = delta;
    std::vector<std::pair<double, double>> alpha_to_toxicity;
    for (double alpha : alphas) {
        SteeringConfig steering = config.steering;
        steering.alpha = alpha;
        const EvalOutcome outcome =
            evaluate(*bundle.generator, bundle.detoxifier.get(), *bundle.eval_lm, *bundle.scorer,
                     bundle.prompts, steering);
        grid.rows.push_back({alpha, outcome.report.avg_max_toxicity,
                             outcome.report.toxicity_probability, outcome.report.perplexity});
        alpha_to_toxicity.emplace_back(alpha, outcome.report.avg_max_toxicity);
    }
    grid.recommended_alpha = select_alpha(std::move(alpha_to_toxicity), delta);
    return grid;
}

std::string grid_tsv(const GridResult& grid) {
    std::ostringstream out;
    out << "alpha\tavg_max_toxicity\ttoxicity_prob\tppl\n";
    for (const GridRow& row : grid.rows) {
        out << fmt6(row.alpha) << '\t' << fmt6(row.avg_max_toxicity) << '\t'
            << fmt6(row.toxicity_probability) << '\t' << fmt6(row.perplexity) << '\n';
    }
    return out.str();
}

ordered_json grid_json(const GridResult& grid) {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    for (const GridRow& row : grid.rows) {
        ordered_json r;
        r["alpha"] = row.alpha;
        r["avg_max_toxicity"] = row.avg_max_toxicity;
        r["toxicity_prob"] = row.toxicity_probability;
        r["ppl"] = row.perplexity;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    j["recommended_alpha"] = grid.recommended_alpha;
    j["delta"] = grid.delta;
    return j;
}

std::vector<std::string> emit_grid_outputs(const ExperimentConfig& config,
                                           const GridResult& grid) {
    const std::string dir = experiment_dir(config);
    std::vector<std::string> outputs;
    for (const std::string& fmt : config.report_formats) {
        if (fmt == "tsv") {
            const std::string path = (fs::path(dir) / "grid.tsv").string();
            write_text(path, grid_tsv(grid));
            outputs.push_back(path);
        } else if (fmt == "json") {
            ordered_json j = grid_json(grid);
            j["config"] = config.to_json();
            const std::string path = (fs::path(dir) / "grid.json").string();
            write_text(path, j.dump(2) + "\n");
            outputs.push_back(path);
        }
    }
    write_manifest(config, ordered_json::object(), outputs, dir);
    return outputs;
}

PairingMatrix pairing_matrix(const std::vector<std::string>& generator_ckpts,
                             const std::vector<std::string>& detoxifier_ckpts,
                             const ExperimentConfig& config) {
    if (generator_ckpts.empty()) throw ConfigError("pairing: need at least one generator");
    const ExperimentBundle base = load_experiment(config);

    std::vector<std::unique_ptr<LanguageModel>> generators;
    for (const std::string& path : generator_ckpts) generators.push_back(load_lm(path));
    std::vector<std::unique_ptr<LanguageModel>> detoxifiers;
    for (const std::string& path : detoxifier_ckpts) detoxifiers.push_back(load_lm(path));

    const Vocabulary& vocab = generators.front()->vocab();
    for (std::size_t g = 1; g < generators.size(); ++g) {
        if (!(generators[g]->vocab() == vocab))
            throw VocabMismatchError("pairing: generator '" + generator_ckpts[g] +
                                     "' does not share the vocabulary of '" +
                                     generator_ckpts.front() + "'");
    }
    for (std::size_t d = 0; d < detoxifiers.size(); ++d) {
        if (!(detoxifiers[d]->vocab() == vocab))
            throw VocabMismatchError("pairing: detoxifier '" + detoxifier_ckpts[d] +
                                     "' does not share the vocabulary of '" +
                                     generator_ckpts.front() + "'");
    }
    if (!(base.eval_lm->vocab() == vocab))
        throw VocabMismatchError("pairing: eval_lm does not share the generator vocabulary");

    PairingMatrix matrix;
    for (const auto& g : generators) matrix.generator_labels.push_back(g->size_label());
    for (const auto& d : detoxifiers) matrix.detoxifier_labels.push_back(d->size_label());

    for (const auto& gen : generators) {
        std::vector<PairingCell> row;
        const EvalOutcome none = evaluate(*gen, nullptr, *base.eval_lm, *base.scorer,
                                          base.prompts, config.steering);
        row.push_back({none.report.avg_max_toxicity, none.report.toxicity_probability,
                       none.report.perplexity});
        for (const auto& detox : detoxifiers) {
            const EvalOutcome cell = evaluate(*gen, detox.get(), *base.eval_lm, *base.scorer,
                                              base.prompts, config.steering);
            row.push_back({cell.report.avg_max_toxicity, cell.report.toxicity_probability,
                           cell.report.perplexity});
        }
        matrix.cells.push_back(std::move(row));
    }
    return matrix;
}

std::string pairing_tsv(const PairingMatrix& matrix, const std::string& metric) {
    auto pick = [&](const PairingCell& cell) {
        if (metric == "avg_max_toxicity") return cell.avg_max_toxicity;
        if (metric == "toxicity_prob") return cell.toxicity_probability;
        if (metric == "ppl") return cell.perplexity;
        throw ConfigError("pairing_tsv: unknown metric '" + metric + "'");
    };
    std::ostringstream out;
    out << "generator\tNone";
    for (const std::string& label : matrix.detoxifier_labels) out << '\t' << label;
    out << '\n';
    for (std::size_t g = 0; g < matrix.generator_labels.size(); ++g) {
        out << matrix.generator_labels[g];
        for (const PairingCell& cell : matrix.cells[g]) out << '\t' << fmt6(pick(cell));
        out << '\n';
    }
    return out.str();
}

ordered_json pairing_json(const PairingMatrix& matrix) {
    ordered_json j;
    j["generators"] = matrix.generator_labels;
    j["detoxifiers"] = matrix.detoxifier_labels;
    ordered_json rows = ordered_json::array();
    for (std::size_t g = 0; g < matrix.cells.size(); ++g) {
        ordered_json row = ordered_json::array();
        for (const PairingCell& cell : matrix.cells[g]) {
            ordered_json c;
            c["avg_max_toxicity"] = cell.avg_max_toxicity;
            c["toxicity_prob"] = cell.toxicity_probability;
            c["ppl"] = cell.perplexity;
            row.push_back(std::move(c));
        }
        rows.push_back(std::move(row));
    }
    j["cells"] = std::move(rows);
    return j;
}

std::vector<std::string> emit_pairing_outputs(const ExperimentConfig& config,
                                              const PairingMatrix& matrix) {
    const std::string dir = experiment_dir(config);
    std::vector<std::string> outputs;
    for (const std::string& fmt : config.report_formats) {
        if (fmt == "tsv") {
            // One table per metric, mirroring the separate toxicity/quality
            // tables of the pairing study.
            for (const std::string metric : {"avg_max_toxicity", "toxicity_prob", "ppl"}) {
                const std::string path =
                    (fs::path(dir) / ("pairing_" + metric + ".tsv")).string();
                write_text(path, pairing_tsv(matrix, metric));
                outputs.push_back(path);
            }
        } else if (fmt == "json") {
            ordered_json j = pairing_json(matrix);
            j["config"] = config.to_json();
            const std::string path = (fs::path(dir) / "pairing.json").string();
            write_text(path, j.dump(2) + "\n");
            outputs.push_back(path);
        }
    }
    write_manifest(config, ordered_json::object(), outputs, dir);
    return outputs;
}

}  // namespace steerdec
