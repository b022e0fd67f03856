#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "steerdec/config.hpp"
#include "steerdec/data.hpp"
#include "steerdec/decoder.hpp"
#include "steerdec/lm.hpp"
#include "steerdec/metrics.hpp"

namespace steerdec {

// Mirrors the experiment config file field-for-field. Paths are resolved and
// existence-checked at validation time; the seed travels inside `steering`
// and is echoed into every output.
struct ExperimentConfig {
    std::string experiment_name;
    std::string generator_ckpt;
    std::optional<std::string> detoxifier_ckpt;
    std::optional<std::string> detoxifier_prompt_ckpt;  // soft prompt over the detoxifier backbone
    std::string eval_lm_ckpt;
    std::string scorer_ckpt;
    std::optional<std::string> scorer_url;  // external endpoint; overrides the proxy scorer
    std::string prompts_path;
    std::optional<double> prompt_max_toxicity;
    std::string out_dir = "out";
    SteeringConfig steering;
    std::vector<std::string> report_formats = {"tsv", "json"};

    static ExperimentConfig from_json(const nlohmann::ordered_json& j);
    static ExperimentConfig from_json_file(const std::string& path);
    nlohmann::ordered_json to_json() const;

    // Range checks plus existence of every referenced file.
    void validate() const;
};

// Everything an evaluation needs, loaded and lifetime-managed.
struct ExperimentBundle {
    std::unique_ptr<LanguageModel> generator;
    std::unique_ptr<LanguageModel> detoxifier;  // null when steering is off
    std::unique_ptr<LanguageModel> eval_lm;
    std::unique_ptr<ToxicityScorer> scorer;
    PromptSet prompts;
    nlohmann::ordered_json fingerprints;  // checkpoint file hashes for the manifest

    // Owns the detoxifier backbone when the detoxifier is a prompted model.
    std::unique_ptr<LanguageModel> detoxifier_backbone;
};

ExperimentBundle load_experiment(const ExperimentConfig& config);

struct EvalOutcome {
    EvalReport report;
    std::vector<std::string> record_lines;  // JSONL, one line per (prompt, sample)
};

// The shared evaluation core: generate_k per prompt, score, aggregate all
// four metrics. Deterministic given (models, prompts, steering).
EvalOutcome evaluate(const LanguageModel& generator, const LanguageModel* detoxifier,
                     const LanguageModel& eval_lm, const ToxicityScorer& scorer,
                     const PromptSet& prompts, const SteeringConfig& steering);

// Full experiment: evaluate + emit records.jsonl, report.{tsv,json} and
// manifest.json under <out_dir>/<experiment_name>/.
EvalOutcome run_eval(const ExperimentConfig& config);

struct GridRow {
    double alpha;
    double avg_max_toxicity;
    double toxicity_probability;
    double perplexity;
};

struct GridResult {
    std::vector<GridRow> rows;  // sorted by alpha
    double recommended_alpha = 0.0;
    double delta = 0.005;
};

// The tipping-point rule: smallest alpha whose avg_max_toxicity lies strictly
// within delta of the grid minimum. Pure so it can be applied to fixtures.
double select_alpha(std::vector<std::pair<double, double>> alpha_to_toxicity, double delta);

std::vector<double> default_alpha_grid();  // 1.0 .. 9.0 step 1.0

GridResult alpha_grid(const ExperimentConfig& config, const std::vector<double>& alphas,
                      double delta = 0.005);

struct PairingCell {
    double avg_max_toxicity;
    double toxicity_probability;
    double perplexity;
};

struct PairingMatrix {
    std::vector<std::string> generator_labels;
    std::vector<std::string> detoxifier_labels;  // excludes the None column
    // cells[g][0] is the None column; cells[g][1+d] pairs generator g with
    // detoxifier d.
    std::vector<std::vector<PairingCell>> cells;
};

PairingMatrix pairing_matrix(const std::vector<std::string>& generator_ckpts,
                             const std::vector<std::string>& detoxifier_ckpts,
                             const ExperimentConfig& config);

// Report emission: TSV (one metric table per file) and JSON (full structure
// with config echo and seed). Byte-stable for identical inputs.
std::string report_tsv(const EvalReport& report);
nlohmann::ordered_json report_json(const EvalReport& report);
std::string grid_tsv(const GridResult& grid);
nlohmann::ordered_json grid_json(const GridResult& grid);
std::string pairing_tsv(const PairingMatrix& matrix, const std::string& metric);
nlohmann::ordered_json pairing_json(const PairingMatrix& matrix);

// Writes files under <out_dir>/<experiment_name>/ and returns their paths.
std::vector<std::string> emit_eval_outputs(const ExperimentConfig& config,
                                           const EvalOutcome& outcome);
std::vector<std::string> emit_grid_outputs(const ExperimentConfig& config,
                                           const GridResult& grid);
std::vector<std::string> emit_pairing_outputs(const ExperimentConfig& config,
                                              const PairingMatrix& matrix);

}  // namespace steerdec
