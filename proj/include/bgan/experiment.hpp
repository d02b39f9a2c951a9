#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bgan/clustering.hpp"
#include "bgan/contamination.hpp"
#include "bgan/metrics.hpp"
#include "bgan/networks.hpp"
#include "bgan/nlm.hpp"
#include "bgan/robust.hpp"
#include "bgan/scoring_rule.hpp"
#include "bgan/synthetic.hpp"
#include "bgan/trainer.hpp"

namespace bgan {

struct DataSpec {
    std::size_t train_per_conformation = 400;
    std::size_t test_per_conformation = 8;
    std::size_t cluster_per_class = 30;
};

struct SweepGrid {
    std::vector<std::pair<double, double>> alpha_beta;
    std::vector<double> lambda;
    std::vector<double> epsilon;
    std::vector<ContaminationType> types;
};

/// The eight (alpha, beta) pairs of the scoring-rule ablation.
std::vector<std::pair<double, double>> default_alpha_beta_grid();
/// {0.1, 1, 5, 10, 50, 100, 500, 10000}.
std::vector<double> default_lambda_grid();

/// One document holding every section. `rule` empty means autoencoder-only training.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    PhantomSpec phantom;
    ForwardModelSpec forward;
    DataSpec data;
    ContaminationSpec contamination;
    std::optional<ScoringRule> rule = ScoringRule::beta_family(0.5, 0.5);
    ReconLoss recon;
    ArchSpec arch;
    TrainConfig train;
    MetricsConfig metrics;
    EmbeddingSpec embedding;
    NlmSpec nlm;
    SweepSpec robust;
    ScoringRule robust_rule = ScoringRule::beta_family(0.5, 0.5);
    SweepGrid sweep{default_alpha_beta_grid(), default_lambda_grid(), {0.0, 0.1, 0.2, 0.3},
                    {ContaminationType::A, ContaminationType::B, ContaminationType::C}};
    std::string runs_dir = "runs";

    /// Section-qualified messages ("[train] ..."); checks head/rule and image sizes agree.
    void validate() const;
    /// Train settings with rule, recon and seed filled in from their own sections.
    TrainConfig train_config() const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; "arch.head": "AUTO" follows the rule.
    static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Text form of a rule: "wgan", "none" or "alpha,beta".
std::string rule_text(const std::optional<ScoringRule>& rule);
std::optional<ScoringRule> parse_rule_text(const std::string& text);

/// Sets a dotted key ("train.iterations") in a config document. The value is coerced to the
/// type already stored there; lists accept comma-separated text. Unknown keys are errors.
void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value);

/// Defaults, then the file (if any), then overrides; validated.
ExperimentConfig load_experiment(const std::optional<std::filesystem::path>& file,
                                 const std::vector<std::pair<std::string, std::string>>& overrides);

std::vector<double> parse_number_list(const std::string& text);

/// runs/<timestamp>-<8 hex of the config hash>, suffixed if it already exists.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const nlohmann::json& config);

}  // namespace bgan
