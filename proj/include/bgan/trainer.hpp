#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgan/image_stack.hpp"
#include "bgan/networks.hpp"
#include "bgan/scoring_rule.hpp"

namespace bgan {

enum class Sampling { WithReplacement, EpochShuffle };

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Hyperparameters of the joint GAN + l_p autoencoder training loop.
/// An empty `rule` trains the generator on the reconstruction loss alone.
struct TrainConfig {
    std::optional<ScoringRule> rule = ScoringRule::beta_family(0.5, 0.5);
    ReconLoss recon;
    int k_d = 1;
    int k_g = 2;
    double lr_d = 1e-3;
    double lr_g = 1e-2;
    int batch = 20;
    /// Gradient-penalty weight; unset means 10 for WGAN and 0 otherwise.
    std::optional<double> mu;
    AdamParams adam;
    int iterations = 1000;
    int eval_interval = 10;
    Sampling sampling = Sampling::WithReplacement;
    std::uint64_t seed = 0;
    bool deterministic = true;

    double effective_mu() const;
    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainRecord {
    int iteration = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double gp = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    /// Columns iteration,train_mse,test_mse,d_loss,g_loss,gp,wall_ms. Wall time is
    /// written as 0 when `with_wall_time` is false so the file is reproducible.
    std::string to_csv(bool with_wall_time = true) const;
    std::vector<double> test_mse() const;
};

/// Observers for auditing update order; called after each optimizer step.
struct TrainHooks {
    std::function<void(int iteration, int step)> on_disc_step;
    std::function<void(int iteration, int step)> on_gen_step;
};

struct PairedStacks {
    const ImageStack& refs;
    const ImageStack& noisy;
};

struct TrainResult {
    Generator generator{nullptr};
    Discriminator discriminator{nullptr};
    TrainLog log;
};

/// Alternating updates: per outer iteration one minibatch of `batch` pairs, k_d
/// discriminator steps on -(mean S(D(x),1) + mean S(D(G(y)),0)) (+ gradient penalty for
/// WGAN), then k_g generator steps on mean S(D(G(y)),0) + lambda * l_p(G(y), x).
/// Evaluates every `eval_interval` iterations and at the last one. Throws
/// DivergenceError as soon as a loss is non-finite.
TrainResult train(const PairedStacks& train_pairs, const TrainConfig& cfg, const ArchSpec& arch,
                  const std::optional<PairedStacks>& test_pairs = std::nullopt,
                  const TrainHooks* hooks = nullptr);

/// Generator-only training on the unweighted reconstruction loss (rule ignored).
TrainResult train_autoencoder_only(const PairedStacks& train_pairs, const TrainConfig& cfg,
                                   const ArchSpec& arch,
                                   const std::optional<PairedStacks>& test_pairs = std::nullopt,
                                   const TrainHooks* hooks = nullptr);

/// x^ = G(y) image by image, in batches.
ImageStack denoise(Generator& generator, const ImageStack& noisy, std::size_t batch = 64);

/// Mean per-image MSE of G(noisy) against refs.
double evaluate_mse(Generator& generator, const PairedStacks& pairs);

struct WindowStats {
    double stddev = 0.0;
    double range = 0.0;
};

struct StabilityReport {
    WindowStats a;
    WindowStats b;
    double std_ratio = 1.0;    // a.stddev / b.stddev
    double range_ratio = 1.0;  // a.range / b.range
};

/// Trailing-window spread of test MSE in two logs. 0/0 reads as ratio 1.
StabilityReport stability_report(const TrainLog& log_a, const TrainLog& log_b, std::size_t window);

}  // namespace bgan
