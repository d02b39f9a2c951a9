#pragma once

#include <span>
#include <string>

#include <json.hpp>

namespace bgan {

enum class RuleKind { Beta, Wgan };

/// The (alpha, beta) proper-scoring-rule family
///   S(t,1) = -int_t^1 c^(alpha-1) (1-c)^beta dc
///   S(t,0) = -int_0^t c^alpha (1-c)^(beta-1) dc
/// plus the WGAN surrogate S(t,1) = t, S(t,0) = -t.
///
/// Beta-kind arguments are clamped into [delta, 1-delta]. When beta == -1 (alpha == -1)
/// the label-1 (label-0) integral diverges at its fixed endpoint; that endpoint is then
/// moved in to 1-delta (delta), which only shifts S by a constant.
struct ScoringRule {
    RuleKind kind = RuleKind::Beta;
    double alpha = 0.0;
    double beta = 0.0;
    double delta = 1e-6;

    static ScoringRule beta_family(double alpha, double beta, double delta = 1e-6) {
        return {RuleKind::Beta, alpha, beta, delta};
    }
    static ScoringRule wgan() { return {RuleKind::Wgan, 0.0, 0.0, 0.0}; }

    bool is_wgan() const noexcept { return kind == RuleKind::Wgan; }
    void validate() const;

    /// "(0.5,0.5)" or "wgan".
    std::string name() const;
    /// Accepts "wgan" or "alpha,beta".
    static ScoringRule parse(const std::string& text);

    nlohmann::json to_json() const;
    static ScoringRule from_json(const nlohmann::json& j);
};

/// S(t, label). label must be 0 or 1; NaN t is rejected with ValidationError.
/// S(1,1) and S(0,0) are exactly 0 (empty integration range).
double score(const ScoringRule& rule, double t, int label);

/// dS/dt: t^(alpha-1)(1-t)^beta for label 1, -t^alpha (1-t)^(beta-1) for label 0, +-1 for WGAN.
double score_derivative(const ScoringRule& rule, double t, int label);

/// Disc loss -(mean S(d_real,1) + mean S(d_fake,0)) and gen loss mean S(d_fake,0).
struct GanObjective {
    double disc_loss;
    double gen_loss;
};

/// Beta kind requires every output in [0,1]; throws ValidationError otherwise.
GanObjective gan_objective(const ScoringRule& rule, std::span<const double> d_real,
                           std::span<const double> d_fake);

/// Reconstruction loss l_p with weight lambda.
struct ReconLoss {
    int p = 1;
    double lambda = 10.0;

    void validate() const;
    nlohmann::json to_json() const { return {{"p", p}, {"lambda", lambda}}; }
    static ReconLoss from_json(const nlohmann::json& j);
};

}  // namespace bgan
