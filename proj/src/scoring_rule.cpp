#include "bgan/scoring_rule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bgan/errors.hpp"

namespace bgan {

namespace {

constexpr double kSplit = 0.5;
constexpr int kMaxTerms = 400;

// (hi^e - lo^e) / e, with the e -> 0 limit log(hi/lo). lo may be 0 when e > 0.
double power_integral(double lo, double hi, double e) {
    if (lo == 0.0) return std::pow(hi, e) / e;
    const double span = std::log(hi) - std::log(lo);
    if (e == 0.0) return span;
    return std::pow(lo, e) * std::expm1(e * span) / e;
}

// int_lo^hi c^(a-1) (1-c)^b dc for 0 < lo < hi <= 1/2, expanding (1-c)^b in c.
double lower_series(double a, double b, double lo, double hi) {
    double coef = 1.0;  // (-b)_k / k!
    double sum = 0.0;
    for (int k = 0; k < kMaxTerms; ++k) {
        const double term = coef * power_integral(lo, hi, a + k);
        sum += term;
        if (k > 4 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
        coef *= (-b + k) / (k + 1.0);
        if (coef == 0.0) break;
    }
    return sum;
}

// int_{s_lo}^{s_hi} s^b (1-s)^(a-1) ds for 0 <= s_lo < s_hi <= 1/2, expanding (1-s)^(a-1).
double upper_series(double a, double b, double s_lo, double s_hi) {
    double coef = 1.0;  // (1-a)_k / k!
    double sum = 0.0;
    for (int k = 0; k < kMaxTerms; ++k) {
        const double term = coef * power_integral(s_lo, s_hi, b + k + 1.0);
        sum += term;
        if (k > 4 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
        coef *= (1.0 - a + k) / (k + 1.0);
        if (coef == 0.0) break;
    }
    return sum;
}

// int_t^U c^(a-1) (1-c)^b dc with U = 1, or U = 1 - delta when the integral diverges at 1.
double tail_integral(double a, double b, double t, double delta) {
    const double s_lo = b <= -1.0 ? delta : 0.0;
    double total = 0.0;
    const double mid = std::max(t, kSplit);
    if (1.0 - mid > s_lo) total += upper_series(a, b, s_lo, 1.0 - mid);
    if (t < kSplit) total += lower_series(a, b, t, kSplit);
    return total;
}

void check_label(int label) {
    if (label != 0 && label != 1) throw ValidationError("score label must be 0 or 1");
}

}  // namespace

void ScoringRule::validate() const {
    if (kind == RuleKind::Wgan) return;
    if (!(alpha >= -1.0 && alpha <= 1.0 && beta >= -1.0 && beta <= 1.0))
        throw ValidationError("rule: alpha and beta must lie in [-1,1]");
    if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("rule: delta must lie in (0, 0.5)");
}

std::string ScoringRule::name() const {
    if (is_wgan()) return "wgan";
    std::ostringstream os;
    os << "(" << alpha << "," << beta << ")";
    return os.str();
}

ScoringRule ScoringRule::parse(const std::string& text) {
    if (text == "wgan" || text == "WGAN") return wgan();
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw ValidationError("rule must be 'wgan' or 'alpha,beta' (got '" + text + "')");
    try {
        std::size_t used = 0;
        const double a = std::stod(text.substr(0, comma));
        const double b = std::stod(text.substr(comma + 1), &used);
        if (used != text.size() - comma - 1) throw std::invalid_argument(text);
        auto r = beta_family(a, b);
        r.validate();
        return r;
    } catch (const std::logic_error&) {
        throw ValidationError("rule must be 'wgan' or 'alpha,beta' (got '" + text + "')");
    }
}

nlohmann::json ScoringRule::to_json() const {
    return {{"kind", is_wgan() ? "WGAN" : "BETA"}, {"alpha", alpha}, {"beta", beta}, {"delta", delta}};
}

ScoringRule ScoringRule::from_json(const nlohmann::json& j) {
    ScoringRule r;
    const auto kind = j.value("kind", std::string("BETA"));
    if (kind == "WGAN" || kind == "wgan") {
        r = wgan();
    } else if (kind == "BETA" || kind == "beta") {
        r.alpha = j.value("alpha", 0.0);
        r.beta = j.value("beta", 0.0);
        r.delta = j.value("delta", 1e-6);
    } else {
        throw ValidationError("rule.kind must be BETA or WGAN (got '" + kind + "')");
    }
    r.validate();
    return r;
}

double score(const ScoringRule& rule, double t, int label) {
    check_label(label);
    if (std::isnan(t)) throw ValidationError("score: t is NaN");
    if (rule.is_wgan()) return label == 1 ? t : -t;
    if (label == 1 && t >= 1.0) return 0.0;
    if (label == 0 && t <= 0.0) return 0.0;
    t = std::clamp(t, rule.delta, 1.0 - rule.delta);
    const double a = rule.alpha, b = rule.beta;
    if (a == 0.0 && b == 0.0) return label == 1 ? std::log(t) : std::log1p(-t);
    if (a == 1.0 && b == 1.0) return label == 1 ? -0.5 * (1.0 - t) * (1.0 - t) : -0.5 * t * t;
    // S(t,0) under (a,b) is S(1-t,1) under (b,a).
    return label == 1 ? -tail_integral(a, b, t, rule.delta) : -tail_integral(b, a, 1.0 - t, rule.delta);
}

double score_derivative(const ScoringRule& rule, double t, int label) {
    check_label(label);
    if (std::isnan(t)) throw ValidationError("score_derivative: t is NaN");
    if (rule.is_wgan()) return label == 1 ? 1.0 : -1.0;
    t = std::clamp(t, rule.delta, 1.0 - rule.delta);
    if (label == 1) return std::pow(t, rule.alpha - 1.0) * std::pow(1.0 - t, rule.beta);
    return -std::pow(t, rule.alpha) * std::pow(1.0 - t, rule.beta - 1.0);
}

GanObjective gan_objective(const ScoringRule& rule, std::span<const double> d_real,
                           std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty()) throw ValidationError("gan_objective: empty batch");
    auto mean_score = [&](std::span<const double> d, int label) {
        double s = 0.0;
        for (double v : d) {
            if (!rule.is_wgan() && !(v >= 0.0 && v <= 1.0))
                throw ValidationError("gan_objective: discriminator output outside [0,1] for a beta-family rule");
            s += score(rule, v, label);
        }
        return s / static_cast<double>(d.size());
    };
    const double real = mean_score(d_real, 1);
    const double fake = mean_score(d_fake, 0);
    return {-(real + fake), fake};
}

void ReconLoss::validate() const {
    if (p != 1 && p != 2) throw ValidationError("recon.p must be 1 or 2");
    if (!(lambda >= 0.0)) throw ValidationError("recon.lambda must be >= 0");
}

ReconLoss ReconLoss::from_json(const nlohmann::json& j) {
    ReconLoss r;
    r.p = j.value("p", r.p);
    r.lambda = j.value("lambda", r.lambda);
    r.validate();
    return r;
}

}  // namespace bgan
