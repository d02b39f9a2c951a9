#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>
#include <torch/torch.h>

#include "bgan/rng.hpp"
#include "bgan/scoring_rule.hpp"

namespace bgan {

enum class RadialLaw { Gaussian, Cauchy };

std::string to_string(RadialLaw law);
RadialLaw parse_radial_law(const std::string& text);

/// X = theta + xi A U with U uniform on the unit sphere of R^r.
/// Gaussian: xi ~ chi_r, so X ~ N(theta, A A^T). Cauchy: xi = sqrt(r) |C|, C standard Cauchy.
struct EllipticalModel {
    Eigen::VectorXd theta;
    Eigen::MatrixXd A;  // p x r
    RadialLaw law = RadialLaw::Gaussian;
    std::uint64_t seed = 0;

    std::size_t p() const noexcept { return static_cast<std::size_t>(theta.size()); }
    std::size_t r() const noexcept { return static_cast<std::size_t>(A.cols()); }
    Eigen::MatrixXd sigma() const { return A * A.transpose(); }
    void validate() const;

    static EllipticalModel standard(std::size_t p, RadialLaw law = RadialLaw::Gaussian, std::uint64_t seed = 0);
};

/// Draws the radial part xi for `law` in dimension r.
double draw_radius(RadialLaw law, std::size_t r, Rng& rng);
/// Uniform direction on the unit sphere of R^r.
Eigen::VectorXd draw_direction(std::size_t r, Rng& rng);

/// n x p matrix of i.i.d. draws.
Eigen::MatrixXd sample_elliptical(const EllipticalModel& model, std::size_t n);

/// Constrained discriminator family: a ramp bottom layer, depth-1 ReLU layers above it,
/// and a bias-free sigmoid output sum_j w_j g_j(x) with sum |w_j| <= kappa. Each hidden
/// unit's incoming weights have l1 norm <= B.
struct DiscClassSpec {
    std::size_t depth = 1;
    double B = 2.0;
    double kappa = 0.1;
    std::vector<std::size_t> widths{20};  // one entry per hidden layer

    void validate() const;
    nlohmann::json to_json() const;
    static DiscClassSpec from_json(const nlohmann::json& j);
};

/// kappa = c (sqrt(p / n) + eps).
double kappa_for(std::size_t p, std::size_t n, double eps, double c = 1.0);

double ramp(double x) noexcept;
torch::Tensor ramp(const torch::Tensor& x);

/// Euclidean projection of v onto {u : ||u||_1 <= radius}.
std::vector<double> project_l1_ball(std::vector<double> v, double radius);
/// Row-wise projection of a 2-D tensor in place.
void project_rows_l1(torch::Tensor& weights, double radius);

class ConstrainedDiscImpl : public torch::nn::Module {
public:
    ConstrainedDiscImpl(const DiscClassSpec& spec, std::size_t p);
    /// Logit sum_j w_j g_j(x).
    torch::Tensor logit(const torch::Tensor& x);
    /// sigmoid(logit).
    torch::Tensor forward(const torch::Tensor& x);
    /// Projects every constrained weight vector onto its l1 ball.
    void project();
    /// Largest l1 norm over hidden units, and the output layer's l1 norm.
    std::pair<double, double> constraint_norms() const;
    void zero_weights();
    const DiscClassSpec& spec() const noexcept { return spec_; }

private:
    DiscClassSpec spec_;
    std::vector<torch::nn::Linear> hidden_;
    torch::Tensor out_;
};
TORCH_MODULE(ConstrainedDisc);

ConstrainedDisc build_disc_class(const DiscClassSpec& spec, std::size_t p, std::uint64_t seed = 0);

struct EstimateBudget {
    int steps = 1500;
    int d_steps = 5;
    std::size_t mc_draws = 500;  // fresh model draws per step
    double lr_d = 0.05;
    double lr_g = 0.02;
    double lr_decay = 0.5;       // lr_g * (1 + t)^-lr_decay
    double average_from = 0.5;   // Polyak average over iterates after this fraction
    double tolerance = 0.05;     // drift between the two halves of the average window
    bool estimate_scatter = true;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static EstimateBudget from_json(const nlohmann::json& j);
};

struct EstimateResult {
    Eigen::VectorXd theta;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd A;
    /// Set when the averaged iterate still drifted by more than the tolerance.
    bool warning = false;
    double drift = 0.0;
    /// Worst post-step constraint norms seen over the run.
    double max_hidden_l1 = 0.0;
    double max_output_l1 = 0.0;
};

/// Scoring-rule GAN estimate of (theta, Sigma): the generator pushes (theta, A) through
/// the elliptical sampler, the discriminator is the constrained class above.
/// Requires a beta-family rule with |alpha - beta| < 1.
EstimateResult estimate(const Eigen::MatrixXd& samples, const ScoringRule& rule, const DiscClassSpec& spec,
                        const EstimateBudget& budget, RadialLaw law = RadialLaw::Gaussian);

/// Largest singular value of a square matrix by power iteration on M^T M.
double operator_norm(const Eigen::MatrixXd& m, double tol = 1e-14, int max_iter = 100000);

struct SweepSpec {
    std::size_t p = 2;
    std::vector<std::size_t> n_grid{250, 500, 1000, 2000, 4000};
    std::vector<double> eps_grid{0.0};
    int repetitions = 5;
    RadialLaw law = RadialLaw::Gaussian;
    /// Contaminating point mass sits at theta + far * (1, ..., 1).
    double far = 10.0;
    double kappa_c = 1.0;
    DiscClassSpec disc;
    EstimateBudget budget;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct SweepRow {
    std::size_t p = 0;
    std::size_t n = 0;
    double epsilon = 0.0;
    int rep = 0;
    double theta_err_sq = 0.0;
    double sigma_err_op_sq = 0.0;
    double mean_err_sq = 0.0;  // contaminated sample mean, as a reference
    bool warning = false;
};

struct SweepTable {
    std::vector<SweepRow> rows;

    /// Columns p,n,epsilon,rep,theta_err_sq,sigma_err_op_sq.
    std::string to_csv() const;
    double median_theta(std::size_t n, double eps) const;
    double median_sigma(std::size_t n, double eps) const;
    double median_mean(std::size_t n, double eps) const;
    /// Least-squares slope of log median error against log n, per epsilon.
    nlohmann::json slope_summary() const;
};

/// Contaminated draws: each point comes from Q (the far point mass) with probability eps.
Eigen::MatrixXd sample_contaminated(const EllipticalModel& model, std::size_t n, double eps, double far,
                                    std::uint64_t seed);

SweepTable scaling_sweep(const SweepSpec& spec, const ScoringRule& rule);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bgan
