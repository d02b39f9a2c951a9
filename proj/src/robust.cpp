#include "bgan/robust.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "bgan/errors.hpp"
#include "bgan/gan_losses.hpp"

namespace bgan {

std::string to_string(RadialLaw law) { return law == RadialLaw::Gaussian ? "gaussian" : "cauchy"; }

RadialLaw parse_radial_law(const std::string& text) {
    std::string s = text;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "gaussian") return RadialLaw::Gaussian;
    if (s == "cauchy") return RadialLaw::Cauchy;
    throw ValidationError("unknown radial law '" + text + "' (valid: gaussian, cauchy)");
}

void EllipticalModel::validate() const {
    if (theta.size() == 0) throw ValidationError("elliptical: dimension must be positive");
    if (A.rows() != theta.size()) throw ValidationError("elliptical: A must have p rows");
    if (A.cols() == 0) throw ValidationError("elliptical: A must have at least one column");
    if (!theta.allFinite() || !A.allFinite()) throw ValidationError("elliptical: non-finite parameters");
}

EllipticalModel EllipticalModel::standard(std::size_t p, RadialLaw law, std::uint64_t seed) {
    const auto d = static_cast<Eigen::Index>(p);
    return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d), law, seed};
}

double draw_radius(RadialLaw law, std::size_t r, Rng& rng) {
    if (law == RadialLaw::Gaussian) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(r));
        return std::sqrt(chi2(rng));
    }
    std::cauchy_distribution<double> c(0.0, 1.0);
    return std::sqrt(static_cast<double>(r)) * std::abs(c(rng));
}

Eigen::VectorXd draw_direction(std::size_t r, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(r));
    double norm = 0.0;
    while (norm == 0.0) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = z(rng);
        norm = u.norm();
    }
    return u / norm;
}

Eigen::MatrixXd sample_elliptical(const EllipticalModel& model, std::size_t n) {
    model.validate();
    auto rng = make_rng(model.seed, streams::elliptical);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), model.theta.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = draw_radius(model.law, model.r(), rng);
        const Eigen::VectorXd u = draw_direction(model.r(), rng);
        out.row(static_cast<Eigen::Index>(i)) = (model.theta + xi * (model.A * u)).transpose();
    }
    return out;
}

void DiscClassSpec::validate() const {
    if (depth < 1) throw ValidationError("disc_class.depth must be >= 1");
    if (widths.size() != depth) throw ValidationError("disc_class.widths needs one entry per hidden layer");
    for (auto w : widths)
        if (w == 0) throw ValidationError("disc_class.widths must be positive");
    if (!(B > 0.0)) throw ValidationError("disc_class.B must be > 0");
    if (!(kappa > 0.0)) throw ValidationError("disc_class.kappa must be > 0");
}

nlohmann::json DiscClassSpec::to_json() const {
    return {{"depth", depth}, {"B", B}, {"kappa", kappa}, {"widths", widths}};
}

DiscClassSpec DiscClassSpec::from_json(const nlohmann::json& j) {
    DiscClassSpec s;
    s.depth = j.value("depth", s.depth);
    s.B = j.value("B", s.B);
    s.kappa = j.value("kappa", s.kappa);
    if (j.contains("widths"))
        s.widths = j.at("widths").get<std::vector<std::size_t>>();
    else
        s.widths.assign(s.depth, 20);
    return s;
}

double kappa_for(std::size_t p, std::size_t n, double eps, double c) {
    if (n == 0) throw ValidationError("kappa_for: n must be positive");
    return c * (std::sqrt(static_cast<double>(p) / static_cast<double>(n)) + eps);
}

double ramp(double x) noexcept { return std::max(std::min(x + 0.5, 1.0), 0.0); }

torch::Tensor ramp(const torch::Tensor& x) { return torch::clamp(x + 0.5, 0.0, 1.0); }

std::vector<double> project_l1_ball(std::vector<double> v, double radius) {
    double l1 = 0.0;
    for (double x : v) l1 += std::abs(x);
    if (l1 <= radius) return v;
    // Sort-based threshold for the simplex projection of |v|.
    std::vector<double> a(v.size());
    std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
    std::sort(a.begin(), a.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cum += a[k];
        const double t = (cum - radius) / static_cast<double>(k + 1);
        if (a[k] - t > 0.0) tau = t;
    }
    for (double& x : v) x = std::copysign(std::max(std::abs(x) - tau, 0.0), x);
    return v;
}

void project_rows_l1(torch::Tensor& weights, double radius) {
    torch::NoGradGuard no_grad;
    auto w = weights.to(torch::kDouble).contiguous();
    const auto rows = w.size(0), cols = w.size(1);
    double* data = w.data_ptr<double>();
    for (int64_t i = 0; i < rows; ++i) {
        std::vector<double> row(data + i * cols, data + (i + 1) * cols);
        row = project_l1_ball(std::move(row), radius);
        std::copy(row.begin(), row.end(), data + i * cols);
    }
    weights.copy_(w);
}

ConstrainedDiscImpl::ConstrainedDiscImpl(const DiscClassSpec& spec, std::size_t p) : spec_(spec) {
    spec_.validate();
    auto in = static_cast<int64_t>(p);
    for (std::size_t l = 0; l < spec_.depth; ++l) {
        const auto width = static_cast<int64_t>(spec_.widths[l]);
        hidden_.push_back(register_module("hidden" + std::to_string(l), torch::nn::Linear(in, width)));
        in = width;
    }
    out_ = register_parameter("out", torch::randn({in}) * (spec_.kappa / static_cast<double>(in)));
}

torch::Tensor ConstrainedDiscImpl::logit(const torch::Tensor& x) {
    auto h = ramp(hidden_.front()->forward(x));
    for (std::size_t l = 1; l < hidden_.size(); ++l) h = torch::relu(hidden_[l]->forward(h));
    return torch::matmul(h, out_);
}

torch::Tensor ConstrainedDiscImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logit(x)); }

void ConstrainedDiscImpl::project() {
    torch::NoGradGuard no_grad;
    for (auto& layer : hidden_) project_rows_l1(layer->weight, spec_.B);
    auto o = out_.view({1, -1});
    project_rows_l1(o, spec_.kappa);
}

std::pair<double, double> ConstrainedDiscImpl::constraint_norms() const {
    double hidden = 0.0;
    for (const auto& layer : hidden_)
        hidden = std::max(hidden, layer->weight.detach().abs().sum(1).max().item<double>());
    return {hidden, out_.detach().abs().sum().item<double>()};
}

void ConstrainedDiscImpl::zero_weights() {
    torch::NoGradGuard no_grad;
    for (auto& layer : hidden_) {
        layer->weight.zero_();
        layer->bias.zero_();
    }
    out_.zero_();
}

ConstrainedDisc build_disc_class(const DiscClassSpec& spec, std::size_t p, std::uint64_t seed) {
    torch::manual_seed(derive_seed(seed, streams::init, 7));
    ConstrainedDisc d(spec, p);
    d->to(torch::kDouble);
    d->project();
    return d;
}

nlohmann::json EstimateBudget::to_json() const {
    return {{"steps", steps},         {"d_steps", d_steps},   {"mc_draws", mc_draws},
            {"lr_d", lr_d},           {"lr_g", lr_g},         {"lr_decay", lr_decay},
            {"average_from", average_from}, {"tolerance", tolerance},
            {"estimate_scatter", estimate_scatter}, {"seed", seed}};
}

EstimateBudget EstimateBudget::from_json(const nlohmann::json& j) {
    EstimateBudget b;
    b.steps = j.value("steps", b.steps);
    b.d_steps = j.value("d_steps", b.d_steps);
    b.mc_draws = j.value("mc_draws", b.mc_draws);
    b.lr_d = j.value("lr_d", b.lr_d);
    b.lr_g = j.value("lr_g", b.lr_g);
    b.lr_decay = j.value("lr_decay", b.lr_decay);
    b.average_from = j.value("average_from", b.average_from);
    b.tolerance = j.value("tolerance", b.tolerance);
    b.estimate_scatter = j.value("estimate_scatter", b.estimate_scatter);
    b.seed = j.value("seed", b.seed);
    return b;
}

namespace {

torch::Tensor eigen_to_tensor(const Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    return torch::from_blob(rm.data(), {rm.rows(), rm.cols()}, torch::kDouble).clone();
}

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kDouble).contiguous();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        c.data_ptr<double>(), c.size(0), c.size(1));
    return m;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

// Radii and directions for `count` model draws; the generator maps them through theta + xi A u.
struct Noise {
    torch::Tensor xi;  // [count, 1]
    torch::Tensor u;   // [count, r]
};

Noise draw_noise(RadialLaw law, std::size_t count, std::size_t r, Rng& rng) {
    std::vector<double> xi(count), u(count * r);
    for (std::size_t i = 0; i < count; ++i) {
        xi[i] = draw_radius(law, r, rng);
        const auto d = draw_direction(r, rng);
        for (std::size_t k = 0; k < r; ++k) u[i * r + k] = d[static_cast<Eigen::Index>(k)];
    }
    return {torch::tensor(xi, torch::kDouble).view({-1, 1}),
            torch::tensor(u, torch::kDouble).view({static_cast<int64_t>(count), static_cast<int64_t>(r)})};
}

void set_lr(torch::optim::Adam& opt, double lr) {
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

}  // namespace

EstimateResult estimate(const Eigen::MatrixXd& samples, const ScoringRule& rule, const DiscClassSpec& spec,
                        const EstimateBudget& budget, RadialLaw law) {
    rule.validate();
    spec.validate();
    if (rule.is_wgan()) throw ValidationError("estimate: needs a beta-family scoring rule");
    if (!(std::abs(rule.alpha - rule.beta) < 1.0))
        throw ValidationError("estimate: rule must satisfy |alpha - beta| < 1, got " + rule.name());
    if (samples.rows() < 2 || samples.cols() < 1) throw ValidationError("estimate: need at least two samples");
    if (!samples.allFinite()) throw ValidationError("estimate: samples must be finite");
    if (budget.steps < 1 || budget.d_steps < 1 || budget.mc_draws < 1)
        throw ValidationError("estimate: budget steps, d_steps and mc_draws must be positive");
    if (!(budget.average_from >= 0.0 && budget.average_from < 1.0))
        throw ValidationError("estimate: average_from must be in [0,1)");

    const auto p = static_cast<std::size_t>(samples.cols());
    const auto n = samples.rows();

    // Coordinate-wise median and MAD start.
    Eigen::VectorXd theta0(samples.cols());
    Eigen::VectorXd scale0(samples.cols());
    for (Eigen::Index k = 0; k < samples.cols(); ++k) {
        std::vector<double> col(samples.col(k).data(), samples.col(k).data() + n);
        const double med = median(col);
        for (auto& v : col) v = std::abs(v - med);
        theta0[k] = med;
        scale0[k] = std::max(1.4826 * median(col), 1e-6);
    }

    auto theta = eigen_to_tensor(theta0.transpose()).view({-1}).requires_grad_(true);
    auto A = torch::diag(eigen_to_tensor(scale0.transpose()).view({-1}));
    A.requires_grad_(budget.estimate_scatter);
    std::vector<torch::Tensor> g_params{theta};
    if (budget.estimate_scatter) g_params.push_back(A);

    auto D = build_disc_class(spec, p, budget.seed);
    torch::optim::Adam opt_d(D->parameters(), torch::optim::AdamOptions(budget.lr_d).betas({0.5, 0.999}));
    torch::optim::Adam opt_g(g_params, torch::optim::AdamOptions(budget.lr_g).betas({0.5, 0.999}));

    const auto X = eigen_to_tensor(samples);
    auto rng = make_rng(budget.seed, streams::estimator);
    auto generate = [&](const Noise& z) { return theta.unsqueeze(0) + z.xi * torch::matmul(z.u, A.t()); };

    EstimateResult res;
    const int avg_start = static_cast<int>(budget.average_from * budget.steps);
    const int avg_mid = avg_start + (budget.steps - avg_start) / 2;
    Eigen::VectorXd sum_theta = Eigen::VectorXd::Zero(samples.cols()), sum_first = sum_theta;
    Eigen::MatrixXd sum_sigma = Eigen::MatrixXd::Zero(samples.cols(), samples.cols());
    int count = 0, count_first = 0;

    for (int t = 0; t < budget.steps; ++t) {
        for (int k = 0; k < budget.d_steps; ++k) {
            torch::Tensor fake;
            {
                torch::NoGradGuard no_grad;
                fake = generate(draw_noise(law, budget.mc_draws, p, rng));
            }
            auto loss = disc_loss_surrogate(rule, D->forward(X), D->forward(fake));
            if (!std::isfinite(loss.item<double>()))
                throw DivergenceError("estimate: discriminator loss became non-finite at step " + std::to_string(t));
            opt_d.zero_grad();
            loss.backward();
            opt_d.step();
            D->project();
            const auto [h, o] = D->constraint_norms();
            res.max_hidden_l1 = std::max(res.max_hidden_l1, h);
            res.max_output_l1 = std::max(res.max_output_l1, o);
        }
        set_lr(opt_g, budget.lr_g * std::pow(1.0 + t, -budget.lr_decay));
        auto g = gen_loss_surrogate(rule, D->forward(generate(draw_noise(law, budget.mc_draws, p, rng))));
        if (!std::isfinite(g.item<double>()))
            throw DivergenceError("estimate: generator loss became non-finite at step " + std::to_string(t));
        opt_g.zero_grad();
        g.backward();
        opt_g.step();

        if (t >= avg_start) {
            const Eigen::VectorXd th = to_eigen(theta.detach().view({-1, 1}));
            const Eigen::MatrixXd a = to_eigen(A.detach());
            sum_theta += th;
            sum_sigma += a * a.transpose();
            ++count;
            if (t < avg_mid) {
                sum_first += th;
                ++count_first;
            }
        }
    }

    res.theta = sum_theta / count;
    res.sigma = sum_sigma / count;
    Eigen::LLT<Eigen::MatrixXd> llt(res.sigma);
    res.A = llt.info() == Eigen::Success ? Eigen::MatrixXd(llt.matrixL()) : to_eigen(A.detach());
    if (count_first > 0 && count > count_first) {
        const Eigen::VectorXd first = sum_first / count_first;
        const Eigen::VectorXd second = (sum_theta - sum_first) / (count - count_first);
        const double unit = std::sqrt(std::max(res.sigma.trace() / static_cast<double>(p), 1e-12));
        res.drift = (first - second).norm() / unit;
    }
    res.warning = res.drift > budget.tolerance;
    return res;
}

double operator_norm(const Eigen::MatrixXd& m, double tol, int max_iter) {
    if (m.rows() != m.cols()) throw ValidationError("operator_norm: matrix must be square");
    if (m.size() == 0) return 0.0;
    const Eigen::MatrixXd g = m.transpose() * m;
    Rng rng(0x6f706e6fULL);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd v(m.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = z(rng);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = g * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double next = w.dot(g * w);
        const bool done = std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next));
        lambda = next;
        v = w;
        if (done && it > 10) break;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

void SweepSpec::validate() const {
    if (p == 0) throw ValidationError("sweep: p must be positive");
    if (n_grid.empty()) throw ValidationError("sweep: n grid is empty");
    if (eps_grid.empty()) throw ValidationError("sweep: epsilon grid is empty");
    for (auto n : n_grid)
        if (n < 2) throw ValidationError("sweep: every n must be >= 2");
    for (double e : eps_grid)
        if (!(e >= 0.0 && e < 0.5)) throw ValidationError("sweep: epsilon must lie in [0, 0.5)");
    if (repetitions < 1) throw ValidationError("sweep: repetitions must be >= 1");
    if (!(kappa_c > 0.0)) throw ValidationError("sweep: kappa_c must be > 0");
}

nlohmann::json SweepSpec::to_json() const {
    return {{"p", p},
            {"n", n_grid},
            {"epsilon", eps_grid},
            {"repetitions", repetitions},
            {"law", to_string(law)},
            {"far", far},
            {"kappa_c", kappa_c},
            {"disc", disc.to_json()},
            {"budget", budget.to_json()},
            {"seed", seed}};
}

Eigen::MatrixXd sample_contaminated(const EllipticalModel& model, std::size_t n, double eps, double far,
                                    std::uint64_t seed) {
    EllipticalModel m = model;
    m.seed = seed;
    Eigen::MatrixXd x = sample_elliptical(m, n);
    if (eps == 0.0) return x;
    auto rng = make_rng(seed, streams::contamination);
    std::bernoulli_distribution coin(eps);
    const Eigen::VectorXd q = model.theta + Eigen::VectorXd::Constant(model.theta.size(), far);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (coin(rng)) x.row(i) = q.transpose();
    return x;
}

SweepTable scaling_sweep(const SweepSpec& spec, const ScoringRule& rule) {
    spec.validate();
    const auto truth = EllipticalModel::standard(spec.p, spec.law);
    SweepTable table;
    for (double eps : spec.eps_grid) {
        for (auto n : spec.n_grid) {
            for (int rep = 0; rep < spec.repetitions; ++rep) {
                const auto cell_seed = derive_seed(spec.seed, streams::estimator,
                                                   (static_cast<std::uint64_t>(n) << 24) ^
                                                       (static_cast<std::uint64_t>(std::llround(eps * 1e4)) << 8) ^
                                                       static_cast<std::uint64_t>(rep));
                const auto x = sample_contaminated(truth, n, eps, spec.far, cell_seed);
                DiscClassSpec disc = spec.disc;
                disc.kappa = kappa_for(spec.p, n, eps, spec.kappa_c);
                EstimateBudget budget = spec.budget;
                budget.seed = cell_seed;
                const auto est = estimate(x, rule, disc, budget, spec.law);
                SweepRow row;
                row.p = spec.p;
                row.n = n;
                row.epsilon = eps;
                row.rep = rep;
                row.theta_err_sq = (est.theta - truth.theta).squaredNorm();
                const double op = operator_norm(est.sigma - truth.sigma());
                row.sigma_err_op_sq = op * op;
                row.mean_err_sq = (Eigen::VectorXd(x.colwise().mean().transpose()) - truth.theta).squaredNorm();
                row.warning = est.warning;
                table.rows.push_back(row);
            }
        }
    }
    return table;
}

std::string SweepTable::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "p,n,epsilon,rep,theta_err_sq,sigma_err_op_sq\n";
    for (const auto& r : rows)
        os << r.p << ',' << r.n << ',' << r.epsilon << ',' << r.rep << ',' << r.theta_err_sq << ','
           << r.sigma_err_op_sq << '\n';
    return os.str();
}

namespace {

template <class F>
double cell_median(const std::vector<SweepRow>& rows, std::size_t n, double eps, F field) {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.n == n && r.epsilon == eps) v.push_back(field(r));
    return median(v);
}

}  // namespace

double SweepTable::median_theta(std::size_t n, double eps) const {
    return cell_median(rows, n, eps, [](const SweepRow& r) { return r.theta_err_sq; });
}

double SweepTable::median_sigma(std::size_t n, double eps) const {
    return cell_median(rows, n, eps, [](const SweepRow& r) { return r.sigma_err_op_sq; });
}

double SweepTable::median_mean(std::size_t n, double eps) const {
    return cell_median(rows, n, eps, [](const SweepRow& r) { return r.mean_err_sq; });
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope: need two or more points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw ValidationError("loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw ValidationError("loglog_slope: x values are all equal");
    return sxy / sxx;
}

nlohmann::json SweepTable::slope_summary() const {
    std::map<double, std::vector<std::size_t>> ns;
    for (const auto& r : rows) {
        auto& v = ns[r.epsilon];
        if (std::find(v.begin(), v.end(), r.n) == v.end()) v.push_back(r.n);
    }
    nlohmann::json out = nlohmann::json::array();
    for (auto& [eps, grid] : ns) {
        std::sort(grid.begin(), grid.end());
        std::vector<double> x, th, sg;
        nlohmann::json cells = nlohmann::json::array();
        for (auto n : grid) {
            x.push_back(static_cast<double>(n));
            th.push_back(median_theta(n, eps));
            sg.push_back(median_sigma(n, eps));
            cells.push_back({{"n", n}, {"median_theta_err_sq", th.back()}, {"median_sigma_err_op_sq", sg.back()}});
        }
        nlohmann::json entry{{"epsilon", eps}, {"cells", cells}};
        if (grid.size() >= 2) {
            entry["theta_slope"] = loglog_slope(x, th);
            entry["sigma_slope"] = loglog_slope(x, sg);
        } else {
            entry["theta_slope"] = nullptr;
            entry["sigma_slope"] = nullptr;
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace bgan
