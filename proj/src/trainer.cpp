#include "bgan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bgan/errors.hpp"
#include "bgan/gan_losses.hpp"
#include "bgan/rng.hpp"

namespace bgan {

double TrainConfig::effective_mu() const {
    if (mu) return *mu;
    return rule && rule->is_wgan() ? 10.0 : 0.0;
}

void TrainConfig::validate() const {
    if (rule) rule->validate();
    recon.validate();
    if (k_d < 1 || k_g < 1) throw ValidationError("train: k_d and k_g must be >= 1");
    if (batch < 1) throw ValidationError("train: batch must be >= 1");
    if (!(lr_d > 0.0 && lr_g > 0.0)) throw ValidationError("train: learning rates must be > 0");
    if (iterations < 0) throw ValidationError("train: iterations must be >= 0");
    if (eval_interval < 1) throw ValidationError("train: eval_interval must be >= 1");
    if (mu && *mu < 0.0) throw ValidationError("train: mu must be >= 0");
    if (effective_mu() > 0.0 && !(rule && rule->is_wgan()))
        throw ValidationError("train: a gradient penalty (mu > 0) requires the WGAN rule");
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j{{"rule", rule ? rule->to_json() : nlohmann::json(nullptr)},
                     {"recon", recon.to_json()},
                     {"k_d", k_d},
                     {"k_g", k_g},
                     {"lr_d", lr_d},
                     {"lr_g", lr_g},
                     {"batch", batch},
                     {"mu", effective_mu()},
                     {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
                     {"iterations", iterations},
                     {"eval_interval", eval_interval},
                     {"sampling", sampling == Sampling::WithReplacement ? "with_replacement" : "epoch_shuffle"},
                     {"seed", seed},
                     {"deterministic", deterministic}};
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("rule")) {
        if (j.at("rule").is_null())
            c.rule.reset();
        else
            c.rule = ScoringRule::from_json(j.at("rule"));
    }
    if (j.contains("recon")) c.recon = ReconLoss::from_json(j.at("recon"));
    c.k_d = j.value("k_d", c.k_d);
    c.k_g = j.value("k_g", c.k_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.batch = j.value("batch", c.batch);
    if (j.contains("mu") && !j.at("mu").is_null()) c.mu = j.at("mu").get<double>();
    if (j.contains("adam")) {
        c.adam.beta1 = j.at("adam").value("beta1", c.adam.beta1);
        c.adam.beta2 = j.at("adam").value("beta2", c.adam.beta2);
        c.adam.eps = j.at("adam").value("eps", c.adam.eps);
    }
    c.iterations = j.value("iterations", c.iterations);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    const auto s = j.value("sampling", std::string("with_replacement"));
    if (s == "with_replacement")
        c.sampling = Sampling::WithReplacement;
    else if (s == "epoch_shuffle")
        c.sampling = Sampling::EpochShuffle;
    else
        throw ValidationError("train.sampling must be with_replacement or epoch_shuffle");
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    return c;
}

std::string TrainLog::to_csv(bool with_wall_time) const {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,train_mse,test_mse,d_loss,g_loss,gp,wall_ms\n";
    for (const auto& r : records)
        os << r.iteration << ',' << r.train_mse << ',' << r.test_mse << ',' << r.d_loss << ',' << r.g_loss
           << ',' << r.gp << ',' << (with_wall_time ? r.wall_ms : 0.0) << '\n';
    return os.str();
}

std::vector<double> TrainLog::test_mse() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.test_mse);
    return out;
}

namespace {

class BatchSampler {
public:
    BatchSampler(std::size_t n, const TrainConfig& cfg)
        : n_(n), batch_(static_cast<std::size_t>(cfg.batch)), mode_(cfg.sampling),
          rng_(make_rng(cfg.seed, streams::minibatch)), order_(n) {
        std::iota(order_.begin(), order_.end(), 0);
        cursor_ = n_;
    }

    torch::Tensor next() {
        std::vector<int64_t> idx(batch_);
        if (mode_ == Sampling::WithReplacement) {
            std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
            for (auto& i : idx) i = static_cast<int64_t>(pick(rng_));
        } else {
            for (auto& i : idx) {
                if (cursor_ == n_) reshuffle();
                i = static_cast<int64_t>(order_[cursor_++]);
            }
        }
        return torch::tensor(idx, torch::kLong);
    }

private:
    void reshuffle() {
        for (std::size_t i = n_ - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order_[i], order_[pick(rng_)]);
        }
        cursor_ = 0;
    }

    std::size_t n_;
    std::size_t batch_;
    Sampling mode_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_;
};

double batch_mse(const torch::Tensor& a, const torch::Tensor& b) {
    return (a.detach() - b.detach()).to(torch::kDouble).square().mean().item<double>();
}

void require_finite(double v, const char* what, int iteration) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << what << " became non-finite (" << v << ") at iteration " << iteration;
        throw DivergenceError(os.str());
    }
}

void check_inputs(const PairedStacks& pairs, const ArchSpec& arch, const char* what) {
    require_aligned(pairs.refs, pairs.noisy, what);
    if (pairs.refs.height() != arch.image_size || pairs.refs.width() != arch.image_size) {
        std::ostringstream os;
        os << what << ": images are " << pairs.refs.height() << "x" << pairs.refs.width()
           << " but the architecture expects " << arch.image_size << "x" << arch.image_size;
        throw ValidationError(os.str());
    }
}

torch::optim::Adam make_adam(std::vector<torch::Tensor> params, double lr, const AdamParams& a) {
    return torch::optim::Adam(std::move(params),
                              torch::optim::AdamOptions(lr).betas({a.beta1, a.beta2}).eps(a.eps));
}

TrainResult run_training(const PairedStacks& train_pairs, const TrainConfig& cfg, const ArchSpec& arch,
                         const std::optional<PairedStacks>& test_pairs, const TrainHooks* hooks,
                         bool adversarial) {
    cfg.validate();
    arch.validate();
    check_inputs(train_pairs, arch, "train");
    if (test_pairs) check_inputs(*test_pairs, arch, "train (test set)");
    if (train_pairs.refs.empty()) throw ValidationError("train: no training pairs");
    std::optional<ScoringRule> rule = adversarial ? cfg.rule : std::nullopt;
    if (adversarial && !rule) throw ValidationError("train: adversarial training needs a scoring rule");
    if (rule && rule->is_wgan() != (arch.head == Head::Linear))
        throw ValidationError(rule->is_wgan() ? "train: the WGAN rule needs a LINEAR discriminator head"
                                              : "train: beta-family rules need a SIGMOID discriminator head");
    if (cfg.deterministic) at::set_num_threads(1);

    TrainResult result;
    result.generator = build_generator(arch);
    auto& G = result.generator;
    auto opt_g = make_adam(G->parameters(), cfg.lr_g, cfg.adam);
    std::optional<torch::optim::Adam> opt_d;
    if (rule) {
        result.discriminator = build_discriminator(arch);
        opt_d.emplace(make_adam(result.discriminator->parameters(), cfg.lr_d, cfg.adam));
    }
    auto& D = result.discriminator;
    const double mu = rule ? cfg.effective_mu() : 0.0;
    const double lambda = rule ? cfg.recon.lambda : 1.0;

    const auto X = to_tensor(train_pairs.refs);
    const auto Y = to_tensor(train_pairs.noisy);
    BatchSampler sampler(train_pairs.refs.count(), cfg);
    auto gp_rng = make_rng(cfg.seed, streams::penalty);
    const Critic critic = [&](const torch::Tensor& t) { return D->forward(t); };
    const auto start = std::chrono::steady_clock::now();

    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto idx = sampler.next();
        const auto x = X.index_select(0, idx);
        const auto y = Y.index_select(0, idx);

        double d_val = 0.0, gp_val = 0.0;
        if (rule) {
            for (int k = 0; k < cfg.k_d; ++k) {
                torch::Tensor fake;
                {
                    torch::NoGradGuard no_grad;
                    fake = G->forward(y);
                }
                auto loss = disc_loss(*rule, D->forward(x), D->forward(fake));
                torch::Tensor total = loss;
                if (mu > 0.0) {
                    auto gp = gradient_penalty(critic, x, fake, mu, gp_rng);
                    gp_val = gp.item<double>();
                    require_finite(gp_val, "gradient penalty", it);
                    total = loss + gp;
                }
                d_val = loss.item<double>();
                require_finite(d_val, "discriminator loss", it);
                opt_d->zero_grad();
                total.backward();
                opt_d->step();
                if (hooks && hooks->on_disc_step) hooks->on_disc_step(it, k);
            }
        }

        double g_val = 0.0, train_mse = 0.0;
        for (int k = 0; k < cfg.k_g; ++k) {
            const auto out = G->forward(y);
            auto total = lambda * recon_loss_tensor(x, out, cfg.recon.p);
            if (rule) total = gen_loss(*rule, D->forward(out)) + total;
            g_val = total.item<double>();
            require_finite(g_val, "generator loss", it);
            opt_g.zero_grad();
            total.backward();
            opt_g.step();
            train_mse = batch_mse(out, x);
            if (hooks && hooks->on_gen_step) hooks->on_gen_step(it, k);
        }

        if (it % cfg.eval_interval == 0 || it == cfg.iterations) {
            TrainRecord rec;
            rec.iteration = it;
            rec.train_mse = train_mse;
            rec.test_mse = test_pairs ? evaluate_mse(G, *test_pairs) : train_mse;
            rec.d_loss = d_val;
            rec.g_loss = g_val;
            rec.gp = gp_val;
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            result.log.records.push_back(rec);
        }
    }
    return result;
}

}  // namespace

TrainResult train(const PairedStacks& train_pairs, const TrainConfig& cfg, const ArchSpec& arch,
                  const std::optional<PairedStacks>& test_pairs, const TrainHooks* hooks) {
    return run_training(train_pairs, cfg, arch, test_pairs, hooks, cfg.rule.has_value());
}

TrainResult train_autoencoder_only(const PairedStacks& train_pairs, const TrainConfig& cfg,
                                   const ArchSpec& arch, const std::optional<PairedStacks>& test_pairs,
                                   const TrainHooks* hooks) {
    TrainConfig ae = cfg;
    ae.rule.reset();
    ae.mu.reset();
    return run_training(train_pairs, ae, arch, test_pairs, hooks, false);
}

ImageStack denoise(Generator& generator, const ImageStack& noisy, std::size_t batch) {
    const auto& spec = generator->spec();
    if (noisy.height() != spec.image_size || noisy.width() != spec.image_size)
        throw ValidationError("denoise: input is " + std::to_string(noisy.height()) + "x" +
                              std::to_string(noisy.width()) + ", generator expects " +
                              std::to_string(spec.image_size));
    torch::NoGradGuard no_grad;
    const auto Y = to_tensor(noisy);
    std::vector<torch::Tensor> parts;
    for (int64_t s = 0; s < Y.size(0); s += static_cast<int64_t>(batch))
        parts.push_back(generator->forward(Y.slice(0, s, std::min<int64_t>(s + static_cast<int64_t>(batch), Y.size(0)))));
    ImageStack out = parts.empty() ? ImageStack(0, noisy.height(), noisy.width()) : from_tensor(torch::cat(parts));
    out.set_labels(noisy.labels());
    out.provenance().source = "denoise";
    out.provenance().labels_meaning = noisy.provenance().labels_meaning;
    return out;
}

double evaluate_mse(Generator& generator, const PairedStacks& pairs) {
    require_aligned(pairs.refs, pairs.noisy, "evaluate_mse");
    if (pairs.refs.empty()) throw ValidationError("evaluate_mse: empty stacks");
    const auto out = denoise(generator, pairs.noisy);
    double total = 0.0;
    const auto a = out.pixels();
    const auto b = pairs.refs.pixels();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        total += d * d;
    }
    return total / static_cast<double>(a.size());
}

namespace {

WindowStats window_stats(const TrainLog& log, std::size_t window) {
    const auto v = log.test_mse();
    const auto first = v.end() - static_cast<std::ptrdiff_t>(window);
    double mean = 0.0, lo = *first, hi = *first;
    for (auto it = first; it != v.end(); ++it) {
        mean += *it;
        lo = std::min(lo, *it);
        hi = std::max(hi, *it);
    }
    mean /= static_cast<double>(window);
    double ss = 0.0;
    for (auto it = first; it != v.end(); ++it) ss += (*it - mean) * (*it - mean);
    const double sd = window > 1 ? std::sqrt(ss / static_cast<double>(window - 1)) : 0.0;
    return {sd, hi - lo};
}

double safe_ratio(double a, double b) {
    if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return a / b;
}

}  // namespace

StabilityReport stability_report(const TrainLog& log_a, const TrainLog& log_b, std::size_t window) {
    if (log_a.records.empty() || log_b.records.empty()) throw ValidationError("stability_report: empty log");
    if (window == 0) throw ValidationError("stability_report: window must be positive");
    if (window > log_a.records.size() || window > log_b.records.size())
        throw ValidationError("stability_report: window " + std::to_string(window) + " exceeds log length");
    StabilityReport r;
    r.a = window_stats(log_a, window);
    r.b = window_stats(log_b, window);
    r.std_ratio = safe_ratio(r.a.stddev, r.b.stddev);
    r.range_ratio = safe_ratio(r.a.range, r.b.range);
    return r;
}

}  // namespace bgan
