#include "bgan/gan_losses.hpp"

#include "bgan/errors.hpp"

namespace bgan {

namespace {

// Series-evaluated score with its closed-form derivative as the backward pass.
struct ScoreFunction : torch::autograd::Function<ScoreFunction> {
    static torch::Tensor forward(torch::autograd::AutogradContext* ctx, torch::Tensor t,
                                 double alpha, double beta, double delta, int64_t label) {
        ctx->save_for_backward({t});
        ctx->saved_data["alpha"] = alpha;
        ctx->saved_data["beta"] = beta;
        ctx->saved_data["delta"] = delta;
        ctx->saved_data["label"] = label;
        const auto rule = ScoringRule::beta_family(alpha, beta, delta);
        auto td = t.detach().to(torch::kDouble).contiguous();
        auto out = torch::empty_like(td);
        const double* in = td.data_ptr<double>();
        double* o = out.data_ptr<double>();
        for (int64_t i = 0; i < td.numel(); ++i) o[i] = score(rule, in[i], static_cast<int>(label));
        return out.to(t.scalar_type());
    }

    static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                   torch::autograd::variable_list grads) {
        const auto t = ctx->get_saved_variables()[0];
        const auto rule = ScoringRule::beta_family(ctx->saved_data["alpha"].toDouble(),
                                                   ctx->saved_data["beta"].toDouble(),
                                                   ctx->saved_data["delta"].toDouble());
        const int label = static_cast<int>(ctx->saved_data["label"].toInt());
        auto td = t.detach().to(torch::kDouble).contiguous();
        auto d = torch::empty_like(td);
        const double* in = td.data_ptr<double>();
        double* o = d.data_ptr<double>();
        for (int64_t i = 0; i < td.numel(); ++i) o[i] = score_derivative(rule, in[i], label);
        return {grads[0] * d.to(t.scalar_type()), {}, {}, {}, {}};
    }
};

}  // namespace

torch::Tensor score_tensor(const ScoringRule& rule, const torch::Tensor& d, int label) {
    if (label != 0 && label != 1) throw ValidationError("score label must be 0 or 1");
    if (rule.is_wgan()) return label == 1 ? d : -d;
    if (d.isnan().any().item<bool>()) throw DivergenceError("discriminator produced NaN");
    const auto t = torch::clamp(d, rule.delta, 1.0 - rule.delta);
    if (rule.alpha == 0.0 && rule.beta == 0.0) return label == 1 ? torch::log(t) : torch::log1p(-t);
    if (rule.alpha == 1.0 && rule.beta == 1.0)
        return label == 1 ? -0.5 * (1.0 - t).square() : -0.5 * t.square();
    return ScoreFunction::apply(t, rule.alpha, rule.beta, rule.delta, static_cast<int64_t>(label));
}

torch::Tensor disc_loss(const ScoringRule& rule, const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    return -(score_tensor(rule, d_real, 1).mean() + score_tensor(rule, d_fake, 0).mean());
}

torch::Tensor gen_loss(const ScoringRule& rule, const torch::Tensor& d_fake) {
    return score_tensor(rule, d_fake, 0).mean();
}

torch::Tensor score_grad_tensor(const ScoringRule& rule, const torch::Tensor& d, int label) {
    if (label != 0 && label != 1) throw ValidationError("score label must be 0 or 1");
    torch::NoGradGuard no_grad;
    if (rule.is_wgan()) return torch::full_like(d, label == 1 ? 1.0 : -1.0);
    const auto inside = (d >= rule.delta) & (d <= 1.0 - rule.delta);
    const auto t = torch::clamp(d, rule.delta, 1.0 - rule.delta);
    const auto g = label == 1 ? torch::pow(t, rule.alpha - 1.0) * torch::pow(1.0 - t, rule.beta)
                              : -torch::pow(t, rule.alpha) * torch::pow(1.0 - t, rule.beta - 1.0);
    return torch::where(inside, g, torch::zeros_like(g));
}

torch::Tensor disc_loss_surrogate(const ScoringRule& rule, const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    return -((score_grad_tensor(rule, d_real, 1) * d_real).mean() + (score_grad_tensor(rule, d_fake, 0) * d_fake).mean());
}

torch::Tensor gen_loss_surrogate(const ScoringRule& rule, const torch::Tensor& d_fake) {
    return (score_grad_tensor(rule, d_fake, 0) * d_fake).mean();
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double mu, Rng& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> w(static_cast<std::size_t>(real.size(0)));
    for (auto& v : w) v = u(rng);
    return gradient_penalty(critic, real, fake, mu, torch::tensor(w));
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double mu, const torch::Tensor& weights) {
    if (!real.sizes().equals(fake.sizes())) throw ValidationError("gradient_penalty: batches not aligned");
    if (!(mu >= 0.0)) throw ValidationError("gradient_penalty: mu must be >= 0");
    std::vector<int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
    shape[0] = real.size(0);
    const auto u = weights.to(real.scalar_type()).reshape(shape);
    auto mixed = (u * real.detach() + (1 - u) * fake.detach()).requires_grad_(true);
    const auto out = critic(mixed);
    const auto grad = torch::autograd::grad({out.sum()}, {mixed}, {}, /*retain_graph=*/true,
                                            /*create_graph=*/true)[0];
    const auto norms = grad.flatten(1).norm(2, 1);
    return mu * (norms - 1.0).square().mean();
}

torch::Tensor recon_loss_tensor(const torch::Tensor& x, const torch::Tensor& x_hat, int p) {
    if (!x.sizes().equals(x_hat.sizes())) throw ValidationError("recon_loss: shapes differ");
    const auto diff = (x_hat - x).flatten(1);
    if (p == 1) return diff.abs().sum(1).mean();
    if (p == 2) return 0.5 * diff.square().sum(1).mean();
    throw ValidationError("recon_loss: p must be 1 or 2");
}

double recon_loss(const ImageStack& x, const ImageStack& x_hat, const ReconLoss& rl) {
    require_aligned(x, x_hat, "recon_loss");
    rl.validate();
    if (x.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < x.count(); ++i) {
        const auto a = x.image(i), b = x_hat.image(i);
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
            s += rl.p == 1 ? std::abs(d) : 0.5 * d * d;
        }
        total += s;
    }
    return total / static_cast<double>(x.count());
}

torch::Tensor to_tensor(const ImageStack& stack) {
    auto t = torch::empty({static_cast<int64_t>(stack.count()), 1, static_cast<int64_t>(stack.height()),
                           static_cast<int64_t>(stack.width())},
                          torch::kFloat);
    std::copy(stack.pixels().begin(), stack.pixels().end(), t.data_ptr<float>());
    return t;
}

ImageStack from_tensor(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 1) throw ValidationError("from_tensor: expected [N,1,H,W]");
    const auto t = images.detach().to(torch::kFloat).contiguous();
    const auto h = static_cast<std::size_t>(t.size(2)), w = static_cast<std::size_t>(t.size(3));
    if (t.size(0) == 0) return ImageStack(0, h, w);
    std::vector<float> px(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
    return ImageStack(h, w, std::move(px));
}

}  // namespace bgan
