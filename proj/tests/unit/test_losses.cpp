#include "testing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "bgan/errors.hpp"
#include "bgan/gan_losses.hpp"
#include "bgan/scoring_rule.hpp"
#include "oracles.hpp"

using namespace bgan;

namespace {

const std::vector<std::pair<double, double>> kGrid = {{0, 0},     {1, 1},      {.5, .5},  {-.5, -.5},
                                                      {1, -1},    {.5, -.5},   {.1, -.1}, {-1, -1}};

std::vector<double> t_grid() {
    std::vector<double> t;
    for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
    return t;
}

}  // namespace

TEST_CASE("S(1,1) and S(0,0) vanish for every rule") {
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        CHECK(score(r, 1.0, 1) == 0.0);
        CHECK(score(r, 0.0, 0) == 0.0);
    }
}

TEST_CASE("named closed forms") {
    const auto log_rule = ScoringRule::beta_family(0, 0);
    CHECK(score(log_rule, 0.5, 1) == doctest::Approx(-0.693147).epsilon(1e-6));
    CHECK(std::abs(score(log_rule, 0.5, 1) - oracle::score_quad(0, 0, 0.5, 1)) < 1e-9);

    const auto brier = ScoringRule::beta_family(1, 1);
    // t = 0 is clamped to delta = 1e-6 before evaluation
    CHECK(score(brier, 0.0, 1) == doctest::Approx(-0.5).epsilon(1e-5));
    CHECK(oracle::score_quad(1, 1, 0.0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(score(brier, 0.3, 0) == doctest::Approx(-0.045));
    CHECK(score(brier, 0.3, 1) == doctest::Approx(-0.245));
}

TEST_CASE("series and closed forms agree with adaptive quadrature on the rule grid") {
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        for (double t : t_grid()) {
            for (int label : {0, 1}) {
                const double got = score(r, t, label);
                const double want = oracle::score_quad(a, b, t, label, r.delta);
                INFO("alpha=" << a << " beta=" << b << " t=" << t << " label=" << label);
                CHECK(std::abs(got - want) < 1e-6);
            }
        }
    }
}

TEST_CASE("derivative matches central differences of the score") {
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        for (double t : t_grid()) {
            for (int label : {0, 1}) {
                const double h = 1e-4 * std::min(t, 1 - t);
                const double fd = oracle::central_diff([&](double x) { return score(r, x, label); }, t, h);
                const double d = score_derivative(r, t, label);
                INFO("alpha=" << a << " beta=" << b << " t=" << t << " label=" << label);
                CHECK(std::abs(fd - d) <= 1e-4 * std::abs(d));
            }
        }
    }
    CHECK(score_derivative(ScoringRule::beta_family(0, 0), 0.5, 1) == doctest::Approx(2.0));
    CHECK(score_derivative(ScoringRule::beta_family(1, 1), 0.25, 0) == doctest::Approx(-0.25));
}

TEST_CASE("proper-scoring shape: S(.,1) nondecreasing, S(.,0) nonincreasing") {
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        double prev1 = -INFINITY, prev0 = INFINITY;
        for (int i = 1; i < 1000; ++i) {
            const double t = i / 1000.0;
            const double s1 = score(r, t, 1), s0 = score(r, t, 0);
            CHECK(s1 >= prev1);
            CHECK(s0 <= prev0);
            CHECK(score_derivative(r, t, 1) >= 0.0);
            CHECK(score_derivative(r, t, 0) <= 0.0);
            prev1 = s1;
            prev0 = s0;
        }
    }
}

TEST_CASE("swapping alpha and beta mirrors the two labels") {
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b), m = ScoringRule::beta_family(b, a);
        for (double t : {0.05, 0.3, 0.5, 0.77}) CHECK(score(r, t, 0) == doctest::Approx(score(m, 1 - t, 1)).epsilon(1e-10));
    }
}

TEST_CASE("wgan scores are the identity surrogate") {
    const auto w = ScoringRule::wgan();
    CHECK(score(w, 3.5, 1) == 3.5);
    CHECK(score(w, 3.5, 0) == -3.5);
    CHECK(score_derivative(w, -7.0, 1) == 1.0);
    CHECK(score_derivative(w, -7.0, 0) == -1.0);
}

TEST_CASE("score input errors") {
    const auto r = ScoringRule::beta_family(.5, .5);
    CHECK_THROWS_AS(score(r, std::nan(""), 1), ValidationError);
    CHECK_THROWS_AS(score(r, 0.5, 2), ValidationError);
    CHECK_THROWS_AS(ScoringRule::beta_family(1.5, 0).validate(), ValidationError);
    CHECK_THROWS_AS(ScoringRule::parse("0.5"), ValidationError);
    CHECK_THROWS_AS(ScoringRule::parse("0.5,x"), ValidationError);
    CHECK(ScoringRule::parse("wgan").is_wgan());
    const auto p = ScoringRule::parse("-0.5,0.25");
    CHECK(p.alpha == -0.5);
    CHECK(p.beta == 0.25);
    const auto j = ScoringRule::from_json(p.to_json());
    CHECK(j.alpha == -0.5);
    CHECK(j.delta == 1e-6);
}

TEST_CASE("gan objective examples") {
    const std::vector<double> half{0.5, 0.5, 0.5};
    const auto o = gan_objective(ScoringRule::beta_family(0, 0), half, half);
    CHECK(o.disc_loss == doctest::Approx(2 * std::log(2.0)));
    CHECK(o.gen_loss == doctest::Approx(std::log(0.5)));

    const std::vector<double> c{0.8, 0.8};
    CHECK(gan_objective(ScoringRule::wgan(), c, c).disc_loss == 0.0);

    double prev = INFINITY;
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
        const std::vector<double> fake{f};
        const double g = gan_objective(ScoringRule::beta_family(0, 0), half, fake).gen_loss;
        CHECK(g < prev);
        prev = g;
    }
    const std::vector<double> bad{1.2};
    CHECK_THROWS_AS(gan_objective(ScoringRule::beta_family(0, 0), bad, half), ValidationError);
    CHECK_NOTHROW(gan_objective(ScoringRule::wgan(), bad, half));
}

TEST_CASE("gan objective ignores batch order; wgan disc loss scales with outputs") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::vector<double> real(17), fake(23);
    for (auto& v : real) v = u(rng);
    for (auto& v : fake) v = u(rng);
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        const auto o1 = gan_objective(r, real, fake);
        auto rr = real, ff = fake;
        std::shuffle(rr.begin(), rr.end(), rng);
        std::shuffle(ff.begin(), ff.end(), rng);
        const auto o2 = gan_objective(r, rr, ff);
        CHECK(o1.disc_loss == doctest::Approx(o2.disc_loss).epsilon(1e-12));
        CHECK(o1.gen_loss == doctest::Approx(o2.gen_loss).epsilon(1e-12));
    }
    const auto w = ScoringRule::wgan();
    const double base = gan_objective(w, real, fake).disc_loss;
    for (double c : {-2.0, 0.5, 3.0}) {
        auto rr = real, ff = fake;
        for (auto& v : rr) v *= c;
        for (auto& v : ff) v *= c;
        CHECK(gan_objective(w, rr, ff).disc_loss == doctest::Approx(c * base).epsilon(1e-12));
    }
}

TEST_CASE("tensor scores match scalar scores and autograd matches the derivative") {
    auto d = torch::linspace(0.02, 0.98, 25, torch::kDouble);
    for (auto [a, b] : kGrid) {
        const auto r = ScoringRule::beta_family(a, b);
        for (int label : {0, 1}) {
            auto x = d.clone().requires_grad_(true);
            auto s = score_tensor(r, x, label);
            s.sum().backward();
            const auto g = x.grad();
            const auto sg = score_grad_tensor(r, d, label);
            for (int64_t i = 0; i < d.numel(); ++i) {
                const double t = d[i].item<double>();
                CHECK(s[i].item<double>() == doctest::Approx(score(r, t, label)).epsilon(1e-12));
                CHECK(g[i].item<double>() == doctest::Approx(score_derivative(r, t, label)).epsilon(1e-10));
                CHECK(sg[i].item<double>() == doctest::Approx(score_derivative(r, t, label)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("surrogate losses carry the same gradients as the real losses") {
    torch::manual_seed(3);
    for (auto rule : {ScoringRule::beta_family(.5, .5), ScoringRule::beta_family(-.5, -.5),
                      ScoringRule::beta_family(1, -1), ScoringRule::wgan()}) {
        auto base_r = torch::rand({12}, torch::kDouble) * 0.9 + 0.05;
        auto base_f = torch::rand({12}, torch::kDouble) * 0.9 + 0.05;
        auto r1 = base_r.clone().requires_grad_(true), f1 = base_f.clone().requires_grad_(true);
        auto r2 = base_r.clone().requires_grad_(true), f2 = base_f.clone().requires_grad_(true);
        disc_loss(rule, r1, f1).backward();
        disc_loss_surrogate(rule, r2, f2).backward();
        CHECK(torch::allclose(r1.grad(), r2.grad(), 1e-10, 1e-12));
        CHECK(torch::allclose(f1.grad(), f2.grad(), 1e-10, 1e-12));
        auto f3 = base_f.clone().requires_grad_(true), f4 = base_f.clone().requires_grad_(true);
        gen_loss(rule, f3).backward();
        gen_loss_surrogate(rule, f4).backward();
        CHECK(torch::allclose(f3.grad(), f4.grad(), 1e-10, 1e-12));
    }
}

TEST_CASE("clamped entries get zero gradient") {
    const auto r = ScoringRule::beta_family(.5, .5);
    auto x = torch::tensor({0.0, 1.0, 0.5}, torch::kDouble).requires_grad_(true);
    score_tensor(r, x, 1).sum().backward();
    CHECK(x.grad()[0].item<double>() == 0.0);
    CHECK(x.grad()[1].item<double>() == 0.0);
    CHECK(x.grad()[2].item<double>() > 0.0);
    const auto sg = score_grad_tensor(r, torch::tensor({0.0, 1.0}, torch::kDouble), 0);
    CHECK(sg[0].item<double>() == 0.0);
    CHECK(sg[1].item<double>() == 0.0);
    CHECK_THROWS_AS(score_tensor(r, torch::tensor({NAN}), 1), DivergenceError);
}

TEST_CASE("gradient penalty trivial critics") {
    auto real = torch::rand({5, 1, 4, 4}, torch::kDouble);
    auto fake = torch::rand({5, 1, 4, 4}, torch::kDouble);
    // unit-norm linear critic
    auto w = torch::randn({16}, torch::kDouble);
    w = w / w.norm();
    const Critic linear = [&](const torch::Tensor& x) { return x.flatten(1).matmul(w); };
    Rng rng(1);
    CHECK(gradient_penalty(linear, real, fake, 10.0, rng).item<double>() == doctest::Approx(0.0).epsilon(1e-12));
    const Critic constant = [](const torch::Tensor& x) { return (x * 0.0).flatten(1).sum(1) + 3.0; };
    CHECK(gradient_penalty(constant, real, fake, 10.0, rng).item<double>() == doctest::Approx(10.0));
    CHECK(gradient_penalty(constant, real, fake, 0.0, rng).item<double>() == 0.0);
    CHECK_THROWS_AS(gradient_penalty(constant, real, fake.narrow(0, 0, 3), 10.0, rng), ValidationError);
}

TEST_CASE("gradient penalty matches a hand-computed value and its parameter gradient matches finite differences") {
    torch::manual_seed(5);
    auto real = torch::rand({4, 1, 3, 3}, torch::kDouble);
    auto fake = torch::rand({4, 1, 3, 3}, torch::kDouble);
    auto u = torch::tensor({0.1, 0.4, 0.7, 0.95}, torch::kDouble);
    auto w = torch::randn({9}, torch::kDouble);
    // D(x) = sum_k w_k x_k^2, so grad_x D = 2 w x
    auto penalty_at = [&](const torch::Tensor& wt) {
        const Critic c = [&](const torch::Tensor& x) { return (x.flatten(1).square() * wt).sum(1); };
        return gradient_penalty(c, real, fake, 10.0, u);
    };
    const auto mixed = (u.view({4, 1, 1, 1}) * real + (1 - u.view({4, 1, 1, 1})) * fake).flatten(1);
    const auto norms = (2 * w * mixed).norm(2, 1);
    const double expect = 10.0 * (norms - 1).square().mean().item<double>();
    CHECK(penalty_at(w).item<double>() == doctest::Approx(expect).epsilon(1e-12));

    auto wg = w.clone().requires_grad_(true);
    penalty_at(wg).backward();
    for (int k = 0; k < 9; ++k) {
        const double h = 1e-6;
        auto wp = w.clone(), wm = w.clone();
        wp[k] += h;
        wm[k] -= h;
        const double fd = (penalty_at(wp).item<double>() - penalty_at(wm).item<double>()) / (2 * h);
        CHECK(wg.grad()[k].item<double>() == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("reconstruction losses") {
    ImageStack x(2, 2, {0.5f, 0.5f, 0.5f, 0.5f, 0.2f, 0.2f, 0.2f, 0.2f});
    ImageStack y(2, 2, {0.6f, 0.6f, 0.6f, 0.6f, 0.3f, 0.3f, 0.3f, 0.3f});
    CHECK(recon_loss(x, x, {1, 1.0}) == 0.0);
    CHECK(recon_loss(x, x, {2, 1.0}) == 0.0);
    CHECK(recon_loss(x, y, {1, 1.0}) == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(recon_loss(x, y, {2, 1.0}) == doctest::Approx(0.02).epsilon(1e-5));
    const auto tx = to_tensor(x).to(torch::kDouble), ty = to_tensor(y).to(torch::kDouble);
    CHECK(recon_loss_tensor(tx, ty, 1).item<double>() == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(recon_loss_tensor(tx, ty, 2).item<double>() == doctest::Approx(0.02).epsilon(1e-5));
    CHECK_THROWS_AS(recon_loss(x, y, {3, 1.0}), ValidationError);
    CHECK_THROWS_AS(recon_loss(x, y, {1, -1.0}), ValidationError);
    ImageStack z(1, 2, {0.5f, 0.5f});
    CHECK_THROWS_AS(recon_loss(x, z, {1, 1.0}), ValidationError);
    CHECK(from_tensor(to_tensor(x)) == x);
}
