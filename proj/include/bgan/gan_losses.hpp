#pragma once

#include <functional>

#include <torch/torch.h>

#include "bgan/image_stack.hpp"
#include "bgan/rng.hpp"
#include "bgan/scoring_rule.hpp"

namespace bgan {

/// Elementwise S(d, label) as a differentiable tensor op. Beta-kind inputs are clamped
/// to [delta, 1-delta] first, so clamped entries receive zero gradient.
torch::Tensor score_tensor(const ScoringRule& rule, const torch::Tensor& d, int label);

/// -(mean S(d_real,1) + mean S(d_fake,0)); minimizing it is the discriminator ascent.
torch::Tensor disc_loss(const ScoringRule& rule, const torch::Tensor& d_real, const torch::Tensor& d_fake);

/// mean S(d_fake, 0), the adversarial part of the generator objective.
torch::Tensor gen_loss(const ScoringRule& rule, const torch::Tensor& d_fake);

/// dS/dt elementwise as a plain tensor (no autograd through it). Zero where a beta-kind
/// input falls outside [delta, 1-delta], matching the clamp in score_tensor.
torch::Tensor score_grad_tensor(const ScoringRule& rule, const torch::Tensor& d, int label);

/// Losses whose gradients equal those of disc_loss / gen_loss but which skip evaluating
/// S itself: sum of detached dS/dt times the outputs. Their values are not the losses.
torch::Tensor disc_loss_surrogate(const ScoringRule& rule, const torch::Tensor& d_real, const torch::Tensor& d_fake);
torch::Tensor gen_loss_surrogate(const ScoringRule& rule, const torch::Tensor& d_fake);

using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

/// mu * mean_i (||grad D(x~_i)||_2 - 1)^2 with x~_i = u_i x_i + (1 - u_i) x^_i,
/// u_i ~ U[0,1] drawn from `rng`. The result stays attached to D's parameters.
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double mu, Rng& rng);

/// Same with caller-chosen interpolation weights (one per sample).
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double mu, const torch::Tensor& weights);

/// Unweighted l_p loss over a [N, ...] batch: mean over images of sum |x - x^| (p = 1)
/// or of 1/2 sum (x - x^)^2 (p = 2).
torch::Tensor recon_loss_tensor(const torch::Tensor& x, const torch::Tensor& x_hat, int p);

/// The same on image stacks (unweighted; lambda applies inside the generator objective).
double recon_loss(const ImageStack& x, const ImageStack& x_hat, const ReconLoss& rl);

/// [N,1,H,W] float tensor view of a stack's pixels (copied).
torch::Tensor to_tensor(const ImageStack& stack);
ImageStack from_tensor(const torch::Tensor& images);

}  // namespace bgan
