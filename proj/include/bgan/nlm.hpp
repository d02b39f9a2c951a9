#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "bgan/image_stack.hpp"

namespace bgan {

/// Non-local means. Patch and search window sizes are odd; h defaults to
/// h_factor * (estimated noise std) per image.
struct NlmSpec {
    std::size_t patch = 7;
    std::size_t window = 21;
    std::optional<double> h;
    double h_factor = 0.6;

    void validate() const;
    nlohmann::json to_json() const;
    static NlmSpec from_json(const nlohmann::json& j);
};

/// Noise std from the Laplacian-difference mask, averaged over the interior.
double estimate_noise_std(std::span<const float> image, std::size_t h, std::size_t w);

/// One image; weights exp(-max(d2 - 2 sigma^2, 0) / h^2) with d2 the mean squared patch
/// difference. The search window is clipped at the border, patches reflect.
std::vector<float> nlm_denoise_image(std::span<const float> image, std::size_t h, std::size_t w, const NlmSpec& spec);

ImageStack nlm_denoise(const ImageStack& stack, const NlmSpec& spec = {});

}  // namespace bgan
