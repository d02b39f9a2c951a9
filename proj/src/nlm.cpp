#include "bgan/nlm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bgan/errors.hpp"

namespace bgan {

void NlmSpec::validate() const {
    if (patch % 2 == 0 || window % 2 == 0) throw ValidationError("nlm: patch and window sizes must be odd");
    if (patch >= window) throw ValidationError("nlm: patch must be smaller than the search window");
    if (h && !(*h > 0.0)) throw ValidationError("nlm: h must be > 0");
    if (!(h_factor > 0.0)) throw ValidationError("nlm: h_factor must be > 0");
}

nlohmann::json NlmSpec::to_json() const {
    return {{"patch", patch}, {"window", window}, {"h", h ? nlohmann::json(*h) : nlohmann::json(nullptr)},
            {"h_factor", h_factor}};
}

NlmSpec NlmSpec::from_json(const nlohmann::json& j) {
    NlmSpec s;
    s.patch = j.value("patch", s.patch);
    s.window = j.value("window", s.window);
    if (j.contains("h") && !j.at("h").is_null()) s.h = j.at("h").get<double>();
    s.h_factor = j.value("h_factor", s.h_factor);
    return s;
}

double estimate_noise_std(std::span<const float> image, std::size_t h, std::size_t w) {
    if (h < 3 || w < 3 || image.size() != h * w) throw ValidationError("estimate_noise_std: image too small");
    double sum = 0.0;
    auto at = [&](std::size_t r, std::size_t c) { return static_cast<double>(image[r * w + c]); };
    for (std::size_t r = 1; r + 1 < h; ++r)
        for (std::size_t c = 1; c + 1 < w; ++c) {
            const double v = at(r - 1, c - 1) - 2 * at(r - 1, c) + at(r - 1, c + 1) - 2 * at(r, c - 1) +
                             4 * at(r, c) - 2 * at(r, c + 1) + at(r + 1, c - 1) - 2 * at(r + 1, c) +
                             at(r + 1, c + 1);
            sum += std::abs(v);
        }
    return std::sqrt(std::numbers::pi / 2.0) * sum / (6.0 * static_cast<double>((h - 2) * (w - 2)));
}

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    if (m == 1) return 0;
    const auto period = 2 * (m - 1);
    i %= period;
    if (i < 0) i += period;
    if (i >= m) i = period - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<float> nlm_denoise_image(std::span<const float> image, std::size_t h, std::size_t w, const NlmSpec& spec) {
    spec.validate();
    if (image.size() != h * w) throw ValidationError("nlm: pixel count does not match dimensions");
    if (h < spec.window || w < spec.window)
        throw ValidationError("nlm: image " + std::to_string(h) + "x" + std::to_string(w) +
                              " is smaller than the search window " + std::to_string(spec.window));
    const double sigma = estimate_noise_std(image, h, w);
    const double hh = spec.h ? *spec.h : std::max(spec.h_factor * sigma, 1e-6);
    const double inv_h2 = 1.0 / (hh * hh);
    const double offset = 2.0 * sigma * sigma;
    const auto pr = static_cast<std::ptrdiff_t>(spec.patch / 2);
    const auto wr = static_cast<std::ptrdiff_t>(spec.window / 2);
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);

    // Reflect-padded copy so patch reads need no bounds checks.
    const auto ph = h + 2 * static_cast<std::size_t>(pr), pw = w + 2 * static_cast<std::size_t>(pr);
    std::vector<double> pad(ph * pw);
    for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c)
            pad[r * pw + c] = image[reflect(static_cast<std::ptrdiff_t>(r) - pr, h) * w +
                                    reflect(static_cast<std::ptrdiff_t>(c) - pr, w)];
    const double patch_n = static_cast<double>(spec.patch * spec.patch);
    auto patch_d2 = [&](std::ptrdiff_t r1, std::ptrdiff_t c1, std::ptrdiff_t r2, std::ptrdiff_t c2) {
        double s = 0.0;
        for (std::ptrdiff_t dr = 0; dr <= 2 * pr; ++dr) {
            const double* a = &pad[static_cast<std::size_t>(r1 + dr) * pw + static_cast<std::size_t>(c1)];
            const double* b = &pad[static_cast<std::size_t>(r2 + dr) * pw + static_cast<std::size_t>(c2)];
            for (std::ptrdiff_t dc = 0; dc <= 2 * pr; ++dc) {
                const double d = a[dc] - b[dc];
                s += d * d;
            }
        }
        return s / patch_n;
    };

    std::vector<float> out(h * w);
    for (std::ptrdiff_t r = 0; r < H; ++r)
        for (std::ptrdiff_t c = 0; c < W; ++c) {
            double wsum = 0.0, acc = 0.0;
            for (std::ptrdiff_t r2 = std::max<std::ptrdiff_t>(0, r - wr); r2 <= std::min(H - 1, r + wr); ++r2)
                for (std::ptrdiff_t c2 = std::max<std::ptrdiff_t>(0, c - wr); c2 <= std::min(W - 1, c + wr); ++c2) {
                    const double d2 = patch_d2(r, c, r2, c2);
                    const double wt = std::exp(-std::max(d2 - offset, 0.0) * inv_h2);
                    wsum += wt;
                    acc += wt * image[static_cast<std::size_t>(r2 * W + c2)];
                }
            out[static_cast<std::size_t>(r * W + c)] = static_cast<float>(acc / wsum);
        }
    return out;
}

ImageStack nlm_denoise(const ImageStack& stack, const NlmSpec& spec) {
    spec.validate();
    std::vector<float> pixels;
    pixels.reserve(stack.pixels().size());
    for (std::size_t i = 0; i < stack.count(); ++i) {
        const auto img = nlm_denoise_image(stack.image(i), stack.height(), stack.width(), spec);
        pixels.insert(pixels.end(), img.begin(), img.end());
    }
    ImageStack out(stack.height(), stack.width(), std::move(pixels), stack.labels());
    out.provenance().source = "nlm";
    out.provenance().normalization = stack.provenance().normalization;
    out.provenance().labels_meaning = stack.provenance().labels_meaning;
    return out;
}

}  // namespace bgan
