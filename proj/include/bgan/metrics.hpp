#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgan/errors.hpp"
#include "bgan/image_stack.hpp"

namespace bgan {

/// Dynamic range t (PSNR) and L (SSIM), stabilizers c1 = (K1 L)^2, c2 = (K2 L)^2, c3 = c2 / 2.
struct MetricsConfig {
    double t = 1.0;
    double L = 1.0;
    double K1 = 0.01;
    double K2 = 0.03;

    double c1() const noexcept { return (K1 * L) * (K1 * L); }
    double c2() const noexcept { return (K2 * L) * (K2 * L); }
    double c3() const noexcept { return c2() / 2.0; }

    void validate() const;
    nlohmann::json to_json() const { return {{"t", t}, {"L", L}, {"K1", K1}, {"K2", K2}}; }
    static MetricsConfig from_json(const nlohmann::json& j);
};

/// Thrown by psnr when the two images are identical.
class InfinitePsnrError : public ValidationError {
public:
    InfinitePsnrError() : ValidationError("psnr: images are identical (MSE == 0), PSNR is infinite") {}
};

double mse(std::span<const float> x, std::span<const float> x_hat);
double psnr(std::span<const float> x, std::span<const float> x_hat, const MetricsConfig& cfg = {});
/// Three-factor SSIM (luminance, contrast, structure) over global image statistics.
double ssim(std::span<const float> x, std::span<const float> x_hat, const MetricsConfig& cfg = {});

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;  // n-1 denominator
};

struct MetricsReport {
    std::vector<double> mse;
    std::vector<double> psnr;  // +inf where the pair is identical
    std::vector<double> ssim;
    SummaryStat mse_summary;
    SummaryStat psnr_summary;
    SummaryStat ssim_summary;
    /// Set when there is one image; stddev fields are 0 then.
    bool single_image = false;
    /// Count of identical pairs whose PSNR is infinite; they are left out of psnr_summary.
    std::size_t infinite_psnr = 0;

    std::string to_csv() const;
    nlohmann::json to_json() const;
    /// One "name  mse  psnr  ssim" row with mean +- std.
    std::string to_table(const std::string& name) const;
};

MetricsReport report(const ImageStack& ref, const ImageStack& test, const MetricsConfig& cfg = {});

}  // namespace bgan
