#include "bgan/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace bgan {

void MetricsConfig::validate() const {
    if (!(t > 0.0)) throw ValidationError("metrics.t must be > 0");
    if (!(L > 0.0)) throw ValidationError("metrics.L must be > 0");
    if (!(K1 > 0.0 && K2 > 0.0)) throw ValidationError("metrics.K1 and metrics.K2 must be > 0");
}

MetricsConfig MetricsConfig::from_json(const nlohmann::json& j) {
    MetricsConfig c;
    c.t = j.value("t", c.t);
    c.L = j.value("L", c.L);
    c.K1 = j.value("K1", c.K1);
    c.K2 = j.value("K2", c.K2);
    return c;
}

namespace {

void check_dims(std::span<const float> x, std::span<const float> y, const char* what) {
    if (x.size() != y.size())
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()) + " pixels)");
    if (x.empty()) throw ValidationError(std::string(what) + ": empty images");
}

SummaryStat summarize(const std::vector<double>& v) {
    SummaryStat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

double mse(std::span<const float> x, std::span<const float> x_hat) {
    check_dims(x, x_hat, "mse");
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(x_hat[i]);
        total += d * d;
    }
    return total / static_cast<double>(x.size());
}

double psnr(std::span<const float> x, std::span<const float> x_hat, const MetricsConfig& cfg) {
    const double m = mse(x, x_hat);
    if (m == 0.0) throw InfinitePsnrError();
    return 10.0 * std::log10(cfg.t * cfg.t / m);
}

double ssim(std::span<const float> x, std::span<const float> x_hat, const MetricsConfig& cfg) {
    check_dims(x, x_hat, "ssim");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += x_hat[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = x_hat[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    const double sx = std::sqrt(vx), sy = std::sqrt(vy);
    const double c1 = cfg.c1(), c2 = cfg.c2(), c3 = cfg.c3();
    const double luminance = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
    const double contrast = (2.0 * sx * sy + c2) / (vx + vy + c2);
    const double structure = (cxy + c3) / (sx * sy + c3);
    return luminance * contrast * structure;
}

MetricsReport report(const ImageStack& ref, const ImageStack& test, const MetricsConfig& cfg) {
    cfg.validate();
    require_aligned(ref, test, "report");
    if (ref.empty()) throw ValidationError("report: empty stacks");
    MetricsReport r;
    std::vector<double> finite_psnr;
    for (std::size_t i = 0; i < ref.count(); ++i) {
        const auto a = ref.image(i), b = test.image(i);
        r.mse.push_back(mse(a, b));
        r.ssim.push_back(ssim(a, b, cfg));
        if (r.mse.back() == 0.0) {
            r.psnr.push_back(std::numeric_limits<double>::infinity());
            ++r.infinite_psnr;
        } else {
            r.psnr.push_back(psnr(a, b, cfg));
            finite_psnr.push_back(r.psnr.back());
        }
    }
    r.mse_summary = summarize(r.mse);
    r.ssim_summary = summarize(r.ssim);
    r.psnr_summary = finite_psnr.empty()
                         ? SummaryStat{std::numeric_limits<double>::infinity(), 0.0}
                         : summarize(finite_psnr);
    r.single_image = ref.count() == 1;
    return r;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "image,mse,psnr,ssim\n";
    for (std::size_t i = 0; i < mse.size(); ++i) os << i << ',' << mse[i] << ',' << psnr[i] << ',' << ssim[i] << '\n';
    return os.str();
}

nlohmann::json MetricsReport::to_json() const {
    auto stat = [](const SummaryStat& s) {
        return nlohmann::json{{"mean", finite_or_null(s.mean)}, {"std", s.stddev}};
    };
    nlohmann::json psnr_values = nlohmann::json::array();
    for (double v : psnr) psnr_values.push_back(finite_or_null(v));
    return {{"count", mse.size()},
            {"single_image", single_image},
            {"infinite_psnr", infinite_psnr},
            {"mse", stat(mse_summary)},
            {"psnr", stat(psnr_summary)},
            {"ssim", stat(ssim_summary)},
            {"per_image", {{"mse", mse}, {"psnr", psnr_values}, {"ssim", ssim}}}};
}

std::string MetricsReport::to_table(const std::string& name) const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "Model" << std::setw(24) << "MSE" << std::setw(20) << "PSNR"
       << "SSIM\n";
    std::ostringstream m, p, s;
    m << std::scientific << std::setprecision(2) << mse_summary.mean << " +- " << mse_summary.stddev;
    p << std::fixed << std::setprecision(2) << psnr_summary.mean << " +- " << psnr_summary.stddev;
    s << std::fixed << std::setprecision(4) << ssim_summary.mean << " +- " << ssim_summary.stddev;
    os << std::setw(28) << name << std::setw(24) << m.str() << std::setw(20) << p.str() << s.str() << '\n';
    return os.str();
}

}  // namespace bgan
