#include "bgan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bgan/errors.hpp"
#include "bgan/rng.hpp"

namespace bgan {

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double wx = px - ax, wy = py - ay;
    const double t = std::clamp((wx * vx + wy * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    return std::hypot(wx - t * vx, wy - t * vy);
}

double pooled_variance(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

}  // namespace

double phantom_rotation(const PhantomSpec& spec, std::uint64_t seed, std::size_t index) {
    if (!spec.rotate) return 0.0;
    auto rng = make_rng(seed, streams::phantom, index);
    return std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
}

std::vector<double> PhantomSpec::opening_angles() const {
    if (conformations == 1) return {angle_min};
    std::vector<double> out(conformations);
    for (std::size_t k = 0; k < conformations; ++k)
        out[k] = angle_min + (angle_max - angle_min) * static_cast<double>(k) /
                                 static_cast<double>(conformations - 1);
    return out;
}

void PhantomSpec::validate() const {
    if (image_size != 32 && image_size != 64 && image_size != 128)
        throw ValidationError("phantom.image_size must be 32, 64 or 128");
    if (conformations < 1) throw ValidationError("phantom.conformations must be >= 1");
    if (conformations > 1 && !(angle_max > angle_min))
        throw ValidationError("phantom.angle_max must exceed angle_min so angles increase strictly");
    if (!(arm_length > 0.0 && arm_width > 0.0 && body_radius > 0.0))
        throw ValidationError("phantom shape parameters must be positive");
    const double half = static_cast<double>(image_size) / 2.0 - 1.0;
    if (arm_length + arm_width / 2.0 > half || body_radius > half) {
        std::ostringstream os;
        os << "phantom shape (arm reach " << arm_length + arm_width / 2.0 << ", body radius "
           << body_radius << ") exceeds the image half-width " << half;
        throw ValidationError(os.str());
    }
}

PhantomSpec PhantomSpec::resized(std::size_t new_size) const {
    PhantomSpec s = *this;
    const double f = static_cast<double>(new_size) / static_cast<double>(image_size);
    s.image_size = new_size;
    s.arm_length *= f;
    s.arm_width *= f;
    s.body_radius *= f;
    return s;
}

nlohmann::json PhantomSpec::to_json() const {
    return {{"image_size", image_size}, {"conformations", conformations},
            {"angle_min", angle_min},   {"angle_max", angle_max},
            {"arm_length", arm_length}, {"arm_width", arm_width},
            {"body_radius", body_radius}, {"rotate", rotate}};
}

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
    PhantomSpec s;
    s.image_size = j.value("image_size", s.image_size);
    s.conformations = j.value("conformations", s.conformations);
    s.angle_min = j.value("angle_min", s.angle_min);
    s.angle_max = j.value("angle_max", s.angle_max);
    s.arm_length = j.value("arm_length", s.arm_length);
    s.arm_width = j.value("arm_width", s.arm_width);
    s.body_radius = j.value("body_radius", s.body_radius);
    s.rotate = j.value("rotate", s.rotate);
    return s;
}

std::vector<float> render_phantom(const PhantomSpec& spec, double opening, double rotation) {
    const std::size_t n = spec.image_size;
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    const double half_w = spec.arm_width / 2.0;
    const double fx = c + spec.arm_length * std::cos(rotation);
    const double fy = c + spec.arm_length * std::sin(rotation);
    const double cx = c + spec.arm_length * std::cos(rotation + opening);
    const double cy = c + spec.arm_length * std::sin(rotation + opening);
    std::vector<float> img(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t col = 0; col < n; ++col) {
            const double x = static_cast<double>(col), y = static_cast<double>(r);
            double d = std::hypot(x - c, y - c) - spec.body_radius;
            d = std::min(d, segment_distance(x, y, c, c, fx, fy) - half_w);
            d = std::min(d, segment_distance(x, y, c, c, cx, cy) - half_w);
            // signed distance -> approximate pixel coverage
            img[r * n + col] = static_cast<float>(std::clamp(0.5 - d, 0.0, 1.0));
        }
    }
    return img;
}

ImageStack render_phantoms(const PhantomSpec& spec, std::size_t per_conformation, std::uint64_t seed) {
    spec.validate();
    const auto angles = spec.opening_angles();
    const std::size_t n = spec.image_size;
    std::vector<float> pixels;
    pixels.reserve(angles.size() * per_conformation * n * n);
    std::vector<std::int32_t> labels;
    std::size_t index = 0;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        for (std::size_t i = 0; i < per_conformation; ++i, ++index) {
            const auto img = render_phantom(spec, angles[k], phantom_rotation(spec, seed, index));
            pixels.insert(pixels.end(), img.begin(), img.end());
            labels.push_back(static_cast<std::int32_t>(k));
        }
    }
    if (pixels.empty()) {
        ImageStack empty(0, n, n);
        empty.set_labels(std::vector<std::int32_t>{});
        return empty;
    }
    ImageStack out(n, n, std::move(pixels), std::move(labels));
    out.provenance().source = "phantom";
    out.provenance().labels_meaning = "conformation index";
    return out;
}

std::vector<double> ForwardModelSpec::kernel() const {
    if (psf_radius == 0) return {1.0};
    const int w = 2 * psf_radius + 1;
    std::vector<double> k(static_cast<std::size_t>(w * w));
    double total = 0.0;
    for (int i = -psf_radius; i <= psf_radius; ++i)
        for (int j = -psf_radius; j <= psf_radius; ++j) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * psf_sigma * psf_sigma));
            k[static_cast<std::size_t>((i + psf_radius) * w + (j + psf_radius))] = v;
            total += v;
        }
    for (auto& v : k) v /= total;
    return k;
}

void ForwardModelSpec::validate() const {
    if (psf_radius < 0) throw ValidationError("forward_model.psf_radius must be >= 0");
    if (psf_radius > 0 && !(psf_sigma > 0.0)) throw ValidationError("forward_model.psf_sigma must be > 0");
    if (!(snr > 0.0)) throw ValidationError("forward_model.snr must be > 0");
}

nlohmann::json ForwardModelSpec::to_json() const {
    nlohmann::json j{{"psf_radius", psf_radius}, {"psf_sigma", psf_sigma}};
    if (std::isinf(snr))
        j["snr"] = "noiseless";
    else
        j["snr"] = snr;
    return j;
}

ForwardModelSpec ForwardModelSpec::from_json(const nlohmann::json& j) {
    ForwardModelSpec s;
    s.psf_radius = j.value("psf_radius", s.psf_radius);
    s.psf_sigma = j.value("psf_sigma", s.psf_sigma);
    if (j.contains("snr")) {
        const auto& v = j.at("snr");
        if (v.is_string()) {
            if (v.get<std::string>() != "noiseless")
                throw ValidationError("forward_model.snr must be a number or \"noiseless\"");
            s.snr = noiseless;
        } else {
            s.snr = v.get<double>();
        }
    }
    return s;
}

std::vector<double> convolve_reflect(std::span<const double> image, std::size_t height,
                                     std::size_t width, std::span<const double> kernel) {
    if (kernel.size() == 1) {
        std::vector<double> out(image.begin(), image.end());
        for (auto& v : out) v *= kernel[0];
        return out;
    }
    const int w = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kernel.size()))));
    if (w * w != static_cast<int>(kernel.size()) || w % 2 == 0)
        throw ValidationError("kernel must be square with odd side");
    const int r = w / 2;
    const int h = static_cast<int>(height), wd = static_cast<int>(width);
    if (r >= h || r >= wd) throw ValidationError("kernel radius exceeds image size");
    auto reflect = [](int i, int n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };
    std::vector<double> out(image.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wd; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = reflect(y + i, h);
                for (int j = -r; j <= r; ++j)
                    acc += kernel[static_cast<std::size_t>((i + r) * w + (j + r))] *
                           image[static_cast<std::size_t>(yy * wd + reflect(x + j, wd))];
            }
            out[static_cast<std::size_t>(y * wd + x)] = acc;
        }
    return out;
}

ImageStack corrupt(const ImageStack& clean, const ForwardModelSpec& fm, std::uint64_t seed) {
    clean.validate();
    fm.validate();
    const auto kernel = fm.kernel();
    const std::size_t per = clean.image_size();
    std::vector<double> raw(clean.pixels().size());
    for (std::size_t i = 0; i < clean.count(); ++i) {
        const auto blurred = convolve_reflect(clean.raw_image(i), clean.height(), clean.width(), kernel);
        std::copy(blurred.begin(), blurred.end(), raw.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    if (!std::isinf(fm.snr)) {
        const double signal = pooled_variance(raw);
        if (!(signal > 0.0))
            throw ValidationError("corrupt: clean stack has zero pixel variance, SNR is undefined");
        const double sigma = std::sqrt(signal / fm.snr);
        for (std::size_t i = 0; i < clean.count(); ++i) {
            auto rng = make_rng(seed, streams::noise, i);
            std::normal_distribution<double> noise(0.0, sigma);
            for (std::size_t k = 0; k < per; ++k) raw[i * per + k] += noise(rng);
        }
    }
    const auto norm = Normalization::fit(raw);
    std::vector<float> px(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const double p = (raw[k] - norm.min) / (norm.max - norm.min);
        px[k] = static_cast<float>(std::clamp(p, 0.0, 1.0));
    }
    if (px.empty()) return ImageStack(0, clean.height(), clean.width());
    ImageStack out(clean.height(), clean.width(), std::move(px), clean.labels());
    out.provenance().source = "corrupt";
    out.provenance().normalization = norm;
    if (!std::isinf(fm.snr)) out.provenance().snr = fm.snr;
    out.provenance().labels_meaning = clean.provenance().labels_meaning;
    return out;
}

double measure_snr(const ImageStack& clean, const ImageStack& noisy) {
    require_aligned(clean, noisy, "measure_snr");
    const auto x = clean.raw_pixels();
    const auto y = noisy.raw_pixels();
    std::vector<double> diff(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) diff[k] = y[k] - x[k];
    const double noise = pooled_variance(diff);
    if (!(noise > 0.0)) throw ValidationError("measure_snr: noise variance is zero, SNR is undefined");
    return pooled_variance(x) / noise;
}

}  // namespace bgan
