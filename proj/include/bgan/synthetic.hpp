#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <json.hpp>

#include "bgan/image_stack.hpp"

namespace bgan {

/// Parametric "clamp" phantom: a round body with a fixed arm and a clamp arm whose
/// direction differs from the fixed arm by the conformation's opening angle.
struct PhantomSpec {
    std::size_t image_size = 64;
    std::size_t conformations = 5;
    double angle_min = 0.35;  // radians
    double angle_max = 1.75;  // radians
    double arm_length = 20.0;  // pixels, measured from the body center
    double arm_width = 6.0;    // pixels
    double body_radius = 9.0;  // pixels
    bool rotate = true;        // in-plane rotation uniform on [0, 2pi)

    /// Equally spaced opening angles, strictly increasing (one value when K == 1).
    std::vector<double> opening_angles() const;
    void validate() const;

    /// Scales the pixel-valued shape parameters for a different image size.
    PhantomSpec resized(std::size_t new_size) const;

    nlohmann::json to_json() const;
    static PhantomSpec from_json(const nlohmann::json& j);
};

/// n images per conformation, labeled with the conformation index; image-major in
/// label order. Rotation of image i is drawn from the substream (seed, i).
ImageStack render_phantoms(const PhantomSpec& spec, std::size_t per_conformation, std::uint64_t seed);

/// In-plane rotation of image `index` in a render_phantoms call with `seed`.
double phantom_rotation(const PhantomSpec& spec, std::uint64_t seed, std::size_t index);

/// Renders one phantom with explicit opening angle and rotation.
std::vector<float> render_phantom(const PhantomSpec& spec, double opening, double rotation);

struct ForwardModelSpec {
    /// Gaussian PSF radius in pixels; 0 means the identity kernel.
    int psf_radius = 0;
    double psf_sigma = 1.0;
    /// Target clean-signal variance over noise variance; +inf means noiseless.
    double snr = 0.05;

    static constexpr double noiseless = std::numeric_limits<double>::infinity();

    /// Normalized (2r+1)^2 kernel, row-major; {1} for the identity.
    std::vector<double> kernel() const;
    void validate() const;

    nlohmann::json to_json() const;
    static ForwardModelSpec from_json(const nlohmann::json& j);
};

/// Convolution with a (2r+1)^2 kernel using reflect padding ("d c b | a b c d | c b a").
std::vector<double> convolve_reflect(std::span<const double> image, std::size_t height,
                                     std::size_t width, std::span<const double> kernel);

/// y = a * x + zeta with one noise variance for the whole stack,
/// sigma^2 = Var(a * x, pooled) / snr. The result is min-max normalized into [0,1]
/// and the map is stored in its provenance.
ImageStack corrupt(const ImageStack& clean, const ForwardModelSpec& fm, std::uint64_t seed);

/// Var(clean) / Var(noisy - clean), pooled over the stack, both in raw scale.
double measure_snr(const ImageStack& clean, const ImageStack& noisy);

}  // namespace bgan
