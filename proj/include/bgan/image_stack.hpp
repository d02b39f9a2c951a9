#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bgan {

/// Affine map from stored [0,1] pixels back to the raw intensity scale:
/// raw = min + (max - min) * pixel.
struct Normalization {
    double min = 0.0;
    double max = 1.0;

    bool is_identity() const noexcept { return min == 0.0 && max == 1.0; }
    double to_raw(double p) const noexcept { return min + (max - min) * p; }

    /// Min-max map covering `raw`. Values already inside [0,1] get the identity.
    static Normalization fit(std::span<const double> raw);
};

/// Provenance carried in the JSON sidecar next to a stack file.
struct StackProvenance {
    std::string source = "unknown";
    Normalization normalization;
    std::optional<double> snr;
    std::optional<std::string> labels_meaning;
    nlohmann::json extra = nlohmann::json::object();
};

/// A batch of same-sized grayscale images, pixels in [0,1], image-major and row-major.
class ImageStack {
public:
    ImageStack() = default;
    ImageStack(std::size_t count, std::size_t height, std::size_t width);
    ImageStack(std::size_t height, std::size_t width, std::vector<float> pixels,
               std::optional<std::vector<std::int32_t>> labels = std::nullopt);

    std::size_t count() const noexcept { return count_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t image_size() const noexcept { return height_ * width_; }
    bool empty() const noexcept { return count_ == 0; }

    std::span<float> pixels() noexcept { return pixels_; }
    std::span<const float> pixels() const noexcept { return pixels_; }
    std::span<float> image(std::size_t i);
    std::span<const float> image(std::size_t i) const;

    const std::optional<std::vector<std::int32_t>>& labels() const noexcept { return labels_; }
    void set_labels(std::optional<std::vector<std::int32_t>> labels);

    StackProvenance& provenance() noexcept { return provenance_; }
    const StackProvenance& provenance() const noexcept { return provenance_; }

    /// Pixel values of image i mapped back through the stack normalization.
    std::vector<double> raw_image(std::size_t i) const;
    std::vector<double> raw_pixels() const;

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    ImageStack subset(std::span<const std::size_t> indices) const;

    /// Same shape as this stack (used before pairing two stacks).
    bool same_shape(const ImageStack& other) const noexcept {
        return count_ == other.count_ && height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const ImageStack& a, const ImageStack& b) {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.count_ == b.count_ &&
               a.pixels_ == b.pixels_ && a.labels_ == b.labels_;
    }

private:
    std::size_t count_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> pixels_;
    std::optional<std::vector<std::int32_t>> labels_;
    StackProvenance provenance_;
};

/// Throws ValidationError unless both stacks have the same count and image dims.
void require_aligned(const ImageStack& a, const ImageStack& b, const char* what);

}  // namespace bgan
