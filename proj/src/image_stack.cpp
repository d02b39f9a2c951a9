#include "bgan/image_stack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bgan/errors.hpp"

namespace bgan {

Normalization Normalization::fit(std::span<const double> raw) {
    if (raw.empty()) return {};
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    if (*lo >= 0.0 && *hi <= 1.0) return {};
    if (*hi == *lo) return {*lo, *lo + 1.0};
    return {*lo, *hi};
}

ImageStack::ImageStack(std::size_t count, std::size_t height, std::size_t width)
    : count_(count), height_(height), width_(width), pixels_(count * height * width, 0.0f) {
    if (height == 0 || width == 0) throw ValidationError("image dims must be positive");
}

ImageStack::ImageStack(std::size_t height, std::size_t width, std::vector<float> pixels,
                       std::optional<std::vector<std::int32_t>> labels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height == 0 || width == 0) throw ValidationError("image dims must be positive");
    if (pixels_.size() % (height * width) != 0)
        throw ValidationError("pixel buffer is not a whole number of images");
    count_ = pixels_.size() / (height * width);
    set_labels(std::move(labels));
}

std::span<float> ImageStack::image(std::size_t i) {
    if (i >= count_) throw std::out_of_range("image index out of range");
    return std::span<float>(pixels_).subspan(i * image_size(), image_size());
}

std::span<const float> ImageStack::image(std::size_t i) const {
    if (i >= count_) throw std::out_of_range("image index out of range");
    return std::span<const float>(pixels_).subspan(i * image_size(), image_size());
}

void ImageStack::set_labels(std::optional<std::vector<std::int32_t>> labels) {
    if (labels && labels->size() != count_)
        throw ValidationError("labels length " + std::to_string(labels->size()) +
                              " does not match image count " + std::to_string(count_));
    labels_ = std::move(labels);
}

std::vector<double> ImageStack::raw_image(std::size_t i) const {
    const auto img = image(i);
    std::vector<double> out(img.size());
    const auto& n = provenance_.normalization;
    std::transform(img.begin(), img.end(), out.begin(),
                   [&](float p) { return n.to_raw(static_cast<double>(p)); });
    return out;
}

std::vector<double> ImageStack::raw_pixels() const {
    std::vector<double> out(pixels_.size());
    const auto& n = provenance_.normalization;
    std::transform(pixels_.begin(), pixels_.end(), out.begin(),
                   [&](float p) { return n.to_raw(static_cast<double>(p)); });
    return out;
}

void ImageStack::validate() const {
    if (height_ == 0 || width_ == 0) throw ValidationError("image dims must be positive");
    if (pixels_.size() != count_ * image_size())
        throw ValidationError("pixel buffer size does not match count x height x width");
    if (labels_ && labels_->size() != count_) throw ValidationError("labels length != count");
    for (std::size_t k = 0; k < pixels_.size(); ++k) {
        const float p = pixels_[k];
        if (!std::isfinite(p) || p < 0.0f || p > 1.0f) {
            std::ostringstream os;
            os << "pixel " << k % image_size() << " of image " << k / image_size() << " is " << p
               << ", outside [0,1]";
            throw ValidationError(os.str());
        }
    }
}

ImageStack ImageStack::subset(std::span<const std::size_t> indices) const {
    std::vector<float> px;
    px.reserve(indices.size() * image_size());
    std::optional<std::vector<std::int32_t>> lab;
    if (labels_) lab.emplace();
    for (auto i : indices) {
        const auto img = image(i);
        px.insert(px.end(), img.begin(), img.end());
        if (lab) lab->push_back((*labels_)[i]);
    }
    ImageStack out(height_, width_, std::move(px), std::move(lab));
    out.provenance_ = provenance_;
    out.provenance_.extra = nlohmann::json::object();
    return out;
}

void require_aligned(const ImageStack& a, const ImageStack& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << what << ": stacks are not aligned (" << a.count() << "x" << a.height() << "x"
           << a.width() << " vs " << b.count() << "x" << b.height() << "x" << b.width() << ")";
        throw ValidationError(os.str());
    }
}

}  // namespace bgan
