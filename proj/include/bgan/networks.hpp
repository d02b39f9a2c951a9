#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace bgan {

enum class Variant { ResNet, PlainConv };
enum class Head { Sigmoid, Linear };

/// Architecture of the generator (encoder-decoder denoiser) and the discriminator.
/// Kernel size 3 throughout; each stage halves (encoder, discriminator) or doubles
/// (decoder) the resolution and doubles (halves) the channel count.
struct ArchSpec {
    Variant variant = Variant::ResNet;
    std::size_t image_size = 64;
    std::size_t base_width = 32;
    std::size_t res_blocks = 2;  // per resolution
    std::size_t stages = 2;
    Head head = Head::Sigmoid;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ArchSpec from_json(const nlohmann::json& j);
};

std::string to_string(Variant v);
std::string to_string(Head h);

/// conv-norm-act-conv-norm + identity skip (norm optional).
class ResidualBlockImpl : public torch::nn::Module {
public:
    ResidualBlockImpl(std::int64_t channels, bool normalize);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
    bool normalize_;
};
TORCH_MODULE(ResidualBlock);

/// G: image -> image in [0,1].
class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const ArchSpec& spec);
    torch::Tensor forward(const torch::Tensor& y);

    /// Zeroes the last convolution so that G(y) == sigmoid(0) == 0.5 everywhere.
    void zero_output_layer();
    const ArchSpec& spec() const noexcept { return spec_; }

private:
    ArchSpec spec_;
    torch::nn::Sequential body_{nullptr};
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(Generator);

/// D: image -> scalar per image, in (0,1) for the sigmoid head.
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const ArchSpec& spec);
    torch::Tensor forward(const torch::Tensor& x);
    const ArchSpec& spec() const noexcept { return spec_; }

private:
    ArchSpec spec_;
    torch::nn::Sequential features_{nullptr};
    torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Modules are initialized from torch's global generator seeded with spec.seed (and a
/// fixed per-network offset), so equal specs give equal weights.
Generator build_generator(const ArchSpec& spec);
Discriminator build_discriminator(const ArchSpec& spec);

std::int64_t parameter_count(torch::nn::Module& module);

/// Parameters and buffers as a little-endian blob: u32 count, then per tensor
/// u32 name length, name, u32 rank, i64 dims, f32 values.
std::vector<std::uint8_t> serialize_parameters(torch::nn::Module& module);
/// Throws IoError(malformed) if names or shapes do not match the module.
void load_parameters(torch::nn::Module& module, std::span<const std::uint8_t> blob);

}  // namespace bgan
