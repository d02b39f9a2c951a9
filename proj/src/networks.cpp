#include "bgan/networks.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "bgan/errors.hpp"

namespace bgan {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv3(std::int64_t in, std::int64_t out, std::int64_t stride = 1) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

nn::InstanceNorm2d inorm(std::int64_t c) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(c).affine(true)); }

nn::LeakyReLU lrelu() { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); }

constexpr std::uint64_t kGeneratorOffset = 0x47;
constexpr std::uint64_t kDiscriminatorOffset = 0x44;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::ResNet ? "RESNET" : "PLAIN_CONV"; }
std::string to_string(Head h) { return h == Head::Sigmoid ? "SIGMOID" : "LINEAR"; }

void ArchSpec::validate() const {
    if (image_size != 32 && image_size != 64 && image_size != 128 && image_size != 256)
        throw ValidationError("arch.image_size must be one of 32, 64, 128, 256");
    if (base_width == 0) throw ValidationError("arch.base_width must be positive");
    if (res_blocks == 0) throw ValidationError("arch.res_blocks must be positive");
    if (stages == 0 || (image_size >> stages) < 2 || ((image_size >> stages) << stages) != image_size)
        throw ValidationError("arch.stages: image size " + std::to_string(image_size) +
                              " cannot be halved " + std::to_string(stages) + " times");
}

nlohmann::json ArchSpec::to_json() const {
    return {{"variant", to_string(variant)}, {"image_size", image_size}, {"base_width", base_width},
            {"res_blocks", res_blocks},      {"stages", stages},         {"head", to_string(head)},
            {"seed", seed}};
}

ArchSpec ArchSpec::from_json(const nlohmann::json& j) {
    ArchSpec s;
    const auto v = j.value("variant", std::string("RESNET"));
    if (v == "RESNET")
        s.variant = Variant::ResNet;
    else if (v == "PLAIN_CONV")
        s.variant = Variant::PlainConv;
    else
        throw ValidationError("arch.variant must be RESNET or PLAIN_CONV (got '" + v + "')");
    const auto h = j.value("head", std::string("SIGMOID"));
    if (h == "SIGMOID")
        s.head = Head::Sigmoid;
    else if (h == "LINEAR")
        s.head = Head::Linear;
    else
        throw ValidationError("arch.head must be SIGMOID or LINEAR (got '" + h + "')");
    s.image_size = j.value("image_size", s.image_size);
    s.base_width = j.value("base_width", s.base_width);
    s.res_blocks = j.value("res_blocks", s.res_blocks);
    s.stages = j.value("stages", s.stages);
    s.seed = j.value("seed", s.seed);
    return s;
}

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels, bool normalize) : normalize_(normalize) {
    conv1_ = register_module("conv1", conv3(channels, channels));
    conv2_ = register_module("conv2", conv3(channels, channels));
    if (normalize_) {
        norm1_ = register_module("norm1", inorm(channels));
        norm2_ = register_module("norm2", inorm(channels));
    }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto h = conv1_(x);
    if (normalize_) h = norm1_(h);
    h = torch::leaky_relu(h, 0.2);
    h = conv2_(h);
    if (normalize_) h = norm2_(h);
    return torch::leaky_relu(x + h, 0.2);
}

namespace {

// Either residual blocks or, for the plain variant, conv-norm-act layers of equal count.
void add_blocks(nn::Sequential& seq, const ArchSpec& spec, std::int64_t c, bool normalize) {
    for (std::size_t b = 0; b < spec.res_blocks; ++b) {
        if (spec.variant == Variant::ResNet) {
            seq->push_back(ResidualBlock(c, normalize));
        } else {
            seq->push_back(conv3(c, c));
            if (normalize) seq->push_back(inorm(c));
            seq->push_back(lrelu());
        }
    }
}

}  // namespace

GeneratorImpl::GeneratorImpl(const ArchSpec& spec) : spec_(spec) {
    spec_.validate();
    const auto w = static_cast<std::int64_t>(spec_.base_width);
    nn::Sequential seq;
    seq->push_back(conv3(1, w));
    seq->push_back(inorm(w));
    seq->push_back(lrelu());
    std::int64_t c = w;
    for (std::size_t s = 0; s < spec_.stages; ++s) {
        add_blocks(seq, spec_, c, true);
        seq->push_back(conv3(c, 2 * c, 2));
        seq->push_back(inorm(2 * c));
        seq->push_back(lrelu());
        c *= 2;
    }
    add_blocks(seq, spec_, c, true);
    for (std::size_t s = 0; s < spec_.stages; ++s) {
        seq->push_back(nn::Upsample(
            nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest)));
        seq->push_back(conv3(c, c / 2));
        seq->push_back(inorm(c / 2));
        seq->push_back(lrelu());
        c /= 2;
        add_blocks(seq, spec_, c, true);
    }
    body_ = register_module("body", seq);
    out_ = register_module("out", conv3(c, 1));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& y) { return torch::sigmoid(out_(body_->forward(y))); }

void GeneratorImpl::zero_output_layer() {
    torch::NoGradGuard guard;
    out_->weight.zero_();
    out_->bias.zero_();
}

DiscriminatorImpl::DiscriminatorImpl(const ArchSpec& spec) : spec_(spec) {
    spec_.validate();
    const auto w = static_cast<std::int64_t>(spec_.base_width);
    nn::Sequential seq;
    seq->push_back(conv3(1, w));
    seq->push_back(lrelu());
    std::int64_t c = w;
    for (std::size_t s = 0; s < spec_.stages; ++s) {
        add_blocks(seq, spec_, c, false);
        seq->push_back(conv3(c, 2 * c, 2));
        seq->push_back(lrelu());
        c *= 2;
    }
    add_blocks(seq, spec_, c, false);
    seq->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
    seq->push_back(nn::Flatten());
    features_ = register_module("features", seq);
    fc_ = register_module("fc", nn::Linear(c, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
    auto logit = fc_(features_->forward(x)).squeeze(1);
    return spec_.head == Head::Sigmoid ? torch::sigmoid(logit) : logit;
}

Generator build_generator(const ArchSpec& spec) {
    torch::manual_seed(spec.seed * 2 + kGeneratorOffset);
    return Generator(spec);
}

Discriminator build_discriminator(const ArchSpec& spec) {
    torch::manual_seed(spec.seed * 2 + kDiscriminatorOffset);
    return Discriminator(spec);
}

std::int64_t parameter_count(torch::nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

std::vector<std::uint8_t> serialize_parameters(torch::nn::Module& module) {
    std::vector<std::pair<std::string, torch::Tensor>> items;
    for (const auto& p : module.named_parameters()) items.emplace_back(p.key(), p.value());
    for (const auto& b : module.named_buffers()) items.emplace_back(b.key(), b.value());
    std::vector<std::uint8_t> out;
    put_u32(out, static_cast<std::uint32_t>(items.size()));
    for (const auto& [name, tensor] : items) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(tensor.dim()));
        for (auto d : tensor.sizes()) {
            const auto v = static_cast<std::uint64_t>(d);
            for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
        }
        const auto t = tensor.detach().to(torch::kFloat).contiguous();
        const float* p = t.data_ptr<float>();
        for (int64_t k = 0; k < t.numel(); ++k) put_u32(out, std::bit_cast<std::uint32_t>(p[k]));
    }
    return out;
}

void load_parameters(torch::nn::Module& module, std::span<const std::uint8_t> blob) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > blob.size()) throw IoError(IoErrc::truncated, "parameter blob ends early");
    };
    auto u32 = [&] {
        need(4);
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) v = (v << 8) | blob[pos + static_cast<std::size_t>(k)];
        pos += 4;
        return v;
    };
    std::map<std::string, torch::Tensor> targets;
    for (const auto& p : module.named_parameters()) targets[p.key()] = p.value();
    for (const auto& b : module.named_buffers()) targets[b.key()] = b.value();

    torch::NoGradGuard guard;
    const auto count = u32();
    if (count != targets.size()) throw IoError(IoErrc::malformed, "parameter count does not match module");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = u32();
        need(len);
        std::string name(reinterpret_cast<const char*>(blob.data() + pos), len);
        pos += len;
        const auto it = targets.find(name);
        if (it == targets.end()) throw IoError(IoErrc::malformed, "unknown parameter " + name);
        const auto rank = u32();
        std::vector<int64_t> dims(rank);
        for (auto& d : dims) {
            need(8);
            std::uint64_t v = 0;
            for (int k = 7; k >= 0; --k) v = (v << 8) | blob[pos + static_cast<std::size_t>(k)];
            pos += 8;
            d = static_cast<int64_t>(v);
        }
        auto& dst = it->second;
        if (dst.sizes().vec() != dims) throw IoError(IoErrc::malformed, "shape mismatch for " + name);
        auto values = torch::empty(dims, torch::kFloat);
        float* p = values.data_ptr<float>();
        for (int64_t k = 0; k < values.numel(); ++k) p[k] = std::bit_cast<float>(u32());
        dst.copy_(values);
    }
    if (pos != blob.size()) throw IoError(IoErrc::malformed, "trailing bytes in parameter blob");
}

}  // namespace bgan
