#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgan/image_stack.hpp"
#include "bgan/rng.hpp"

namespace bgan {

/// A: replace reference images. B: replace noisy images. C: replace both.
/// Mixture: each pair independently replaced (both members) with probability epsilon.
enum class ContaminationType { A, B, C, Mixture };

std::string to_string(ContaminationType t);
ContaminationType parse_contamination_type(const std::string& s);

/// Contaminating law Q: i.i.d. Gaussian pixels clipped to [0,1].
struct QLaw {
    double mean = 0.5;
    double stddev = 0.15;
};

struct ContaminationSpec {
    double epsilon = 0.0;
    ContaminationType type = ContaminationType::A;
    QLaw q;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ContaminationSpec from_json(const nlohmann::json& j);
};

struct ContaminatedPairs {
    ImageStack refs;
    ImageStack noisy;
    std::vector<std::uint8_t> flags;  // 1 where the pair was touched
};

std::vector<float> draw_q_image(const QLaw& q, std::size_t pixels, Rng& rng);

/// For A/B/C exactly round(epsilon * count) distinct pairs are replaced. Untouched pairs
/// are copied bit for bit. Flags are also written to both stacks' provenance.
ContaminatedPairs contaminate_pairs(const ImageStack& refs, const ImageStack& noisy,
                                    const ContaminationSpec& spec);

template <class T>
struct HuberSample {
    std::vector<T> values;
    std::vector<std::uint8_t> from_q;
};

/// n i.i.d. draws from (1 - eps) P0 + eps Q; each draw picks Q with probability eps.
template <class T>
HuberSample<T> sample_huber(const std::function<T(Rng&)>& p0, const std::function<T(Rng&)>& q,
                            double eps, std::size_t n, std::uint64_t seed) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("sample_huber: eps outside [0,1]");
    auto rng = make_rng(seed, streams::contamination);
    std::bernoulli_distribution coin(eps);
    HuberSample<T> out;
    out.values.reserve(n);
    out.from_q.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool bad = coin(rng);
        out.from_q.push_back(bad ? 1 : 0);
        out.values.push_back(bad ? q(rng) : p0(rng));
    }
    return out;
}

}  // namespace bgan
