#include "bgan/contamination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bgan/errors.hpp"

namespace bgan {

std::string to_string(ContaminationType t) {
    switch (t) {
        case ContaminationType::A: return "A";
        case ContaminationType::B: return "B";
        case ContaminationType::C: return "C";
        case ContaminationType::Mixture: return "MIXTURE";
    }
    return "?";
}

ContaminationType parse_contamination_type(const std::string& s) {
    if (s == "A" || s == "a") return ContaminationType::A;
    if (s == "B" || s == "b") return ContaminationType::B;
    if (s == "C" || s == "c") return ContaminationType::C;
    if (s == "MIXTURE" || s == "mixture") return ContaminationType::Mixture;
    throw ValidationError("contamination.type must be one of A, B, C, MIXTURE (got '" + s + "')");
}

void ContaminationSpec::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw ValidationError("contamination.epsilon must lie in [0,1]");
    if (!(q.stddev >= 0.0)) throw ValidationError("contamination.q.stddev must be >= 0");
}

nlohmann::json ContaminationSpec::to_json() const {
    return {{"epsilon", epsilon},
            {"type", to_string(type)},
            {"q", {{"mean", q.mean}, {"stddev", q.stddev}}},
            {"seed", seed}};
}

ContaminationSpec ContaminationSpec::from_json(const nlohmann::json& j) {
    ContaminationSpec s;
    s.epsilon = j.value("epsilon", s.epsilon);
    if (j.contains("type")) s.type = parse_contamination_type(j.at("type").get<std::string>());
    if (j.contains("q")) {
        s.q.mean = j.at("q").value("mean", s.q.mean);
        s.q.stddev = j.at("q").value("stddev", s.q.stddev);
    }
    s.seed = j.value("seed", s.seed);
    return s;
}

std::vector<float> draw_q_image(const QLaw& q, std::size_t pixels, Rng& rng) {
    std::normal_distribution<double> px(q.mean, q.stddev);
    std::vector<float> out(pixels);
    for (auto& v : out) v = static_cast<float>(std::clamp(px(rng), 0.0, 1.0));
    return out;
}

ContaminatedPairs contaminate_pairs(const ImageStack& refs, const ImageStack& noisy,
                                    const ContaminationSpec& spec) {
    require_aligned(refs, noisy, "contaminate_pairs");
    spec.validate();
    const std::size_t n = refs.count();
    ContaminatedPairs out{refs, noisy, std::vector<std::uint8_t>(n, 0)};
    auto rng = make_rng(spec.seed, streams::contamination);

    if (spec.type == ContaminationType::Mixture) {
        std::bernoulli_distribution coin(spec.epsilon);
        for (std::size_t i = 0; i < n; ++i) out.flags[i] = coin(rng) ? 1 : 0;
    } else {
        const auto k = static_cast<std::size_t>(std::llround(spec.epsilon * static_cast<double>(n)));
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        // partial Fisher-Yates: the first k slots are a uniform k-subset
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        for (std::size_t i = 0; i < k; ++i) out.flags[idx[i]] = 1;
    }

    const bool ref_side = spec.type != ContaminationType::B;
    const bool noisy_side = spec.type != ContaminationType::A;
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.flags[i]) continue;
        if (ref_side) {
            auto r = make_rng(spec.seed, streams::contamination, 2 * i + 1);
            const auto img = draw_q_image(spec.q, refs.image_size(), r);
            std::copy(img.begin(), img.end(), out.refs.image(i).begin());
        }
        if (noisy_side) {
            auto r = make_rng(spec.seed, streams::contamination, 2 * i + 2);
            const auto img = draw_q_image(spec.q, noisy.image_size(), r);
            std::copy(img.begin(), img.end(), out.noisy.image(i).begin());
        }
    }
    const nlohmann::json record{{"spec", spec.to_json()}, {"flags", out.flags}};
    out.refs.provenance().extra["contamination"] = record;
    out.noisy.provenance().extra["contamination"] = record;
    return out;
}

}  // namespace bgan
