#include "bgan/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bgan/checkpoint.hpp"
#include "bgan/errors.hpp"

namespace bgan {

std::vector<std::pair<double, double>> default_alpha_beta_grid() {
    return {{1.0, 1.0}, {0.5, 0.5}, {-0.5, -0.5}, {-1.0, -1.0}, {1.0, -1.0}, {0.5, -0.5}, {0.0, 0.0}, {0.1, -0.1}};
}

std::vector<double> default_lambda_grid() { return {0.1, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 10000.0}; }

std::string rule_text(const std::optional<ScoringRule>& rule) {
    if (!rule) return "none";
    if (rule->is_wgan()) return "wgan";
    std::ostringstream os;
    os << rule->alpha << ',' << rule->beta;
    return os.str();
}

std::optional<ScoringRule> parse_rule_text(const std::string& text) {
    if (text == "none" || text == "autoencoder") return std::nullopt;
    return ScoringRule::parse(text);
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ValidationError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

namespace {

template <class F>
void section(const char* name, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("[") + name + "] " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("[") + name + "] " + e.what());
    }
}

nlohmann::json grid_to_json(const SweepGrid& g) {
    nlohmann::json ab = nlohmann::json::array();
    for (const auto& [a, b] : g.alpha_beta) ab.push_back({a, b});
    nlohmann::json types = nlohmann::json::array();
    for (auto t : g.types) types.push_back(to_string(t));
    return {{"alpha_beta", ab}, {"lambda", g.lambda}, {"epsilon", g.epsilon}, {"types", types}};
}

std::vector<double> number_list(const nlohmann::json& j) {
    if (j.is_string()) return parse_number_list(j.get<std::string>());
    return j.get<std::vector<double>>();
}

SweepGrid grid_from_json(const nlohmann::json& j, SweepGrid g) {
    if (j.contains("alpha_beta")) {
        g.alpha_beta.clear();
        const auto& v = j.at("alpha_beta");
        if (v.is_string()) {
            // "a:b;a:b" or "a,b;a,b"
            std::stringstream ss(v.get<std::string>());
            std::string item;
            while (std::getline(ss, item, ';')) {
                if (item.empty()) continue;
                std::replace(item.begin(), item.end(), ':', ',');
                const auto nums = parse_number_list(item);
                if (nums.size() != 2) throw ValidationError("alpha_beta entries need two numbers");
                g.alpha_beta.emplace_back(nums[0], nums[1]);
            }
        } else {
            for (const auto& p : v) {
                if (!p.is_array() || p.size() != 2) throw ValidationError("alpha_beta entries need two numbers");
                g.alpha_beta.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
        }
    }
    if (j.contains("lambda")) g.lambda = number_list(j.at("lambda"));
    if (j.contains("epsilon")) g.epsilon = number_list(j.at("epsilon"));
    if (j.contains("types")) {
        g.types.clear();
        const auto& v = j.at("types");
        std::vector<std::string> names;
        if (v.is_string()) {
            std::stringstream ss(v.get<std::string>());
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) names.push_back(item);
        } else {
            names = v.get<std::vector<std::string>>();
        }
        for (const auto& n : names) g.types.push_back(parse_contamination_type(n));
    }
    return g;
}

nlohmann::json robust_to_json(const SweepSpec& s, const ScoringRule& rule) {
    auto j = s.to_json();
    j["rule"] = rule_text(rule);
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    section("phantom", [&] { phantom.validate(); });
    section("forward", [&] { forward.validate(); });
    section("data", [&] {
        if (data.train_per_conformation == 0) throw ValidationError("train_per_conformation must be positive");
        if (data.test_per_conformation == 0) throw ValidationError("test_per_conformation must be positive");
        if (data.cluster_per_class < 2) throw ValidationError("cluster_per_class must be >= 2");
    });
    section("contamination", [&] { contamination.validate(); });
    section("rule", [&] {
        if (rule) rule->validate();
    });
    section("recon", [&] { recon.validate(); });
    section("arch", [&] {
        arch.validate();
        if (arch.image_size != phantom.image_size)
            throw ValidationError("image_size " + std::to_string(arch.image_size) +
                                  " disagrees with phantom.image_size " + std::to_string(phantom.image_size));
        if (rule && rule->is_wgan() != (arch.head == Head::Linear))
            throw ValidationError("head " + to_string(arch.head) + " is incompatible with rule " + rule_text(rule) +
                                  " (WGAN needs LINEAR, beta-family rules need SIGMOID)");
    });
    section("train", [&] { train_config().validate(); });
    section("metrics", [&] { metrics.validate(); });
    section("embedding", [&] { embedding.validate(); });
    section("nlm", [&] { nlm.validate(); });
    section("robust", [&] {
        robust.validate();
        robust.disc.validate();
        robust_rule.validate();
        if (robust_rule.is_wgan() || !(std::abs(robust_rule.alpha - robust_rule.beta) < 1.0))
            throw ValidationError("rule must be beta-family with |alpha - beta| < 1");
    });
    section("sweep", [&] {
        for (const auto& [a, b] : sweep.alpha_beta) ScoringRule::beta_family(a, b).validate();
        for (double l : sweep.lambda)
            if (!(l >= 0.0)) throw ValidationError("lambda values must be >= 0");
        for (double e : sweep.epsilon)
            if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("epsilon values must lie in [0,1]");
    });
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t = train;
    t.rule = rule;
    t.recon = recon;
    return t;
}

nlohmann::json ExperimentConfig::to_json() const {
    auto train_json = train.to_json();
    train_json.erase("rule");
    train_json.erase("recon");
    train_json["mu"] = train.mu ? nlohmann::json(*train.mu) : nlohmann::json(nullptr);
    return {{"seed", seed},
            {"phantom", phantom.to_json()},
            {"forward", forward.to_json()},
            {"data",
             {{"train_per_conformation", data.train_per_conformation},
              {"test_per_conformation", data.test_per_conformation},
              {"cluster_per_class", data.cluster_per_class}}},
            {"contamination", contamination.to_json()},
            {"rule", rule_text(rule)},
            {"recon", recon.to_json()},
            {"arch", arch.to_json()},
            {"train", train_json},
            {"metrics", metrics.to_json()},
            {"embedding", embedding.to_json()},
            {"nlm", nlm.to_json()},
            {"robust", robust_to_json(robust, robust_rule)},
            {"sweep", grid_to_json(sweep)},
            {"paths", {{"runs", runs_dir}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    static const std::vector<std::string> known{"seed",  "phantom", "forward",   "data",      "contamination",
                                                "rule",  "recon",   "arch",      "train",     "metrics",
                                                "embedding", "nlm", "robust",    "sweep",     "paths"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ValidationError("unknown config section '" + k + "'");
    section("seed", [&] { c.seed = j.value("seed", c.seed); });
    section("phantom", [&] {
        if (j.contains("phantom")) c.phantom = PhantomSpec::from_json(j.at("phantom"));
    });
    section("forward", [&] {
        if (j.contains("forward")) c.forward = ForwardModelSpec::from_json(j.at("forward"));
    });
    section("data", [&] {
        if (!j.contains("data")) return;
        const auto& d = j.at("data");
        c.data.train_per_conformation = d.value("train_per_conformation", c.data.train_per_conformation);
        c.data.test_per_conformation = d.value("test_per_conformation", c.data.test_per_conformation);
        c.data.cluster_per_class = d.value("cluster_per_class", c.data.cluster_per_class);
    });
    section("contamination", [&] {
        if (j.contains("contamination")) c.contamination = ContaminationSpec::from_json(j.at("contamination"));
    });
    section("rule", [&] {
        if (!j.contains("rule")) return;
        const auto& r = j.at("rule");
        if (r.is_null())
            c.rule.reset();
        else if (r.is_string())
            c.rule = parse_rule_text(r.get<std::string>());
        else
            c.rule = ScoringRule::from_json(r);
    });
    section("recon", [&] {
        if (j.contains("recon")) c.recon = ReconLoss::from_json(j.at("recon"));
    });
    section("arch", [&] {
        nlohmann::json a = j.contains("arch") ? j.at("arch") : nlohmann::json::object();
        if (!a.contains("head") || a.at("head") == "AUTO") a["head"] = c.rule && c.rule->is_wgan() ? "LINEAR" : "SIGMOID";
        if (!a.contains("image_size")) a["image_size"] = c.phantom.image_size;
        c.arch = ArchSpec::from_json(a);
    });
    section("train", [&] {
        if (j.contains("train")) {
            auto t = j.at("train");
            t.erase("rule");
            t.erase("recon");
            c.train = TrainConfig::from_json(t);
        }
        c.train.rule.reset();
    });
    section("metrics", [&] {
        if (j.contains("metrics")) c.metrics = MetricsConfig::from_json(j.at("metrics"));
    });
    section("embedding", [&] {
        if (j.contains("embedding")) c.embedding = EmbeddingSpec::from_json(j.at("embedding"));
    });
    section("nlm", [&] {
        if (j.contains("nlm")) c.nlm = NlmSpec::from_json(j.at("nlm"));
    });
    section("robust", [&] {
        if (!j.contains("robust")) return;
        const auto& r = j.at("robust");
        auto& s = c.robust;
        s.p = r.value("p", s.p);
        if (r.contains("n")) {
            s.n_grid.clear();
            for (double v : number_list(r.at("n"))) {
                if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("n values must be positive integers");
                s.n_grid.push_back(static_cast<std::size_t>(v));
            }
        }
        if (r.contains("epsilon")) s.eps_grid = number_list(r.at("epsilon"));
        s.repetitions = r.value("repetitions", s.repetitions);
        if (r.contains("law")) s.law = parse_radial_law(r.at("law").get<std::string>());
        s.far = r.value("far", s.far);
        s.kappa_c = r.value("kappa_c", s.kappa_c);
        if (r.contains("disc")) s.disc = DiscClassSpec::from_json(r.at("disc"));
        if (r.contains("budget")) s.budget = EstimateBudget::from_json(r.at("budget"));
        s.seed = r.value("seed", s.seed);
        if (r.contains("rule")) {
            const auto rule = parse_rule_text(r.at("rule").get<std::string>());
            if (!rule) throw ValidationError("rule must be a scoring rule");
            c.robust_rule = *rule;
        }
    });
    section("sweep", [&] {
        if (j.contains("sweep")) c.sweep = grid_from_json(j.at("sweep"), c.sweep);
    });
    section("paths", [&] {
        if (j.contains("paths")) c.runs_dir = j.at("paths").value("runs", c.runs_dir);
    });
    return c;
}

void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value) {
    nlohmann::json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ValidationError("empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i])) throw ValidationError("unknown config key '" + key + "'");
        node = &(*node)[parts[i]];
    }
    if (!node->is_object() || !node->contains(parts.back()))
        throw ValidationError("unknown config key '" + key + "'");
    auto& slot = (*node)[parts.back()];
    try {
        if (slot.is_boolean()) {
            if (value == "true" || value == "1")
                slot = true;
            else if (value == "false" || value == "0")
                slot = false;
            else
                throw ValidationError("expected true or false");
        } else if (slot.is_number_unsigned() || slot.is_number_integer()) {
            std::size_t used = 0;
            const long long v = std::stoll(value, &used);
            if (used != value.size()) throw ValidationError("expected an integer");
            if (slot.is_number_unsigned() && v < 0) throw ValidationError("expected a nonnegative integer");
            slot = slot.is_number_unsigned() ? nlohmann::json(static_cast<unsigned long long>(v)) : nlohmann::json(v);
        } else if (slot.is_number_float()) {
            const auto nums = parse_number_list(value);
            if (nums.size() != 1 || value.find(',') != std::string::npos) throw ValidationError("expected a number");
            slot = nums[0];
        } else if (slot.is_array() || slot.is_object()) {
            // JSON text, or a comma list of numbers / names.
            auto parsed = nlohmann::json::parse(value, nullptr, false);
            if (!parsed.is_discarded() && (parsed.is_array() || parsed.is_object()))
                slot = parsed;
            else
                slot = value;
        } else if (slot.is_null()) {
            auto parsed = nlohmann::json::parse(value, nullptr, false);
            slot = parsed.is_discarded() ? nlohmann::json(value) : parsed;
        } else {
            // Strings, and the "noiseless" / number union for snr.
            auto parsed = nlohmann::json::parse(value, nullptr, false);
            slot = !parsed.is_discarded() && parsed.is_number() && parts.back() == "snr" ? parsed : nlohmann::json(value);
        }
    } catch (const ValidationError& e) {
        throw ValidationError("override " + key + "=" + value + ": " + e.what());
    } catch (const std::logic_error&) {
        throw ValidationError("override " + key + "=" + value + ": expected an integer");
    }
}

ExperimentConfig load_experiment(const std::optional<std::filesystem::path>& file,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
    nlohmann::json doc = ExperimentConfig{}.to_json();
    bool size_explicit = false, head_explicit = false;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw IoError(IoErrc::open_failed, "cannot open config " + file->string());
        nlohmann::json user = nlohmann::json::parse(in, nullptr, false);
        if (user.is_discarded()) throw ValidationError("config " + file->string() + " is not valid JSON");
        if (!user.is_object()) throw ValidationError("config must be a JSON object");
        if (user.contains("arch") && user.at("arch").is_object()) {
            size_explicit = user.at("arch").contains("image_size");
            head_explicit = user.at("arch").contains("head");
        }
        doc.merge_patch(user);
    }
    for (const auto& [k, v] : overrides) {
        if (k == "phantom.image_size") {
            // A new size rescales the phantom geometry with it.
            const auto before = PhantomSpec::from_json(doc["phantom"]);
            apply_override(doc, k, v);
            const auto n = doc["phantom"]["image_size"].get<std::size_t>();
            section("phantom", [&] { doc["phantom"] = before.resized(n).to_json(); });
            continue;
        }
        apply_override(doc, k, v);
        size_explicit = size_explicit || k == "arch.image_size";
        head_explicit = head_explicit || k == "arch.head";
    }
    // Unless pinned, the networks follow the phantom size and the rule.
    if (!size_explicit && doc.contains("phantom") && doc["phantom"].contains("image_size"))
        doc["arch"]["image_size"] = doc["phantom"]["image_size"];
    if (!head_explicit) doc["arch"]["head"] = "AUTO";
    auto cfg = ExperimentConfig::from_json(doc);
    cfg.validate();
    return cfg;
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const nlohmann::json& config) {
    const auto base = utc_timestamp() + "-" + sha256_hex(config.dump()).substr(0, 8);
    auto dir = root / base;
    for (int k = 1; std::filesystem::exists(dir); ++k) dir = root / (base + "-" + std::to_string(k));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace bgan
