// Command-line front end: generate, contaminate, train, denoise, evaluate, sweep, cluster,
// robust-estimate. Every run writes manifest.json next to its outputs.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bgan/checkpoint.hpp"
#include "bgan/clustering.hpp"
#include "bgan/contamination.hpp"
#include "bgan/errors.hpp"
#include "bgan/experiment.hpp"
#include "bgan/metrics.hpp"
#include "bgan/networks.hpp"
#include "bgan/robust.hpp"
#include "bgan/stack_io.hpp"
#include "bgan/synthetic.hpp"
#include "bgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace bgan;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Short flag names per subcommand; anything else must be a dotted config key.
const std::map<std::string, std::map<std::string, std::string>> kAliases{
    {"generate",
     {{"snr", "forward.snr"}, {"size", "phantom.image_size"}, {"count", "data.train_per_conformation"},
      {"test-count", "data.test_per_conformation"}, {"psf-radius", "forward.psf_radius"}}},
    {"contaminate", {{"type", "contamination.type"}, {"epsilon", "contamination.epsilon"}}},
    {"train",
     {{"rule", "rule"}, {"lambda", "recon.lambda"}, {"p", "recon.p"}, {"iterations", "train.iterations"},
      {"size", "phantom.image_size"},
      {"batch", "train.batch"}, {"mu", "train.mu"}, {"eval-interval", "train.eval_interval"},
      {"width", "arch.base_width"}, {"blocks", "arch.res_blocks"}}},
    {"denoise", {}},
    {"evaluate", {}},
    {"sweep",
     {{"rule", "rule"}, {"lambda", "sweep.lambda"}, {"alpha-beta", "sweep.alpha_beta"}, {"epsilon", "sweep.epsilon"},
      {"type", "sweep.types"}, {"p", "recon.p"}, {"size", "phantom.image_size"}, {"iterations", "train.iterations"}, {"batch", "train.batch"},
      {"width", "arch.base_width"}, {"blocks", "arch.res_blocks"}}},
    {"cluster", {{"method", "embedding.method"}, {"k", "embedding.k_nn"}, {"dim", "embedding.dim"}}},
    {"robust-estimate",
     {{"p", "robust.p"}, {"n", "robust.n"}, {"epsilon", "robust.epsilon"}, {"reps", "robust.repetitions"},
      {"rule", "robust.rule"}, {"law", "robust.law"}, {"steps", "robust.budget.steps"}}},
};

const std::vector<std::string> kTopLevel{"seed", "rule"};

Overrides collect_overrides(const std::string& command, const std::vector<std::string>& extras) {
    Overrides out;
    const auto& aliases = kAliases.at(command);
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string flag = extras[i];
        std::string value;
        if (flag.rfind("--", 0) != 0) throw ValidationError("unexpected argument '" + flag + "'");
        flag = flag.substr(2);
        if (const auto eq = flag.find('='); eq != std::string::npos) {
            value = flag.substr(eq + 1);
            flag = flag.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw ValidationError("flag --" + flag + " needs a value");
            value = extras[++i];
        }
        std::string key;
        if (const auto it = aliases.find(flag); it != aliases.end())
            key = it->second;
        else if (flag.find('.') != std::string::npos ||
                 std::find(kTopLevel.begin(), kTopLevel.end(), flag) != kTopLevel.end())
            key = flag;
        else
            throw ValidationError("unknown option --" + flag + " for '" + command + "'");
        out.emplace_back(key, value);
    }
    return out;
}

bool env_deterministic() {
    const char* v = std::getenv("BGAN_DETERMINISTIC");
    return v && std::string(v) == "1";
}

struct Run {
    std::string command;
    ExperimentConfig cfg;
    fs::path dir;
    nlohmann::json inputs = nlohmann::json::object();
    std::map<std::string, std::string> fingerprints;

    void record_input(const std::string& name, const fs::path& path) {
        inputs[name] = path.string();
        fingerprints["input:" + name] = file_sha256(path);
    }

    void write_stack_output(const ImageStack& s, const std::string& name) {
        const auto path = dir / name;
        write_stack(s, path);
        fingerprints[name] = file_sha256(path);
    }

    void write_text_output(const std::string& text, const std::string& name) {
        const auto path = dir / name;
        write_text_file(path, text);
        fingerprints[name] = file_sha256(path);
    }

    RunManifest manifest() const {
        RunManifest m;
        m.run_id = dir.filename().string();
        m.config = cfg.to_json();
        m.config["command"] = command;
        m.config["inputs"] = inputs;
        m.seed = cfg.seed;
        m.created_at = utc_timestamp();
        m.data_fingerprints = fingerprints;
        return m;
    }

    void finish() const {
        write_text_file(dir / "manifest.json", manifest().to_json().dump(2) + "\n");
        std::cout << dir.string() << "\n";
    }
};

Run start_run(const std::string& command, const std::optional<fs::path>& config_file,
              const std::optional<fs::path>& out, const std::vector<std::string>& extras) {
    Run run;
    run.command = command;
    run.cfg = load_experiment(config_file, collect_overrides(command, extras));
    if (env_deterministic()) run.cfg.train.deterministic = true;
    if (run.cfg.train.deterministic) at::set_num_threads(1);
    if (out) {
        if (fs::exists(*out / "manifest.json"))
            throw IoError(IoErrc::write_failed, "refusing to overwrite the run in " + out->string());
        fs::create_directories(*out);
        run.dir = *out;
    } else {
        run.dir = make_run_dir(run.cfg.runs_dir, run.cfg.to_json());
    }
    return run;
}

// Input stacks come either from explicit paths or from a previous run directory.
fs::path pick(const std::optional<fs::path>& explicit_path, const std::optional<fs::path>& from,
              const std::vector<std::string>& names, const char* what) {
    if (explicit_path) return *explicit_path;
    if (from)
        for (const auto& n : names)
            if (fs::exists(*from / n)) return *from / n;
    throw ValidationError(std::string("missing input: ") + what + " (give a path or --from <run dir>)");
}

std::optional<fs::path> pick_optional(const std::optional<fs::path>& explicit_path,
                                      const std::optional<fs::path>& from, const std::vector<std::string>& names) {
    if (explicit_path) return explicit_path;
    if (from)
        for (const auto& n : names)
            if (fs::exists(*from / n)) return *from / n;
    return std::nullopt;
}

Generator load_generator(const fs::path& path) {
    const auto ck = load_checkpoint(path);
    if (!ck.manifest.config.contains("arch")) throw IoError(IoErrc::malformed, "checkpoint manifest lacks arch");
    auto G = build_generator(ArchSpec::from_json(ck.manifest.config.at("arch")));
    load_parameters(*G, ck.blob);
    G->eval();
    return G;
}

struct Options {
    std::optional<fs::path> config, out, from, refs, noisy, test_refs, test_noisy, checkpoint, input, ref, test;
    std::string name = "model";
    std::string grid;
    bool dry_run = false;
};

int cmd_generate(Run& run) {
    const auto& c = run.cfg;
    const auto clean = render_phantoms(c.phantom, c.data.train_per_conformation, derive_seed(c.seed, streams::phantom, 0));
    const auto noisy = corrupt(clean, c.forward, derive_seed(c.seed, streams::noise, 0));
    const auto test_clean = render_phantoms(c.phantom, c.data.test_per_conformation, derive_seed(c.seed, streams::phantom, 1));
    const auto test_noisy = corrupt(test_clean, c.forward, derive_seed(c.seed, streams::noise, 1));
    run.write_stack_output(clean, "clean.bgis");
    run.write_stack_output(noisy, "noisy.bgis");
    run.write_stack_output(test_clean, "test_clean.bgis");
    run.write_stack_output(test_noisy, "test_noisy.bgis");
    return 0;
}

int cmd_contaminate(Run& run, const Options& o) {
    const auto refs_path = pick(o.refs, o.from, {"refs.bgis", "clean.bgis"}, "reference stack");
    const auto noisy_path = pick(o.noisy, o.from, {"noisy.bgis"}, "noisy stack");
    run.record_input("refs", refs_path);
    run.record_input("noisy", noisy_path);
    const auto pairs = contaminate_pairs(read_stack(refs_path), read_stack(noisy_path), run.cfg.contamination);
    run.write_stack_output(pairs.refs, "refs.bgis");
    run.write_stack_output(pairs.noisy, "noisy.bgis");
    std::ostringstream flags;
    flags << "index,flag\n";
    for (std::size_t i = 0; i < pairs.flags.size(); ++i) flags << i << ',' << int(pairs.flags[i]) << '\n';
    run.write_text_output(flags.str(), "flags.csv");
    return 0;
}

TrainResult train_on(const ExperimentConfig& cfg, const ImageStack& refs, const ImageStack& noisy,
                     const std::optional<std::pair<ImageStack, ImageStack>>& test) {
    std::optional<PairedStacks> test_pairs;
    if (test) test_pairs.emplace(PairedStacks{test->first, test->second});
    const auto tc = cfg.train_config();
    return tc.rule ? train({refs, noisy}, tc, cfg.arch, test_pairs) : train_autoencoder_only({refs, noisy}, tc, cfg.arch, test_pairs);
}

std::optional<std::pair<ImageStack, ImageStack>> load_test(Run& run, const Options& o) {
    const auto tr = pick_optional(o.test_refs, o.from, {"test_clean.bgis", "test_refs.bgis"});
    const auto tn = pick_optional(o.test_noisy, o.from, {"test_noisy.bgis"});
    if (!tr || !tn) return std::nullopt;
    run.record_input("test_refs", *tr);
    run.record_input("test_noisy", *tn);
    return std::make_pair(read_stack(*tr), read_stack(*tn));
}

int cmd_train(Run& run, const Options& o) {
    const auto refs_path = pick(o.refs, o.from, {"refs.bgis", "clean.bgis"}, "reference stack");
    const auto noisy_path = pick(o.noisy, o.from, {"noisy.bgis"}, "noisy stack");
    run.record_input("refs", refs_path);
    run.record_input("noisy", noisy_path);
    const auto refs = read_stack(refs_path);
    const auto noisy = read_stack(noisy_path);
    const auto test = load_test(run, o);
    auto result = train_on(run.cfg, refs, noisy, test);
    run.write_text_output(result.log.to_csv(!run.cfg.train.deterministic), "train_log.csv");
    const auto ckpt = run.dir / "generator.ckpt";
    save_checkpoint(serialize_parameters(*result.generator), run.manifest(), ckpt);
    run.fingerprints["generator.ckpt.params"] = sha256_hex(serialize_parameters(*result.generator));
    return 0;
}

int cmd_denoise(Run& run, const Options& o) {
    if (!o.checkpoint) throw ValidationError("denoise needs --checkpoint");
    const auto input = pick(o.input, o.from, {"test_noisy.bgis", "noisy.bgis"}, "noisy stack");
    run.record_input("checkpoint", *o.checkpoint);
    run.record_input("input", input);
    auto G = load_generator(*o.checkpoint);
    run.write_stack_output(denoise(G, read_stack(input)), "denoised.bgis");
    return 0;
}

int cmd_evaluate(Run& run, const Options& o) {
    if (!o.ref || !o.test) throw ValidationError("evaluate needs --ref and --test");
    run.record_input("ref", *o.ref);
    run.record_input("test", *o.test);
    const auto r = report(read_stack(*o.ref), read_stack(*o.test), run.cfg.metrics);
    run.write_text_output(r.to_csv(), "metrics.csv");
    auto j = r.to_json();
    j["name"] = o.name;
    run.write_text_output(j.dump(2) + "\n", "metrics.json");
    run.write_text_output(r.to_table(o.name), "metrics.txt");
    std::cout << r.to_table(o.name);
    return 0;
}

struct SweepCell {
    std::optional<ScoringRule> rule;
    double lambda;
    ContaminationType type;
    double epsilon;
};

int cmd_sweep(Run& run, const Options& o) {
    const auto& c = run.cfg;
    std::vector<SweepCell> cells;
    const auto base_rule = c.rule;
    if (o.grid == "alpha-beta") {
        if (c.sweep.alpha_beta.empty()) throw ValidationError("sweep grid 'alpha_beta' is empty");
        for (const auto& [a, b] : c.sweep.alpha_beta)
            cells.push_back({ScoringRule::beta_family(a, b), c.recon.lambda, ContaminationType::A, 0.0});
    } else if (o.grid == "lambda") {
        if (c.sweep.lambda.empty()) throw ValidationError("sweep grid 'lambda' is empty");
        for (double l : c.sweep.lambda) cells.push_back({base_rule, l, ContaminationType::A, 0.0});
    } else if (o.grid == "contamination") {
        if (c.sweep.epsilon.empty() || c.sweep.types.empty())
            throw ValidationError("sweep grid 'contamination' is empty (needs epsilon and types)");
        for (auto t : c.sweep.types)
            for (double e : c.sweep.epsilon) cells.push_back({base_rule, c.recon.lambda, t, e});
    } else {
        throw ValidationError("unknown sweep grid '" + o.grid + "' (valid: alpha-beta, lambda, contamination)");
    }
    for (const auto& cell : cells)
        if (cell.rule && cell.rule->is_wgan() != (c.arch.head == Head::Linear))
            throw ValidationError("[arch] head is incompatible with sweep rule " + rule_text(cell.rule));

    std::ostringstream csv;
    csv.precision(10);
    csv << "grid,rule,lambda,type,epsilon,test_mse,test_mse_std,psnr,ssim\n";
    if (o.dry_run) {
        for (const auto& cell : cells)
            csv << o.grid << ',' << '"' << rule_text(cell.rule) << '"' << ',' << cell.lambda << ','
                << to_string(cell.type) << ',' << cell.epsilon << ",,,,\n";
        run.write_text_output(csv.str(), "sweep_cells.csv");
        return 0;
    }
    const auto refs_path = pick(o.refs, o.from, {"refs.bgis", "clean.bgis"}, "reference stack");
    const auto noisy_path = pick(o.noisy, o.from, {"noisy.bgis"}, "noisy stack");
    run.record_input("refs", refs_path);
    run.record_input("noisy", noisy_path);
    const auto refs = read_stack(refs_path);
    const auto noisy = read_stack(noisy_path);
    const auto test = load_test(run, o);
    if (!test) throw ValidationError("sweep needs a held-out test pair (--test-refs/--test-noisy or --from)");
    for (const auto& cell : cells) {
        ExperimentConfig cc = c;
        cc.rule = cell.rule;
        cc.recon.lambda = cell.lambda;
        ImageStack r = refs, n = noisy;
        if (cell.epsilon > 0.0) {
            ContaminationSpec cs = c.contamination;
            cs.type = cell.type;
            cs.epsilon = cell.epsilon;
            auto pairs = contaminate_pairs(refs, noisy, cs);
            r = std::move(pairs.refs);
            n = std::move(pairs.noisy);
        }
        auto result = train_on(cc, r, n, std::nullopt);
        const auto rep = report(test->first, denoise(result.generator, test->second), c.metrics);
        csv << o.grid << ',' << '"' << rule_text(cell.rule) << '"' << ',' << cell.lambda << ',' << to_string(cell.type)
            << ',' << cell.epsilon << ',' << rep.mse_summary.mean << ',' << rep.mse_summary.stddev << ','
            << rep.psnr_summary.mean << ',' << rep.ssim_summary.mean << '\n';
    }
    run.write_text_output(csv.str(), "sweep.csv");
    return 0;
}

int cmd_cluster(Run& run, const Options& o) {
    const auto input = pick(o.input, o.from, {"test_noisy.bgis", "noisy.bgis"}, "image stack");
    run.record_input("input", input);
    auto stack = read_stack(input);
    if (!stack.labels()) throw ValidationError("cluster needs a labeled stack");
    if (o.checkpoint) {
        run.record_input("checkpoint", *o.checkpoint);
        auto G = load_generator(*o.checkpoint);
        stack = denoise(G, stack);
    }
    // The two extreme conformations, up to cluster_per_class images each.
    const auto& labels = *stack.labels();
    const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
    if (*lo == *hi) throw ValidationError("cluster needs at least two label classes");
    std::vector<std::size_t> idx;
    std::size_t n_lo = 0, n_hi = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == *lo && n_lo < run.cfg.data.cluster_per_class) {
            idx.push_back(i);
            ++n_lo;
        } else if (labels[i] == *hi && n_hi < run.cfg.data.cluster_per_class) {
            idx.push_back(i);
            ++n_hi;
        }
    }
    const auto subset = stack.subset(idx);
    auto spec = run.cfg.embedding;
    spec.seed = derive_seed(run.cfg.seed, streams::clustering);
    const auto points = embed(subset, spec);
    const auto km = cluster_two(points, spec.seed);
    const auto& truth = *subset.labels();
    const double acc = accuracy(km.labels, truth);
    run.write_text_output(embedding_csv(points, truth, km.labels), "embedding.csv");
    const auto correct = static_cast<std::size_t>(std::llround(acc * static_cast<double>(truth.size())));
    nlohmann::json summary{{"method", to_string(spec.method)},
                           {"k_nn", spec.k_nn},
                           {"n", truth.size()},
                           {"accuracy", acc},
                           {"correct", std::to_string(correct) + "/" + std::to_string(truth.size())},
                           {"inertia", km.inertia},
                           {"single_cluster", km.single_cluster}};
    run.write_text_output(summary.dump(2) + "\n", "cluster.json");
    std::cout << "accuracy " << summary["correct"].get<std::string>() << "\n";
    return 0;
}

int cmd_robust(Run& run) {
    const auto table = scaling_sweep(run.cfg.robust, run.cfg.robust_rule);
    run.write_text_output(table.to_csv(), "sweep.csv");
    nlohmann::json summary{{"rule", rule_text(run.cfg.robust_rule)}, {"p", run.cfg.robust.p}, {"fits", table.slope_summary()}};
    run.write_text_output(summary.dump(2) + "\n", "slopes.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust denoising with scoring-rule GANs and l_p autoencoders"};
    app.require_subcommand(1);
    Options o;
    std::map<std::string, CLI::App*> subs;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"generate", "render phantoms and corrupt them with noise"},
        {"contaminate", "replace a fraction of training pairs with noise"},
        {"train", "joint GAN + l_p autoencoder training"},
        {"denoise", "apply a trained generator to a stack"},
        {"evaluate", "MSE / PSNR / SSIM of a stack against references"},
        {"sweep", "train across an (alpha,beta), lambda or contamination grid"},
        {"cluster", "embed + 2-means on the two extreme conformations"},
        {"robust-estimate", "location/scatter estimation sweep over n and epsilon"}};
    for (const auto& [name, help] : commands) {
        auto* s = app.add_subcommand(name, help);
        s->allow_extras();
        s->add_option("--config", o.config, "experiment config (JSON)");
        s->add_option("--out", o.out, "output directory (default runs/<timestamp>-<hash>)");
        subs[name] = s;
    }
    for (const auto* name : {"contaminate", "train", "sweep"}) {
        subs[name]->add_option("--from", o.from, "run directory holding input stacks");
        subs[name]->add_option("--refs", o.refs, "reference stack");
        subs[name]->add_option("--noisy", o.noisy, "noisy stack");
    }
    for (const auto* name : {"train", "sweep"}) {
        subs[name]->add_option("--test-refs", o.test_refs, "held-out reference stack");
        subs[name]->add_option("--test-noisy", o.test_noisy, "held-out noisy stack");
    }
    subs["denoise"]->add_option("--checkpoint", o.checkpoint, "generator checkpoint")->required();
    subs["denoise"]->add_option("--input", o.input, "noisy stack");
    subs["denoise"]->add_option("--from", o.from, "run directory holding the input stack");
    subs["evaluate"]->add_option("--ref", o.ref, "reference stack")->required();
    subs["evaluate"]->add_option("--test", o.test, "stack to score")->required();
    subs["evaluate"]->add_option("--name", o.name, "row label");
    subs["sweep"]->add_option("--grid", o.grid, "alpha-beta, lambda or contamination")->required();
    subs["sweep"]->add_flag("--dry-run", o.dry_run, "list the grid cells without training");
    subs["cluster"]->add_option("--input", o.input, "labeled stack");
    subs["cluster"]->add_option("--from", o.from, "run directory holding the stack");
    subs["cluster"]->add_option("--checkpoint", o.checkpoint, "denoise with this generator first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            auto run = start_run(name, o.config, o.out, sub->remaining());
            int rc = 0;
            if (name == "generate") rc = cmd_generate(run);
            else if (name == "contaminate") rc = cmd_contaminate(run, o);
            else if (name == "train") rc = cmd_train(run, o);
            else if (name == "denoise") rc = cmd_denoise(run, o);
            else if (name == "evaluate") rc = cmd_evaluate(run, o);
            else if (name == "sweep") rc = cmd_sweep(run, o);
            else if (name == "cluster") rc = cmd_cluster(run, o);
            else rc = cmd_robust(run);
            run.finish();
            return rc;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
