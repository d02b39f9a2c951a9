#include "testing.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bgan/checkpoint.hpp"
#include "bgan/errors.hpp"
#include "bgan/experiment.hpp"
#include "bgan/stack_io.hpp"

using namespace bgan;
namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("bgan_experiment_" + std::to_string(getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Result cli(const std::string& args, const std::string& env = "") {
    static int n = 0;
    const auto o = scratch() / ("stdout" + std::to_string(n));
    const auto e = scratch() / ("stderr" + std::to_string(n++));
    const std::string cmd = env + " " + BGAN_CLI + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::string dir(const std::string& name) { return (scratch() / name).string(); }

// Small 32x32 data set shared by the CLI cases.
const std::string& generated() {
    static const std::string d = [] {
        const auto r = cli("generate --size 32 --count 4 --test-count 2 --seed 3 --out " + dir("gen"));
        REQUIRE(r.code == 0);
        return dir("gen");
    }();
    return d;
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("overrides coerce to the stored type") {
    nlohmann::json doc = ExperimentConfig{}.to_json();
    apply_override(doc, "train.iterations", "17");
    CHECK(doc["train"]["iterations"] == 17);
    apply_override(doc, "recon.lambda", "2.5");
    CHECK(doc["recon"]["lambda"].get<double>() == 2.5);
    apply_override(doc, "sweep.lambda", "1,2,3");
    CHECK(ExperimentConfig::from_json(doc).sweep.lambda == std::vector<double>({1, 2, 3}));
    CHECK_THROWS_AS(apply_override(doc, "train.iterations", "1.5"), ValidationError);
    CHECK_THROWS_AS(apply_override(doc, "train.iterations", "abc"), ValidationError);
    CHECK_THROWS_AS(apply_override(doc, "recon.lambda", "1,2"), ValidationError);
    try {
        apply_override(doc, "train.nope", "1");
        FAIL("no error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("train.nope") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_override(doc, "nosection.x", "1"), ValidationError);
}

TEST_CASE("defaults and validation messages") {
    const auto cfg = load_experiment(std::nullopt, {});
    CHECK(cfg.forward.snr == 0.05);
    CHECK(cfg.arch.head == Head::Sigmoid);
    CHECK(cfg.arch.image_size == cfg.phantom.image_size);
    CHECK(default_alpha_beta_grid().size() == 8);
    CHECK(default_lambda_grid() == std::vector<double>({0.1, 1, 5, 10, 50, 100, 500, 10000}));

    const auto w = load_experiment(std::nullopt, {{"rule", "wgan"}});
    CHECK(w.arch.head == Head::Linear);
    CHECK(w.train_config().effective_mu() == 10.0);
    const auto ae = load_experiment(std::nullopt, {{"rule", "none"}});
    CHECK_FALSE(ae.rule.has_value());

    const auto sized = load_experiment(std::nullopt, {{"phantom.image_size", "32"}});
    CHECK(sized.arch.image_size == 32);
    CHECK(sized.phantom.image_size == 32);

    try {
        load_experiment(std::nullopt, {{"train.batch", "0"}});
        FAIL("no error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).rfind("[train]", 0) == 0);
    }
    CHECK_THROWS_AS(load_experiment(std::nullopt, {{"rule", "wgan"}, {"arch.head", "SIGMOID"}}), ValidationError);
    CHECK_THROWS_AS(load_experiment(std::nullopt, {{"rule", "2,0.5"}}), ValidationError);
    CHECK_THROWS_AS(load_experiment(scratch() / "missing.json", {}), IoError);
}

TEST_CASE("config file then overrides, and json round trip") {
    const auto path = scratch() / "cfg.json";
    write_text_file(path, R"({"seed": 9, "train": {"iterations": 5}, "recon": {"lambda": 3.0}})");
    const auto cfg = load_experiment(path, {{"recon.lambda", "4"}});
    CHECK(cfg.seed == 9);
    CHECK(cfg.train.iterations == 5);
    CHECK(cfg.recon.lambda == 4.0);
    CHECK(ExperimentConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
    write_text_file(scratch() / "bad.json", R"({"nonsense": {}})");
    CHECK_THROWS_AS(load_experiment(scratch() / "bad.json", {}), ValidationError);
    CHECK(parse_rule_text(rule_text(ScoringRule::beta_family(0.5, -0.5)))->beta == -0.5);
    CHECK(rule_text(std::nullopt) == "none");
}

TEST_CASE("run directories are unique") {
    const auto a = make_run_dir(scratch() / "runs", {{"x", 1}});
    const auto b = make_run_dir(scratch() / "runs", {{"x", 1}});
    CHECK(a != b);
    CHECK(fs::is_directory(a));
}

TEST_CASE("cli exit codes") {
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("generate --bogus 1 --out " + dir("bogus")).code == 2);
    const auto bad = cli("cluster --method umap --input " + generated() + "/test_noisy.bgis --out " + dir("umap"));
    CHECK(bad.code == 2);
    CHECK(bad.err.find("isomap") != std::string::npos);
    CHECK(cli("evaluate --ref /nonexistent.bgis --test /nonexistent.bgis --out " + dir("noref")).code == 4);
    // a finished run directory is never overwritten
    CHECK(cli("generate --size 32 --count 1 --test-count 1 --out " + generated()).code == 4);
}

TEST_CASE("generate writes stacks with their snr") {
    const auto& g = generated();
    for (const char* f : {"clean.bgis", "noisy.bgis", "test_clean.bgis", "test_noisy.bgis", "manifest.json"})
        CHECK(fs::exists(fs::path(g) / f));
    const auto clean = read_stack(fs::path(g) / "clean.bgis");
    CHECK(clean.count() == 20);
    CHECK(clean.height() == 32);
    const auto noisy = read_stack(fs::path(g) / "noisy.bgis");
    REQUIRE(noisy.provenance().snr.has_value());
    CHECK(*noisy.provenance().snr == 0.05);

    REQUIRE(cli("generate --size 32 --count 1 --test-count 1 --snr 0.1 --out " + dir("snr01")).code == 0);
    const auto side = nlohmann::json::parse(slurp(fs::path(dir("snr01")) / "noisy.bgis.json"));
    CHECK(side.at("snr").get<double>() == 0.1);
}

TEST_CASE("contaminate flags an exact fraction and leaves clean data alone at zero") {
    const auto& g = generated();
    REQUIRE(cli("contaminate --from " + g + " --type A --epsilon 0.3 --out " + dir("c30")).code == 0);
    const auto flags = slurp(fs::path(dir("c30")) / "flags.csv");
    CHECK(flags.rfind("index,flag\n", 0) == 0);
    CHECK(count_lines(flags) == 21);
    std::size_t ones = 0;
    std::istringstream in(flags);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) ones += line.back() == '1';
    CHECK(ones == 6);

    REQUIRE(cli("contaminate --from " + g + " --epsilon 0 --out " + dir("c0")).code == 0);
    CHECK(slurp(fs::path(dir("c0")) / "noisy.bgis") == slurp(fs::path(g) / "noisy.bgis"));
    CHECK(slurp(fs::path(dir("c0")) / "refs.bgis") == slurp(fs::path(g) / "clean.bgis"));
}

TEST_CASE("deterministic reruns are byte identical") {
    const auto& g = generated();
    const std::string args = "train --from " + g + " --size 32 --iterations 3 --eval-interval 1 --width 4 --blocks 1 --batch 4";
    REQUIRE(cli(args + " --out " + dir("t1"), "BGAN_DETERMINISTIC=1").code == 0);
    REQUIRE(cli(args + " --out " + dir("t2"), "BGAN_DETERMINISTIC=1").code == 0);
    const auto log1 = slurp(fs::path(dir("t1")) / "train_log.csv");
    CHECK(count_lines(log1) == 4);
    CHECK(log1 == slurp(fs::path(dir("t2")) / "train_log.csv"));

    const auto ck = dir("t1") + "/generator.ckpt";
    REQUIRE(cli("denoise --checkpoint " + ck + " --from " + g + " --out " + dir("d1")).code == 0);
    REQUIRE(cli("denoise --checkpoint " + ck + " --from " + g + " --out " + dir("d2")).code == 0);
    CHECK(file_sha256(fs::path(dir("d1")) / "denoised.bgis") == file_sha256(fs::path(dir("d2")) / "denoised.bgis"));
    const auto manifest = nlohmann::json::parse(slurp(fs::path(dir("d1")) / "manifest.json"));
    CHECK(manifest.at("data_fingerprints").contains("denoised.bgis"));
}

TEST_CASE("evaluate against itself gives zero error") {
    const auto& g = generated();
    const auto s = g + "/test_clean.bgis";
    const auto r = cli("evaluate --ref " + s + " --test " + s + " --name self --out " + dir("ev"));
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(fs::path(dir("ev")) / "metrics.json"));
    CHECK(j.at("mse").at("mean").get<double>() == 0.0);
    CHECK(j.at("name") == "self");
    CHECK(r.out.find("self") != std::string::npos);
}

TEST_CASE("sweep dry runs list the grid cells") {
    REQUIRE(cli("sweep --grid alpha-beta --dry-run --out " + dir("sab")).code == 0);
    const auto ab = slurp(fs::path(dir("sab")) / "sweep_cells.csv");
    CHECK(ab.rfind("grid,rule,lambda,type,epsilon,test_mse,test_mse_std,psnr,ssim\n", 0) == 0);
    CHECK(count_lines(ab) == 9);
    REQUIRE(cli("sweep --grid lambda --dry-run --out " + dir("sl")).code == 0);
    CHECK(count_lines(slurp(fs::path(dir("sl")) / "sweep_cells.csv")) == 9);
    REQUIRE(cli("sweep --grid contamination --type A,B --epsilon 0.1,0.2 --dry-run --out " + dir("sc")).code == 0);
    CHECK(count_lines(slurp(fs::path(dir("sc")) / "sweep_cells.csv")) == 5);
    CHECK(cli("sweep --grid lambda --lambda [] --dry-run --out " + dir("sempty")).code == 2);
    CHECK(cli("sweep --grid diagonal --dry-run --out " + dir("sbad")).code == 2);
}

TEST_CASE("robust-estimate writes the sweep table") {
    const auto r = cli("robust-estimate --p 2 --n 50,100 --epsilon 0 --reps 1 --steps 30 --out " + dir("rob"));
    REQUIRE(r.code == 0);
    const auto csv = slurp(fs::path(dir("rob")) / "sweep.csv");
    CHECK(csv.rfind("p,n,epsilon,rep,theta_err_sq,sigma_err_op_sq\n", 0) == 0);
    CHECK(count_lines(csv) == 3);
    CHECK(fs::exists(fs::path(dir("rob")) / "slopes.json"));
}

TEST_CASE("cluster reports an accuracy") {
    const auto& g = generated();
    const auto r = cli("cluster --input " + g + "/clean.bgis --k 3 --out " + dir("cl"));
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(fs::path(dir("cl")) / "cluster.json"));
    CHECK(j.at("n") == 8);
    CHECK(j.at("accuracy").get<double>() >= 0.5);
    CHECK(slurp(fs::path(dir("cl")) / "embedding.csv").rfind("index,x1,x2,truth,cluster\n", 0) == 0);
}
