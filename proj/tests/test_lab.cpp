#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "folia/lab.hpp"

using namespace folia;
namespace fs = std::filesystem;

namespace {

std::string write_temp_config(const std::string& name, const std::string& body) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* CAT_HOLONOMY = R"(
[system]
kind = linear_anosov
matrix = 2 1 1 1
[experiment]
kind = holonomy
side = u
[numeric]
grid = 8
seed = 42
scale_min = 1e-5
scale_max = 1e-1
n_pairs = 120
tol = 1e-9
[output]
dir = {OUT}
)";

std::string with_out(const std::string& tpl, const std::string& out) {
    std::string s = tpl;
    auto pos = s.find("{OUT}");
    s.replace(pos, 5, out);
    return s;
}

} // namespace

TEST_CASE("config loading and field validation") {
    std::string path = write_temp_config("folia_ok.ini", with_out(CAT_HOLONOMY, "outdir"));
    ExperimentConfig cfg = load_config(path);
    CHECK(cfg.kind == "linear_anosov");
    CHECK(cfg.experiment == "holonomy");
    CHECK(cfg.seed == 42);
    CHECK(cfg.out_dir == "outdir");

    // unknown system kind: the error names the field
    std::string bad = write_temp_config("folia_bad.ini",
                                        "[system]\nkind = spiral_gnome\n[experiment]\nkind = bunching\n");
    ExperimentConfig bcfg = load_config(bad);
    CHECK_THROWS_WITH_AS(system_from_config(bcfg), doctest::Contains("system.kind"), ConfigError);

    std::string bad2 = write_temp_config("folia_bad2.ini", "[numeric]\ngrid = nope\n");
    CHECK_THROWS_WITH_AS(load_config(bad2), doctest::Contains("numeric.grid"), ConfigError);

    std::string bad3 = write_temp_config("folia_bad3.ini", "[experiment]\nkind = holonomy\n[mystery]\nx = 1\n");
    CHECK_THROWS_AS(load_config(bad3), ConfigError);

    CHECK_THROWS_AS(load_config("/nonexistent/folia.ini"), ConfigError);
}

TEST_CASE("load-time bunching rejection of oversized amplitudes") {
    std::string path = write_temp_config(
        "folia_wild.ini",
        "[system]\nkind = perturbed_anosov\n matrix = 2 1 1 1\ndelta = 0.3\nbase_shape = trig\n"
        "[experiment]\nkind = bunching\n");
    ExperimentConfig cfg = load_config(path);
    CHECK_THROWS_AS(system_from_config(cfg), ConfigError);
}

TEST_CASE("cat holonomy experiment writes the declared artifacts") {
    fs::path out = fs::temp_directory_path() / "folia_lab_run1";
    fs::remove_all(out);
    std::string path = write_temp_config("folia_run1.ini", with_out(CAT_HOLONOMY, out.string()));
    ExperimentConfig cfg = load_config(path);
    CHECK(run_experiment(cfg) == 0);
    CHECK(fs::exists(out / "holonomy_samples.csv"));
    CHECK(fs::exists(out / "fit_summary.csv"));
    CHECK(fs::exists(out / "verdict.csv"));
    CHECK(fs::exists(out / "manifest.csv"));

    // golden headers
    std::string samples = slurp(out / "holonomy_samples.csv");
    CHECK(samples.substr(0, samples.find('\n')) == "d_in,d_out,bucket");
    std::string fit = slurp(out / "fit_summary.csv");
    CHECK(fit.substr(0, fit.find('\n')) ==
          "theta_hat,H_hat,envelope_theta,r_squared,scale_min,scale_max,n_samples,n_buckets");
    std::string manifest = slurp(out / "manifest.csv");
    CHECK(manifest.substr(0, manifest.find('\n')) == "key,value");
    CHECK(manifest.find("artifact:holonomy_samples.csv,") != std::string::npos);
}

TEST_CASE("determinism: same config and seed give byte-identical data artifacts") {
    fs::path out1 = fs::temp_directory_path() / "folia_det_a";
    fs::path out2 = fs::temp_directory_path() / "folia_det_b";
    fs::remove_all(out1);
    fs::remove_all(out2);
    std::string p1 = write_temp_config("folia_det1.ini", with_out(CAT_HOLONOMY, out1.string()));
    std::string p2 = write_temp_config("folia_det2.ini", with_out(CAT_HOLONOMY, out2.string()));
    ExperimentConfig c1 = load_config(p1), c2 = load_config(p2);
    run_experiment(c1);
    run_experiment(c2);
    for (const char* name : {"holonomy_samples.csv", "fit_summary.csv", "verdict.csv"})
        CHECK(slurp(out1 / name) == slurp(out2 / name));

    // and the manifest carries matching artifact hashes (wall time differs)
    auto hashes = [](const std::string& m) {
        std::string out;
        std::istringstream ss(m);
        std::string line;
        while (std::getline(ss, line))
            if (line.rfind("artifact:", 0) == 0) out += line + "\n";
        return out;
    };
    CHECK(hashes(slurp(out1 / "manifest.csv")) == hashes(slurp(out2 / "manifest.csv")));
}

TEST_CASE("manifest hashes match the artifact bytes") {
    fs::path out = fs::temp_directory_path() / "folia_lab_hash";
    fs::remove_all(out);
    std::string path = write_temp_config("folia_hash.ini", with_out(CAT_HOLONOMY, out.string()));
    run_experiment(load_config(path));
    std::istringstream manifest(slurp(out / "manifest.csv"));
    std::string line;
    int checked = 0;
    while (std::getline(manifest, line)) {
        if (line.rfind("artifact:", 0) != 0) continue;
        size_t comma = line.rfind(',');
        std::string name = line.substr(9, comma - 9);
        std::string hash = line.substr(comma + 1);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(slurp(out / name))));
        CHECK(hash == buf);
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("gallery demos") {
    // slanted-conjugacy: vertical fit near 1, slanted finest slope < 0.2
    fs::path out = fs::temp_directory_path() / "folia_gal1";
    fs::remove_all(out);
    std::string body = R"(
[system]
kind = linear_anosov
matrix = 2 1 1 1
[experiment]
kind = gallery
gallery = slanted-conjugacy
[numeric]
seed = 5
n_pairs = 400
[output]
dir = {OUT}
)";
    run_experiment(load_config(write_temp_config("folia_gal1.ini", with_out(body, out.string()))));
    std::string verdicts = slurp(out / "gallery_verdicts.csv");
    CHECK(verdicts.find("vertical") != std::string::npos);
    CHECK(verdicts.find("fail") == std::string::npos);

    // unknown gallery name
    std::string bad = body;
    bad.replace(bad.find("slanted-conjugacy"), 17, "missing-gallery00");
    fs::path out2 = fs::temp_directory_path() / "folia_gal2";
    CHECK_THROWS_AS(
        run_experiment(load_config(write_temp_config("folia_gal2.ini", with_out(bad, out2.string())))),
        ConfigError);
}
