#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "tailshape/config.hpp"
#include "tailshape/report.hpp"

using namespace tailshape;
namespace fs = std::filesystem;

namespace {

fs::path scratch_path() { return fs::temp_directory_path() / ("tailshape_cli_" + std::to_string(::getpid())); }

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = scratch_path();
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct RemoveScratch {
    ~RemoveScratch() { fs::remove_all(scratch_path()); }
} remove_scratch;

int run(const std::string& args) {
    const std::string cmd = std::string(TAILSHAPE_BIN) + " " + args + " --quiet > " + (scratch() / "stdout").string() +
                            " 2> " + (scratch() / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void replace(std::string& s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    s.replace(pos, from.size(), to);
}

// Small-ensemble version of a preset, written next to the outputs.
fs::path config(Preset p, const std::string& name, std::size_t n = 16, const std::string& extra = "") {
    std::string y = preset_yaml(p);
    replace(y, "ensemble: 2000", "ensemble: " + std::to_string(n));
    replace(y, "horizon: 100", "horizon: 30");
    replace(y, "bootstrap: 1000", "bootstrap: 40");
    y += extra;
    const fs::path f = scratch() / (name + ".yaml");
    std::ofstream(f) << y;
    return f;
}

bool same_files(const fs::path& a, const fs::path& b) {
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (name == "manifest.json") continue;
        if (!fs::exists(b / name) || slurp(e.path()) != slurp(b / name)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("fit-kernel") {
    std::string y = preset_yaml(Preset::plain);
    replace(y, "target: {kind: power_law, exponent: 1.5, offset: 1}", "target: {kind: exp_sum, terms: [[2, 0.5], [1, 3]]}");
    replace(y, "terms: 8", "terms: 2");
    replace(y, "r_min: 1", "r_min: 0.5");
    replace(y, "r_max: 20", "r_max: 3");
    replace(y, "weight_scale: 12", "weight_scale: 1");
    const fs::path f = scratch() / "exp.yaml";
    std::ofstream(f) << y;
    const fs::path out = scratch() / "fit";
    REQUIRE(run("fit-kernel " + f.string() + " --out " + out.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(out / "kernel.json"));
    CHECK(j["eps_rel"].get<double>() <= 1e-12);
    CHECK(fs::exists(out / "fit_residuals.csv"));
    CHECK(verify_manifest(out).empty());

    std::string nk = preset_yaml(Preset::plain);
    nk.erase(nk.find("kernel:"), nk.find("policy:") - nk.find("kernel:"));
    const fs::path g = scratch() / "nokernel.yaml";
    std::ofstream(g) << nk;
    CHECK(run("fit-kernel " + g.string() + " --out " + (scratch() / "fit2").string()) == 2);
    CHECK(slurp(scratch() / "stderr").find("kernel") != std::string::npos);
}

TEST_CASE("config and argument errors exit with 2") {
    const auto f = config(Preset::plain, "errs", 8);
    CHECK(run("simulate " + f.string() + " --trajectory 8 --out " + (scratch() / "sim").string()) == 2);
    CHECK(run("ensemble /nonexistent.yaml") == 2);
    CHECK(run("ensemble " + f.string() + " --bogus") == 2);
    std::string y = slurp(f) + "surprise: 1\n";
    std::ofstream(scratch() / "unknown.yaml") << y;
    CHECK(run("ensemble " + (scratch() / "unknown.yaml").string()) == 2);
    CHECK(slurp(scratch() / "stderr").find("surprise") != std::string::npos);
}

TEST_CASE("simulate writes the trajectory and its mode log") {
    const auto f = config(Preset::dddas, "sim", 8);
    const fs::path out = scratch() / "traj";
    REQUIRE(run("simulate " + f.string() + " --trajectory 3 --out " + out.string()) == 0);
    for (const char* n : {"trajectory.csv", "events.csv", "regime_path.csv", "config.yaml", "manifest.json"})
        CHECK(fs::exists(out / n));
    CHECK(verify_manifest(out).empty());
}

TEST_CASE("ensemble persistence, report regeneration and determinism") {
    const auto f = config(Preset::dddas, "det", 16);
    const fs::path a = scratch() / "det1", b = scratch() / "det8", c = scratch() / "det1b";
    REQUIRE(run("ensemble " + f.string() + " --workers 1 --out " + a.string()) == 0);
    REQUIRE(run("ensemble " + f.string() + " --workers 8 --out " + b.string()) == 0);
    REQUIRE(run("ensemble " + f.string() + " --workers 1 --out " + c.string()) == 0);
    CHECK(same_files(a, b));
    CHECK(same_files(a, c));
    CHECK(verify_manifest(a).empty());

    const auto report = nlohmann::json::parse(slurp(a / "report.json"));
    CHECK(report["controller"]["mode_changes_per_trajectory"].get<double>() > 0.0);
    CHECK(report["audits"]["passed"].get<bool>());

    const fs::path regen = scratch() / "regen.json";
    REQUIRE(run("report " + a.string() + " --out " + regen.string()) == 0);
    CHECK(slurp(regen) == slurp(a / "report.json"));

    // a tampered file is caught by the manifest
    std::ofstream(a / "bursts.csv", std::ios::app) << "x\n";
    CHECK(verify_manifest(a) == std::vector<std::string>{"bursts.csv"});
}

TEST_CASE("seed override changes the ensemble") {
    const auto f = config(Preset::plain, "seed", 12);
    REQUIRE(run("ensemble " + f.string() + " --out " + (scratch() / "s1").string()) == 0);
    REQUIRE(run("ensemble " + f.string() + " --seed 7 --out " + (scratch() / "s7").string()) == 0);
    CHECK(slurp(scratch() / "s1" / "bursts.csv") != slurp(scratch() / "s7" / "bursts.csv"));
    REQUIRE(run("report " + (scratch() / "s7").string() + " --out " + (scratch() / "s7.json").string()) == 0);
    CHECK(slurp(scratch() / "s7.json") == slurp(scratch() / "s7" / "report.json"));
}

TEST_CASE("memory OFF keeps the memory load at zero") {
    const auto f = config(Preset::memory_off, "off", 4);
    const fs::path out = scratch() / "offtraj";
    REQUIRE(run("simulate " + f.string() + " --trajectory 0 --out " + out.string()) == 0);
    std::istringstream csv(slurp(out / "trajectory.csv"));
    std::string header, line;
    std::getline(csv, header);
    std::size_t col = 0;
    {
        std::istringstream h(header);
        std::string name;
        while (std::getline(h, name, ',') && name != "L") ++col;
    }
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream r(line);
        std::string cell;
        for (std::size_t i = 0; i <= col; ++i) std::getline(r, cell, ',');
        CHECK(std::stod(cell) == 0.0);
        ++rows;
    }
    CHECK(rows > 10);
}

TEST_CASE("a corrupted susceptibility fails the energy audit") {
    const auto f = config(Preset::plain, "corrupt", 6, "test_hooks: {corrupt_susceptibility: -50}\n");
    CHECK(run("ensemble " + f.string() + " --out " + (scratch() / "corrupt").string()) == 3);
    const std::string err = slurp(scratch() / "stderr");
    CHECK(err.find("energy") != std::string::npos);
}

TEST_CASE("compare refuses mismatched horizons") {
    const auto a = config(Preset::plain, "cmp_a", 8);
    std::string y = slurp(config(Preset::dddas, "cmp_b", 8));
    replace(y, "horizon: 30", "horizon: 31");
    std::ofstream(scratch() / "cmp_b.yaml") << y;
    CHECK(run("compare " + a.string() + " " + (scratch() / "cmp_b.yaml").string() + " --out " +
              (scratch() / "cmp").string()) == 2);
}
