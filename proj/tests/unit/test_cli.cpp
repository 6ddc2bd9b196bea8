#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../tools/cli.hpp"

namespace fs = std::filesystem;
using specid::cli::run;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "specid");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_rows(const std::string& csv, const std::string& id) {
    std::istringstream is(csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) n += line.rfind(id + ",", 0) == 0;
    return n;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "specid_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("csv formatting") {
    using specid::cli::format_double;
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e-300) == "1e-300");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(specid::cli::to_csv({{"atom", 0.0, 0.5, 1.0, 0.0}}) ==
          "criterion,x_or_b,a_or_eps,value,est_abs_error\natom,0,0.5,1,0\n");
}

TEST_CASE("analyze atom on a Dirac mass") {
    const auto r = invoke({"analyze", "-m", "canonical:dirac", "--criterion", "atom", "--x", "0"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("criterion,x_or_b,a_or_eps,value,est_abs_error\n", 0) == 0);
    CHECK(count_rows(r.out, "atom") == 60);
    CHECK(r.err.find("status=converged value=1 ") != std::string::npos);
}

TEST_CASE("finiteness on the Cantor measure") {
    const auto r = invoke({"analyze", "-m", "canonical:cantor", "--criterion", "finiteness", "--x", "0", "--alpha",
                           "0.6309297535714574"});
    CHECK(r.code == 0);
    CHECK(count_rows(r.out, "finiteness_kernel") == 60);
    CHECK(count_rows(r.out, "finiteness_ratio") == 60);
    CHECK(r.err.find("kernel=bounded") != std::string::npos);
    CHECK(r.err.find("ratio=bounded") != std::string::npos);
}

TEST_CASE("input errors exit 2 with a located message") {
    const auto missing = invoke({"analyze", "-m", "/nonexistent/measure.json"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("/nonexistent/measure.json") != std::string::npos);

    const auto bad = scratch("bad.json");
    write_file(bad, "{\n  \"atoms\": [\n    {\"x\": 0, \"w\": }\n  ]\n}\n");
    const auto malformed = invoke({"analyze", "-m", bad.string()});
    CHECK(malformed.code == 2);
    CHECK(malformed.err.find("bad.json:3:") != std::string::npos);

    CHECK(invoke({"analyze", "-m", "canonical:nothing"}).code == 2);
    CHECK(invoke({"analyze", "-m", "canonical:dirac", "--criterion", "mystery"}).code == 2);
    CHECK(invoke({"analyze", "-m", "canonical:dirac", "--grid", "1,2,10"}).code == 2);
    CHECK(invoke({"analyze", "-m", "canonical:dirac", "--alpha", "1.5", "--criterion", "alpha"}).code == 2);
    CHECK(invoke({"bogus"}).code == 2);
}

TEST_CASE("classify reports flags as JSON") {
    const auto r = invoke({"classify", "-m", "canonical:uniform", "--interval=-0.1,1.1"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["flags"]["pp"] == false);
    CHECK(j["flags"]["ac"] == true);
    CHECK(j["flags"]["sc"] == false);
    CHECK(j["atoms"].empty());
    CHECK(j["interval"][0] == -0.1);
}

TEST_CASE("sweep shape and ridge") {
    const auto r = invoke({"sweep", "-m", "canonical:cantor", "--b-range", "0,1,100", "--a-range", "1e-3,1e-1,40"});
    REQUIRE(r.code == 0);
    CHECK(count_rows(r.out, "cwt") == 4000);

    const auto pt = scratch("half.json");
    write_file(pt, R"({"atoms":[{"x":0.5,"w":1}]})");
    const auto d = invoke({"sweep", "-m", pt.string(), "--b-range", "0,1,11", "--a-range", "1e-3,1e-1,5",
                           "--transform", "conv_scaled"});
    REQUIRE(d.code == 0);
    // Largest value sits at b = 0.5, smallest scale.
    std::istringstream is(d.out);
    std::string line, best;
    double best_v = -1.0;
    std::getline(is, line);
    while (std::getline(is, line)) {
        const double v = std::stod(line.substr(line.find(',', line.find(',', line.find(',') + 1) + 1) + 1));
        if (v > best_v) best_v = v, best = line;
    }
    CHECK(best.rfind("conv_scaled,0.5,0.001,", 0) == 0);

    CHECK(invoke({"sweep", "-m", "canonical:cantor", "--b-range", "0,1,0"}).code == 2);
    CHECK(invoke({"sweep", "-m", "canonical:cantor", "--a-range", "0,1,5"}).code == 2);
}

TEST_CASE("output is deterministic and written atomically") {
    const auto out = scratch("det.csv");
    const std::vector<std::string> args = {"analyze", "-m", "canonical:semicircle", "--criterion",
                                           "alpha,ac_lp", "--x", "0.3", "--jobs", "2", "--out", out.string()};
    REQUIRE(invoke(args).code == 0);
    std::stringstream first;
    first << std::ifstream(out).rdbuf();
    REQUIRE(invoke(args).code == 0);
    std::stringstream second;
    second << std::ifstream(out).rdbuf();
    CHECK(first.str() == second.str());
    CHECK_FALSE(first.str().empty());

    const auto failed = scratch("never.csv");
    fs::remove(failed);
    CHECK(invoke({"analyze", "-m", "canonical:dirac", "--grid", "1,0.5,100", "--out", failed.string()}).code == 2);
    CHECK_FALSE(fs::exists(failed));
    for (const auto& e : fs::directory_iterator(failed.parent_path()))
        CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("config file with flag precedence") {
    const auto cfg = scratch("cfg.json");
    write_file(cfg, R"({"kernel":"cauchy","grid":[1,0.5,10]})");
    const auto r = invoke({"analyze", "-m", "canonical:dirac", "--criterion", "atom", "--config", cfg.string()});
    CHECK(r.code == 0);
    CHECK(count_rows(r.out, "atom") == 10);
    const auto o = invoke(
        {"analyze", "-m", "canonical:dirac", "--criterion", "atom", "--config", cfg.string(), "--grid", "1,0.5,7"});
    CHECK(count_rows(o.out, "atom") == 7);
    write_file(cfg, R"({"kernal":"cauchy"})");
    const auto bad = invoke({"analyze", "-m", "canonical:dirac", "--config", cfg.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("kernal") != std::string::npos);
}

TEST_CASE("operator subcommand") {
    const auto fj = scratch("fj200.json");
    {
        nlohmann::json j;
        j["kind"] = "tridiagonal";
        j["diag"] = std::vector<double>(200, 0.0);
        j["offdiag"] = std::vector<double>(199, 1.0);
        write_file(fj, j.dump());
    }
    const auto gap = invoke({"operator", "--operator", fj.string(), "--test", "point", "--lambda", "0"});
    CHECK(gap.code == 0);
    CHECK(gap.err.find("gap warning") != std::string::npos);

    const auto d = scratch("diag123.json");
    write_file(d, R"({"kind":"dense","rows":[[1,0,0],[0,2,0],[0,0,3]]})");
    const auto iv = invoke({"operator", "--operator", d.string(), "--test", "interval", "--interval", "0.5,2.5"});
    CHECK(iv.code == 0);
    CHECK(iv.err.find("pp nonempty") != std::string::npos);

    const auto ac = invoke({"operator", "--operator", "analytic:free_jacobi_halfline", "--test", "ac", "--interval=-1,1",
                            "--lambda-points", "6"});
    CHECK(ac.code == 0);
    CHECK(ac.err.find("overlap=true") != std::string::npos);

    CHECK(invoke({"operator", "--operator", d.string(), "--vector", "e4"}).code == 2);
    CHECK(invoke({"operator", "--operator", "analytic:nope"}).code == 2);
}

TEST_CASE("selfcheck") {
    const auto ok = invoke({"selfcheck"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    const auto bad = invoke({"selfcheck", "--corrupt-kernel"});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("decay bound") != std::string::npos);
}

}  // TEST_SUITE
