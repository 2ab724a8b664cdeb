#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "dbp/cli.hpp"
#include "dbp/io.hpp"
#include "dbp/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = dbp::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path root;
    explicit TempDir(const std::string& tag) {
        root = fs::temp_directory_path() / ("dbp_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::create_directories(root);
    }
    ~TempDir() { fs::remove_all(root); }
    std::string operator/(const std::string& name) const { return (root / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"eval", "--pred", "a", "--target", "b", "--surface", "plane", "--bogus"},
             {"upsample", "--in", "a.xyz", "--out", "b.xyz"},
             {"upsample", "--in", "a.xyz", "--out", "b.xyz", "--factor", "-2"},
             {"gen-data", "--out", "x.xyz", "--n", "ten"},
             {"gen-data", "--out", "x.xyz", "train"},
         }) {
        const auto r = run(args);
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error[E_USAGE]: ", 0) == 0);
        CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    }
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("upsample") != std::string::npos);
}

TEST_CASE("error codes exit 1") {
    TempDir t("err");
    auto code_of = [](const Result& r) { return r.err.substr(0, r.err.find(']') + 1); };
    CHECK(code_of(run({"eval", "--pred", t / "none.xyz", "--target", t / "none.xyz", "--surface", "plane"})) ==
          "error[E_IO]");
    std::ofstream(t / "bad.xyz") << "1 2\n";
    const auto parse = run({"eval", "--pred", t / "bad.xyz", "--target", t / "bad.xyz", "--surface", "plane"});
    CHECK(parse.code == 1);
    CHECK(code_of(parse) == "error[E_PARSE]");
    CHECK(code_of(run({"train", "--set", "nonsense=1"})) == "error[E_CONFIG]");
    CHECK(code_of(run({"train", "--set", "steps"})) == "error[E_CONFIG]");
    CHECK(code_of(run({"gen-data", "--kind", "cube", "--out", t / "c.xyz"})) == "error[E_CONFIG]");
    CHECK(code_of(run({"gen-data", "--n", "10", "--out", t / "c.xyz"})) == "error[E_CONTRACT]");
    CHECK(code_of(run({"gen-data", "--out", t / "no/such/dir/c.xyz"})) == "error[E_IO]");
    CHECK(run({"gen-data", "--out", t / "c.xyz"}).code == 0);
    CHECK(code_of(run({"upsample", "--in", t / "c.xyz", "--ckpt", t / "c.xyz", "--factor", "2", "--out", t / "o.xyz"})) ==
          "error[E_PARSE]");
}

TEST_CASE("gen-data and eval") {
    TempDir t("eval");
    auto r = run({"gen-data", "--kind", "sphere", "--n", "500", "--seed", "3", "--out", t / "dense.xyz", "--sparse-out",
                  t / "sparse.xyz", "--sparse-n", "100", "--sampling", "fps"});
    REQUIRE(r.code == 0);
    CHECK(dbp::read_xyz(t / "dense.xyz").size() == 500);
    CHECK(dbp::read_xyz(t / "sparse.xyz").size() == 100);
    run({"gen-data", "--kind", "sphere", "--n", "500", "--seed", "3", "--out", t / "again.xyz"});
    CHECK(slurp(t / "again.xyz") == slurp(t / "dense.xyz"));

    r = run({"eval", "--pred", t / "dense.xyz", "--target", t / "dense.xyz", "--surface", "sphere:1.0", "--header"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("name,cd,hd,p2f,uniformity\ndense.xyz,0,0,", 0) == 0);

    r = run({"eval", "--pred", t / "sparse.xyz", "--target", t / "dense.xyz", "--surface", "sphere:1.0", "--name",
             "fps100"});
    const auto q = dbp::read_xyz(t / "sparse.xyz"), d = dbp::read_xyz(t / "dense.xyz");
    const dbp::SurfaceDescriptor sphere{dbp::Sphere{}};
    CHECK(r.out == dbp::evaluate(q, d, sphere).csv_row("fps100") + "\n");
}

TEST_CASE("train, upsample, eval smoke run") {
    TempDir t("smoke");
    const std::string ckpt_dir = t / "ckpts";
    fs::create_directories(ckpt_dir);
    ::setenv(dbp::cli::kCheckpointDirEnv, ckpt_dir.c_str(), 1);
    {
        std::ofstream cfg(t / "desk.cfg");
        cfg << "# desk shape, few steps\nN = 64\nalpha = 4\nC = 32\nsteps = 20\npatches = 20\nval_every = 10\n";
    }
    auto r = run({"train", "--config", t / "desk.cfg", "--set", "seed=2", "--log", t / "log.csv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("trained 20 steps", 0) == 0);
    CHECK(fs::exists(ckpt_dir + "/model.ckpt"));
    CHECK(slurp(t / "log.csv").rfind("step,loss,val_cd\n0,", 0) == 0);

    REQUIRE(run({"gen-data", "--kind", "torus", "--n", "2000", "--out", t / "dense.xyz", "--sparse-out",
                 t / "sparse.xyz", "--sparse-n", "200"})
                .code == 0);
    r = run({"upsample", "--in", t / "sparse.xyz", "--factor", "2.5", "--out", t / "up.xyz"});
    REQUIRE(r.code == 0);
    CHECK(dbp::read_xyz(t / "up.xyz").size() == 500);
    r = run({"upsample", "--in", t / "sparse.xyz", "--factor", "5", "--out", t / "up5.xyz"});
    CHECK(r.code == 1);
    CHECK(r.err.find("error[E_CONTRACT]") == 0);
    CHECK(r.err.find("retrain") != std::string::npos);

    r = run({"eval", "--pred", t / "up.xyz", "--target", t / "dense.xyz", "--surface", "torus:1.0,0.3"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("up.xyz,", 0) == 0);
    ::unsetenv(dbp::cli::kCheckpointDirEnv);
}

TEST_CASE("grad-check subcommand") {
    const auto r = run({"grad-check"});
    CHECK(r.code == 0);
    CHECK(r.out.find("dbpnet_total_loss") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
