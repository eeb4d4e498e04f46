// Runs the cyclic_ff executable and checks its exit codes and artifacts.

#include "cyclicff/run.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const test::TempDir& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.path().string() + "' && '" CYCLIC_FF_BIN "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_bytes(out), test::read_bytes(err)};
}

const char* kQuick = "--set blobs_per_class=100 --set blobs_test_per_class=50 --set d_out=8 "
                     "--set max_epochs=2 --set timing=off";

std::vector<fs::path> files_with_prefix(const fs::path& dir, const std::string& prefix) {
    std::vector<fs::path> out;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().filename().string().rfind(prefix, 0) == 0)
                out.push_back(e.path());
    return out;
}

} // namespace

TEST_CASE("train writes checkpoint, metrics and manifest named by hash and seed") {
    test::TempDir dir;
    std::ofstream(dir / "x.cfg") << "graph = cycle\nn = 3\n";
    const Result r = run(dir, "train --config x.cfg --seed 7 --out runs --set T=5 " + std::string(kQuick));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("test_error_pct=", 0) == 0);

    const auto ckpt = files_with_prefix(dir / "runs", "run-");
    REQUIRE(ckpt.size() == 3);
    std::string stem = ckpt[0].stem().string();
    CHECK(stem.size() == std::string("run-0123456789abcdef-7").size());
    CHECK(stem.substr(stem.size() - 2) == "-7");
    for (const char* ext : {".ckpt", ".csv", ".json"})
        CHECK(fs::exists(dir / "runs" / (stem + ext)));

    const auto manifest = nlohmann::json::parse(test::read_bytes(dir / "runs" / (stem + ".json")));
    CHECK(manifest["config"]["T"] == "5");
    CHECK(manifest["config"]["graph"] == "cycle");
    CHECK(manifest["config"]["seed"] == "7");
    CHECK(manifest["seeds"]["run"] == 7);
    CHECK(fs::exists(dir / manifest["artifacts"]["checkpoint"].get<std::string>()));
    CHECK(fs::exists(dir / manifest["artifacts"]["metrics_csv"].get<std::string>()));
    for (const char* key : {"git_describe", "started_at", "finished_at"})
        CHECK(manifest.contains(key));

    // eval of the checkpoint reproduces the printed test error
    const Result e = run(dir, "eval --config x.cfg --checkpoint runs/" + stem + ".ckpt " + kQuick);
    CHECK(e.code == 0);
    CHECK(e.out == r.out);

    // re-running from the manifest reproduces the metrics byte for byte
    const std::string csv = test::read_bytes(dir / "runs" / (stem + ".csv"));
    const Result again = run(dir, "train --config runs/" + stem + ".json --out rerun");
    CHECK(again.code == 0);
    CHECK(again.out == r.out);
    CHECK(test::read_bytes(dir / "rerun" / (stem + ".csv")) == csv);
}

TEST_CASE("configuration errors exit with 2 and name the line") {
    test::TempDir dir;
    std::ofstream(dir / "bad.cfg") << "graph = chain\n\nwidth = 3\n";
    Result r = run(dir, "train --config bad.cfg");
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.cfg:3") != std::string::npos);

    std::ofstream(dir / "bad2.cfg") << "T = three\n";
    r = run(dir, "train --config bad2.cfg");
    CHECK(r.code == 2);
    CHECK(r.err.find("bad2.cfg:1") != std::string::npos);

    CHECK(run(dir, "train --set nope=1").code == 2);
    CHECK(run(dir, "train --bogus-flag").code == 2);
    CHECK(run(dir, "").code == 2);
    CHECK(run(dir, "train --config missing.cfg").code == 2);
    CHECK(run(dir, "inspect-graph --set graph=ws --set n=4 --set ws_k=4").code == 2);
}

TEST_CASE("missing dataset exits with 2 and leaves no artifacts") {
    test::TempDir dir;
    const Result r = run(dir, "train --set dataset=mnist --set mnist_dir=nowhere --out runs");
    CHECK(r.code == 2);
    CHECK(files_with_prefix(dir / "runs", "run-").empty());
    const Result e = run(dir, "train --set dataset=embeddings --set train_path=a.bin --set test_path=b.bin");
    CHECK(e.code == 2);
}

TEST_CASE("runtime failures exit with 1") {
    test::TempDir dir;
    std::ofstream(dir / "garbage.ckpt") << "not a checkpoint";
    CHECK(run(dir, "eval --checkpoint garbage.ckpt " + std::string(kQuick)).code == 1);
    std::ofstream(dir / "train.bin") << "CNNE-truncated";
    std::ofstream(dir / "test.bin") << "CNNE-truncated";
    CHECK(run(dir, "train --set dataset=embeddings --set train_path=train.bin --set test_path=test.bin").code == 1);
}

TEST_CASE("inspect-graph reports") {
    test::TempDir dir;
    Result r = run(dir, "inspect-graph --set d_out=200");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("synapses: 12") != std::string::npos);
    CHECK(r.out.find("cyclic: yes") != std::string::npos);
    CHECK(r.out.find("0 3 3 622 200") != std::string::npos);  // 22 + 3·200

    r = run(dir, "inspect-graph --set graph=chain");
    CHECK(r.out.find("cyclic: no") != std::string::npos);

    r = run(dir, "inspect-graph --set graph=ws --set n=8 --set ws_k=2 --set ws_p=0 --set seed=1");
    REQUIRE(r.code == 0);
    for (int j = 0; j < 8; ++j)
        CHECK(r.out.find("\n" + std::to_string(j) + " 2 2 ") != std::string::npos);
}

TEST_CASE("sweep command") {
    test::TempDir dir;
    Result r = run(dir, "sweep --config q.cfg --set theta=0,1");
    CHECK(r.code == 2);  // q.cfg does not exist yet

    std::ofstream(dir / "q.cfg") << "blobs_per_class = 60\nblobs_test_per_class = 30\nd_out = 8\nmax_epochs = 1\n"
                                    "timing = off\n";
    r = run(dir, "sweep --config q.cfg --set theta=0,0.5,1,2 --seeds 1..2 --jobs 2 --out s");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("theta,n_runs,mean_test_err,std_test_err,mean_val_err,best\n", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
    CHECK(files_with_prefix(dir / "s", "run-").size() == 8);
    CHECK(files_with_prefix(dir / "s", "sweep-").size() == 1);

    // single values are fixed overrides, so data keys are fine there
    r = run(dir, "sweep --set graph=chain,cycle,complete --set blobs_per_class=40 --set d_out=4 --set max_epochs=1 "
                 "--out g");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("graph,n_runs,", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
    CHECK(run(dir, "sweep --set blobs_per_class=40,80").code == 2);

    CHECK(run(dir, "sweep --config q.cfg --set theta=").code == 2);
    CHECK(run(dir, "sweep --config q.cfg --set nokey=1,2").code == 2);
}

TEST_CASE("embedding template export") {
    test::TempDir dir;
    const Result r = run(dir, "export-embeddings-template --out t.bin --samples 10 --dim 16 --classes 3");
    REQUIRE(r.code == 0);
    const cyclicff::Dataset d = cyclicff::load_embeddings(dir / "t.bin");
    CHECK(d.size() == 10);
    CHECK(d.dim() == 16);
    CHECK(d.n_classes == 3);
    CHECK(run(dir, "export-embeddings-template --out t.bin --dim 2 --classes 3").code == 2);
}
