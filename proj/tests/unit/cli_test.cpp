#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string repo_root() { return DICE_SOURCE_DIR; }
std::string cli() { return DICE_CLI_PATH; }

fs::path scratch_root() { return fs::temp_directory_path() / "dice_cli_test"; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Commands run from the repo root so the config-relative fixture paths resolve.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
    const fs::path dir = scratch_root();
    fs::create_directories(dir);
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = "cd '" + repo_root() + "' && " + env_prefix + cli() + " " + args +
                            " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

} // namespace

TEST_CASE("invert then reconstruct replays the record perfectly") {
    const fs::path inv = fresh_dir("invert_a");
    const RunResult r1 =
        run("invert --config configs/mgm_reconstruct.json --out '" + inv.string() + "'");
    REQUIRE(r1.code == 0);
    REQUIRE(fs::exists(inv / "record.bin"));
    REQUIRE(fs::exists(inv / "invert.json"));

    const json meta = load_json(inv / "invert.json");
    CHECK(meta.at("version") == 1);
    CHECK(meta.at("command") == "invert");
    CHECK(meta.at("record_file") == "record.bin");
    CHECK(meta.at("config").at("seed") == 11);
    CHECK(meta.at("config").at("family") == "mgm");

    const fs::path rec = fresh_dir("reconstruct_a");
    const RunResult r2 = run("reconstruct --config configs/mgm_reconstruct.json --record '" +
                             (inv / "record.bin").string() + "' --trials 8 --out '" +
                             rec.string() + "'");
    REQUIRE(r2.code == 0);
    const json out = load_json(rec / "reconstruct.json");
    CHECK(out.at("metrics").at("accuracy") == 1.0);
    CHECK(out.at("metrics").at("hamming_similarity") == 1.0);
    CHECK(out.at("metrics").at("trials") == 8);
}

TEST_CASE("self-contained reconstruction sweeps fresh trials with a weak baseline") {
    const fs::path dir = fresh_dir("reconstruct_b");
    const RunResult r = run("reconstruct --config configs/mgm_reconstruct.json --out '" +
                            dir.string() + "'");
    REQUIRE(r.code == 0);
    const json out = load_json(dir / "reconstruct.json");
    CHECK(out.at("metrics").at("trials") == 100);
    CHECK(out.at("metrics").at("accuracy") == 1.0);
    // The resampling baseline shares nothing with the record; on a 64-sequence fixture it
    // should almost never reproduce the input exactly.
    CHECK(out.at("metrics").at("baseline_accuracy").get<double>() < 0.5);
    CHECK(out.at("metrics").at("baseline_hamming_similarity").get<double>() < 0.9);
}

TEST_CASE("identical configurations produce byte-identical outputs") {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    REQUIRE(run("invert --config configs/mgm_reconstruct.json --out '" + a.string() + "'").code == 0);
    REQUIRE(run("invert --config configs/mgm_reconstruct.json --out '" + b.string() + "'").code == 0);
    CHECK(slurp(a / "record.bin") == slurp(b / "record.bin"));
    CHECK(slurp(a / "invert.json") == slurp(b / "invert.json"));

    const fs::path c = fresh_dir("det_c");
    const fs::path d = fresh_dir("det_d");
    const std::string edit_args = "edit --config configs/multinomial_markov_edit.json --trials 12";
    REQUIRE(run(edit_args + " --out '" + c.string() + "'").code == 0);
    REQUIRE(run(edit_args + " --out '" + d.string() + "'").code == 0);
    CHECK(slurp(c / "edit.json") == slurp(d / "edit.json"));
}

TEST_CASE("edit reports metrics and one output row per trial") {
    const fs::path dir = fresh_dir("edit_a");
    const RunResult r = run("edit --config configs/mgm_sentiment_edit.json --trials 16 --out '" +
                            dir.string() + "'");
    REQUIRE(r.code == 0);
    const json out = load_json(dir / "edit.json");
    const json& m = out.at("metrics");
    CHECK(m.at("trials") == 16);
    CHECK(m.at("hamming_similarity").get<double>() >= 0.0);
    CHECK(m.at("edit_success").get<double>() >= 0.0);
    CHECK(m.at("preservation_baseline").get<double>() >= 0.0);
    CHECK(out.at("outputs").size() == 16);
}

TEST_CASE("an edit driven by a stored record matches the config family") {
    const fs::path inv = fresh_dir("edit_rec_inv");
    REQUIRE(run("invert --config configs/multinomial_markov_edit.json --out '" + inv.string() +
                "'").code == 0);
    const fs::path dir = fresh_dir("edit_rec_run");
    const RunResult ok = run("edit --config configs/multinomial_markov_edit.json --record '" +
                             (inv / "record.bin").string() + "' --trials 4 --out '" +
                             dir.string() + "'");
    CHECK(ok.code == 0);

    // Same record, wrong family in the config.
    const RunResult bad = run("edit --config configs/mgm_sentiment_edit.json --record '" +
                              (inv / "record.bin").string() + "' --trials 4 --out '" +
                              dir.string() + "'");
    CHECK(bad.code == 1);
    CHECK(bad.err.find("family") != std::string::npos);
}

TEST_CASE("parameter validation failures name the offending flag") {
    const fs::path dir = fresh_dir("bad_tau");
    const RunResult r = run("edit --config configs/mgm_sentiment_edit.json --tau 1.5 --out '" +
                            dir.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("tau") != std::string::npos);
}

TEST_CASE("a missing record file is an io error") {
    const fs::path dir = fresh_dir("no_record");
    const RunResult r = run("edit --config configs/multinomial_markov_edit.json --record "
                            "/nonexistent/record.bin --out '" + dir.string() + "'");
    CHECK(r.code == 2);
}

TEST_CASE("unknown configuration keys are named in the error") {
    const fs::path dir = fresh_dir("bad_config");
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"version": 1, "typo_key": 3})";
    const RunResult r = run("invert --config '" + cfg.string() + "' --out '" + dir.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("typo_key") != std::string::npos);

    const fs::path cfg2 = dir / "config2.json";
    std::ofstream(cfg2) << R"({"family": "mgm"})";
    const RunResult r2 = run("invert --config '" + cfg2.string() + "' --out '" + dir.string() + "'");
    CHECK(r2.code == 1);
    CHECK(r2.err.find("version") != std::string::npos);
}

TEST_CASE("the strength sweep walks the standard grid") {
    const fs::path dir = fresh_dir("sweep_a");
    const RunResult r = run("sweep --config configs/multinomial_markov_edit.json --trials 6 --out '" +
                            dir.string() + "'");
    REQUIRE(r.code == 0);

    const std::string csv = slurp(dir / "sweep.csv");
    CHECK(csv.rfind("lambda1,lambda2,hamming,edit_success,accuracy\n", 0) == 0);
    int lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 6); // header plus five strength settings

    const json out = load_json(dir / "sweep.json");
    const json& rows = out.at("metrics").at("rows");
    REQUIRE(rows.size() == 5);
    CHECK(rows.front().at("lambda1") == 0.0);
    CHECK(rows.back().at("lambda1") == 1.0);
    // Full-strength replay with no fresh noise must reproduce the source exactly.
    CHECK(rows.back().at("hamming_similarity") == 1.0);
    CHECK(rows.back().at("token_accuracy") == 1.0);
    for (const json& row : rows) {
        CHECK(row.at("lambda2").get<double>() ==
              doctest::Approx(1.0 - row.at("lambda1").get<double>()).epsilon(1e-12));
    }
}

TEST_CASE("the information curve emits a labelled csv and sane endpoints") {
    const fs::path dir = fresh_dir("mi_a");
    const RunResult r = run("mi-curve --config configs/mi_curve.json --T 200 --mc-samples 100000 "
                            "--out '" + dir.string() + "'");
    REQUIRE(r.code == 0);

    const std::string csv = slurp(dir / "mi_curve.csv");
    CHECK(csv.rfind("# schedule=gaussian-linear T=200 D=1", 0) == 0);
    CHECK(csv.find("t,I_nats,I_mc") != std::string::npos);

    const json out = load_json(dir / "mi_curve.json");
    const json& m = out.at("metrics");
    CHECK(m.at("T") == 200);
    CHECK(m.at("I_first").get<double>() > m.at("I_last").get<double>());
    CHECK(m.at("I_last").get<double>() >= 0.0);
    REQUIRE(m.at("mc").size() == 3);
    for (const json& row : m.at("mc")) {
        CHECK(row.at("I_mc").get<double>() >= -0.01);
    }
}

TEST_CASE("plain sampling reports a histogram over its outputs") {
    const fs::path inv = fresh_dir("sample_inv");
    REQUIRE(run("invert --config configs/multinomial_markov_edit.json --out '" + inv.string() +
                "'").code == 0);
    const fs::path dir = fresh_dir("sample_run");
    const RunResult r = run("sample --config configs/multinomial_markov_edit.json --record '" +
                            (inv / "record.bin").string() + "' --trials 32 --out '" +
                            dir.string() + "'");
    REQUIRE(r.code == 0);
    const json out = load_json(dir / "sample.json");
    CHECK(out.at("metrics").at("trials") == 32);
    CHECK(out.at("metrics").at("distinct_outputs").get<int>() >= 1);
    CHECK(out.at("outputs").size() == 32);
    int total = 0;
    for (const auto& [key, count] : out.at("histogram").items()) total += count.get<int>();
    CHECK(total == 32);
}

TEST_CASE("usage errors and help behave like a normal unix tool") {
    CHECK(run("--help").code == 0);
    CHECK(run("bogus-subcommand").code == 1);
    CHECK(run("").code == 1); // a subcommand is required
    CHECK(run("edit --config /nonexistent/config.json").code == 2);
}

TEST_CASE("the environment can supply the output directory") {
    const fs::path dir = fresh_dir("env_out");
    const RunResult r = run("invert --config configs/mgm_reconstruct.json",
                            "DICE_OUT_DIR='" + dir.string() + "' ");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "record.bin"));
    CHECK(fs::exists(dir / "invert.json"));
}
