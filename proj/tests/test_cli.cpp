#include <catch_amalgamated.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "diskrul/cli.hpp"
#include "oracles.hpp"

using namespace diskrul;

namespace {

std::size_t count_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("cli exit codes separate usage errors from runtime failures") {
    CHECK(run_cli({}) == 2);                       // a subcommand is required
    CHECK(run_cli({"frobnicate"}) == 2);           // unknown subcommand
    CHECK(run_cli({"synth"}) == 2);                // missing required --out
    CHECK(run_cli({"train", "--data"}) == 2);      // option without a value
    CHECK(run_cli({"--help"}) == 0);

    oracle::TempDir dir("cli-err");
    // Runtime failures (bad inputs, not bad usage) exit 1.
    CHECK(run_cli({"train", "--data", (dir / "nope.bin").string(), "--out",
                   (dir / "out").string()}) == 1);
    CHECK(run_cli({"eval", "--data", (dir / "nope.bin").string(), "--model",
                   (dir / "nope.ckpt").string(), "--out", (dir / "out").string()}) == 1);
    CHECK(run_cli({"select-features", "--root", (dir / "store").string(), "--model", "NOPE",
                   "--out", (dir / "feat").string()}) == 1);
    CHECK(run_cli({"synth", "--out", (dir / "f.csv").string(), "--drives", "3",
                   "--missing-rate", "1.5"}) == 1);  // spec validation
}

TEST_CASE("the cli pipeline runs end to end with verifiable artifacts") {
    oracle::TempDir dir("cli-pipe");
    const auto p = [&](const std::string& name) { return (dir / name).string(); };

    // synth
    REQUIRE(run_cli({"synth", "--out", p("fleet.csv"), "--drives", "30", "--mean-lifetime",
                     "25", "--features", "4", "--informative", "2", "--missing-rate", "0.05",
                     "--seed", "7"}) == 0);
    REQUIRE(std::filesystem::exists(dir / "fleet.csv"));
    REQUIRE(std::filesystem::exists(dir / "run.json"));

    // ingest
    REQUIRE(run_cli({"ingest", "--root", p("store"), "--input", p("fleet.csv")}) == 0);
    REQUIRE(std::filesystem::exists(dir / "store" / "manifest.json"));

    // stats
    REQUIRE(run_cli({"stats", "--root", p("store"), "--out", p("stats")}) == 0);
    {
        std::ifstream in(dir / "stats" / "stats.csv");
        std::string header, row;
        REQUIRE(std::getline(in, header));
        REQUIRE(std::getline(in, row));
        CHECK(header == "model,failed_drives");
        CHECK(row == "SYNTH01,30");
    }

    // select-features
    REQUIRE(run_cli({"select-features", "--root", p("store"), "--model", "SYNTH01", "--out",
                     p("feat"), "--trees", "10", "--top", "3"}) == 0);
    const FeatureSet selected = FeatureSet::load(dir / "feat" / "features.json");
    REQUIRE(selected.size() == 3);
    for (int attr : selected.attributes)  // synthetic data only populates ids 1,4,5,7
        CHECK((attr == 1 || attr == 4 || attr == 5 || attr == 7));
    CHECK(count_lines(dir / "feat" / "importance.csv") == 16);  // header + 15 candidates

    // build-dataset
    REQUIRE(run_cli({"build-dataset", "--root", p("store"), "--model", "SYNTH01",
                     "--features", p("feat/features.json"), "--timesteps", "8", "--out",
                     p("data"), "--seed", "11"}) == 0);
    for (const char* name :
         {"windows_train.bin", "windows_val.bin", "windows_test.bin", "scaler.json",
          "features.json", "run.json"})
        REQUIRE(std::filesystem::exists(dir / "data" / name));
    const auto train_ds = load_windows(dir / "data" / "windows_train.bin");
    CHECK(train_ds.timesteps == 8);
    CHECK(train_ds.n_features == 3);

    // train, twice with the same seed to confirm artifact-level determinism
    const std::vector<std::string> train_args{
        "train", "--data", p("data"), "--epochs", "2", "--patience", "2", "--units", "6",
        "--seed", "3", "--precision", "double"};
    auto run1 = train_args;
    run1.insert(run1.end(), {"--out", p("run1")});
    auto run2 = train_args;
    run2.insert(run2.end(), {"--out", p("run2")});
    REQUIRE(run_cli(run1) == 0);
    REQUIRE(run_cli(run2) == 0);
    CHECK(hash_file(dir / "run1" / "model.ckpt") == hash_file(dir / "run2" / "model.ckpt"));
    CHECK(hash_file(dir / "run1" / "train_report.json") ==
          hash_file(dir / "run2" / "train_report.json"));

    // run.json records the artifacts by content hash
    const auto run_meta = read_json(dir / "run1" / "run.json");
    CHECK(run_meta.at("command") == "train");
    for (const auto& [name, digest] : run_meta.at("artifacts").items())
        CHECK(digest.get<std::string>() == hex64(hash_file(dir / "run1" / name)));

    // eval
    REQUIRE(run_cli({"eval", "--data", p("data"), "--model", p("run1/model.ckpt"), "--out",
                     p("eval")}) == 0);
    REQUIRE(std::filesystem::exists(dir / "eval" / "eval.csv"));
    const auto test_ds = load_windows(dir / "data" / "windows_test.bin");
    CHECK(count_lines(dir / "eval" / "predictions_test.csv") == test_ds.n_samples() + 1);
    CHECK(count_lines(dir / "eval" / "eval.csv") == 2);

    CHECK(run_cli({"eval", "--data", p("data"), "--model", p("run1/model.ckpt"), "--out",
                   p("eval2"), "--split-name", "bogus"}) == 1);

    // generalize against the ingested model plus one that is absent
    REQUIRE(run_cli({"generalize", "--root", p("store"), "--model", p("run1/model.ckpt"),
                     "--scaler", p("data/scaler.json"), "--features", p("data/features.json"),
                     "--targets", "SYNTH01,GHOST", "--source", "SYNTH01", "--out",
                     p("gen")}) == 0);
    REQUIRE(std::filesystem::exists(dir / "gen" / "table5.csv"));
    CHECK(std::filesystem::exists(dir / "gen" / "predictions_SYNTH01.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "gen" / "predictions_GHOST.csv"));
    CHECK(count_lines(dir / "gen" / "table5.csv") == 3);
}
