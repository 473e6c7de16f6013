#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "repufit/cli.hpp"
#include "repufit/config.hpp"

using namespace repufit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("repufit_cli_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"repufit"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("strict config parsing rejects unknown keys") {
    const auto j = nlohmann::json::parse(R"({"penalty":"variation","k":2,"n":4,"typo":1})");
    CHECK_THROWS_WITH(cfg::parse_tikhonov(j, 1, "tikhonov"),
                      Catch::Matchers::ContainsSubstring("typo"));

    const auto q = nlohmann::json::parse(R"({"kind":"lattice","points":64})");
    CHECK_THROWS_AS(cfg::parse_quadrature(q, "quadrature"), ConfigError);
}

TEST_CASE("config round-trips through json") {
    const auto j = nlohmann::json::parse(R"({
      "penalty": "radon_bv", "k": 2, "n": 16,
      "lambda_rule": {"kind": "radon_bv_rule", "norm_hint": 1.5},
      "epsilon_target": 0.01,
      "optimizer": {"step_init": 0.03, "max_iters": 100, "restarts": 2, "seed": 9}
    })");
    const TikhonovConfig cfg1 = cfg::parse_tikhonov(j, 1, "t");
    const auto j2 = cfg::to_json(cfg1);
    const TikhonovConfig cfg2 = cfg::parse_tikhonov(j2, 1, "t");
    CHECK(cfg::to_json(cfg2) == j2);  // serialization is a fixed point
    CHECK(cfg2.penalty == PenaltyKind::RadonBV);
    CHECK(cfg2.optimizer.seed == 9);
}

TEST_CASE("cli constants prints the embedding value") {
    // C(2,1,2) = 3 must appear in the table
    TempDir dir;
    const auto out = dir.file("constants.csv");
    REQUIRE(run_cli({"constants", "--d", "2", "--k", "2", "--m", "1", "--out", out}) == 0);
    const std::string text = read_text(out);
    CHECK(text.find("2,2,1,3,") != std::string::npos);
}

TEST_CASE("cli missing config file exits with code 1 and names the path") {
    CHECK(run_cli({"fit", "--data", "/nonexistent/data.json", "--config",
                   "/nonexistent/cfg.json"}) == 1);
}

TEST_CASE("cli datagen -> fit -> differentiate pipeline") {
    TempDir dir;
    const auto datagen_cfg = dir.file("datagen.json");
    write_text_atomic(datagen_cfg, R"({
      "seed": 3,
      "target": {"kind": "reference_network", "k": 2, "d": 2, "n_ref": 2, "a_scale": 0.6},
      "training": {"kind": "lattice", "n": 128},
      "noise": {"delta": 0.01, "kind": "l2_calibrated_field"}
    })");
    const auto dataset = dir.file("dataset.json");
    const auto dataset_csv = dir.file("dataset.csv");
    REQUIRE(run_cli({"datagen", "--config", datagen_cfg, "--out", dataset, "--csv",
                     dataset_csv}) == 0);
    CHECK(read_text(dataset_csv).rfind("x1,x2,value\n", 0) == 0);

    const auto fit_cfg = dir.file("fit.json");
    write_text_atomic(fit_cfg, R"({
      "seed": 5,
      "tikhonov": {
        "penalty": "variation", "k": 2, "n": 6,
        "lambda_rule": {"kind": "explicit", "value": 1e-4},
        "optimizer": {"step_init": 0.02, "max_iters": 200, "restarts": 1}
      }
    })");
    const auto model = dir.file("model.json");
    const auto report = dir.file("report.json");
    REQUIRE(run_cli({"fit", "--data", dataset, "--config", fit_cfg, "--out", model, "--report",
                     report}) == 0);

    // the report embeds a replayable config
    const auto rj = nlohmann::json::parse(read_text(report));
    CHECK(rj.at("type") == "fit_report");
    CHECK(rj.contains("config"));

    // differentiate with alpha = 0 reproduces eval at the probe points
    const auto points = dir.file("points.csv");
    write_text_atomic(points, "x1,x2\n0.25,0.5\n0.75,0.25\n");
    const auto table = dir.file("table.csv");
    REQUIRE(run_cli({"differentiate", "--model", model, "--points", points, "--alpha",
                     "0,0;1,0", "--out", table}) == 0);
    const RepuNetwork net = load_model(model);
    std::istringstream csv(read_text(table));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "x1,x2,alpha_0_0,alpha_1_0");
    std::getline(csv, line);
    {
        std::stringstream row(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
        REQUIRE(cells.size() == 4);
        CHECK(cells[2] ==
              Catch::Approx(net.value(std::vector<double>{0.25, 0.5})).epsilon(1e-12));
    }

    // requesting |alpha| > k fails
    CHECK(run_cli({"differentiate", "--model", model, "--points", points, "--alpha", "2,1"}) ==
          1);
}

TEST_CASE("fit replay from a report reproduces the report") {
    TempDir dir;
    const auto datagen_cfg = dir.file("datagen.json");
    write_text_atomic(datagen_cfg, R"({
      "seed": 11,
      "target": {"kind": "reference_network", "k": 2, "d": 1, "n_ref": 2},
      "training": {"kind": "lattice", "n": 64},
      "noise": {"delta": 0.05, "kind": "gaussian_iid"}
    })");
    const auto dataset = dir.file("dataset.json");
    REQUIRE(run_cli({"datagen", "--config", datagen_cfg, "--out", dataset}) == 0);

    const auto fit_cfg = dir.file("fit.json");
    write_text_atomic(fit_cfg, R"({
      "seed": 2,
      "tikhonov": {
        "penalty": "extended_barron", "k": 2, "n": 4,
        "lambda_rule": {"kind": "barron_rule", "norm_hint": 1.0, "c_k": 1.0},
        "optimizer": {"step_init": 0.05, "max_iters": 150, "restarts": 2}
      }
    })");
    const auto report1 = dir.file("report1.json");
    REQUIRE(run_cli({"fit", "--data", dataset, "--config", fit_cfg, "--report", report1}) == 0);

    // replay: feed the report itself as the config
    const auto report2 = dir.file("report2.json");
    REQUIRE(run_cli({"fit", "--data", dataset, "--config", report1, "--report", report2}) == 0);
    const auto j1 = cfg::strip_wall_time(nlohmann::json::parse(read_text(report1)));
    auto j2 = cfg::strip_wall_time(nlohmann::json::parse(read_text(report2)));
    CHECK(j1 == j2);
}

TEST_CASE("cli mc-rate smoke") {
    TempDir dir;
    const auto cfg_path = dir.file("mc.json");
    write_text_atomic(cfg_path, R"({
      "seed": 4, "k": 2, "d": 2, "mode": "variation",
      "atoms": {"count": 4}, "n_grid": [8, 16, 32], "trials": 20,
      "quadrature": {"kind": "tensor_gauss_legendre", "q": 8}
    })");
    const auto out = dir.file("mc.json.out");
    const auto csv = dir.file("mc.csv");
    REQUIRE(run_cli({"mc-rate", "--config", cfg_path, "--out", out, "--csv", csv}) == 0);
    const auto j = nlohmann::json::parse(read_text(out));
    CHECK(j.at("type") == "mc_rate_report");
    CHECK(read_text(csv).rfind("n,", 0) == 0);
}

TEST_CASE("cli rates smoke with replay") {
    TempDir dir;
    const auto cfg_path = dir.file("rates.json");
    write_text_atomic(cfg_path, R"({
      "seed": 6, "axis": "delta", "values": [0.05, 0.1], "m_max": 0,
      "d": 2, "n_train": 64,
      "noise": {"kind": "l2_calibrated_field"},
      "target": {"kind": "reference_network", "k": 2, "d": 2, "n_ref": 2, "a_scale": 0.5},
      "evaluation": {"q": 8},
      "tikhonov": {
        "penalty": "variation", "k": 2, "n": 4,
        "lambda_rule": {"kind": "variation_rule"},
        "optimizer": {"step_init": 0.02, "max_iters": 100, "restarts": 1}
      }
    })");
    const auto out1 = dir.file("rates1.json");
    REQUIRE(run_cli({"rates", "--config", cfg_path, "--out", out1}) == 0);
    const auto out2 = dir.file("rates2.json");
    REQUIRE(run_cli({"rates", "--config", out1, "--out", out2}) == 0);  // replay
    const auto j1 = cfg::strip_wall_time(nlohmann::json::parse(read_text(out1)));
    const auto j2 = cfg::strip_wall_time(nlohmann::json::parse(read_text(out2)));
    CHECK(j1 == j2);
}

TEST_CASE("atomic writes leave no temp files") {
    TempDir dir;
    const auto path = dir.file("out.json");
    write_text_atomic(path, "{}\n");
    CHECK(fs::exists(path));
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}
