#include "kandy/pipeline.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>

using namespace kandy;
namespace fs = std::filesystem;

namespace {

const std::string kSmallHenon = R"(seed = 5

[system]
name = "henon"
samples = 400
burn_in = 100
x0 = [0.1, 0.1]

[lift]
terms = ["x", "y"]

[spline]
grid = 5
knots = 3

[train]
optimizer = "adam_whitened"
learning_rate = 0.1
lr_final = 0.001
epochs = 20
lambda_roll = 0.1
rollout_horizon = 2
grid_update_every = 10
derivative_scheme = "provided"

[symbolic]
w = 0.05
min_contribution = 0.01

[diagnostics]
lyapunov_iterations = 2000
dimension_points = 500
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

std::string config_error_path(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("kandy_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("shipped configs parse", "[config]") {
    for (const char* name : {"henon", "ikeda", "lorenz", "ks", "burgers_sine", "burgers_fourier", "hopf"}) {
        INFO(name);
        const ExperimentConfig c = load_config(fs::path(KANDY_CONFIG_DIR) / (std::string(name) + ".toml"));
        CHECK(c.name == name);
        CHECK_FALSE(c.lift.terms.empty());
    }
}

TEST_CASE("schema violations name the field", "[config]") {
    CHECK(config_error_path(kSmallHenon).empty());
    CHECK(config_error_path(replace(kSmallHenon, "lambda_roll = 0.1\n", "")) == "train.lambda_roll");
    CHECK(config_error_path(replace(kSmallHenon, "epochs = 20", "epochs = \"many\"")) == "train.epochs");
    CHECK(config_error_path(replace(kSmallHenon, "knots = 3", "knots = 3\nshape = 2")) == "spline.shape");
    CHECK(config_error_path(replace(kSmallHenon, "name = \"henon\"", "name = \"pendulum\"")) == "system.name");
    CHECK(config_error_path(replace(kSmallHenon, "grid = 5", "grid = 1")) == "train.freeze_coeffs");
    CHECK(config_error_path(replace(kSmallHenon, "terms = [\"x\", \"y\"]", "terms = [\"x\", \"w\"]")) == "lift.terms");
    CHECK(config_error_path(replace(kSmallHenon, "seed = 5", "")) == "seed");
    const std::string syntax = config_error_path(replace(kSmallHenon, "knots = 3", "knots = = 3"));
    CHECK(syntax.rfind("config:", 0) == 0);
}

TEST_CASE("config echo and seeds", "[config]") {
    ExperimentConfig a = parse_config(kSmallHenon);
    const ExperimentConfig b = parse_config(kSmallHenon);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.to_json().at("train").at("lambda_roll") == 0.1);
    CHECK(a.stage_seed(1) != a.stage_seed(2));
    set_seed(a, 6);
    CHECK(a.train.seed == a.stage_seed(2));
    CHECK(a.to_json().dump() != b.to_json().dump());
}

TEST_CASE("sha256", "[config]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("pipeline stages compose and repeat exactly", "[config][pipeline]") {
    const ExperimentConfig c = parse_config(kSmallHenon);
    TempDir staged("staged"), full("full"), again("again");

    Pipeline p(c, staged.path);
    CHECK_THROWS_AS(p.run(Stage::train), MissingArtifactError);
    p.run(Stage::generate);
    CHECK_THROWS_AS(p.run(Stage::discover), MissingArtifactError);
    p.run(Stage::train);

    Pipeline(c, full.path).run_all();
    Pipeline(c, again.path).run_all();

    CHECK(slurp(staged.path / "model.json") == slurp(full.path / "model.json"));
    for (const char* f : {"equations.txt", "equations.json", "manifest.json", "diagnostics.json"}) {
        INFO(f);
        REQUIRE(fs::exists(full.path / f));
        CHECK(slurp(full.path / f) == slurp(again.path / f));
    }
}
