#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "ure/error.hpp"
#include "ure/workbench.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace ure;
using namespace ure::workbench;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = URE_CONFIG_DIR;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ure_wb_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::kInternal;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + URE_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::uint8_t* pixel(const std::vector<std::byte>& ppm, std::size_t header, std::size_t width, std::size_t r,
                          std::size_t c) {
    return reinterpret_cast<const std::uint8_t*>(ppm.data() + header + 3 * (r * width + c));
}

}  // namespace

TEST_CASE("shipped configs parse and survive a serialize round trip") {
    for (const char* name : {"standard.ini", "tiny.ini"}) {
        CAPTURE(name);
        const ExperimentConfig c = load_config(kConfigs / name);
        CHECK_NOTHROW(c.validate());
        CHECK(parse_config(serialize_config(c)) == c);
        CHECK(static_cast<int>(c.dataset.profiles.size()) == c.dataset.n_classes);
    }
}

TEST_CASE("format_double reads back exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1e-12, 8192.0, -2.5, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("config errors name the field") {
    const std::string base = serialize_config(load_config(kConfigs / "tiny.ini"));
    auto with = [&](const std::string& from, const std::string& to) {
        std::string t = base;
        const auto pos = t.find(from);
        REQUIRE(pos != std::string::npos);
        t.replace(pos, from.size(), to);
        return t;
    };
    CHECK(code_of([&] { parse_config(with("epochs = 2", "epochs = two")); }) == ErrorCode::kConfig);
    CHECK(message_of([&] { parse_config(with("epochs = 2", "epochs = two")); }).find("train.epochs") !=
          std::string::npos);
    CHECK(message_of([&] { parse_config(with("hop = 32", "hop = 0")).validate(); }).find("spectral.hop") !=
          std::string::npos);
    CHECK(code_of([&] { load_config(kConfigs / "missing.ini"); }) == ErrorCode::kConfig);
}

TEST_CASE("seed override touches every section") {
    ExperimentConfig c = load_config(kConfigs / "tiny.ini");
    c.override_seed(77);
    const ExperimentConfig again = parse_config(serialize_config(c));
    CHECK(again == c);
    CHECK(c.dataset.seed != load_config(kConfigs / "tiny.ini").dataset.seed);
}

TEST_CASE("stage names parse") {
    CHECK(parse_stages("all").size() == 5);
    CHECK(parse_stages("generate,train") == std::set<Stage>{Stage::kGenerate, Stage::kTrain});
    for (Stage s : {Stage::kGenerate, Stage::kTrain, Stage::kEvaluate, Stage::kSweep, Stage::kExplain, Stage::kReport}) {
        CHECK(stage_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_stages("generate,bake"), Error);
}

TEST_CASE("stage keys depend on their inputs only") {
    const ExperimentConfig a = load_config(kConfigs / "tiny.ini");
    ExperimentConfig b = a;
    b.train.epochs += 1;
    CHECK(stage_key(a, Stage::kGenerate) == stage_key(b, Stage::kGenerate));
    CHECK(stage_key(a, Stage::kTrain) != stage_key(b, Stage::kTrain));
    CHECK(stage_key(a, Stage::kSweep) != stage_key(b, Stage::kSweep));
    CHECK(stage_key(a, Stage::kTrain).size() == 16);
    b = a;
    b.dataset.seed += 1;
    CHECK(stage_key(a, Stage::kGenerate) != stage_key(b, Stage::kGenerate));
}

TEST_CASE("heatmap colours follow the attribution sign") {
    attribution::AttributionMap m;
    m.values = Grid(2, 3, 0.0f);
    m.values.at(0, 0) = 2.0f;
    m.values.at(1, 2) = -2.0f;
    m.values.at(0, 1) = 1.0f;
    Grid under(2, 3, 0.5f);
    under.at(1, 0) = 1.0f;
    const auto ppm = render_heatmap(m, under);
    const std::string header = "P6\n6 2\n255\n";
    REQUIRE(ppm.size() == header.size() + 2 * 6 * 3);
    CHECK(std::string(reinterpret_cast<const char*>(ppm.data()), header.size()) == header);
    const auto* px = pixel(ppm, header.size(), 6, 0, 3);
    CHECK((px[0] == 0 && px[1] == 255 && px[2] == 0));
    px = pixel(ppm, header.size(), 6, 1, 5);
    CHECK((px[0] == 255 && px[1] == 0 && px[2] == 0));
    px = pixel(ppm, header.size(), 6, 0, 4);
    CHECK((px[0] == 0 && px[1] == 128 && px[2] == 0));
    px = pixel(ppm, header.size(), 6, 1, 0);
    CHECK((px[0] == 255 && px[1] == 255 && px[2] == 255));
    px = pixel(ppm, header.size(), 6, 0, 0);
    CHECK((px[0] == 128 && px[1] == 128 && px[2] == 128));
    CHECK(render_heatmap(m, under) == ppm);
}

TEST_CASE("an all-zero map renders a black right half") {
    attribution::AttributionMap m;
    m.values = Grid(4, 4, 0.0f);
    const auto ppm = render_heatmap(m, testing::random_grid(4, 4, 3));
    const std::size_t header = std::string("P6\n8 4\n255\n").size();
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 4; c < 8; ++c) {
            const auto* px = pixel(ppm, header, 8, r, c);
            CHECK((px[0] == 0 && px[1] == 0 && px[2] == 0));
        }
    }
    CHECK_THROWS_AS(render_heatmap(m, Grid(4, 5, 0.0f)), Error);
}

TEST_CASE("emit_tables writes matching csv and markdown") {
    const std::vector<int> truth{0, 1, 1, 1};
    const std::vector<int> preds{0, 0, 1, 1};
    std::vector<eval::EvalReport> reports{eval::classification_report(preds, truth, 2)};
    const fs::path dir = fresh_dir("tables");
    fs::create_directories(dir);
    emit_tables(reports, dir / "demo");
    const std::string csv = slurp(dir / "demo.csv");
    const std::string md = slurp(dir / "demo.md");
    std::istringstream in(csv);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) {
        lines.push_back(l);
    }
    REQUIRE(lines.size() == 4);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(row, cell, ',');) {
            cells.push_back(cell);
        }
        for (std::size_t k = 2; k <= 4; ++k) {
            CHECK(md.find(cells[k]) != std::string::npos);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("pipeline runs the tiny config and reruns reuse every stage") {
    const ExperimentConfig c = load_config(kConfigs / "tiny.ini");
    const fs::path out = fresh_dir("tiny");
    PipelineOptions o;
    o.out = out;
    o.stages = parse_stages("all");
    const RunMetadata first = run_pipeline(c, o);
    CHECK(first.stages.size() == 5);
    for (const auto& s : first.stages) {
        CHECK_FALSE(s.reused);
        CHECK(fs::exists(s.dir / "done.json"));
    }
    CHECK(fs::exists(out / "run.json"));
    CHECK(fs::exists(out / "config.ini"));
    CHECK(parse_config(slurp(out / "config.ini")) == c);

    const GeneratedData data = load_dataset(stage_dir(out, c, Stage::kGenerate));
    CHECK(data.train.size() + data.test.size() == 20);
    CHECK(data.test.images.front().height() == 16);
    CHECK(load_reports(stage_dir(out, c, Stage::kSweep), "stochastic").size() == 3);

    const RunMetadata second = run_pipeline(c, o);
    for (const auto& s : second.stages) {
        CHECK(s.reused);
    }
    REQUIRE(first.inventory.size() == second.inventory.size());
    for (std::size_t i = 0; i < first.inventory.size(); ++i) {
        CHECK(first.inventory[i].path == second.inventory[i].path);
        CHECK(first.inventory[i].sha256 == second.inventory[i].sha256);
    }
    CHECK(first.config_digest == second.config_digest);
    fs::remove_all(out);
}

TEST_CASE("two fresh runs produce identical artifacts") {
    const ExperimentConfig c = load_config(kConfigs / "tiny.ini");
    PipelineOptions o;
    o.stages = parse_stages("all");
    o.out = fresh_dir("fresh_a");
    const RunMetadata a = run_pipeline(c, o);
    o.out = fresh_dir("fresh_b");
    const RunMetadata b = run_pipeline(c, o);
    REQUIRE(a.inventory.size() == b.inventory.size());
    CHECK(a.inventory.size() > 10);
    for (std::size_t i = 0; i < a.inventory.size(); ++i) {
        CHECK(a.inventory[i].sha256 == b.inventory[i].sha256);
    }
    fs::remove_all(fresh_dir("fresh_a"));
    fs::remove_all(fresh_dir("fresh_b"));
}

TEST_CASE("a stage without its upstream output is refused") {
    const ExperimentConfig c = load_config(kConfigs / "tiny.ini");
    PipelineOptions o;
    o.out = fresh_dir("noprereq");
    o.stages = {Stage::kSweep};
    CHECK(code_of([&] { run_pipeline(c, o); }) == ErrorCode::kMissingPrerequisite);
    fs::remove_all(o.out);
}

TEST_CASE("cli exit codes") {
    const fs::path out = fresh_dir("cli");
    const std::string tiny = (kConfigs / "tiny.ini").string();
    CHECK(run_cli("sweep --quiet --config \"" + tiny + "\" --out \"" + out.string() + "\"") == 3);
    CHECK(run_cli("generate --quiet --config \"" + tiny + "\" --out \"" + out.string() + "\"") == 0);
    CHECK(run_cli("generate --config \"" + (kConfigs / "missing.ini").string() + "\"") == 2);
    CHECK(run_cli("generate --frobnicate") == 2);
    CHECK(run_cli("explain --quiet --method lime --config \"" + tiny + "\" --out \"" + out.string() + "\"") == 2);
    CHECK(run_cli("--backend scalar generate --quiet --config \"" + tiny + "\" --out \"" + out.string() + "\"") == 0);
    fs::remove_all(out);
}
