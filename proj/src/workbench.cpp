#include "ure/workbench.hpp"

#include "ure/binary_io.hpp"
#include "ure/digest.hpp"
#include "ure/error.hpp"
#include "ure/rng.hpp"
#include "ure/signalgen.hpp"
#include "ure/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace ure::workbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDoneFile = "done.json";

void say(const PipelineOptions& options, const std::string& line) {
    if (options.log) {
        options.log(line);
    }
}

std::string sample_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return buf;
}

std::string recording_digests(const DatasetConfig& d) {
    std::string out;
    for (const ClassProfile& cp : d.profiles) {
        if (!cp.recording.empty()) {
            out += cp.recording + "=" + (fs::exists(cp.recording) ? sha256_file(cp.recording) : "missing") + "\n";
        }
    }
    return out;
}

// The config restricted to what a stage depends on; everything else stays at defaults.
ExperimentConfig projection(const ExperimentConfig& c, Stage stage) {
    ExperimentConfig p;
    p.name = "";
    p.dataset = c.dataset;
    p.spectral = c.spectral;
    if (stage == Stage::kGenerate) {
        return p;
    }
    p.model = c.model;
    p.train = c.train;
    if (stage == Stage::kTrain) {
        return p;
    }
    p.eval = c.eval;
    if (stage == Stage::kEvaluate || stage == Stage::kSweep) {
        return p;
    }
    p.attribution = c.attribution;
    return p;
}

void mark_done(const fs::path& dir, Stage stage, const std::string& key) {
    json files = json::array();
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() != kDoneFile) {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    for (const fs::path& p : paths) {
        files.push_back({{"path", fs::relative(p, dir).generic_string()}, {"sha256", sha256_file(p)}});
    }
    const json done{{"stage", to_string(stage)}, {"key", key}, {"files", files}};
    io::write_text(dir / kDoneFile, done.dump(2) + "\n");
}

bool is_complete(const fs::path& dir) { return fs::exists(dir / kDoneFile); }

fs::path require_stage(const fs::path& out, const ExperimentConfig& config, Stage upstream, Stage requester) {
    const fs::path dir = stage_dir(out, config, upstream);
    if (!is_complete(dir)) {
        fail(ErrorCode::kMissingPrerequisite, "stage '" + to_string(requester) + "' needs the output of stage '" +
                                                  to_string(upstream) + "': missing " +
                                                  (dir / kDoneFile).string());
    }
    return dir;
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir, ec);
    if (ec) {
        fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
    }
}

json dataset_split_json(const model::Dataset& data, const std::vector<SampleInfo>& info, const std::string& split) {
    json arr = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        arr.push_back({{"file", split + "/" + sample_name(i) + ".img"},
                       {"label", info[i].label},
                       {"segment", info[i].segment}});
    }
    return arr;
}

json report_json(const eval::EvalReport& r) {
    json classes = json::array();
    for (const auto& m : r.per_class) {
        classes.push_back({{"class", m.class_id},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"support", m.support}});
    }
    return {{"sigma", r.noise_sigma},     {"model", r.model_tag},          {"accuracy", r.accuracy},
            {"macro_precision", r.macro_precision}, {"macro_recall", r.macro_recall}, {"macro_f1", r.macro_f1},
            {"per_class", classes}};
}

eval::EvalReport report_from_json(const json& j) {
    eval::EvalReport r;
    r.noise_sigma = j.at("sigma").get<double>();
    r.model_tag = j.at("model").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    for (const json& m : j.at("per_class")) {
        r.per_class.push_back({m.at("class").get<int>(), m.at("precision").get<double>(),
                               m.at("recall").get<double>(), m.at("f1").get<double>(),
                               m.at("support").get<std::size_t>()});
    }
    return r;
}

json read_json(const fs::path& path) {
    try {
        return json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::kIo, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

model::ResidualNet load_arm(const ExperimentConfig& config, const fs::path& train_dir, std::size_t arm) {
    model::ResidualNet net(config.net_config(arm == 1), 0);
    net.load(train_dir / (std::string(kArms[arm]) + ".ckpt"));
    return net;
}

// ---- stages ----

void run_generate(const ExperimentConfig& config, const fs::path& dir) {
    const GeneratedData data = generate_dataset(config);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        spectral::save_grid(dir / "train" / (sample_name(i) + ".img"), data.train.images[i].pixels);
    }
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        spectral::save_grid(dir / "test" / (sample_name(i) + ".img"), data.test.images[i].pixels);
    }
    json classes = json::array();
    for (const ClassProfile& cp : config.dataset.profiles) {
        classes.push_back({{"id", cp.profile.class_id},
                           {"name", cp.profile.name},
                           {"source", cp.recording.empty() ? "synthetic" : cp.recording}});
    }
    const json manifest{{"n_classes", config.dataset.n_classes},
                        {"sample_rate", config.dataset.sample_rate},
                        {"segment_seconds", config.dataset.segment_seconds},
                        {"window", spectral::to_string(config.spectral.stft.window)},
                        {"window_size", config.spectral.stft.window_size},
                        {"hop", config.spectral.stft.hop},
                        {"image_h", config.spectral.image_h},
                        {"image_w", config.spectral.image_w},
                        {"classes", classes},
                        {"train", dataset_split_json(data.train, data.train_info, "train")},
                        {"test", dataset_split_json(data.test, data.test_info, "test")}};
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void run_train(const ExperimentConfig& config, const fs::path& gen_dir, const fs::path& dir,
               const PipelineOptions& options) {
    const GeneratedData data = load_dataset(gen_dir);
    const std::uint64_t init_seed = derive_seed(config.train.seed, {0x1417});
    const model::TrainOptions train{config.train.epochs, config.train.batch_size,
                                    static_cast<float>(config.train.lr), derive_seed(config.train.seed, {0x7a1})};
    json summary = json::object();
    for (std::size_t arm = 0; arm < 2; ++arm) {
        // Both arms start from the same weights and see the same batches.
        model::ResidualNet net(config.net_config(arm == 1), init_seed);
        const auto t0 = std::chrono::steady_clock::now();
        const model::TrainingLog log = model::train(net, data.train, train, [&](const model::EpochRecord& e) {
            say(options, std::string("  ") + kArms[arm] + " epoch " + std::to_string(e.epoch) +
                             " loss " + eval::format_fixed(e.loss, 4) + " acc " + eval::format_fixed(e.accuracy, 3));
        });
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        net.save(dir / (std::string(kArms[arm]) + ".ckpt"));
        io::write_text(dir / (std::string(kArms[arm]) + "_log.csv"), log.to_csv());
        summary[kArms[arm]] = {{"final_loss", log.epochs.back().loss},
                               {"final_accuracy", log.epochs.back().accuracy},
                               {"parameters", net.parameter_count()},
                               {"config_digest", net.config().digest()}};
        say(options, std::string("  ") + kArms[arm] + " trained in " + eval::format_fixed(seconds, 1) + " s");
    }
    io::write_text(dir / "summary.json", summary.dump(2) + "\n");
}

void run_sweep(const ExperimentConfig& config, const fs::path& gen_dir, const fs::path& train_dir,
               const fs::path& dir, bool clean_only) {
    const GeneratedData data = load_dataset(gen_dir);
    std::vector<std::vector<eval::EvalReport>> all;
    for (std::size_t arm = 0; arm < 2; ++arm) {
        const model::ResidualNet net = load_arm(config, train_dir, arm);
        eval::SweepOptions opts;
        opts.sigmas = config.eval.sigmas;
        opts.seed = config.eval.seed;
        opts.n_classes = config.dataset.n_classes;
        opts.model_tag = kArms[arm];
        std::vector<eval::EvalReport> reports = eval::robustness_sweep(net, data.test, opts);
        if (clean_only) {
            reports.resize(1);
        }
        emit_tables(reports, dir / kArms[arm]);
        json arr = json::array();
        for (const auto& r : reports) {
            arr.push_back(report_json(r));
        }
        io::write_text(dir / (std::string(kArms[arm]) + ".json"), arr.dump(2) + "\n");
        all.push_back(std::move(reports));
    }
    const auto rows = eval::compare_reports(all[0], all[1]);
    io::write_text(dir / "comparison.md", eval::comparison_to_markdown(rows, kArms[0], kArms[1]));
    json cmp = json::array();
    for (const auto& r : rows) {
        cmp.push_back({{"sigma", r.sigma},
                       {"macro_f1_deterministic", r.macro_f1_a},
                       {"macro_f1_stochastic", r.macro_f1_b},
                       {"delta", r.delta},
                       {"verdict", r.verdict}});
    }
    const json meta{{"input_noise_clipping", false}, {"mc_samples", config.eval.mc_samples}, {"comparison", cmp}};
    io::write_text(dir / "sweep.json", meta.dump(2) + "\n");
}

void run_explain(const ExperimentConfig& config, const fs::path& gen_dir, const fs::path& train_dir,
                 const fs::path& dir, const PipelineOptions& options) {
    const GeneratedData data = load_dataset(gen_dir);
    std::vector<model::ResidualNet> nets;
    std::vector<std::vector<int>> preds;
    for (std::size_t arm = 0; arm < 2; ++arm) {
        nets.push_back(load_arm(config, train_dir, arm));
        preds.push_back(model::predict(nets.back(), data.test.images, derive_seed(config.eval.seed, {0xc1ea})).labels);
    }

    // The first samples_per_class test samples of each class that both arms classify correctly.
    std::vector<std::size_t> chosen;
    for (int c = 0; c < config.dataset.n_classes; ++c) {
        int taken = 0;
        for (std::size_t i = 0; i < data.test.size() && taken < config.attribution.samples_per_class; ++i) {
            if (data.test.labels[i] == c && preds[0][i] == c && preds[1][i] == c) {
                chosen.push_back(i);
                ++taken;
            }
        }
    }

    json scores = json::object();
    double image_band = 0.0;
    for (std::size_t i : chosen) {
        image_band += attribution::band_score(data.test.images[i].pixels);
    }
    scores["samples"] = chosen;
    scores["image_band_score"] = chosen.empty() ? 0.0 : image_band / static_cast<double>(chosen.size());

    const attribution::ExplainOptions base = config.explain_options();
    for (std::size_t arm = 0; arm < 2; ++arm) {
        const attribution::NetExplainable model(nets[arm]);
        json per_method = json::object();
        for (attribution::Method method : config.attribution.methods) {
            const std::string mname = attribution::to_string(method);
            const fs::path mdir = dir / kArms[arm] / mname;
            double total = 0.0;
            json per_sample = json::array();
            for (std::size_t i : chosen) {
                attribution::ExplainOptions opts = base;
                opts.seed = derive_seed(base.seed, {i});
                const Grid& img = data.test.images[i].pixels;
                const attribution::AttributionMap map =
                    attribution::explain(model, method, img, data.test.labels[i], opts);
                attribution::save_map(mdir / (sample_name(i) + ".img"), map);
                io::write_file(mdir / (sample_name(i) + ".ppm"), render_heatmap(map, img));
                const double b = attribution::band_score(map.values);
                per_sample.push_back(b);
                total += b;
            }
            const double mean = chosen.empty() ? 0.0 : total / static_cast<double>(chosen.size());
            per_method[mname] = {{"mean_band_score", mean}, {"band_scores", per_sample}};
            say(options, std::string("  ") + kArms[arm] + " " + mname + " mean band score " +
                             eval::format_fixed(mean, 4));
        }
        scores[kArms[arm]] = per_method;
    }
    io::write_text(dir / "band_scores.json", scores.dump(2) + "\n");
}

void run_report(const ExperimentConfig& config, const fs::path& sweep_dir, const fs::path& explain_dir,
                const fs::path& dir) {
    std::string md = "# " + config.name + "\n\n## Robustness to Gaussian input noise\n\n";
    for (const char* arm : kArms) {
        const auto reports = load_reports(sweep_dir, arm);
        emit_tables(reports, dir / arm);
        md += eval::reports_to_markdown(reports) + "\n";
    }
    md += "### Macro F1 comparison\n\n" + io::read_text(sweep_dir / "comparison.md") + "\n";

    const json scores = read_json(explain_dir / "band_scores.json");
    md += "## Band score of attribution maps\n\nInput images: " +
          eval::format_fixed(scores.at("image_band_score").get<double>()) + " (" +
          std::to_string(scores.at("samples").size()) + " samples)\n\n| Method |";
    for (const char* arm : kArms) {
        md += std::string(" ") + arm + " |";
    }
    md += "\n|---|---|---|\n";
    for (attribution::Method m : config.attribution.methods) {
        const std::string name = attribution::to_string(m);
        md += "| " + name + " |";
        for (const char* arm : kArms) {
            md += " " + eval::format_fixed(scores.at(arm).at(name).at("mean_band_score").get<double>()) + " |";
        }
        md += "\n";
    }
    io::write_text(dir / "report.md", md);
}

}  // namespace

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::kGenerate: return "generate";
        case Stage::kTrain: return "train";
        case Stage::kEvaluate: return "evaluate";
        case Stage::kSweep: return "sweep";
        case Stage::kExplain: return "explain";
        case Stage::kReport: return "report";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& name) {
    for (Stage s : {Stage::kGenerate, Stage::kTrain, Stage::kEvaluate, Stage::kSweep, Stage::kExplain,
                    Stage::kReport}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    fail(ErrorCode::kConfig, "unknown stage '" + name + "'");
}

std::set<Stage> parse_stages(const std::string& list) {
    std::set<Stage> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto pos = std::min(list.find(',', start), list.size());
        std::string item = list.substr(start, pos - start);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item == "all") {
            out.insert({Stage::kGenerate, Stage::kTrain, Stage::kSweep, Stage::kExplain, Stage::kReport});
        } else if (!item.empty()) {
            out.insert(stage_from_string(item));
        }
        start = pos + 1;
    }
    if (out.empty()) {
        fail(ErrorCode::kConfig, "no stages selected");
    }
    return out;
}

GeneratedData generate_dataset(const ExperimentConfig& config) {
    config.validate();
    const DatasetConfig& d = config.dataset;
    const auto seg_len = static_cast<std::size_t>(std::llround(d.segment_seconds * d.sample_rate));
    const auto per_class = static_cast<std::size_t>(d.segments_per_class);
    const auto n_train = static_cast<std::size_t>(std::llround(d.train_fraction * static_cast<double>(per_class)));
    if (n_train == 0 || n_train >= per_class) {
        fail(ErrorCode::kConfig, "dataset.train_fraction: leaves an empty train or test split");
    }

    GeneratedData out;
    for (const ClassProfile& cp : d.profiles) {
        const int k = cp.profile.class_id;
        signal::TimeSeries rec;
        if (cp.recording.empty()) {
            rec = signal::synthesize_recording(cp.profile, static_cast<double>(per_class) * d.segment_seconds,
                                               d.sample_rate, derive_seed(d.seed, {0xda7a, static_cast<std::uint64_t>(k)}));
        } else {
            rec = signal::load_raw_recording(cp.recording);
            if (rec.sample_rate != d.sample_rate) {
                fail(ErrorCode::kConfig, "profile." + std::to_string(k) + ".recording: sample rate " +
                                             eval::format_fixed(rec.sample_rate, 1) + " differs from dataset.sample_rate");
            }
        }
        const auto segments = signal::segment(rec, seg_len);
        if (segments.size() < per_class) {
            fail(ErrorCode::kConfig, "profile." + std::to_string(k) + ": recording yields " +
                                         std::to_string(segments.size()) + " segments, need " +
                                         std::to_string(per_class));
        }
        std::vector<std::size_t> order(per_class);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(d.seed, {0x5b11, static_cast<std::uint64_t>(k)}));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t j = 0; j < per_class; ++j) {
            const std::size_t s = order[j];
            spectral::ImageTensor img = spectral::to_image(spectral::stft(segments[s], config.spectral.stft),
                                                           config.spectral.image_h, config.spectral.image_w);
            const bool is_train = j < n_train;
            model::Dataset& split = is_train ? out.train : out.test;
            split.images.push_back(std::move(img));
            split.labels.push_back(k);
            (is_train ? out.train_info : out.test_info).push_back({k, s});
        }
    }
    return out;
}

std::string stage_key(const ExperimentConfig& config, Stage stage) {
    std::string text = std::string(kToolVersion) + "\n" + to_string(stage) + "\n" +
                       serialize_config(projection(config, stage)) + recording_digests(config.dataset);
    return sha256_hex(text).substr(0, 16);
}

fs::path stage_dir(const fs::path& out, const ExperimentConfig& config, Stage stage) {
    return out / (to_string(stage) + "-" + stage_key(config, stage));
}

std::string RunMetadata::to_json() const {
    json stages_json = json::array();
    for (const StageRecord& s : stages) {
        stages_json.push_back({{"stage", to_string(s.stage)},
                               {"dir", s.dir.generic_string()},
                               {"reused", s.reused},
                               {"seconds", s.seconds}});
    }
    json inv = json::array();
    for (const InventoryEntry& e : inventory) {
        inv.push_back({{"path", e.path}, {"sha256", e.sha256}});
    }
    const json j{{"config_digest", config_digest},
                 {"tool_version", tool_version},
                 {"seeds",
                  {{"dataset", dataset_seed}, {"train", train_seed}, {"eval", eval_seed}, {"attribution", attribution_seed}}},
                 {"input_noise_clipping", false},
                 {"stages", stages_json},
                 {"inventory", inv}};
    return j.dump(2) + "\n";
}

RunMetadata run_pipeline(const ExperimentConfig& config, const PipelineOptions& options) {
    config.validate();
    require(!options.stages.empty(), ErrorCode::kConfig, "no stages selected");
    RunMetadata meta;
    meta.config_digest = sha256_hex(serialize_config(config));
    meta.dataset_seed = config.dataset.seed;
    meta.train_seed = config.train.seed;
    meta.eval_seed = config.eval.seed;
    meta.attribution_seed = config.attribution.seed;
    const fs::path& out = options.out;

    for (Stage stage : options.stages) {  // std::set order is the canonical order
        const fs::path dir = stage_dir(out, config, stage);
        StageRecord record{stage, dir, false, 0.0};
        if (is_complete(dir)) {
            record.reused = true;
            say(options, to_string(stage) + ": up to date in " + dir.string());
            meta.stages.push_back(record);
            continue;
        }
        // Resolve prerequisites before touching the output directory.
        fs::path gen, train, sweep, explain;
        switch (stage) {
            case Stage::kGenerate: break;
            case Stage::kTrain: gen = require_stage(out, config, Stage::kGenerate, stage); break;
            case Stage::kEvaluate:
            case Stage::kSweep:
            case Stage::kExplain:
                gen = require_stage(out, config, Stage::kGenerate, stage);
                train = require_stage(out, config, Stage::kTrain, stage);
                break;
            case Stage::kReport:
                sweep = require_stage(out, config, Stage::kSweep, stage);
                explain = require_stage(out, config, Stage::kExplain, stage);
                break;
        }
        say(options, to_string(stage) + ": writing " + dir.string());
        const auto t0 = std::chrono::steady_clock::now();
        prepare_dir(dir);
        switch (stage) {
            case Stage::kGenerate: run_generate(config, dir); break;
            case Stage::kTrain: run_train(config, gen, dir, options); break;
            case Stage::kEvaluate: run_sweep(config, gen, train, dir, true); break;
            case Stage::kSweep: run_sweep(config, gen, train, dir, false); break;
            case Stage::kExplain: run_explain(config, gen, train, dir, options); break;
            case Stage::kReport: run_report(config, sweep, explain, dir); break;
        }
        mark_done(dir, stage, stage_key(config, stage));
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        meta.stages.push_back(record);
    }

    for (const StageRecord& s : meta.stages) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(s.dir)) {
            if (entry.is_regular_file()) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            meta.inventory.push_back({fs::relative(f, out).generic_string(), sha256_file(f)});
        }
    }
    io::write_text(out / "config.ini", serialize_config(config));
    meta.inventory.push_back({"config.ini", sha256_file(out / "config.ini")});
    io::write_text(out / "run.json", meta.to_json());
    return meta;
}

std::vector<std::byte> render_heatmap(const attribution::AttributionMap& attr, const Grid& underlay) {
    const Grid& a = attr.values;
    if (a.rows != underlay.rows || a.cols != underlay.cols) {
        fail(ErrorCode::kShapeMismatch, "render_heatmap: map is " + std::to_string(a.rows) + "x" +
                                            std::to_string(a.cols) + ", underlay is " +
                                            std::to_string(underlay.rows) + "x" + std::to_string(underlay.cols));
    }
    attribution::validate(attr);
    float peak = 0.0f;
    for (float v : a.values) {
        peak = std::max(peak, std::abs(v));
    }
    const std::string header = "P6\n" + std::to_string(2 * a.cols) + " " + std::to_string(a.rows) + "\n255\n";
    std::vector<std::byte> out;
    out.reserve(header.size() + 6 * a.values.size());
    for (char ch : header) {
        out.push_back(static_cast<std::byte>(ch));
    }
    auto level = [](double unit) {
        return static_cast<std::byte>(static_cast<int>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0)));
    };
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) {
            const std::byte g = level(underlay.at(r, c));
            out.insert(out.end(), {g, g, g});
        }
        for (std::size_t c = 0; c < a.cols; ++c) {
            const double v = peak > 0.0f ? a.at(r, c) / static_cast<double>(peak) : 0.0;
            out.insert(out.end(), {level(-v), level(v), std::byte{0}});
        }
    }
    return out;
}

void emit_tables(std::span<const eval::EvalReport> reports, const fs::path& base) {
    require(!reports.empty(), ErrorCode::kInvalidArgument, "emit_tables: no reports");
    io::write_text(base.string() + ".csv", eval::reports_to_csv(reports));
    io::write_text(base.string() + ".md", eval::reports_to_markdown(reports));
}

GeneratedData load_dataset(const fs::path& generate_dir) {
    const json manifest = read_json(generate_dir / "manifest.json");
    GeneratedData out;
    spectral::StftParams params;
    params.window = spectral::window_from_string(manifest.at("window").get<std::string>());
    params.window_size = manifest.at("window_size").get<std::size_t>();
    params.hop = manifest.at("hop").get<std::size_t>();
    auto load_split = [&](const char* name, model::Dataset& data, std::vector<SampleInfo>& info) {
        for (const json& item : manifest.at(name)) {
            data.images.push_back({spectral::load_grid(generate_dir / item.at("file").get<std::string>()), params});
            data.labels.push_back(item.at("label").get<int>());
            info.push_back({item.at("label").get<int>(), item.at("segment").get<std::size_t>()});
        }
    };
    load_split("train", out.train, out.train_info);
    load_split("test", out.test, out.test_info);
    return out;
}

std::vector<eval::EvalReport> load_reports(const fs::path& sweep_dir, const std::string& arm) {
    const json arr = read_json(sweep_dir / (arm + ".json"));
    std::vector<eval::EvalReport> out;
    try {
        for (const json& j : arr) {
            out.push_back(report_from_json(j));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::kIo, "malformed report file for " + arm + ": " + e.what());
    }
    return out;
}

}  // namespace ure::workbench
