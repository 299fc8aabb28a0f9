#pragma once

// Pipeline orchestration and artifact emission.
//
// Each stage writes into <out>/<stage>-<key>/ where <key> is a SHA-256 prefix
// over the config sections (and upstream keys) the stage depends on, so runs
// with different inputs never share a directory. A stage directory is
// complete once its done.json exists; a rerun with the same key reuses it.

#include "ure/attribution.hpp"
#include "ure/config.hpp"
#include "ure/eval.hpp"
#include "ure/model.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace ure::workbench {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Stage { kGenerate, kTrain, kEvaluate, kSweep, kExplain, kReport };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);
/// Comma-separated stage names; "all" means generate, train, sweep, explain, report.
std::set<Stage> parse_stages(const std::string& list);

/// Both trained variants, in this order everywhere.
inline constexpr const char* kArms[] = {"deterministic", "stochastic"};

struct SampleInfo {
    int label = 0;
    std::size_t segment = 0;  // segment index within its class recording
};

struct GeneratedData {
    model::Dataset train;
    model::Dataset test;
    std::vector<SampleInfo> train_info;
    std::vector<SampleInfo> test_info;
};

/// Synthesizes (or loads) one recording per class, segments it, and turns each
/// segment into an image. Segments are shuffled per class before the split.
GeneratedData generate_dataset(const ExperimentConfig& config);

/// Directory-name key of a stage for this config (16 hex chars).
std::string stage_key(const ExperimentConfig& config, Stage stage);
std::filesystem::path stage_dir(const std::filesystem::path& out, const ExperimentConfig& config, Stage stage);

struct StageRecord {
    Stage stage = Stage::kGenerate;
    std::filesystem::path dir;
    bool reused = false;
    double seconds = 0.0;
};

struct InventoryEntry {
    std::string path;  // relative to the output root
    std::string sha256;
};

struct RunMetadata {
    std::string config_digest;
    std::string tool_version = kToolVersion;
    std::uint64_t dataset_seed = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t eval_seed = 0;
    std::uint64_t attribution_seed = 0;
    std::vector<StageRecord> stages;
    std::vector<InventoryEntry> inventory;

    [[nodiscard]] std::string to_json() const;
};

struct PipelineOptions {
    std::filesystem::path out = "runs";
    std::set<Stage> stages;
    std::function<void(const std::string&)> log;
};

/// Runs the requested stages in canonical order and writes <out>/run.json last.
/// A stage whose upstream directory is incomplete fails with kMissingPrerequisite.
RunMetadata run_pipeline(const ExperimentConfig& config, const PipelineOptions& options);

/// Binary P6 pixmap, 2W x H: grayscale underlay on the left, attribution on
/// the right (green = positive, red = negative, scaled by max |A|).
std::vector<std::byte> render_heatmap(const attribution::AttributionMap& attr, const Grid& underlay);

/// Writes <base>.csv and <base>.md.
void emit_tables(std::span<const eval::EvalReport> reports, const std::filesystem::path& base);

// Readers for stage outputs.
GeneratedData load_dataset(const std::filesystem::path& generate_dir);
std::vector<eval::EvalReport> load_reports(const std::filesystem::path& sweep_dir, const std::string& arm);

}  // namespace ure::workbench
