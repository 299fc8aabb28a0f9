#pragma once

// Experiment configuration: a sectioned key = value text file.
//
//   [dataset]      n_classes, sample_rate, segment_seconds, segments_per_class,
//                  train_fraction, seed
//   [profile.K]    one per class K: name, harmonics ("freq:amp:phase; ..."),
//                  am ("rate:depth", optional), drift_ppm, noise_floor,
//                  recording (optional URE1 file replacing synthesis)
//   [spectral]     window, window_size, hop, image_h, image_w
//   [model]        n_classes, n_blocks, channels, sde_sigma, dt, train_noise
//   [train]        epochs, batch_size, lr, seed
//   [eval]         sigmas, mc_samples, seed
//   [attribution]  methods, ig_steps, nt_samples, nt_sigma, shap_samples,
//                  gradcam_layer, occlusion_window ("HxW"), occlusion_stride,
//                  samples_per_class, seed

#include "ure/attribution.hpp"
#include "ure/model.hpp"
#include "ure/signalgen.hpp"
#include "ure/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ure::workbench {

struct ClassProfile {
    signal::DeviceProfile profile;
    std::string recording;  // empty: synthesize

    bool operator==(const ClassProfile&) const = default;
};

struct DatasetConfig {
    int n_classes = 6;
    double sample_rate = 8192.0;
    double segment_seconds = 1.0;
    int segments_per_class = 100;
    double train_fraction = 0.7;
    std::uint64_t seed = 1;
    std::vector<ClassProfile> profiles;

    bool operator==(const DatasetConfig&) const = default;
};

struct SpectralConfig {
    spectral::StftParams stft{};
    std::size_t image_h = 64;
    std::size_t image_w = 64;

    bool operator==(const SpectralConfig&) const = default;
};

/// Shared by both trained arms; the deterministic arm ignores the noise fields.
struct ModelConfig {
    int n_classes = 6;
    int n_blocks = 4;
    int channels = 16;
    double sde_sigma = 0.1;
    double dt = 1.0;
    bool train_noise = true;

    bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 2;

    bool operator==(const TrainConfig&) const = default;
};

struct EvalConfig {
    std::vector<double> sigmas{0.1, 0.25, 0.5};
    int mc_samples = 8;
    std::uint64_t seed = 3;

    bool operator==(const EvalConfig&) const = default;
};

struct AttributionConfig {
    std::vector<attribution::Method> methods{attribution::Method::kNoiseTunnel};
    int ig_steps = 16;
    int nt_samples = 4;
    double nt_sigma = 0.1;
    int shap_samples = 32;
    int gradcam_layer = -1;
    std::size_t occlusion_h = 8;
    std::size_t occlusion_w = 8;
    std::size_t occlusion_stride = 4;
    int samples_per_class = 5;
    std::uint64_t seed = 4;

    bool operator==(const AttributionConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    SpectralConfig spectral;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    AttributionConfig attribution;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws kConfig with the offending field path.
    void validate() const;
    /// Net config for one arm; image size comes from the spectral section.
    [[nodiscard]] model::ResidualNetConfig net_config(bool stochastic) const;
    [[nodiscard]] attribution::ExplainOptions explain_options() const;
    /// Sets every section seed.
    void override_seed(std::uint64_t seed);
};

/// Parse errors are kConfig and name "section.key" (and the line when known).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Shortest decimal that reads back to the same double.
std::string format_double(double value);

}  // namespace ure::workbench
