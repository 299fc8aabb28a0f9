#pragma once

// Residual image classifier. Each block is one Euler step of a neural ODE,
//     X <- X + dt * R(X),
// or, for the stochastic variant, one Euler-Maruyama step of the matching SDE,
//     X <- X + dt * R(X) + sigma * sqrt(dt) * xi,   xi ~ N(0, I),
// with R = conv3x3 -> relu -> conv3x3.

#include "ure/autodiff.hpp"
#include "ure/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ure::model {

struct ResidualNetConfig {
    int n_classes = 6;
    int n_blocks = 4;
    int channels = 16;
    bool stochastic = false;
    float sde_sigma = 0.1f;
    float dt = 1.0f;
    int mc_samples = 8;
    bool train_noise = true;
    int image_h = 64;
    int image_w = 64;

    void validate() const;
    /// Canonical text form (without mc_samples); its SHA-256 is the checkpoint config digest.
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string digest() const;

    bool operator==(const ResidualNetConfig&) const = default;
};

enum class Mode { kTrain, kEval };

struct ResidualBlock {
    ad::Tensor conv1_weight;
    ad::Tensor conv1_bias;
    ad::Tensor conv2_weight;
    ad::Tensor conv2_bias;
};

struct BlockDynamics {
    float dt = 1.0f;
    float sigma = 0.0f;
};

/// Per-sample noise seeds for one batch; `stream` separates blocks.
struct NoiseSource {
    std::span<const std::uint64_t> sample_seeds;
    std::size_t stream = 0;
};

/// Standard-normal increments for one sample in one block.
void block_noise(std::uint64_t sample_seed, std::size_t stream, float scale, std::span<float> out);

/// x + dt * R(x), plus sigma * sqrt(dt) * xi when `noise` is given and sigma > 0.
ad::Tensor block_forward(const ad::Tensor& x, const ResidualBlock& block, const BlockDynamics& dynamics,
                         std::optional<NoiseSource> noise);

/// Logits plus the output of every residual block (for Grad-CAM).
struct ForwardTrace {
    ad::Tensor logits;
    std::vector<ad::Tensor> activations;
};

class ResidualNet {
   public:
    ResidualNet(ResidualNetConfig config, std::uint64_t init_seed);

    [[nodiscard]] const ResidualNetConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::span<ad::Parameter> parameters() noexcept { return params_; }
    [[nodiscard]] std::span<const ad::Parameter> parameters() const noexcept { return params_; }
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] const std::vector<ResidualBlock>& blocks() const noexcept { return blocks_; }

    /// One stem -> blocks -> head pass. Noise is injected into every block iff
    /// `inject_noise` and the net is stochastic with sigma > 0.
    ForwardTrace single_pass(const ad::Tensor& images, std::span<const std::uint64_t> sample_seeds,
                             bool inject_noise) const;

    /// Train mode: one pass, noisy iff stochastic && train_noise.
    /// Eval mode: deterministic nets run one clean pass; stochastic nets
    /// average the logits of mc_samples noisy passes.
    ad::Tensor forward(const ad::Tensor& images, Mode mode, std::span<const std::uint64_t> sample_seeds) const;
    ad::Tensor forward(const ad::Tensor& images, Mode mode, std::uint64_t seed) const;

    static std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) noexcept;
    /// Seed of Monte-Carlo pass `pass` for a sample; replayable via single_pass.
    static std::uint64_t pass_seed(std::uint64_t sample_seed, std::size_t pass) noexcept;

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

   private:
    void check_input(const ad::Tensor& images) const;

    ResidualNetConfig config_;
    std::vector<ad::Parameter> params_;
    ad::Tensor stem_weight_;
    ad::Tensor stem_bias_;
    std::vector<ResidualBlock> blocks_;
    ad::Tensor head_weight_;
    ad::Tensor head_bias_;
};

struct Dataset {
    std::vector<spectral::ImageTensor> images;
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const noexcept { return images.size(); }
};

/// Stacks images (optionally a subset, by index) into an [N, 1, H, W] tensor.
ad::Tensor stack_images(std::span<const spectral::ImageTensor> images, std::span<const std::size_t> indices = {},
                        bool requires_grad = false);
ad::Tensor stack_grids(std::span<const Grid> grids, bool requires_grad = false);

struct TrainOptions {
    int epochs = 10;
    int batch_size = 32;
    float lr = 1e-3f;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Row 0 holds the loss/accuracy of the untrained net over the training set;
/// rows 1..epochs the running means over each epoch's mini-batches.
struct TrainingLog {
    std::vector<EpochRecord> epochs;

    [[nodiscard]] std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainingLog train(ResidualNet& net, const Dataset& data, const TrainOptions& options, const EpochCallback& on_epoch = {});

struct Prediction {
    std::vector<int> labels;
    std::vector<std::vector<float>> scores;  // eval-mode logits per sample
};

/// Index of the largest score; ties go to the lower index.
int argmax(std::span<const float> scores);

Prediction predict(const ResidualNet& net, std::span<const spectral::ImageTensor> images, std::uint64_t seed);

}  // namespace ure::model
