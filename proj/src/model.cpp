#include "ure/model.hpp"

#include "ure/digest.hpp"
#include "ure/error.hpp"
#include "ure/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ure::model {

namespace {

constexpr std::size_t kEvalChunk = 32;

ad::Tensor he_normal(ad::Shape shape, std::size_t fan_in, Rng& rng) {
    std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    std::vector<float> data(ad::element_count(shape));
    for (float& v : data) {
        v = normal(rng);
    }
    return ad::Tensor::from_data(std::move(shape), std::move(data), true);
}

}  // namespace

void ResidualNetConfig::validate() const {
    require(n_classes >= 1, ErrorCode::kInvalidArgument, "model.n_classes must be >= 1");
    require(n_blocks >= 1, ErrorCode::kInvalidArgument, "model.n_blocks must be >= 1");
    require(channels >= 1, ErrorCode::kInvalidArgument, "model.channels must be >= 1");
    require(sde_sigma >= 0.0f && std::isfinite(sde_sigma), ErrorCode::kInvalidArgument, "model.sde_sigma must be >= 0");
    require(dt > 0.0f && std::isfinite(dt), ErrorCode::kInvalidArgument, "model.dt must be > 0");
    require(mc_samples >= 1, ErrorCode::kInvalidArgument, "model.mc_samples must be >= 1");
    require(image_h >= 1 && image_w >= 1, ErrorCode::kInvalidArgument, "model image dims must be >= 1");
}

std::string ResidualNetConfig::canonical() const {
    // mc_samples is an inference knob and stays out, so one checkpoint serves any sample count.
    std::ostringstream out;
    out.precision(9);
    out << "n_classes=" << n_classes << ";n_blocks=" << n_blocks << ";channels=" << channels
        << ";stochastic=" << stochastic << ";sde_sigma=" << sde_sigma << ";dt=" << dt
        << ";train_noise=" << train_noise << ";image=" << image_h << "x" << image_w;
    return out.str();
}

std::string ResidualNetConfig::digest() const { return sha256_hex(canonical()); }

void block_noise(std::uint64_t sample_seed, std::size_t stream, float scale, std::span<float> out) {
    fill_gaussian(derive_seed(sample_seed, {0xb10c, stream}), scale, out);
}

ad::Tensor block_forward(const ad::Tensor& x, const ResidualBlock& block, const BlockDynamics& dynamics,
                         std::optional<NoiseSource> noise) {
    if (x.rank() != 4 || x.dim(1) != block.conv1_weight.dim(1) || block.conv2_weight.dim(0) != x.dim(1)) {
        fail(ErrorCode::kShapeMismatch, "block_forward: input " + ad::to_string(x.shape()) +
                                            " does not match block with conv1 " +
                                            ad::to_string(block.conv1_weight.shape()) + " and conv2 " +
                                            ad::to_string(block.conv2_weight.shape()));
    }
    ad::Tensor hidden = ad::relu(ad::conv2d(x, block.conv1_weight, block.conv1_bias, ad::Padding::kSame));
    ad::Tensor residual = ad::conv2d(hidden, block.conv2_weight, block.conv2_bias, ad::Padding::kSame);
    ad::Tensor out = ad::add(x, ad::scale(residual, dynamics.dt));
    if (noise && dynamics.sigma > 0.0f) {
        const std::size_t n = x.dim(0);
        require(noise->sample_seeds.size() == n, ErrorCode::kInvalidArgument,
                "block_forward: " + std::to_string(noise->sample_seeds.size()) + " noise seeds for batch of " +
                    std::to_string(n));
        const std::size_t per_sample = x.numel() / n;
        const float increment = dynamics.sigma * std::sqrt(dynamics.dt);
        std::vector<float> xi(x.numel());
        for (std::size_t s = 0; s < n; ++s) {
            block_noise(noise->sample_seeds[s], noise->stream, increment,
                        std::span(xi).subspan(s * per_sample, per_sample));
        }
        out = ad::add(out, ad::Tensor::from_data(x.shape(), std::move(xi)));
    }
    return out;
}

ResidualNet::ResidualNet(ResidualNetConfig config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    Rng rng(derive_seed(init_seed, {0x1417}));
    const auto c = static_cast<std::size_t>(config_.channels);
    const auto k = static_cast<std::size_t>(config_.n_classes);

    params_.reserve(4 + 4 * static_cast<std::size_t>(config_.n_blocks));
    auto add_param = [this](std::string name, ad::Tensor t) {
        params_.emplace_back(std::move(name), t);
        return t;
    };
    stem_weight_ = add_param("stem.weight", he_normal({c, 1, 3, 3}, 9, rng));
    stem_bias_ = add_param("stem.bias", ad::Tensor::zeros({c}, true));
    for (int b = 0; b < config_.n_blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        ResidualBlock block;
        block.conv1_weight = add_param(prefix + "conv1.weight", he_normal({c, c, 3, 3}, 9 * c, rng));
        block.conv1_bias = add_param(prefix + "conv1.bias", ad::Tensor::zeros({c}, true));
        // Zero second conv: every block starts as the identity flow.
        block.conv2_weight = add_param(prefix + "conv2.weight", ad::Tensor::zeros({c, c, 3, 3}, true));
        block.conv2_bias = add_param(prefix + "conv2.bias", ad::Tensor::zeros({c}, true));
        blocks_.push_back(std::move(block));
    }
    std::normal_distribution<float> small(0.0f, 0.01f);
    std::vector<float> head(c * k);
    for (float& v : head) {
        v = small(rng);
    }
    head_weight_ = add_param("head.weight", ad::Tensor::from_data({c, k}, std::move(head), true));
    head_bias_ = add_param("head.bias", ad::Tensor::zeros({k}, true));
}

std::size_t ResidualNet::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) {
        total += p.value.numel();
    }
    return total;
}

void ResidualNet::check_input(const ad::Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != static_cast<std::size_t>(config_.image_h) ||
        images.dim(3) != static_cast<std::size_t>(config_.image_w) || images.dim(0) == 0) {
        fail(ErrorCode::kShapeMismatch, "forward: expected images [N,1," + std::to_string(config_.image_h) + "," +
                                            std::to_string(config_.image_w) + "], got " +
                                            ad::to_string(images.shape()));
    }
}

ForwardTrace ResidualNet::single_pass(const ad::Tensor& images, std::span<const std::uint64_t> sample_seeds,
                                      bool inject_noise) const {
    check_input(images);
    const bool noisy = inject_noise && config_.stochastic && config_.sde_sigma > 0.0f;
    const BlockDynamics dynamics{config_.dt, noisy ? config_.sde_sigma : 0.0f};

    ForwardTrace trace;
    ad::Tensor state = ad::relu(ad::conv2d(images, stem_weight_, stem_bias_, ad::Padding::kSame));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        std::optional<NoiseSource> noise;
        if (noisy) {
            noise = NoiseSource{sample_seeds, b};
        }
        state = block_forward(state, blocks_[b], dynamics, noise);
        trace.activations.push_back(state);
    }
    trace.logits = ad::dense(ad::global_avg_pool(state), head_weight_, head_bias_);
    return trace;
}

ad::Tensor ResidualNet::forward(const ad::Tensor& images, Mode mode, std::span<const std::uint64_t> sample_seeds) const {
    check_input(images);
    require(sample_seeds.size() == images.dim(0), ErrorCode::kInvalidArgument,
            "forward: one noise seed per sample required");
    if (!config_.stochastic) {
        return single_pass(images, sample_seeds, false).logits;
    }
    if (mode == Mode::kTrain) {
        return single_pass(images, sample_seeds, config_.train_noise).logits;
    }
    const auto passes = static_cast<std::size_t>(config_.mc_samples);
    std::vector<std::uint64_t> seeds(sample_seeds.size());
    ad::Tensor total;
    for (std::size_t k = 0; k < passes; ++k) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            seeds[i] = pass_seed(sample_seeds[i], k);
        }
        ad::Tensor logits = single_pass(images, seeds, true).logits;
        total = total.defined() ? ad::add(total, logits) : logits;
    }
    return ad::scale(total, 1.0f / static_cast<float>(passes));
}

ad::Tensor ResidualNet::forward(const ad::Tensor& images, Mode mode, std::uint64_t seed) const {
    check_input(images);
    std::vector<std::uint64_t> seeds(images.dim(0));
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        seeds[i] = sample_seed(seed, i);
    }
    return forward(images, mode, seeds);
}

std::uint64_t ResidualNet::sample_seed(std::uint64_t seed, std::size_t index) noexcept {
    return derive_seed(seed, {0x5a3b1e, index});
}

std::uint64_t ResidualNet::pass_seed(std::uint64_t sample_seed, std::size_t pass) noexcept {
    return derive_seed(sample_seed, {0x3c, pass});
}

void ResidualNet::save(const std::filesystem::path& path) const { ad::save_checkpoint(path, config_.digest(), params_); }

void ResidualNet::load(const std::filesystem::path& path) { ad::load_checkpoint(path, config_.digest(), params_); }

ad::Tensor stack_images(std::span<const spectral::ImageTensor> images, std::span<const std::size_t> indices,
                        bool requires_grad) {
    std::vector<std::size_t> all;
    if (indices.empty()) {
        all.resize(images.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        indices = all;
    }
    require(!indices.empty(), ErrorCode::kInvalidArgument, "stack_images: empty batch");
    const std::size_t h = images[indices[0]].height();
    const std::size_t w = images[indices[0]].width();
    std::vector<float> data;
    data.reserve(indices.size() * h * w);
    for (std::size_t idx : indices) {
        require(idx < images.size(), ErrorCode::kInvalidArgument, "stack_images: index out of range");
        const Grid& px = images[idx].pixels;
        if (px.rows != h || px.cols != w) {
            fail(ErrorCode::kShapeMismatch, "stack_images: mixed image sizes " + std::to_string(h) + "x" +
                                                std::to_string(w) + " and " + std::to_string(px.rows) + "x" +
                                                std::to_string(px.cols));
        }
        data.insert(data.end(), px.values.begin(), px.values.end());
    }
    return ad::Tensor::from_data({indices.size(), 1, h, w}, std::move(data), requires_grad);
}

ad::Tensor stack_grids(std::span<const Grid> grids, bool requires_grad) {
    require(!grids.empty(), ErrorCode::kInvalidArgument, "stack_grids: empty batch");
    const std::size_t h = grids[0].rows;
    const std::size_t w = grids[0].cols;
    std::vector<float> data;
    data.reserve(grids.size() * h * w);
    for (const Grid& g : grids) {
        require(g.rows == h && g.cols == w, ErrorCode::kShapeMismatch, "stack_grids: mixed grid sizes");
        data.insert(data.end(), g.values.begin(), g.values.end());
    }
    return ad::Tensor::from_data({grids.size(), 1, h, w}, std::move(data), requires_grad);
}

std::string TrainingLog::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,accuracy\n";
    out.setf(std::ios::fixed);
    out.precision(6);
    for (const auto& e : epochs) {
        out << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
    }
    return out.str();
}

int argmax(std::span<const float> scores) {
    require(!scores.empty(), ErrorCode::kInvalidArgument, "argmax of empty scores");
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

namespace {

std::size_t count_correct(const ad::Tensor& logits, std::span<const int> labels) {
    const std::size_t k = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        correct += argmax(logits.data().subspan(r * k, k)) == labels[r] ? 1 : 0;
    }
    return correct;
}

}  // namespace

TrainingLog train(ResidualNet& net, const Dataset& data, const TrainOptions& options, const EpochCallback& on_epoch) {
    require(data.size() > 0, ErrorCode::kInvalidArgument, "train: empty dataset");
    require(data.labels.size() == data.size(), ErrorCode::kInvalidArgument, "train: label count mismatch");
    require(options.batch_size >= 1 && options.epochs >= 0, ErrorCode::kInvalidArgument,
            "train: batch_size must be >= 1 and epochs >= 0");
    for (int label : data.labels) {
        require(label >= 0 && label < net.config().n_classes, ErrorCode::kInvalidArgument,
                "train: label " + std::to_string(label) + " outside [0, n_classes)");
    }

    const std::size_t n = data.size();
    const auto batch = static_cast<std::size_t>(options.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(options.seed, {0x5117}));
    const ad::AdamOptions adam{options.lr};

    TrainingLog log;
    auto run_epoch = [&](int epoch, bool update) {
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            std::vector<int> labels;
            std::vector<std::uint64_t> seeds;
            for (std::size_t i : idx) {
                labels.push_back(data.labels[i]);
                seeds.push_back(derive_seed(options.seed, {0xe90c, static_cast<std::uint64_t>(epoch), i}));
            }
            const ad::Tensor x = stack_images(data.images, idx);
            if (update) {
                const ad::Tensor logits = net.forward(x, Mode::kTrain, seeds);
                const ad::Tensor loss = ad::softmax_cross_entropy(logits, labels);
                ad::backward(loss);
                ad::adam_step(net.parameters(), adam);
                loss_sum += static_cast<double>(loss.item()) * static_cast<double>(idx.size());
                correct += count_correct(logits, labels);
            } else {
                ad::NoGradGuard no_grad;
                const ad::Tensor logits = net.forward(x, Mode::kTrain, seeds);
                loss_sum += static_cast<double>(ad::softmax_cross_entropy(logits, labels).item()) *
                            static_cast<double>(idx.size());
                correct += count_correct(logits, labels);
            }
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
        log.epochs.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
    };

    run_epoch(0, false);
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        run_epoch(epoch, true);
    }
    return log;
}

Prediction predict(const ResidualNet& net, std::span<const spectral::ImageTensor> images, std::uint64_t seed) {
    Prediction out;
    ad::NoGradGuard no_grad;
    const std::size_t k = static_cast<std::size_t>(net.config().n_classes);
    for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
        const std::size_t end = std::min(images.size(), start + kEvalChunk);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        std::vector<std::uint64_t> seeds;
        for (std::size_t i : idx) {
            seeds.push_back(ResidualNet::sample_seed(seed, i));
        }
        const ad::Tensor logits = net.forward(stack_images(images, idx), Mode::kEval, seeds);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            auto row = logits.data().subspan(r * k, k);
            out.scores.emplace_back(row.begin(), row.end());
            out.labels.push_back(argmax(row));
        }
    }
    return out;
}

}  // namespace ure::model
