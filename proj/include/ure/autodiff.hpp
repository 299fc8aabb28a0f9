#pragma once

// Minimal reverse-mode automatic differentiation over dense float32 tensors.
//
// Every op returns a fresh tensor (no in-place mutation inside a recorded
// graph). When at least one input requires a gradient and recording is
// enabled, the result keeps its inputs alive and stores a closure that maps
// the output gradient to input gradients. Graphs are owned by the tensors that
// reference them and must be confined to one thread; leaves (parameters) may
// be shared read-only across concurrently built graphs as long as only
// `gradients()` (which never writes to leaves) is used on them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ure::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

namespace detail {
struct Node;
struct Access;
}  // namespace detail

class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    [[nodiscard]] bool defined() const noexcept { return node_ != nullptr; }
    [[nodiscard]] const Shape& shape() const;
    [[nodiscard]] std::size_t dim(std::size_t axis) const;
    [[nodiscard]] std::size_t rank() const { return shape().size(); }
    [[nodiscard]] std::size_t numel() const;
    [[nodiscard]] std::span<const float> data() const;
    /// Leaves only: optimizers and initializers write through this.
    [[nodiscard]] std::span<float> mutable_data();
    [[nodiscard]] float item() const;

    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] bool is_leaf() const;
    [[nodiscard]] bool has_grad() const;
    [[nodiscard]] std::span<const float> grad() const;
    void zero_grad();

    /// A new leaf holding a copy of the values, cut from any graph.
    [[nodiscard]] Tensor detach(bool requires_grad = false) const;

    [[nodiscard]] const detail::Node* node() const noexcept { return node_.get(); }

   private:
    friend struct detail::Access;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

[[nodiscard]] bool grad_enabled() noexcept;

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a gradient.
void backward(const Tensor& loss);

/// Returns d(output)/d(t) for each tensor in `wrt` (leaves or intermediates)
/// without touching any stored gradient. Unreached tensors get zeros.
std::vector<std::vector<float>> gradients(const Tensor& output, std::span<const Tensor> wrt);

// ---- primitives ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor relu(const Tensor& x);

enum class Padding { kSame, kValid };

/// Stride-1 cross-correlation. x [N,C,H,W], kernel [F,C,kh,kw], bias [F].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding);
/// x [N,D] * w [D,K] + b [K]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
/// [N,C,H,W] -> [N,C], spatial mean.
Tensor global_avg_pool(const Tensor& x);
/// Mean over the batch of -log softmax(logits)[label]; max-subtracted.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
/// logits [N,K] -> [N], element n is logits[n, columns[n]].
Tensor gather_columns(const Tensor& logits, std::span<const std::size_t> columns);

// ---- parameters and optimizer ----

struct Parameter {
    std::string name;
    Tensor value;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
    std::int64_t step_count = 0;

    Parameter(std::string param_name, Tensor tensor);
};

struct AdamOptions {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Bias-corrected Adam; clears the gradients afterwards.
void adam_step(std::span<Parameter> params, const AdamOptions& options);

// ---- checkpoints ----
// "CKPT", config digest (u32 length + bytes), u32 parameter count, then per
// parameter: u32 name length + name, u32 rank, rank x u64 dims, f32 payload.

std::vector<std::byte> encode_checkpoint(const std::string& config_digest, std::span<const Parameter> params);
/// Restores values in place; names, shapes and digest must match.
void decode_checkpoint(std::span<const std::byte> bytes, const std::string& config_digest, std::span<Parameter> params);
void save_checkpoint(const std::filesystem::path& path, const std::string& config_digest,
                     std::span<const Parameter> params);
void load_checkpoint(const std::filesystem::path& path, const std::string& config_digest, std::span<Parameter> params);

}  // namespace ure::ad
