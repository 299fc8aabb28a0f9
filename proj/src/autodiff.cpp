#include "ure/autodiff.hpp"

#include "ure/binary_io.hpp"
#include "ure/error.hpp"
#include "ure/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace ure::ad {

// gin[i] is null when input i needs no gradient; otherwise a buffer of the
// input's size to accumulate into.
using BackwardFn = std::function<void(std::span<const float> gout, std::span<float* const> gin)>;

namespace detail {

struct Node {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    bool leaf = true;
    bool has_grad = false;
    std::vector<float> grad;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
};

struct Access {
    static const std::shared_ptr<Node>& node(const Tensor& t) {
        require(t.defined(), ErrorCode::kInvalidArgument, "use of an undefined tensor");
        return t.node_;
    }
    static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
};

}  // namespace detail

using detail::Access;
using detail::Node;

namespace {

thread_local bool t_grad_enabled = true;

Tensor make_result(const char* op, Shape shape, std::vector<float> data, std::initializer_list<const Tensor*> inputs,
                   BackwardFn backward) {
    if (!simd::active().all_finite(data.size(), data.data())) {
        fail(ErrorCode::kNonFinite, std::string("op '") + op + "' produced a non-finite value");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->leaf = false;
    node->op = op;
    bool rg = false;
    if (t_grad_enabled) {
        for (const Tensor* in : inputs) {
            rg = rg || in->requires_grad();
        }
    }
    node->requires_grad = rg;
    if (rg) {
        for (const Tensor* in : inputs) {
            node->inputs.push_back(Access::node(*in));
        }
        node->backward = std::move(backward);
    }
    return Access::wrap(std::move(node));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        fail(ErrorCode::kShapeMismatch,
             std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
    }
}

void check_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                            ", got shape " + to_string(t.shape()));
    }
}

// Post-order over the recorded graph: inputs always precede their consumers.
std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

struct GradPass {
    std::unordered_map<const Node*, std::vector<float>> target_grads;
};

template <typename IsTarget>
GradPass run_backward(Node* root, IsTarget&& is_target) {
    GradPass pass;
    if (!root->requires_grad) {
        return pass;
    }
    const std::vector<Node*> order = topo_order(root);
    std::unordered_map<const Node*, std::size_t> index;
    index.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        index.emplace(order[i], i);
    }
    std::vector<char> needed(order.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        bool n = is_target(order[i]);
        for (const auto& in : order[i]->inputs) {
            auto it = index.find(in.get());
            n = n || (it != index.end() && needed[it->second]);
        }
        needed[i] = n;
    }

    std::vector<std::vector<float>> grads(order.size());
    grads.back().assign(root->data.size(), 1.0f);
    std::vector<float*> gin;
    for (std::size_t i = order.size(); i-- > 0;) {
        Node* node = order[i];
        if (grads[i].empty()) {
            continue;
        }
        if (!node->leaf && node->backward) {
            gin.assign(node->inputs.size(), nullptr);
            bool any = false;
            for (std::size_t j = 0; j < node->inputs.size(); ++j) {
                auto it = index.find(node->inputs[j].get());
                if (it == index.end() || !needed[it->second]) {
                    continue;
                }
                auto& buf = grads[it->second];
                if (buf.empty()) {
                    buf.assign(node->inputs[j]->data.size(), 0.0f);
                }
                gin[j] = buf.data();
                any = true;
            }
            if (any) {
                node->backward(grads[i], gin);
            }
        }
        if (is_target(node)) {
            pass.target_grads.emplace(node, std::move(grads[i]));
        }
        grads[i] = {};
    }
    return pass;
}

Node* require_scalar_root(const Tensor& t, const char* who) {
    const auto& node = Access::node(t);
    if (node->data.size() != 1) {
        fail(ErrorCode::kShapeMismatch,
             std::string(who) + " requires a scalar output, got shape " + to_string(node->shape));
    }
    return node.get();
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += (i ? "," : "") + std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const std::size_t n = element_count(shape);
    return from_data(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    if (element_count(shape) != data.size()) {
        fail(ErrorCode::kShapeMismatch, "shape " + to_string(shape) + " holds " +
                                            std::to_string(element_count(shape)) + " elements, data has " +
                                            std::to_string(data.size()));
    }
    if (!simd::active().all_finite(data.size(), data.data())) {
        fail(ErrorCode::kNonFinite, "tensor data contains a non-finite value");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return Access::node(*this)->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    require(axis < s.size(), ErrorCode::kInvalidArgument,
            "axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return Access::node(*this)->data.size(); }

std::span<const float> Tensor::data() const { return Access::node(*this)->data; }

std::span<float> Tensor::mutable_data() {
    require(Access::node(*this)->leaf, ErrorCode::kInvalidArgument, "only leaf tensors may be written in place");
    return node_->data;
}

float Tensor::item() const {
    require(numel() == 1, ErrorCode::kShapeMismatch, "item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return Access::node(*this)->requires_grad; }
bool Tensor::is_leaf() const { return Access::node(*this)->leaf; }
bool Tensor::has_grad() const { return Access::node(*this)->has_grad; }

std::span<const float> Tensor::grad() const {
    require(has_grad(), ErrorCode::kInvalidArgument, "tensor has no gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    Access::node(*this);
    node_->has_grad = false;
    node_->grad.clear();
}

Tensor Tensor::detach(bool requires_grad) const {
    return from_data(shape(), std::vector<float>(data().begin(), data().end()), requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() noexcept { return t_grad_enabled; }

// ---- backward ----

void backward(const Tensor& loss) {
    Node* root = require_scalar_root(loss, "backward");
    auto is_target = [](const Node* n) { return n->leaf && n->requires_grad; };
    GradPass pass = run_backward(root, is_target);
    for (auto& [cnode, g] : pass.target_grads) {
        auto* node = const_cast<Node*>(cnode);
        if (!node->has_grad) {
            node->grad.assign(node->data.size(), 0.0f);
            node->has_grad = true;
        }
        simd::active().axpy(g.size(), 1.0f, g.data(), node->grad.data());
    }
}

std::vector<std::vector<float>> gradients(const Tensor& output, std::span<const Tensor> wrt) {
    Node* root = require_scalar_root(output, "gradients");
    std::unordered_set<const Node*> targets;
    for (const Tensor& t : wrt) {
        targets.insert(Access::node(t).get());
    }
    GradPass pass = run_backward(root, [&](const Node* n) { return targets.contains(n); });
    std::vector<std::vector<float>> out;
    out.reserve(wrt.size());
    for (const Tensor& t : wrt) {
        auto it = pass.target_grads.find(t.node());
        if (it != pass.target_grads.end()) {
            out.push_back(it->second);
        } else {
            out.emplace_back(t.numel(), 0.0f);
        }
    }
    return out;
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<float> out(a.numel());
    simd::active().add(out.size(), a.data().data(), b.data().data(), out.data());
    return make_result("add", a.shape(), std::move(out), {&a, &b},
                       [](std::span<const float> g, std::span<float* const> gin) {
                           for (float* dst : gin) {
                               if (dst) {
                                   simd::active().axpy(g.size(), 1.0f, g.data(), dst);
                               }
                           }
                       });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<float> out(a.numel());
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ad[i] - bd[i];
    }
    return make_result("sub", a.shape(), std::move(out), {&a, &b},
                       [](std::span<const float> g, std::span<float* const> gin) {
                           if (gin[0]) {
                               simd::active().axpy(g.size(), 1.0f, g.data(), gin[0]);
                           }
                           if (gin[1]) {
                               simd::active().axpy(g.size(), -1.0f, g.data(), gin[1]);
                           }
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<float> out(a.numel());
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = pa[i] * pb[i];
    }
    return make_result("mul", a.shape(), std::move(out), {&a, &b},
                       [pa, pb](std::span<const float> g, std::span<float* const> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               if (gin[0]) {
                                   gin[0][i] += g[i] * pb[i];
                               }
                               if (gin[1]) {
                                   gin[1][i] += g[i] * pa[i];
                               }
                           }
                       });
}

Tensor scale(const Tensor& a, float factor) {
    std::vector<float> out(a.data().begin(), a.data().end());
    for (float& v : out) {
        v *= factor;
    }
    return make_result("scale", a.shape(), std::move(out), {&a},
                       [factor](std::span<const float> g, std::span<float* const> gin) {
                           simd::active().axpy(g.size(), factor, g.data(), gin[0]);
                       });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) {
        acc += v;
    }
    return make_result("sum", {}, {static_cast<float>(acc)}, {&a},
                       [n = a.numel()](std::span<const float> g, std::span<float* const> gin) {
                           for (std::size_t i = 0; i < n; ++i) {
                               gin[0][i] += g[0];
                           }
                       });
}

Tensor mean(const Tensor& a) {
    const std::size_t n = a.numel();
    require(n > 0, ErrorCode::kInvalidArgument, "mean of an empty tensor");
    double acc = 0.0;
    for (float v : a.data()) {
        acc += v;
    }
    return make_result("mean", {}, {static_cast<float>(acc / static_cast<double>(n))}, {&a},
                       [n](std::span<const float> g, std::span<float* const> gin) {
                           const float share = g[0] / static_cast<float>(n);
                           for (std::size_t i = 0; i < n; ++i) {
                               gin[0][i] += share;
                           }
                       });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (element_count(shape) != a.numel()) {
        fail(ErrorCode::kShapeMismatch, "reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
    }
    std::vector<float> out(a.data().begin(), a.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {&a},
                       [](std::span<const float> g, std::span<float* const> gin) {
                           simd::active().axpy(g.size(), 1.0f, g.data(), gin[0]);
                       });
}

Tensor relu(const Tensor& x) {
    std::vector<float> out(x.numel());
    const float* px = x.data().data();
    simd::active().relu(out.size(), px, out.data());
    return make_result("relu", x.shape(), std::move(out), {&x},
                       [px](std::span<const float> g, std::span<float* const> gin) {
                           simd::active().relu_backward(g.size(), px, g.data(), gin[0]);
                       });
}

// ---- convolution ----

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding) {
    check_rank("conv2d", x, 4, "input");
    check_rank("conv2d", kernel, 4, "kernel");
    check_rank("conv2d", bias, 1, "bias");
    const std::size_t n = x.dim(0);
    const std::size_t c = x.dim(1);
    const std::size_t h = x.dim(2);
    const std::size_t w = x.dim(3);
    const std::size_t f = kernel.dim(0);
    const std::size_t kh = kernel.dim(2);
    const std::size_t kw = kernel.dim(3);
    if (kernel.dim(1) != c || bias.dim(0) != f) {
        fail(ErrorCode::kShapeMismatch, "conv2d: input " + to_string(x.shape()) + ", kernel " +
                                            to_string(kernel.shape()) + ", bias " + to_string(bias.shape()) +
                                            " disagree on channel counts");
    }
    simd::CorrelateShape geom{c, h, w, f, kh, kw, 0, 0};
    if (padding == Padding::kSame) {
        if (kh % 2 == 0 || kw % 2 == 0) {
            fail(ErrorCode::kShapeMismatch, "conv2d: same padding needs odd kernel dims, got kernel " +
                                                to_string(kernel.shape()) + " for input " + to_string(x.shape()));
        }
        geom.pad_h = (kh - 1) / 2;
        geom.pad_w = (kw - 1) / 2;
    } else if (kh > h || kw > w) {
        fail(ErrorCode::kShapeMismatch, "conv2d: kernel " + to_string(kernel.shape()) +
                                            " larger than input " + to_string(x.shape()) + " with valid padding");
    }
    const std::size_t oh = geom.out_h();
    const std::size_t ow = geom.out_w();
    const std::size_t in_plane = c * h * w;
    const std::size_t out_plane = f * oh * ow;

    const float* px = x.data().data();
    const float* pk = kernel.data().data();
    const float* pb = bias.data().data();
    const auto& kern = simd::active();
    std::vector<float> out(n * out_plane);
    for (std::size_t s = 0; s < n; ++s) {
        float* dst = out.data() + s * out_plane;
        for (std::size_t o = 0; o < f; ++o) {
            std::fill_n(dst + o * oh * ow, oh * ow, pb[o]);
        }
        kern.correlate(geom, px + s * in_plane, pk, dst);
    }

    auto backward = [geom, n, in_plane, out_plane, px, pk](std::span<const float> g, std::span<float* const> gin) {
        const auto& kern = simd::active();
        const std::size_t oh = geom.out_h();
        const std::size_t ow = geom.out_w();
        if (gin[0]) {
            // dL/dx = correlate(dL/dy, kernel flipped in space and transposed in channels)
            // with complementary padding.
            simd::CorrelateShape back{geom.out_channels, oh, ow, geom.in_channels, geom.kernel_h, geom.kernel_w,
                                      geom.kernel_h - 1 - geom.pad_h, geom.kernel_w - 1 - geom.pad_w};
            std::vector<float> flipped(geom.in_channels * geom.out_channels * geom.kernel_h * geom.kernel_w);
            for (std::size_t o = 0; o < geom.out_channels; ++o) {
                for (std::size_t i = 0; i < geom.in_channels; ++i) {
                    for (std::size_t ky = 0; ky < geom.kernel_h; ++ky) {
                        for (std::size_t kx = 0; kx < geom.kernel_w; ++kx) {
                            flipped[((i * geom.out_channels + o) * geom.kernel_h + (geom.kernel_h - 1 - ky)) *
                                        geom.kernel_w +
                                    (geom.kernel_w - 1 - kx)] =
                                pk[((o * geom.in_channels + i) * geom.kernel_h + ky) * geom.kernel_w + kx];
                        }
                    }
                }
            }
            for (std::size_t s = 0; s < n; ++s) {
                kern.correlate(back, g.data() + s * out_plane, flipped.data(), gin[0] + s * in_plane);
            }
        }
        if (gin[1]) {
            for (std::size_t s = 0; s < n; ++s) {
                kern.correlate_weight_grad(geom, px + s * in_plane, g.data() + s * out_plane, gin[1]);
            }
        }
        if (gin[2]) {
            for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t o = 0; o < geom.out_channels; ++o) {
                    const float* go = g.data() + s * out_plane + o * oh * ow;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < oh * ow; ++i) {
                        acc += go[i];
                    }
                    gin[2][o] += static_cast<float>(acc);
                }
            }
        }
    };
    return make_result("conv2d", {n, f, oh, ow}, std::move(out), {&x, &kernel, &bias}, std::move(backward));
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank("dense", x, 2, "input");
    check_rank("dense", w, 2, "weight");
    check_rank("dense", b, 1, "bias");
    const std::size_t n = x.dim(0);
    const std::size_t d = x.dim(1);
    const std::size_t k = w.dim(1);
    if (w.dim(0) != d || b.dim(0) != k) {
        fail(ErrorCode::kShapeMismatch, "dense: input " + to_string(x.shape()) + ", weight " + to_string(w.shape()) +
                                            ", bias " + to_string(b.shape()) + " disagree");
    }
    const float* px = x.data().data();
    const float* pw = w.data().data();
    const float* pb = b.data().data();
    const auto& kern = simd::active();
    std::vector<float> out(n * k);
    for (std::size_t r = 0; r < n; ++r) {
        float* row = out.data() + r * k;
        std::copy_n(pb, k, row);
        for (std::size_t j = 0; j < d; ++j) {
            kern.axpy(k, px[r * d + j], pw + j * k, row);
        }
    }
    return make_result("dense", {n, k}, std::move(out), {&x, &w, &b},
                       [n, d, k, px, pw](std::span<const float> g, std::span<float* const> gin) {
                           const auto& kern = simd::active();
                           for (std::size_t r = 0; r < n; ++r) {
                               const float* grow = g.data() + r * k;
                               for (std::size_t j = 0; j < d; ++j) {
                                   if (gin[0]) {
                                       gin[0][r * d + j] += kern.dot(k, grow, pw + j * k);
                                   }
                                   if (gin[1]) {
                                       kern.axpy(k, px[r * d + j], grow, gin[1] + j * k);
                                   }
                               }
                               if (gin[2]) {
                                   kern.axpy(k, 1.0f, grow, gin[2]);
                               }
                           }
                       });
}

Tensor global_avg_pool(const Tensor& x) {
    check_rank("global_avg_pool", x, 4, "input");
    const std::size_t n = x.dim(0);
    const std::size_t c = x.dim(1);
    const std::size_t hw = x.dim(2) * x.dim(3);
    require(hw > 0, ErrorCode::kShapeMismatch, "global_avg_pool: empty spatial extent");
    std::vector<float> out(n * c);
    const float* px = x.data().data();
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < hw; ++j) {
            acc += px[i * hw + j];
        }
        out[i] = static_cast<float>(acc / static_cast<double>(hw));
    }
    return make_result("global_avg_pool", {n, c}, std::move(out), {&x},
                       [n, c, hw](std::span<const float> g, std::span<float* const> gin) {
                           const float inv = 1.0f / static_cast<float>(hw);
                           for (std::size_t i = 0; i < n * c; ++i) {
                               const float share = g[i] * inv;
                               float* dst = gin[0] + i * hw;
                               for (std::size_t j = 0; j < hw; ++j) {
                                   dst[j] += share;
                               }
                           }
                       });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    check_rank("softmax_cross_entropy", logits, 2, "logits");
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    require(n >= 1 && k >= 1, ErrorCode::kShapeMismatch, "softmax_cross_entropy: empty logits");
    if (labels.size() != n) {
        fail(ErrorCode::kShapeMismatch, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                            " labels for logits " + to_string(logits.shape()));
    }
    for (std::size_t r = 0; r < n; ++r) {
        require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < k, ErrorCode::kInvalidArgument,
                "softmax_cross_entropy: label " + std::to_string(labels[r]) + " at row " + std::to_string(r) +
                    " outside [0, " + std::to_string(k) + ")");
    }
    const float* pz = logits.data().data();
    std::vector<float> probs(n * k);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const float* z = pz + r * k;
        const std::size_t arg = static_cast<std::size_t>(std::max_element(z, z + k) - z);
        const double m = z[arg];
        double rest = 0.0;  // sum of exp(z - m) excluding the max term
        for (std::size_t j = 0; j < k; ++j) {
            if (j != arg) {
                rest += std::exp(static_cast<double>(z[j]) - m);
            }
        }
        const double log_norm = std::log1p(rest);
        total += (m - static_cast<double>(z[labels[r]])) + log_norm;
        for (std::size_t j = 0; j < k; ++j) {
            probs[r * k + j] = static_cast<float>(std::exp(static_cast<double>(z[j]) - m - log_norm));
        }
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return make_result("softmax_cross_entropy", {}, {static_cast<float>(total / static_cast<double>(n))}, {&logits},
                       [n, k, probs = std::move(probs), lab = std::move(lab)](std::span<const float> g,
                                                                                std::span<float* const> gin) {
                           const float share = g[0] / static_cast<float>(n);
                           for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t j = 0; j < k; ++j) {
                                   const float target = static_cast<int>(j) == lab[r] ? 1.0f : 0.0f;
                                   gin[0][r * k + j] += share * (probs[r * k + j] - target);
                               }
                           }
                       });
}

Tensor gather_columns(const Tensor& logits, std::span<const std::size_t> columns) {
    check_rank("gather_columns", logits, 2, "logits");
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    if (columns.size() != n) {
        fail(ErrorCode::kShapeMismatch, "gather_columns: " + std::to_string(columns.size()) + " columns for " +
                                            to_string(logits.shape()));
    }
    std::vector<float> out(n);
    std::vector<std::size_t> cols(columns.begin(), columns.end());
    for (std::size_t r = 0; r < n; ++r) {
        require(cols[r] < k, ErrorCode::kInvalidArgument,
                "gather_columns: column " + std::to_string(cols[r]) + " out of range");
        out[r] = logits.data()[r * k + cols[r]];
    }
    return make_result("gather_columns", {n}, std::move(out), {&logits},
                       [k, cols = std::move(cols)](std::span<const float> g, std::span<float* const> gin) {
                           for (std::size_t r = 0; r < cols.size(); ++r) {
                               gin[0][r * k + cols[r]] += g[r];
                           }
                       });
}

// ---- optimizer ----

Parameter::Parameter(std::string param_name, Tensor tensor)
    : name(std::move(param_name)),
      value(std::move(tensor)),
      adam_m(value.numel(), 0.0f),
      adam_v(value.numel(), 0.0f) {
    require(value.is_leaf() && value.requires_grad(), ErrorCode::kInvalidArgument,
            "parameter '" + name + "' must be a leaf tensor that requires grad");
}

void adam_step(std::span<Parameter> params, const AdamOptions& options) {
    for (const Parameter& p : params) {
        require(p.value.has_grad(), ErrorCode::kInvalidArgument, "adam_step: parameter '" + p.name + "' has no gradient");
    }
    for (Parameter& p : params) {
        ++p.step_count;
        const double t = static_cast<double>(p.step_count);
        const double bc1 = 1.0 - std::pow(static_cast<double>(options.beta1), t);
        const double bc2 = 1.0 - std::pow(static_cast<double>(options.beta2), t);
        const auto g = p.value.grad();
        auto w = p.value.mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            p.adam_m[i] = options.beta1 * p.adam_m[i] + (1.0f - options.beta1) * g[i];
            p.adam_v[i] = options.beta2 * p.adam_v[i] + (1.0f - options.beta2) * g[i] * g[i];
            const double m_hat = p.adam_m[i] / bc1;
            const double v_hat = p.adam_v[i] / bc2;
            w[i] -= static_cast<float>(options.lr * m_hat / (std::sqrt(v_hat) + options.eps));
        }
        p.value.zero_grad();
    }
}

// ---- checkpoints ----

std::vector<std::byte> encode_checkpoint(const std::string& config_digest, std::span<const Parameter> params) {
    io::ByteWriter w;
    w.magic("CKPT");
    w.string(config_digest);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Parameter& p : params) {
        w.string(p.name);
        w.u32(static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) {
            w.u64(d);
        }
        for (float v : p.value.data()) {
            w.f32(v);
        }
    }
    return w.take();
}

void decode_checkpoint(std::span<const std::byte> bytes, const std::string& config_digest, std::span<Parameter> params) {
    io::ByteReader r(bytes);
    if (bytes.size() < 4 || !r.magic("CKPT")) {
        fail(ErrorCode::kBadMagic, "not a CKPT checkpoint (bad magic)");
    }
    const std::string digest = r.string();
    require(digest == config_digest, ErrorCode::kInvalidArgument,
            "checkpoint config digest " + digest + " does not match model config " + config_digest);
    const std::uint32_t count = r.u32();
    require(count == params.size(), ErrorCode::kShapeMismatch,
            "checkpoint holds " + std::to_string(count) + " parameters, model has " + std::to_string(params.size()));
    for (Parameter& p : params) {
        const std::string name = r.string();
        require(name == p.name, ErrorCode::kShapeMismatch,
                "checkpoint parameter '" + name + "' where '" + p.name + "' was expected");
        Shape shape(r.u32());
        for (auto& d : shape) {
            d = r.u64();
        }
        require(shape == p.value.shape(), ErrorCode::kShapeMismatch,
                "checkpoint parameter '" + name + "' has shape " + to_string(shape) + ", model expects " +
                    to_string(p.value.shape()));
        auto dst = p.value.mutable_data();
        for (float& v : dst) {
            v = r.f32();
            require(std::isfinite(v), ErrorCode::kNonFinite, "checkpoint parameter '" + name + "' is non-finite");
        }
        std::fill(p.adam_m.begin(), p.adam_m.end(), 0.0f);
        std::fill(p.adam_v.begin(), p.adam_v.end(), 0.0f);
        p.step_count = 0;
    }
}

void save_checkpoint(const std::filesystem::path& path, const std::string& config_digest,
                     std::span<const Parameter> params) {
    io::write_file(path, encode_checkpoint(config_digest, params));
}

void load_checkpoint(const std::filesystem::path& path, const std::string& config_digest, std::span<Parameter> params) {
    decode_checkpoint(io::read_file(path), config_digest, params);
}

}  // namespace ure::ad
