#pragma once

// Independent oracles and small fixtures shared by the unit and acceptance suites.

#include "ure/attribution.hpp"
#include "ure/autodiff.hpp"
#include "ure/eval.hpp"
#include "ure/rng.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace ure::testing {

// O(n^2) DFT in long double.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const long double sign = inverse ? 1.0L : -1.0L;
    for (std::size_t k = 0; k < n; ++k) {
        long double re = 0.0L;
        long double im = 0.0L;
        for (std::size_t j = 0; j < n; ++j) {
            // reduce k*j mod n first so the angle stays accurate
            const long double angle =
                sign * 2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * j) % n) / n;
            const long double c = std::cos(angle);
            const long double s = std::sin(angle);
            re += x[j].real() * c - x[j].imag() * s;
            im += x[j].real() * s + x[j].imag() * c;
        }
        if (inverse) {
            re /= n;
            im /= n;
        }
        out[k] = {static_cast<double>(re), static_cast<double>(im)};
    }
    return out;
}

// DFT magnitude at one (possibly fractional) frequency.
inline double dft_magnitude(std::span<const float> x, double freq, double sample_rate) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = 2.0 * std::numbers::pi * freq * static_cast<double>(k) / sample_rate;
        re += x[k] * std::cos(a);
        im -= x[k] * std::sin(a);
    }
    return std::hypot(re, im);
}

inline eval::EvalReport brute_force_report(const std::vector<int>& preds, const std::vector<int>& truth, int k) {
    std::vector<std::vector<long>> m(k, std::vector<long>(k, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ++m[truth[i]][preds[i]];
    }
    eval::EvalReport r;
    long correct = 0;
    for (int c = 0; c < k; ++c) {
        long tp = m[c][c];
        long col = 0;
        long row = 0;
        for (int j = 0; j < k; ++j) {
            col += m[j][c];
            row += m[c][j];
        }
        correct += tp;
        eval::ClassMetrics cm;
        cm.class_id = c;
        cm.precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
        cm.recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
        cm.f1 = (cm.precision + cm.recall) == 0.0 ? 0.0 : 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
        cm.support = static_cast<std::size_t>(row);
        r.per_class.push_back(cm);
    }
    for (const auto& c : r.per_class) {
        r.macro_precision += c.precision;
        r.macro_recall += c.recall;
        r.macro_f1 += c.f1;
    }
    r.macro_precision /= k;
    r.macro_recall /= k;
    r.macro_f1 /= k;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
    return r;
}

inline std::vector<float> random_values(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    Rng rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

inline Grid random_grid(std::size_t h, std::size_t w, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    Grid g(h, w);
    g.values = random_values(h * w, seed, lo, hi);
    return g;
}

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_abs = 0.0;
    std::string first_failure;
};

// Central differences in double around float inputs, compared with backward().
// `f` must rebuild the graph from the given leaves and return a scalar.
inline GradCheckResult finite_difference_check(const std::function<ad::Tensor(const std::vector<ad::Tensor>&)>& f,
                                               std::vector<ad::Tensor> leaves, float h = 1e-3f, double rel = 1e-2,
                                               double abs_tol = 1e-4) {
    GradCheckResult res;
    for (auto& t : leaves) {
        t.zero_grad();
    }
    ad::backward(f(leaves));
    std::vector<std::vector<float>> analytic;
    for (const auto& t : leaves) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
    }
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t e = 0; e < leaves[li].numel(); ++e) {
            auto data = leaves[li].mutable_data();
            const float orig = data[e];
            double fp = 0.0;
            double fm = 0.0;
            {
                ad::NoGradGuard guard;
                data[e] = orig + h;
                fp = f(leaves).item();
                data[e] = orig - h;
                fm = f(leaves).item();
                data[e] = orig;
            }
            const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
            const double a = analytic[li][e];
            const double diff = std::abs(a - numeric);
            ++res.checked;
            res.worst_abs = std::max(res.worst_abs, diff);
            if (diff > abs_tol && diff > rel * std::max(std::abs(a), std::abs(numeric))) {
                if (res.failed++ == 0) {
                    res.first_failure = "leaf " + std::to_string(li) + " elem " + std::to_string(e) +
                                        ": analytic " + std::to_string(a) + " numeric " + std::to_string(numeric);
                }
            }
        }
    }
    return res;
}

// F_k(x) = sum_j W[j,k] x_j + b_k, built from autodiff ops so gradients flow.
class LinearModel final : public attribution::Explainable {
   public:
    LinearModel(std::size_t h, std::size_t w, std::vector<float> weights, std::size_t classes = 1,
                std::vector<float> bias = {})
        : h_(h), w_(w) {
        weight_ = ad::Tensor::from_data({h * w, classes}, std::move(weights));
        if (bias.empty()) {
            bias.assign(classes, 0.0f);
        }
        bias_ = ad::Tensor::from_data({classes}, std::move(bias));
    }
    [[nodiscard]] std::size_t height() const override { return h_; }
    [[nodiscard]] std::size_t width() const override { return w_; }
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t) const override {
        const std::size_t n = images.dim(0);
        return {ad::dense(ad::reshape(images, {n, h_ * w_}), weight_, bias_), {}};
    }

   private:
    std::size_t h_;
    std::size_t w_;
    ad::Tensor weight_;
    ad::Tensor bias_;
};

// F(x) = sum_j c_j x_j^2 (single class).
class QuadraticModel final : public attribution::Explainable {
   public:
    QuadraticModel(std::size_t h, std::size_t w, std::vector<float> coeffs) : h_(h), w_(w) {
        coeff_ = ad::Tensor::from_data({h * w, 1}, std::move(coeffs));
        zero_ = ad::Tensor::zeros({1});
    }
    [[nodiscard]] std::size_t height() const override { return h_; }
    [[nodiscard]] std::size_t width() const override { return w_; }
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t) const override {
        const std::size_t n = images.dim(0);
        const ad::Tensor flat = ad::reshape(images, {n, h_ * w_});
        return {ad::dense(ad::mul(flat, flat), coeff_, zero_), {}};
    }

   private:
    std::size_t h_;
    std::size_t w_;
    ad::Tensor coeff_;
    ad::Tensor zero_;
};

// F(x) = sum_k v_k (u_k . x)^3: smooth and nonlinear, so the midpoint rule converges at 1/s^2.
class CubicModel final : public attribution::Explainable {
   public:
    CubicModel(std::size_t h, std::size_t w, std::size_t terms, std::uint64_t seed) : h_(h), w_(w) {
        u_ = ad::Tensor::from_data({h * w, terms}, random_values(h * w * terms, seed, -0.5f, 0.5f));
        v_ = ad::Tensor::from_data({terms, 1}, random_values(terms, seed + 1));
        zero_terms_ = ad::Tensor::zeros({terms});
        zero_ = ad::Tensor::zeros({1});
    }
    [[nodiscard]] std::size_t height() const override { return h_; }
    [[nodiscard]] std::size_t width() const override { return w_; }
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t) const override {
        const std::size_t n = images.dim(0);
        const ad::Tensor z = ad::dense(ad::reshape(images, {n, h_ * w_}), u_, zero_terms_);
        return {ad::dense(ad::mul(ad::mul(z, z), z), v_, zero_), {}};
    }

   private:
    std::size_t h_;
    std::size_t w_;
    ad::Tensor u_;
    ad::Tensor v_;
    ad::Tensor zero_terms_;
    ad::Tensor zero_;
};

// Ignores its input.
class ConstantModel final : public attribution::Explainable {
   public:
    ConstantModel(std::size_t h, std::size_t w, float value) : h_(h), w_(w), value_(value) {}
    [[nodiscard]] std::size_t height() const override { return h_; }
    [[nodiscard]] std::size_t width() const override { return w_; }
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t) const override {
        const std::size_t n = images.dim(0);
        // keep x in the graph with zero weight so gradients exist and are zero
        const ad::Tensor w = ad::Tensor::zeros({h_ * w_, 1});
        const ad::Tensor b = ad::Tensor::full({1}, value_);
        return {ad::dense(ad::reshape(images, {n, h_ * w_}), w, b), {}};
    }

   private:
    std::size_t h_;
    std::size_t w_;
    float value_;
};

// a*F1 + b*F2 evaluated on one shared graph.
class CombinedModel final : public attribution::Explainable {
   public:
    CombinedModel(const attribution::Explainable& f1, const attribution::Explainable& f2, float a, float b)
        : f1_(f1), f2_(f2), a_(a), b_(b) {}
    [[nodiscard]] std::size_t height() const override { return f1_.height(); }
    [[nodiscard]] std::size_t width() const override { return f1_.width(); }
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t seed) const override {
        return {ad::add(ad::scale(f1_.trace(images, seed).logits, a_), ad::scale(f2_.trace(images, seed).logits, b_)),
                {}};
    }

   private:
    const attribution::Explainable& f1_;
    const attribution::Explainable& f2_;
    float a_;
    float b_;
};

struct PrimitiveCheck {
    std::string name;
    std::size_t shapes = 0;
    GradCheckResult result;
};

// Gradient checks for every differentiable primitive over `n_shapes` random
// shapes (<= 64 elements per operand). Non-scalar outputs are reduced with a
// fixed random projection so every output element carries a distinct weight.
inline std::vector<PrimitiveCheck> primitive_gradient_checks(int n_shapes, std::uint64_t seed) {
    Rng rng(seed);
    auto dim = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    auto leaf = [&](ad::Shape shape, float lo = -1.0f, float hi = 1.0f) {
        const std::size_t n = ad::element_count(shape);
        return ad::Tensor::from_data(std::move(shape), random_values(n, rng(), lo, hi), true);
    };
    // keep relu inputs away from the kink so central differences stay one-sided-free
    auto away_from_zero = [&](ad::Shape shape) {
        ad::Tensor t = leaf(std::move(shape));
        for (float& v : t.mutable_data()) {
            if (std::abs(v) < 0.05f) {
                v = v < 0.0f ? v - 0.05f : v + 0.05f;
            }
        }
        return t;
    };
    auto project = [&](const ad::Tensor& out, std::uint64_t s) {
        const ad::Tensor r = ad::Tensor::from_data(out.shape(), random_values(out.numel(), s));
        return ad::sum(ad::mul(out, r));
    };
    using Leaves = std::vector<ad::Tensor>;
    using Fn = std::function<ad::Tensor(const Leaves&)>;

    std::vector<PrimitiveCheck> checks;
    auto run = [&](const std::string& name, const std::function<std::pair<Fn, Leaves>()>& make) {
        PrimitiveCheck pc{name, 0, {}};
        for (int i = 0; i < n_shapes; ++i) {
            auto [fn, leaves] = make();
            const GradCheckResult r = finite_difference_check(fn, leaves, 1e-2f);
            pc.shapes += 1;
            pc.result.checked += r.checked;
            pc.result.worst_abs = std::max(pc.result.worst_abs, r.worst_abs);
            if (r.failed > 0 && pc.result.failed == 0) {
                pc.result.first_failure = r.first_failure;
            }
            pc.result.failed += r.failed;
        }
        checks.push_back(pc);
    };
    auto random_shape = [&](std::size_t max_elems) {
        ad::Shape s;
        const std::size_t rank = dim(1, 4);
        std::size_t total = 1;
        for (std::size_t r = 0; r < rank; ++r) {
            const std::size_t d = dim(1, std::max<std::size_t>(1, std::min<std::size_t>(5, max_elems / total)));
            s.push_back(d);
            total *= d;
        }
        return s;
    };

    run("add", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::add(l[0], l[1]), p); },
                                     {leaf(s), leaf(s)}};
    });
    run("sub", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::sub(l[0], l[1]), p); },
                                     {leaf(s), leaf(s)}};
    });
    run("mul", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::mul(l[0], l[1]), p); },
                                     {leaf(s), leaf(s)}};
    });
    run("scale", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        const float f = std::uniform_real_distribution<float>(-3.0f, 3.0f)(rng);
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::scale(l[0], f), p); }, {leaf(s)}};
    });
    run("sum", [&] {
        const ad::Shape s = random_shape(64);
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return ad::scale(ad::sum(l[0]), 0.7f); }, {leaf(s)}};
    });
    run("mean", [&] {
        const ad::Shape s = random_shape(64);
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return ad::mean(l[0]); }, {leaf(s)}};
    });
    run("reshape", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{
            [=](const Leaves& l) { return project(ad::reshape(l[0], {1, ad::element_count(s)}), p); }, {leaf(s)}};
    });
    run("relu", [&] {
        const ad::Shape s = random_shape(64);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::relu(l[0]), p); },
                                     {away_from_zero(s)}};
    });
    run("conv2d", [&] {
        const std::size_t n = dim(1, 2);
        const std::size_t c = dim(1, 2);
        const std::size_t f = dim(1, 2);
        const std::size_t h = dim(3, 5);
        const std::size_t w = dim(3, 5);
        const std::size_t k = dim(0, 1) ? 3 : 1;
        const bool same = dim(0, 1) == 1;
        const std::uint64_t p = rng();
        const ad::Padding pad = same ? ad::Padding::kSame : ad::Padding::kValid;
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::conv2d(l[0], l[1], l[2], pad), p); },
                                     {leaf({n, c, h, w}), leaf({f, c, k, k}), leaf({f})}};
    });
    run("dense", [&] {
        const std::size_t n = dim(1, 4);
        const std::size_t d = dim(1, 6);
        const std::size_t k = dim(1, 6);
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::dense(l[0], l[1], l[2]), p); },
                                     {leaf({n, d}), leaf({d, k}), leaf({k})}};
    });
    run("global_avg_pool", [&] {
        const ad::Shape s{dim(1, 2), dim(1, 3), dim(1, 3), dim(1, 3)};
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::global_avg_pool(l[0]), p); },
                                     {leaf(s)}};
    });
    run("softmax_cross_entropy", [&] {
        const std::size_t n = dim(1, 6);
        const std::size_t k = dim(2, 8);
        std::vector<int> labels(n);
        for (auto& y : labels) {
            y = static_cast<int>(dim(0, k - 1));
        }
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return ad::softmax_cross_entropy(l[0], labels); },
                                     {leaf({n, k}, -3.0f, 3.0f)}};
    });
    run("gather_columns", [&] {
        const std::size_t n = dim(1, 6);
        const std::size_t k = dim(1, 8);
        std::vector<std::size_t> cols(n);
        for (auto& y : cols) {
            y = dim(0, k - 1);
        }
        const std::uint64_t p = rng();
        return std::pair<Fn, Leaves>{[=](const Leaves& l) { return project(ad::gather_columns(l[0], cols), p); },
                                     {leaf({n, k})}};
    });
    return checks;
}

}  // namespace ure::testing
