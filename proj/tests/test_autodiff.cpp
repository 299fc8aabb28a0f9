#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "ure/autodiff.hpp"
#include "ure/error.hpp"
#include "ure/kernels.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

using namespace ure;
using namespace ure::ad;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }
std::vector<float> grad_of(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("conv2d identity kernel") {
    const Tensor x = Tensor::from_data({1, 1, 3, 4}, testing::random_values(12, 1));
    const Tensor k = Tensor::full({1, 1, 1, 1}, 1.0f);
    const Tensor b = Tensor::zeros({1});
    CHECK(values(conv2d(x, k, b, Padding::kSame)) == values(x));
    CHECK(values(conv2d(x, k, b, Padding::kValid)) == values(x));
}

TEST_CASE("conv2d zero kernel yields the bias") {
    const Tensor x = Tensor::from_data({2, 3, 4, 4}, testing::random_values(96, 2));
    const Tensor k = Tensor::zeros({2, 3, 3, 3});
    const Tensor b = Tensor::from_data({2}, {1.5f, -2.0f});
    const Tensor y = conv2d(x, k, b, Padding::kSame);
    REQUIRE(y.shape() == Shape{2, 2, 4, 4});
    for (std::size_t i = 0; i < y.numel(); ++i) {
        CHECK(y.data()[i] == ((i / 16) % 2 == 0 ? 1.5f : -2.0f));
    }
}

TEST_CASE("conv2d box filter on a constant image") {
    const Tensor x = Tensor::full({1, 1, 6, 5}, 5.0f);
    const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
    const Tensor y = conv2d(x, k, Tensor::zeros({1}), Padding::kValid);
    REQUIRE(y.shape() == Shape{1, 1, 4, 3});
    for (float v : y.data()) {
        CHECK(v == doctest::Approx(5.0).epsilon(1e-6));
    }
}

TEST_CASE("conv2d shape errors name both shapes") {
    const Tensor x = Tensor::zeros({1, 2, 4, 4});
    const Tensor k = Tensor::zeros({1, 3, 3, 3});
    try {
        conv2d(x, k, Tensor::zeros({1}), Padding::kSame);
        FAIL("mismatch accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kShapeMismatch);
        const std::string msg = e.what();
        CHECK(msg.find("[1,2,4,4]") != std::string::npos);
        CHECK(msg.find("[1,3,3,3]") != std::string::npos);
    }
    CHECK(code_of([] { conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1}),
                              Padding::kSame); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("dense examples") {
    const Tensor x = Tensor::from_data({1, 2}, {1.0f, 1.0f});
    const Tensor w = Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    CHECK(values(dense(x, w, Tensor::zeros({2}))) == std::vector<float>{4.0f, 6.0f});

    const Tensor xi = Tensor::from_data({3, 2}, testing::random_values(6, 3));
    const Tensor eye = Tensor::from_data({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    CHECK(values(dense(xi, eye, Tensor::zeros({2}))) == values(xi));
    const Tensor y = dense(xi, Tensor::zeros({2, 2}), Tensor::from_data({2}, {1.0f, 2.0f}));
    CHECK(values(y) == std::vector<float>{1, 2, 1, 2, 1, 2});
    CHECK(code_of([&] { dense(xi, Tensor::zeros({3, 2}), Tensor::zeros({2})); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("relu and global average pooling") {
    CHECK(values(relu(Tensor::from_data({3}, {-1.0f, 0.0f, 2.0f}))) == std::vector<float>{0.0f, 0.0f, 2.0f});
    CHECK(values(global_avg_pool(Tensor::full({1, 1, 3, 3}, 4.25f))) == std::vector<float>{4.25f});
    CHECK(values(global_avg_pool(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}))) == std::vector<float>{2.5f});

    const Tensor z = Tensor::from_data({3}, {-1.0f, 0.0f, 2.0f}, true);
    backward(sum(relu(z)));
    CHECK(grad_of(z) == std::vector<float>{0.0f, 0.0f, 1.0f});
}

TEST_CASE("softmax cross entropy examples") {
    for (std::size_t k : {2u, 6u, 10u}) {
        const Tensor logits = Tensor::full({3, k}, 0.7f);
        const std::vector<int> labels{0, 1, 1};
        CHECK(softmax_cross_entropy(logits, labels).item() == doctest::Approx(std::log(double(k))).epsilon(1e-6));
    }
    const std::vector<int> zero{0};
    CHECK(softmax_cross_entropy(Tensor::from_data({1, 2}, {1.0f, 0.0f}), zero).item() ==
          doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-6));
    CHECK(softmax_cross_entropy(Tensor::from_data({1, 3}, {50.0f, 0.0f, 0.0f}), zero).item() < 1e-10);
    // max subtraction keeps huge logits finite
    CHECK(softmax_cross_entropy(Tensor::from_data({1, 2}, {1000.0f, 0.0f}), zero).item() == 0.0f);
    const std::vector<int> bad{2};
    CHECK(code_of([&] { softmax_cross_entropy(Tensor::zeros({1, 2}), bad); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("backward examples") {
    const Tensor x = Tensor::from_data({1}, {3.0f}, true);
    backward(sum(mul(x, x)));
    CHECK(grad_of(x) == std::vector<float>{6.0f});

    const Tensor a = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    const Tensor p = Tensor::from_data({2}, {5.0f, 5.0f}, true);
    const Tensor loss = sum(mul(a, a));
    backward(loss);
    CHECK(grad_of(a) == std::vector<float>{2.0f, 4.0f});
    // p took no part in the graph
    CHECK((!p.has_grad() || grad_of(p) == std::vector<float>{0.0f, 0.0f}));

    CHECK(code_of([&] { backward(mul(a, a)); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("shared subexpressions accumulate once per path") {
    const Tensor x = Tensor::from_data({2}, {1.5f, -2.0f}, true);
    const Tensor y = mul(x, x);
    const Tensor loss = sum(add(y, y));  // 2 x^2
    backward(loss);
    CHECK(grad_of(x) == std::vector<float>{6.0f, -8.0f});
}

TEST_CASE("gradients() leaves stored gradients alone") {
    const Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    const Tensor y = scale(x, 3.0f);
    const Tensor out = sum(mul(y, y));
    const std::vector<Tensor> wrt{x, y};
    const auto g = gradients(out, wrt);
    CHECK(g[0] == std::vector<float>{18.0f, 36.0f});
    CHECK(g[1] == std::vector<float>{6.0f, 12.0f});
    CHECK((!x.has_grad() || grad_of(x) == std::vector<float>{0.0f, 0.0f}));
}

TEST_CASE("non-finite forward values trip a checked error") {
    const float big = std::numeric_limits<float>::max();
    const Tensor x = Tensor::from_data({1}, {big});
    CHECK(code_of([&] { mul(x, x); }) == ErrorCode::kNonFinite);
    CHECK(code_of([] { Tensor::from_data({1}, {std::numeric_limits<float>::quiet_NaN()}); }) ==
          ErrorCode::kNonFinite);
    CHECK(code_of([] { Tensor::from_data({2, 2}, {1.0f}); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("no-grad guard stops recording") {
    const Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    Tensor y;
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        y = mul(x, x);
    }
    CHECK(grad_enabled());
    CHECK_FALSE(y.requires_grad());
    CHECK(mul(x, x).requires_grad());
}

TEST_CASE("every primitive passes finite-difference checks on 20 random shapes") {
    for (const auto& c : testing::primitive_gradient_checks(20, 1234)) {
        CAPTURE(c.name);
        CAPTURE(c.result.first_failure);
        CHECK(c.shapes >= 20);
        CHECK(c.result.checked > 0);
        CHECK(c.result.failed == 0);
    }
}

TEST_CASE("gradient checks agree on both kernel backends") {
    for (simd::Backend b : simd::available_backends()) {
        simd::ScopedBackend scoped(b);
        for (const auto& c : testing::primitive_gradient_checks(5, 99)) {
            CAPTURE(c.name);
            CHECK(c.result.failed == 0);
        }
    }
}

TEST_CASE("two-block residual net gradients match central differences") {
    // stem conv -> relu -> 2 x (x + conv(relu(conv x))) -> pool -> dense -> CE
    const std::size_t c = 3;
    std::uint64_t s = 500;
    auto leaf = [&](Shape shape, float scale_by) {
        auto v = testing::random_values(element_count(shape), ++s);
        for (auto& x : v) {
            x *= scale_by;
        }
        return Tensor::from_data(std::move(shape), std::move(v), true);
    };
    std::vector<Tensor> leaves{
        leaf({2, 1, 5, 5}, 1.0f),                                          // input
        leaf({c, 1, 3, 3}, 0.6f),   leaf({c}, 0.1f),                       // stem
        leaf({c, c, 3, 3}, 0.4f),   leaf({c}, 0.1f), leaf({c, c, 3, 3}, 0.4f), leaf({c}, 0.1f),
        leaf({c, c, 3, 3}, 0.4f),   leaf({c}, 0.1f), leaf({c, c, 3, 3}, 0.4f), leaf({c}, 0.1f),
        leaf({c, 4}, 0.8f),         leaf({4}, 0.1f),
    };
    const std::vector<int> labels{1, 3};
    auto net = [&](const std::vector<Tensor>& l) {
        Tensor h = relu(conv2d(l[0], l[1], l[2], Padding::kSame));
        for (int b = 0; b < 2; ++b) {
            const std::size_t o = 3 + 4 * b;
            const Tensor r = conv2d(relu(conv2d(h, l[o], l[o + 1], Padding::kSame)), l[o + 2], l[o + 3],
                                    Padding::kSame);
            h = add(h, r);
        }
        return softmax_cross_entropy(dense(global_avg_pool(h), l[11], l[12]), labels);
    };
    const auto r = testing::finite_difference_check(net, leaves, 1e-3f);
    CAPTURE(r.first_failure);
    CHECK(r.checked > 300);
    CHECK(r.failed == 0);
}

TEST_CASE("backward is linear in the loss") {
    const Tensor x = Tensor::from_data({2, 3}, testing::random_values(6, 7), true);
    const Tensor w = Tensor::from_data({3, 2}, testing::random_values(6, 8), true);
    const Tensor b = Tensor::from_data({2}, testing::random_values(2, 9), true);
    const std::vector<Tensor> wrt{x, w, b};
    const Tensor y = dense(x, w, b);
    const Tensor l1 = sum(mul(y, y));
    const std::vector<int> labels{0, 1};
    const Tensor l2 = softmax_cross_entropy(y, labels);
    const auto g1 = gradients(l1, wrt);
    const auto g2 = gradients(l2, wrt);
    const auto g = gradients(add(scale(l1, 0.3f), scale(l2, -1.7f)), wrt);
    for (std::size_t t = 0; t < wrt.size(); ++t) {
        for (std::size_t i = 0; i < g[t].size(); ++i) {
            CHECK(g[t][i] == doctest::Approx(0.3 * g1[t][i] - 1.7 * g2[t][i]).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("forward and backward are bit-reproducible") {
    auto run = [] {
        const Tensor x = Tensor::from_data({2, 2, 6, 6}, testing::random_values(144, 3), true);
        const Tensor k = Tensor::from_data({3, 2, 3, 3}, testing::random_values(54, 4), true);
        const Tensor b = Tensor::from_data({3}, testing::random_values(3, 5), true);
        const Tensor y = conv2d(x, k, b, Padding::kSame);
        backward(sum(mul(y, y)));
        return std::make_pair(values(y), grad_of(k));
    };
    CHECK(run() == run());
}

TEST_CASE("first Adam step moves by about lr times the gradient sign") {
    std::vector<Parameter> params;
    params.emplace_back("w", Tensor::from_data({4}, {1.0f, -2.0f, 0.5f, 3.0f}, true));
    const std::vector<float> g{0.3f, -1e-3f, 40.0f, -2.0f};
    backward(sum(mul(params[0].value, Tensor::from_data({4}, g))));
    const std::vector<float> before = values(params[0].value);
    AdamOptions opt;
    opt.lr = 0.01f;
    adam_step(params, opt);
    for (std::size_t i = 0; i < 4; ++i) {
        const double expected = -opt.lr * g[i] / (std::abs(g[i]) + opt.eps);
        CHECK(params[0].value.data()[i] - before[i] == doctest::Approx(expected).epsilon(1e-4));
        CHECK(std::abs(params[0].value.data()[i] - before[i]) == doctest::Approx(0.01).epsilon(1e-3));
    }
    CHECK(params[0].step_count == 1);
    CHECK((!params[0].value.has_grad() || grad_of(params[0].value) == std::vector<float>(4, 0.0f)));
}

TEST_CASE("Adam with zero learning rate or zero gradient leaves parameters") {
    std::vector<Parameter> params;
    params.emplace_back("w", Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}, true));
    const auto before = values(params[0].value);
    backward(sum(mul(params[0].value, params[0].value)));
    AdamOptions opt;
    opt.lr = 0.0f;
    adam_step(params, opt);
    CHECK(values(params[0].value) == before);
    CHECK(params[0].step_count == 1);

    backward(scale(sum(params[0].value), 0.0f));
    opt.lr = 0.1f;
    adam_step(params, opt);
    // first moment from step one decays but is still nonzero; use fresh params for the zero case
    std::vector<Parameter> fresh;
    fresh.emplace_back("z", Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}, true));
    backward(scale(sum(fresh[0].value), 0.0f));
    adam_step(fresh, opt);
    CHECK(values(fresh[0].value) == before);
    CHECK(fresh[0].step_count == 1);
}

TEST_CASE("Adam rejects parameters without gradients") {
    std::vector<Parameter> params;
    params.emplace_back("w", Tensor::from_data({1}, {1.0f}, true));
    CHECK(code_of([&] { adam_step(params, AdamOptions{}); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { Parameter("p", Tensor::from_data({1}, {1.0f}, false)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("checkpoint round trip and validation") {
    std::vector<Parameter> a;
    a.emplace_back("layer.weight", Tensor::from_data({2, 3}, testing::random_values(6, 1), true));
    a.emplace_back("layer.bias", Tensor::from_data({3}, testing::random_values(3, 2), true));
    const auto bytes = encode_checkpoint("digest-1", a);
    CHECK(std::string(reinterpret_cast<const char*>(bytes.data()), 4) == "CKPT");

    std::vector<Parameter> b;
    b.emplace_back("layer.weight", Tensor::zeros({2, 3}, true));
    b.emplace_back("layer.bias", Tensor::zeros({3}, true));
    decode_checkpoint(bytes, "digest-1", b);
    CHECK(values(b[0].value) == values(a[0].value));
    CHECK(values(b[1].value) == values(a[1].value));

    CHECK(code_of([&] { decode_checkpoint(bytes, "digest-2", b); }) == ErrorCode::kInvalidArgument);
    std::vector<Parameter> wrong;
    wrong.emplace_back("layer.weight", Tensor::zeros({3, 2}, true));
    wrong.emplace_back("layer.bias", Tensor::zeros({3}, true));
    CHECK(code_of([&] { decode_checkpoint(bytes, "digest-1", wrong); }) == ErrorCode::kShapeMismatch);
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK(code_of([&] { decode_checkpoint(cut, "digest-1", b); }) == ErrorCode::kTruncated);

    const auto path = std::filesystem::temp_directory_path() / "ure_test.ckpt";
    save_checkpoint(path, "d", a);
    load_checkpoint(path, "d", b);
    CHECK(values(b[0].value) == values(a[0].value));
    std::filesystem::remove(path);
}
