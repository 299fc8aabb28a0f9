#include "ure/attribution.hpp"

#include "ure/binary_io.hpp"
#include "ure/error.hpp"
#include "ure/rng.hpp"
#include "ure/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace ure::attribution {

namespace {

constexpr std::size_t kChunk = 16;

void check_image(const Explainable& model, const Grid& g, const char* what) {
    if (g.rows != model.height() || g.cols != model.width() || g.values.size() != g.rows * g.cols) {
        fail(ErrorCode::kShapeMismatch, std::string(what) + ": image is " + std::to_string(g.rows) + "x" +
                                            std::to_string(g.cols) + ", model expects " +
                                            std::to_string(model.height()) + "x" + std::to_string(model.width()));
    }
}

void check_target(const ad::Tensor& logits, int target) {
    require(target >= 0 && static_cast<std::size_t>(target) < logits.dim(1), ErrorCode::kInvalidArgument,
            "target class " + std::to_string(target) + " outside [0, " + std::to_string(logits.dim(1)) + ")");
}

// Sum over rows of d logits[row, target] / d input, for a batch of inputs.
std::vector<double> summed_input_gradient(const Explainable& model, const std::vector<Grid>& inputs, int target,
                                          std::uint64_t seed) {
    const std::size_t pixels = model.height() * model.width();
    std::vector<double> total(pixels, 0.0);
    for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
        const std::size_t end = std::min(inputs.size(), start + kChunk);
        const ad::Tensor x = model::stack_grids(std::span(inputs).subspan(start, end - start), true);
        const ad::Tensor logits = model.trace(x, seed).logits;
        check_target(logits, target);
        const std::vector<std::size_t> columns(end - start, static_cast<std::size_t>(target));
        const ad::Tensor f = ad::sum(ad::gather_columns(logits, columns));
        const std::vector<ad::Tensor> wrt{x};
        const auto grads = ad::gradients(f, wrt);
        const auto& g = grads[0];
        for (std::size_t r = 0; r < end - start; ++r) {
            for (std::size_t j = 0; j < pixels; ++j) {
                total[j] += g[r * pixels + j];
            }
        }
    }
    return total;
}

Grid lerp(const Grid& from, const Grid& to, double alpha) {
    Grid out(from.rows, from.cols);
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        out.values[j] =
            static_cast<float>(from.values[j] + alpha * (static_cast<double>(to.values[j]) - from.values[j]));
    }
    return out;
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::kIntegratedGradients: return "ig";
        case Method::kNoiseTunnel: return "ig-nt";
        case Method::kGradientShap: return "gradshap";
        case Method::kGradCam: return "gradcam";
        case Method::kOcclusion: return "occlusion";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    for (Method m : {Method::kIntegratedGradients, Method::kNoiseTunnel, Method::kGradientShap, Method::kGradCam,
                     Method::kOcclusion}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    fail(ErrorCode::kInvalidArgument,
         "unknown attribution method '" + name + "' (expected ig, ig-nt, gradshap, gradcam or occlusion)");
}

void validate(const AttributionMap& map) {
    require(map.values.values.size() == map.values.rows * map.values.cols, ErrorCode::kShapeMismatch,
            "attribution map storage does not match its shape");
    for (float v : map.values.values) {
        require(std::isfinite(v), ErrorCode::kNonFinite, "attribution map holds a non-finite value");
    }
}

std::size_t NetExplainable::height() const { return static_cast<std::size_t>(net_.config().image_h); }
std::size_t NetExplainable::width() const { return static_cast<std::size_t>(net_.config().image_w); }

model::ForwardTrace NetExplainable::trace(const ad::Tensor& images, std::uint64_t seed) const {
    const std::vector<std::uint64_t> seeds(images.dim(0), seed);
    return net_.single_pass(images, seeds, true);
}

std::vector<double> target_scores(const Explainable& model, const std::vector<Grid>& images, int target,
                                  std::uint64_t seed) {
    ad::NoGradGuard no_grad;
    std::vector<double> out;
    out.reserve(images.size());
    constexpr std::size_t kEvalChunk = 32;
    for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
        const std::size_t end = std::min(images.size(), start + kEvalChunk);
        const ad::Tensor logits =
            model.trace(model::stack_grids(std::span(images).subspan(start, end - start)), seed).logits;
        check_target(logits, target);
        const std::size_t k = logits.dim(1);
        for (std::size_t r = 0; r < end - start; ++r) {
            out.push_back(logits.data()[r * k + static_cast<std::size_t>(target)]);
        }
    }
    return out;
}

AttributionMap integrated_gradients(const Explainable& model, const Grid& x, const Grid& baseline, int target,
                                    int steps, std::uint64_t seed) {
    require(steps >= 1, ErrorCode::kInvalidArgument, "integrated_gradients: steps must be >= 1");
    check_image(model, x, "integrated_gradients");
    check_image(model, baseline, "integrated_gradients baseline");

    // Midpoint rule: alpha_k = (k - 1/2) / steps.
    std::vector<Grid> path;
    path.reserve(static_cast<std::size_t>(steps));
    for (int k = 1; k <= steps; ++k) {
        path.push_back(lerp(baseline, x, (k - 0.5) / steps));
    }
    const std::vector<double> g = summed_input_gradient(model, path, target, seed);

    AttributionMap out{Grid(x.rows, x.cols), Method::kIntegratedGradients, target, "zero image"};
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double delta = static_cast<double>(x.values[j]) - baseline.values[j];
        out.values.values[j] = static_cast<float>(delta * g[j] / steps);
    }
    validate(out);
    return out;
}

double completeness_gap(const AttributionMap& attr, const Explainable& model, const Grid& x, const Grid& baseline,
                        int target, std::uint64_t seed) {
    check_image(model, x, "completeness_gap");
    check_image(model, baseline, "completeness_gap baseline");
    require(attr.values.rows == x.rows && attr.values.cols == x.cols, ErrorCode::kShapeMismatch,
            "completeness_gap: map and image shapes differ");
    double total = 0.0;
    for (float v : attr.values.values) {
        total += v;
    }
    const auto f = target_scores(model, {x, baseline}, target, seed);
    return std::abs(total - (f[0] - f[1]));
}

Grid perturb_input(const Grid& x, float nt_sigma, std::uint64_t seed, std::size_t index) {
    require(nt_sigma >= 0.0f, ErrorCode::kInvalidArgument, "noise tunnel: nt_sigma must be >= 0");
    Grid out = x;
    if (nt_sigma == 0.0f) {
        return out;
    }
    std::vector<float> eps(x.values.size());
    fill_gaussian(derive_seed(seed, {0x7e11, index}), nt_sigma, eps);
    for (std::size_t j = 0; j < eps.size(); ++j) {
        out.values[j] = std::clamp(x.values[j] + eps[j], 0.0f, 1.0f);
    }
    return out;
}

AttributionMap noise_tunnel(const BaseMethod& base, const Grid& x, int n_samples, float nt_sigma,
                            std::uint64_t seed) {
    require(n_samples >= 1, ErrorCode::kInvalidArgument, "noise_tunnel: n_samples must be >= 1");
    require(nt_sigma >= 0.0f, ErrorCode::kInvalidArgument, "noise_tunnel: nt_sigma must be >= 0");
    std::vector<double> total(x.values.size(), 0.0);
    AttributionMap first;
    for (int i = 0; i < n_samples; ++i) {
        AttributionMap m = base(perturb_input(x, nt_sigma, seed, static_cast<std::size_t>(i)));
        require(m.values.rows == x.rows && m.values.cols == x.cols, ErrorCode::kShapeMismatch,
                "noise_tunnel: base method returned a map of the wrong shape");
        for (std::size_t j = 0; j < total.size(); ++j) {
            total[j] += m.values.values[j];
        }
        if (i == 0) {
            first = std::move(m);
        }
    }
    AttributionMap out{Grid(x.rows, x.cols), Method::kNoiseTunnel, first.target_class, first.baseline_ref};
    for (std::size_t j = 0; j < total.size(); ++j) {
        out.values.values[j] = static_cast<float>(total[j] / n_samples);
    }
    validate(out);
    return out;
}

AttributionMap gradient_shap(const Explainable& model, const Grid& x, const std::vector<Grid>& baselines, int target,
                             int n_samples, std::uint64_t seed, std::uint64_t model_seed) {
    require(!baselines.empty(), ErrorCode::kInvalidArgument, "gradient_shap: baseline set is empty");
    require(n_samples >= 1, ErrorCode::kInvalidArgument, "gradient_shap: n_samples must be >= 1");
    check_image(model, x, "gradient_shap");
    for (const Grid& b : baselines) {
        check_image(model, b, "gradient_shap baseline");
    }

    Rng rng(derive_seed(seed, {0x5ba9}));
    std::uniform_int_distribution<std::size_t> pick(0, baselines.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> which;
    std::vector<Grid> points;
    for (int i = 0; i < n_samples; ++i) {
        const std::size_t b = pick(rng);
        which.push_back(b);
        points.push_back(lerp(baselines[b], x, unit(rng)));
    }

    // (x - b_i) differs per sample, so gradients are weighted sample by sample.
    const std::size_t pixels = x.values.size();
    std::vector<double> total(pixels, 0.0);
    for (std::size_t start = 0; start < points.size(); start += kChunk) {
        const std::size_t end = std::min(points.size(), start + kChunk);
        const ad::Tensor in = model::stack_grids(std::span(points).subspan(start, end - start), true);
        const ad::Tensor logits = model.trace(in, model_seed).logits;
        check_target(logits, target);
        const std::vector<std::size_t> columns(end - start, static_cast<std::size_t>(target));
        const std::vector<ad::Tensor> wrt{in};
        const auto g = ad::gradients(ad::sum(ad::gather_columns(logits, columns)), wrt)[0];
        for (std::size_t r = start; r < end; ++r) {
            const Grid& b = baselines[which[r]];
            for (std::size_t j = 0; j < pixels; ++j) {
                total[j] += (static_cast<double>(x.values[j]) - b.values[j]) * g[(r - start) * pixels + j];
            }
        }
    }
    AttributionMap out{Grid(x.rows, x.cols), Method::kGradientShap, target,
                       std::to_string(baselines.size()) + " baseline(s)"};
    for (std::size_t j = 0; j < pixels; ++j) {
        out.values.values[j] = static_cast<float>(total[j] / n_samples);
    }
    validate(out);
    return out;
}

AttributionMap grad_cam(const Explainable& model, const Grid& x, int target, int layer, std::uint64_t seed) {
    check_image(model, x, "grad_cam");
    // input marked as requiring grad so the activation is recorded even for parameter-free models
    const ad::Tensor in = model::stack_grids(std::span(&x, 1), true);
    const model::ForwardTrace trace = model.trace(in, seed);
    check_target(trace.logits, target);
    const auto n_layers = static_cast<int>(trace.activations.size());
    if (layer < 0 || layer >= n_layers) {
        fail(ErrorCode::kInvalidArgument,
             "grad_cam: layer " + std::to_string(layer) + " outside [0, " + std::to_string(n_layers) + ")");
    }
    const ad::Tensor& act = trace.activations[static_cast<std::size_t>(layer)];
    require(act.rank() == 4 && act.dim(0) == 1, ErrorCode::kShapeMismatch,
            "grad_cam: activation must be [1,C,h,w], got " + ad::to_string(act.shape()));

    const std::vector<std::size_t> column{static_cast<std::size_t>(target)};
    const std::vector<ad::Tensor> wrt{act};
    const auto g = ad::gradients(ad::gather_columns(trace.logits, column), wrt)[0];
    const std::size_t c = act.dim(1);
    const std::size_t h = act.dim(2);
    const std::size_t w = act.dim(3);
    const std::size_t plane = h * w;
    const auto a = act.data();

    Grid cam(h, w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double weight = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            weight += g[ch * plane + p];
        }
        weight /= static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            cam.values[p] += static_cast<float>(weight * a[ch * plane + p]);
        }
    }
    for (float& v : cam.values) {
        v = std::max(v, 0.0f);
    }
    AttributionMap out{spectral::resize_bilinear(cam, x.rows, x.cols), Method::kGradCam, target,
                       "layer " + std::to_string(layer)};
    validate(out);
    return out;
}

AttributionMap occlusion(const Explainable& model, const Grid& x, float baseline_value, int target,
                         const OcclusionWindow& window, std::uint64_t seed) {
    check_image(model, x, "occlusion");
    require(window.stride >= 1, ErrorCode::kInvalidArgument, "occlusion: stride must be >= 1");
    if (window.height < 1 || window.width < 1 || window.height > x.rows || window.width > x.cols) {
        fail(ErrorCode::kInvalidArgument, "occlusion: window " + std::to_string(window.height) + "x" +
                                              std::to_string(window.width) + " does not fit a " +
                                              std::to_string(x.rows) + "x" + std::to_string(x.cols) + " image");
    }
    struct Position {
        std::size_t r;
        std::size_t c;
    };
    std::vector<Position> positions;
    for (std::size_t r = 0; r + window.height <= x.rows; r += window.stride) {
        for (std::size_t c = 0; c + window.width <= x.cols; c += window.stride) {
            positions.push_back({r, c});
        }
    }
    std::vector<Grid> occluded;
    occluded.reserve(positions.size() + 1);
    occluded.push_back(x);
    for (const Position& p : positions) {
        Grid g = x;
        for (std::size_t r = p.r; r < p.r + window.height; ++r) {
            for (std::size_t c = p.c; c < p.c + window.width; ++c) {
                g.at(r, c) = baseline_value;
            }
        }
        occluded.push_back(std::move(g));
    }
    const std::vector<double> f = target_scores(model, occluded, target, seed);

    std::vector<double> total(x.values.size(), 0.0);
    std::vector<std::size_t> count(x.values.size(), 0);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double drop = f[0] - f[i + 1];
        for (std::size_t r = positions[i].r; r < positions[i].r + window.height; ++r) {
            for (std::size_t c = positions[i].c; c < positions[i].c + window.width; ++c) {
                total[r * x.cols + c] += drop;
                ++count[r * x.cols + c];
            }
        }
    }
    AttributionMap out{Grid(x.rows, x.cols), Method::kOcclusion, target,
                       "constant " + std::to_string(baseline_value)};
    for (std::size_t j = 0; j < total.size(); ++j) {
        out.values.values[j] = count[j] ? static_cast<float>(total[j] / static_cast<double>(count[j])) : 0.0f;
    }
    validate(out);
    return out;
}

double band_score(const Grid& values) {
    require(values.rows >= 1 && values.cols >= 2, ErrorCode::kInvalidArgument,
            "band_score: map needs at least 1 row and 2 columns");
    const auto n = static_cast<double>(values.values.size());
    double mean = 0.0;
    for (float v : values.values) {
        mean += std::abs(v);
    }
    mean /= n;
    double total_var = 0.0;
    for (float v : values.values) {
        const double d = std::abs(v) - mean;
        total_var += d * d;
    }
    total_var /= n;
    if (total_var < 1e-12) {
        return 0.0;
    }
    double row_var = 0.0;
    for (std::size_t r = 0; r < values.rows; ++r) {
        double m = 0.0;
        for (std::size_t c = 0; c < values.cols; ++c) {
            m += std::abs(values.at(r, c));
        }
        m /= static_cast<double>(values.cols);
        double v = 0.0;
        for (std::size_t c = 0; c < values.cols; ++c) {
            const double d = std::abs(values.at(r, c)) - m;
            v += d * d;
        }
        row_var += v / static_cast<double>(values.cols);
    }
    row_var /= static_cast<double>(values.rows);
    return std::clamp(1.0 - row_var / total_var, 0.0, 1.0);
}

AttributionMap explain(const Explainable& model, Method method, const Grid& x, int target,
                       const ExplainOptions& options) {
    const Grid zero(x.rows, x.cols, 0.0f);
    const std::uint64_t model_seed = derive_seed(options.seed, {0x30de});
    switch (method) {
        case Method::kIntegratedGradients:
            return integrated_gradients(model, x, zero, target, options.ig_steps, model_seed);
        case Method::kNoiseTunnel: {
            auto base = [&](const Grid& input) {
                return integrated_gradients(model, input, zero, target, options.ig_steps, model_seed);
            };
            return noise_tunnel(base, x, options.nt_samples, options.nt_sigma, options.seed);
        }
        case Method::kGradientShap: {
            std::vector<Grid> baselines{zero};
            for (int i = 1; i < options.shap_baselines; ++i) {
                Grid b(x.rows, x.cols);
                fill_gaussian(derive_seed(options.seed, {0xba5e, static_cast<std::uint64_t>(i)}), 0.1f, b.values);
                baselines.push_back(std::move(b));
            }
            return gradient_shap(model, x, baselines, target, options.shap_samples, options.seed, model_seed);
        }
        case Method::kGradCam: {
            const int n_layers = static_cast<int>(
                model.trace(model::stack_grids(std::span(&x, 1)), model_seed).activations.size());
            const int layer = options.gradcam_layer < 0 ? n_layers + options.gradcam_layer : options.gradcam_layer;
            return grad_cam(model, x, target, layer, model_seed);
        }
        case Method::kOcclusion:
            return occlusion(model, x, options.occlusion_value, target, options.occlusion, model_seed);
    }
    fail(ErrorCode::kInternal, "explain: unhandled method");
}

void save_map(const std::filesystem::path& path, const AttributionMap& map) {
    validate(map);
    spectral::save_grid(path, map.values);
    nlohmann::json meta{{"method", to_string(map.method)},
                        {"target_class", map.target_class},
                        {"baseline", map.baseline_ref},
                        {"rows", map.values.rows},
                        {"cols", map.values.cols}};
    io::write_text(path.string() + ".json", meta.dump(2) + "\n");
}

AttributionMap load_map(const std::filesystem::path& path) {
    AttributionMap map;
    map.values = spectral::load_grid(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_text(path.string() + ".json"));
        map.method = method_from_string(meta.at("method").get<std::string>());
        map.target_class = meta.at("target_class").get<int>();
        map.baseline_ref = meta.at("baseline").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kIo, "attribution sidecar " + path.string() + ".json: " + e.what());
    }
    validate(map);
    return map;
}

}  // namespace ure::attribution
