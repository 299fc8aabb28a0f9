#pragma once

// Input attribution: integrated gradients, noise tunnel, GradientSHAP,
// Grad-CAM and occlusion, plus the completeness gap and band score.
//
// Every method evaluates the model through `Explainable::trace` with one
// fixed seed, so a stochastic net is explained with a single frozen noise
// realization shared by every path point, perturbation and window.

#include "ure/autodiff.hpp"
#include "ure/grid.hpp"
#include "ure/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ure::attribution {

enum class Method { kIntegratedGradients, kNoiseTunnel, kGradientShap, kGradCam, kOcclusion };

/// CLI spelling: ig, ig-nt, gradshap, gradcam, occlusion.
std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct AttributionMap {
    Grid values;
    Method method = Method::kIntegratedGradients;
    int target_class = 0;
    std::string baseline_ref;

    bool operator==(const AttributionMap&) const = default;
};

void validate(const AttributionMap& map);

/// Anything that maps [N,1,H,W] images to logits [N,K] (and, for Grad-CAM,
/// exposes internal [N,C,h,w] activations). Rows must not interact.
class Explainable {
   public:
    virtual ~Explainable() = default;
    [[nodiscard]] virtual std::size_t height() const = 0;
    [[nodiscard]] virtual std::size_t width() const = 0;
    /// `seed` fixes any internal randomness identically for every row.
    virtual model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t seed) const = 0;
};

/// Single pass through a ResidualNet; stochastic nets draw their block noise
/// from `seed` (every row gets the same realization).
class NetExplainable final : public Explainable {
   public:
    explicit NetExplainable(const model::ResidualNet& net) : net_(net) {}
    [[nodiscard]] std::size_t height() const override;
    [[nodiscard]] std::size_t width() const override;
    model::ForwardTrace trace(const ad::Tensor& images, std::uint64_t seed) const override;

   private:
    const model::ResidualNet& net_;
};

/// F_target for each image, no graph recorded.
std::vector<double> target_scores(const Explainable& model, const std::vector<Grid>& images, int target,
                                  std::uint64_t seed);

AttributionMap integrated_gradients(const Explainable& model, const Grid& x, const Grid& baseline, int target,
                                    int steps, std::uint64_t seed = 0);

/// |sum_j A_j - (F(x) - F(baseline))|.
double completeness_gap(const AttributionMap& attr, const Explainable& model, const Grid& x, const Grid& baseline,
                        int target, std::uint64_t seed = 0);

using BaseMethod = std::function<AttributionMap(const Grid& input)>;

/// x + N(0, nt_sigma^2) elementwise, clipped to [0, 1]; the input of noise-tunnel sample `index`.
Grid perturb_input(const Grid& x, float nt_sigma, std::uint64_t seed, std::size_t index);

/// Mean of `base` over n_samples perturbed copies of x.
AttributionMap noise_tunnel(const BaseMethod& base, const Grid& x, int n_samples, float nt_sigma, std::uint64_t seed);

AttributionMap gradient_shap(const Explainable& model, const Grid& x, const std::vector<Grid>& baselines, int target,
                             int n_samples, std::uint64_t seed, std::uint64_t model_seed = 0);

/// `layer` indexes ForwardTrace::activations (for a ResidualNet: block outputs).
AttributionMap grad_cam(const Explainable& model, const Grid& x, int target, int layer, std::uint64_t seed = 0);

struct OcclusionWindow {
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t stride = 4;
};

/// Windows start at multiples of the stride and never cross the border;
/// pixels no window covers get 0.
AttributionMap occlusion(const Explainable& model, const Grid& x, float baseline_value, int target,
                         const OcclusionWindow& window, std::uint64_t seed = 0);

/// 1 - mean_row(var_t |A|) / var(|A|); 0 when the map is (numerically) constant.
double band_score(const Grid& values);

struct ExplainOptions {
    int ig_steps = 32;
    int nt_samples = 8;
    float nt_sigma = 0.1f;
    int shap_samples = 32;
    int shap_baselines = 4;
    int gradcam_layer = -1;  // negative counts from the last layer
    OcclusionWindow occlusion{};
    float occlusion_value = 0.0f;
    std::uint64_t seed = 0;
};

/// Runs one method with a zero baseline (GradientSHAP: zero plus Gaussian-noise baselines).
AttributionMap explain(const Explainable& model, Method method, const Grid& x, int target,
                       const ExplainOptions& options);

/// Grid as IMG1 at `path`, metadata as JSON at `path` + ".json".
void save_map(const std::filesystem::path& path, const AttributionMap& map);
AttributionMap load_map(const std::filesystem::path& path);

}  // namespace ure::attribution
