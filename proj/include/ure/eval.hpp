#pragma once

// Classification metrics and the Gaussian input-noise robustness sweep.

#include "ure/grid.hpp"
#include "ure/model.hpp"
#include "ure/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ure::eval {

/// img + N(0, sigma^2) elementwise; no clipping.
Grid add_gaussian_noise(const Grid& img, float sigma, std::uint64_t seed);
spectral::ImageTensor add_gaussian_noise(const spectral::ImageTensor& img, float sigma, std::uint64_t seed);

struct ClassMetrics {
    int class_id = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;

    bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    double noise_sigma = 0.0;
    std::string model_tag;

    bool operator==(const EvalReport&) const = default;
};

/// Per-class precision/recall/F1 with 0/0 := 0; macro values are unweighted class means.
EvalReport classification_report(std::span<const int> preds, std::span<const int> truth, int n_classes);

/// Labels for a batch of images. `seed` drives any inference-time randomness.
using Predictor = std::function<std::vector<int>(const std::vector<spectral::ImageTensor>& images, std::uint64_t seed)>;

struct SweepOptions {
    std::vector<double> sigmas{0.1, 0.25, 0.5};
    std::uint64_t seed = 0;
    int n_classes = 0;
    std::string model_tag;
};

/// One report per sigma, with the clean (sigma = 0) report first. The noise
/// for sample i at level s is seeded from (seed, s, i).
std::vector<EvalReport> robustness_sweep(const Predictor& predictor, const model::Dataset& test,
                                         const SweepOptions& options);
std::vector<EvalReport> robustness_sweep(const model::ResidualNet& net, const model::Dataset& test,
                                         const SweepOptions& options);

struct ComparisonRow {
    double sigma = 0.0;
    double macro_f1_a = 0.0;
    double macro_f1_b = 0.0;
    double delta = 0.0;  // b - a
    std::string verdict;
};

/// Sigma grids must match element for element.
std::vector<ComparisonRow> compare_reports(std::span<const EvalReport> a, std::span<const EvalReport> b);

std::string format_fixed(double value, int decimals = 6);

/// class,sigma,precision,recall,f1,support; one "average" row closes each report.
std::string reports_to_csv(std::span<const EvalReport> reports);
/// Same numbers, one row per class and one column group per sigma.
std::string reports_to_markdown(std::span<const EvalReport> reports);
std::string comparison_to_markdown(std::span<const ComparisonRow> rows, const std::string& tag_a,
                                   const std::string& tag_b);

}  // namespace ure::eval
