#include "ure/eval.hpp"

#include "ure/error.hpp"
#include "ure/rng.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ure::eval {

Grid add_gaussian_noise(const Grid& img, float sigma, std::uint64_t seed) {
    require(sigma >= 0.0f && std::isfinite(sigma), ErrorCode::kInvalidArgument,
            "add_gaussian_noise: sigma must be >= 0");
    Grid out = img;
    if (sigma == 0.0f) {
        return out;
    }
    std::vector<float> noise(img.values.size());
    fill_gaussian(seed, sigma, noise);
    for (std::size_t j = 0; j < noise.size(); ++j) {
        out.values[j] += noise[j];
    }
    return out;
}

spectral::ImageTensor add_gaussian_noise(const spectral::ImageTensor& img, float sigma, std::uint64_t seed) {
    return {add_gaussian_noise(img.pixels, sigma, seed), img.provenance};
}

EvalReport classification_report(std::span<const int> preds, std::span<const int> truth, int n_classes) {
    require(n_classes >= 1, ErrorCode::kInvalidArgument, "classification_report: n_classes must be >= 1");
    require(!truth.empty(), ErrorCode::kInvalidArgument, "classification_report: no samples");
    require(preds.size() == truth.size(), ErrorCode::kInvalidArgument,
            "classification_report: " + std::to_string(preds.size()) + " predictions for " +
                std::to_string(truth.size()) + " labels");
    const auto k = static_cast<std::size_t>(n_classes);
    std::vector<std::size_t> tp(k, 0);
    std::vector<std::size_t> predicted(k, 0);
    std::vector<std::size_t> actual(k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (int label : {preds[i], truth[i]}) {
            require(label >= 0 && label < n_classes, ErrorCode::kInvalidArgument,
                    "classification_report: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(n_classes) + ")");
        }
        ++predicted[static_cast<std::size_t>(preds[i])];
        ++actual[static_cast<std::size_t>(truth[i])];
        if (preds[i] == truth[i]) {
            ++tp[static_cast<std::size_t>(truth[i])];
        }
    }
    EvalReport report;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics m;
        m.class_id = static_cast<int>(c);
        m.support = actual[c];
        m.precision = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
        m.recall = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f1 += m.f1;
        correct += tp[c];
        report.per_class.push_back(m);
    }
    report.macro_precision /= static_cast<double>(k);
    report.macro_recall /= static_cast<double>(k);
    report.macro_f1 /= static_cast<double>(k);
    report.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    return report;
}

std::vector<EvalReport> robustness_sweep(const Predictor& predictor, const model::Dataset& test,
                                         const SweepOptions& options) {
    require(test.size() > 0, ErrorCode::kInvalidArgument, "robustness_sweep: empty test set");
    require(!options.sigmas.empty(), ErrorCode::kInvalidArgument, "robustness_sweep: empty sigma grid");
    require(options.n_classes >= 1, ErrorCode::kInvalidArgument, "robustness_sweep: n_classes must be >= 1");
    std::vector<double> grid{0.0};
    for (double s : options.sigmas) {
        require(s >= 0.0 && std::isfinite(s), ErrorCode::kInvalidArgument, "robustness_sweep: sigma must be >= 0");
        grid.push_back(s);
    }

    std::vector<EvalReport> reports;
    for (double sigma : grid) {
        const std::uint64_t level = seed_from_double(sigma);
        std::vector<spectral::ImageTensor> noisy;
        noisy.reserve(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
            noisy.push_back(add_gaussian_noise(test.images[i], static_cast<float>(sigma),
                                               derive_seed(options.seed, {0x9015e, level, i})));
        }
        const std::vector<int> preds = predictor(noisy, derive_seed(options.seed, {0x9ed1c7, level}));
        EvalReport r = classification_report(preds, test.labels, options.n_classes);
        r.noise_sigma = sigma;
        r.model_tag = options.model_tag;
        reports.push_back(std::move(r));
    }
    return reports;
}

std::vector<EvalReport> robustness_sweep(const model::ResidualNet& net, const model::Dataset& test,
                                         const SweepOptions& options) {
    SweepOptions opts = options;
    if (opts.n_classes == 0) {
        opts.n_classes = net.config().n_classes;
    }
    auto predictor = [&net](const std::vector<spectral::ImageTensor>& images, std::uint64_t seed) {
        return model::predict(net, images, seed).labels;
    };
    return robustness_sweep(predictor, test, opts);
}

std::vector<ComparisonRow> compare_reports(std::span<const EvalReport> a, std::span<const EvalReport> b) {
    require(a.size() == b.size() && !a.empty(), ErrorCode::kInvalidArgument,
            "compare_reports: report lists differ in length or are empty");
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < a.size(); ++i) {
        require(a[i].noise_sigma == b[i].noise_sigma, ErrorCode::kInvalidArgument,
                "compare_reports: sigma grids differ at position " + std::to_string(i));
        ComparisonRow row{a[i].noise_sigma, a[i].macro_f1, b[i].macro_f1, b[i].macro_f1 - a[i].macro_f1, {}};
        if (row.delta > 0.005) {
            row.verdict = "b more robust";
        } else if (row.delta < -0.005) {
            row.verdict = "a more robust";
        } else {
            row.verdict = "on par";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

std::string reports_to_csv(std::span<const EvalReport> reports) {
    require(!reports.empty(), ErrorCode::kInvalidArgument, "reports_to_csv: no reports");
    std::ostringstream out;
    out << "class,sigma,precision,recall,f1,support\n";
    for (const EvalReport& r : reports) {
        const std::string sigma = format_fixed(r.noise_sigma);
        std::size_t total = 0;
        for (const ClassMetrics& m : r.per_class) {
            out << m.class_id << ',' << sigma << ',' << format_fixed(m.precision) << ',' << format_fixed(m.recall)
                << ',' << format_fixed(m.f1) << ',' << m.support << '\n';
            total += m.support;
        }
        out << "average," << sigma << ',' << format_fixed(r.macro_precision) << ',' << format_fixed(r.macro_recall)
            << ',' << format_fixed(r.macro_f1) << ',' << total << '\n';
    }
    return out.str();
}

std::string reports_to_markdown(std::span<const EvalReport> reports) {
    require(!reports.empty(), ErrorCode::kInvalidArgument, "reports_to_markdown: no reports");
    std::ostringstream out;
    if (!reports.front().model_tag.empty()) {
        out << "### " << reports.front().model_tag << "\n\n";
    }
    out << "| Class |";
    for (const EvalReport& r : reports) {
        const std::string s = format_fixed(r.noise_sigma, 2);
        out << " Precision (σ=" << s << ") | Recall (σ=" << s << ") | F1 (σ=" << s << ") |";
    }
    out << " Support |\n|---|";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        out << "---|---|---|";
    }
    out << "---|\n";
    const std::size_t n_classes = reports.front().per_class.size();
    for (std::size_t c = 0; c < n_classes; ++c) {
        out << "| " << reports.front().per_class[c].class_id << " |";
        for (const EvalReport& r : reports) {
            require(r.per_class.size() == n_classes, ErrorCode::kInvalidArgument,
                    "reports_to_markdown: reports disagree on class count");
            const ClassMetrics& m = r.per_class[c];
            out << ' ' << format_fixed(m.precision) << " | " << format_fixed(m.recall) << " | " << format_fixed(m.f1)
                << " |";
        }
        out << ' ' << reports.front().per_class[c].support << " |\n";
    }
    std::size_t total = 0;
    for (const ClassMetrics& m : reports.front().per_class) {
        total += m.support;
    }
    out << "| Average |";
    for (const EvalReport& r : reports) {
        out << ' ' << format_fixed(r.macro_precision) << " | " << format_fixed(r.macro_recall) << " | "
            << format_fixed(r.macro_f1) << " |";
    }
    out << ' ' << total << " |\n";
    return out.str();
}

std::string comparison_to_markdown(std::span<const ComparisonRow> rows, const std::string& tag_a,
                                   const std::string& tag_b) {
    std::ostringstream out;
    out << "| σ | macro F1 (" << tag_a << ") | macro F1 (" << tag_b << ") | Δ (" << tag_b << " − " << tag_a
        << ") | verdict |\n|---|---|---|---|---|\n";
    for (const ComparisonRow& r : rows) {
        std::string verdict = r.verdict;
        if (verdict == "a more robust") {
            verdict = tag_a + " more robust";
        } else if (verdict == "b more robust") {
            verdict = tag_b + " more robust";
        }
        out << "| " << format_fixed(r.sigma, 2) << " | " << format_fixed(r.macro_f1_a) << " | "
            << format_fixed(r.macro_f1_b) << " | " << (r.delta >= 0 ? "+" : "") << format_fixed(r.delta) << " | "
            << verdict << " |\n";
    }
    return out.str();
}

}  // namespace ure::eval
