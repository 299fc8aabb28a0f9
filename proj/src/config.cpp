#include "ure/config.hpp"

#include "ure/binary_io.hpp"
#include "ure/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace ure::workbench {

namespace pt = boost::property_tree;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    fail(ErrorCode::kConfig, path + ": " + what);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        std::string item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!item.empty()) {
            out.push_back(std::move(item));
        }
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

double to_double(const std::string& text, const std::string& path) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        config_error(path, "expected a finite number, got '" + text + "'");
    }
    return v;
}

std::int64_t to_int(const std::string& text, const std::string& path) {
    std::int64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        config_error(path, "expected an integer, got '" + text + "'");
    }
    return v;
}

// Reads one section, tracking which keys were consumed so leftovers can be reported.
class Section {
   public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    [[nodiscard]] bool present() const { return tree_ != nullptr; }

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        if (!tree_) {
            return std::nullopt;
        }
        auto it = tree_->find(key);
        if (it == tree_->not_found()) {
            return std::nullopt;
        }
        return trim(it->second.data());
    }

    [[nodiscard]] std::string path(const std::string& key) const { return name_ + "." + key; }

    std::string get_string(const std::string& key, std::string fallback) {
        auto v = raw(key);
        return v ? *v : std::move(fallback);
    }
    double get_double(const std::string& key, double fallback) {
        auto v = raw(key);
        return v ? to_double(*v, path(key)) : fallback;
    }
    int get_int(const std::string& key, int fallback) {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        const auto n = to_int(*v, path(key));
        if (n < INT32_MIN || n > INT32_MAX) {
            config_error(path(key), "out of range");
        }
        return static_cast<int>(n);
    }
    std::size_t get_size(const std::string& key, std::size_t fallback) {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        const auto n = to_int(*v, path(key));
        if (n < 0) {
            config_error(path(key), "must be >= 0");
        }
        return static_cast<std::size_t>(n);
    }
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        std::uint64_t n = 0;
        const char* end = v->data() + v->size();
        auto [ptr, ec] = std::from_chars(v->data(), end, n);
        if (ec != std::errc{} || ptr != end) {
            config_error(path(key), "expected an unsigned integer, got '" + *v + "'");
        }
        return n;
    }
    bool get_bool(const std::string& key, bool fallback) {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        if (*v == "true" || *v == "1" || *v == "yes") {
            return true;
        }
        if (*v == "false" || *v == "0" || *v == "no") {
            return false;
        }
        config_error(path(key), "expected true or false, got '" + *v + "'");
    }

    void reject_unknown() const {
        if (!tree_) {
            return;
        }
        for (const auto& [key, _] : *tree_) {
            if (!used_.count(key)) {
                config_error(path(key), "unknown key");
            }
        }
    }

   private:
    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> used_;
};

std::vector<signal::Harmonic> parse_harmonics(const std::string& text, const std::string& path) {
    std::vector<signal::Harmonic> out;
    for (const std::string& item : split(text, ';')) {
        const auto parts = split(item, ':');
        if (parts.size() < 2 || parts.size() > 3) {
            config_error(path, "harmonic '" + item + "' is not freq:amp[:phase]");
        }
        signal::Harmonic h;
        h.frequency = to_double(parts[0], path);
        h.amplitude = to_double(parts[1], path);
        h.phase = parts.size() == 3 ? to_double(parts[2], path) : 0.0;
        out.push_back(h);
    }
    return out;
}

template <typename F>
void rethrow_as_config(const std::string& path, F&& check) {
    try {
        check();
    } catch (const Error& e) {
        config_error(path, e.what());
    }
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) {
        fail(ErrorCode::kInternal, "format_double failed");
    }
    return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
    const DatasetConfig& d = dataset;
    if (d.n_classes < 1) config_error("dataset.n_classes", "must be >= 1");
    if (!(d.sample_rate > 0.0)) config_error("dataset.sample_rate", "must be > 0");
    if (!(d.segment_seconds > 0.0)) config_error("dataset.segment_seconds", "must be > 0");
    if (d.segments_per_class < 2) config_error("dataset.segments_per_class", "must be >= 2");
    if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0)) {
        config_error("dataset.train_fraction", "must lie in (0, 1)");
    }
    const auto seg = static_cast<std::size_t>(std::llround(d.segment_seconds * d.sample_rate));
    if (seg < spectral.stft.window_size) {
        config_error("dataset.segment_seconds", "segment shorter than spectral.window_size");
    }
    if (d.profiles.size() != static_cast<std::size_t>(d.n_classes)) {
        config_error("dataset.n_classes", std::to_string(d.n_classes) + " classes but " +
                                              std::to_string(d.profiles.size()) + " [profile.K] sections");
    }
    for (std::size_t k = 0; k < d.profiles.size(); ++k) {
        const std::string path = "profile." + std::to_string(k);
        if (d.profiles[k].profile.class_id != static_cast<int>(k)) {
            config_error(path, "profiles must be numbered 0..n_classes-1");
        }
        if (d.profiles[k].recording.empty()) {
            rethrow_as_config(path, [&] { signal::validate(d.profiles[k].profile, d.sample_rate); });
        }
    }

    const std::size_t w = spectral.stft.window_size;
    if (w < 2 || (w & (w - 1)) != 0) config_error("spectral.window_size", "must be a power of two >= 2");
    if (spectral.stft.hop < 1) config_error("spectral.hop", "must be >= 1");
    if (spectral.image_h < 1) config_error("spectral.image_h", "must be >= 1");
    if (spectral.image_w < 2) config_error("spectral.image_w", "must be >= 2");

    if (model.n_classes != d.n_classes) {
        config_error("model.n_classes", "must equal dataset.n_classes (" + std::to_string(d.n_classes) + ")");
    }
    rethrow_as_config("model", [&] { net_config(true).validate(); });

    if (train.epochs < 0) config_error("train.epochs", "must be >= 0");
    if (train.batch_size < 1) config_error("train.batch_size", "must be >= 1");
    if (!(train.lr >= 0.0)) config_error("train.lr", "must be >= 0");

    if (eval.sigmas.empty()) config_error("eval.sigmas", "must list at least one sigma");
    for (double s : eval.sigmas) {
        if (!(s >= 0.0)) config_error("eval.sigmas", "values must be >= 0");
    }
    if (eval.mc_samples < 1) config_error("eval.mc_samples", "must be >= 1");

    const AttributionConfig& a = attribution;
    if (a.ig_steps < 1) config_error("attribution.ig_steps", "must be >= 1");
    if (a.nt_samples < 1) config_error("attribution.nt_samples", "must be >= 1");
    if (!(a.nt_sigma >= 0.0)) config_error("attribution.nt_sigma", "must be >= 0");
    if (a.shap_samples < 1) config_error("attribution.shap_samples", "must be >= 1");
    if (a.samples_per_class < 0) config_error("attribution.samples_per_class", "must be >= 0");
    if (a.gradcam_layer >= model.n_blocks || a.gradcam_layer < -model.n_blocks) {
        config_error("attribution.gradcam_layer", "must index a block in [-n_blocks, n_blocks)");
    }
    if (a.occlusion_h < 1 || a.occlusion_w < 1 || a.occlusion_h > spectral.image_h ||
        a.occlusion_w > spectral.image_w) {
        config_error("attribution.occlusion_window", "must fit inside the image");
    }
    if (a.occlusion_stride < 1) config_error("attribution.occlusion_stride", "must be >= 1");
}

model::ResidualNetConfig ExperimentConfig::net_config(bool stochastic) const {
    model::ResidualNetConfig c;
    c.n_classes = model.n_classes;
    c.n_blocks = model.n_blocks;
    c.channels = model.channels;
    c.stochastic = stochastic;
    c.sde_sigma = static_cast<float>(model.sde_sigma);
    c.dt = static_cast<float>(model.dt);
    c.mc_samples = eval.mc_samples;
    c.train_noise = model.train_noise;
    c.image_h = static_cast<int>(spectral.image_h);
    c.image_w = static_cast<int>(spectral.image_w);
    return c;
}

attribution::ExplainOptions ExperimentConfig::explain_options() const {
    attribution::ExplainOptions o;
    o.ig_steps = attribution.ig_steps;
    o.nt_samples = attribution.nt_samples;
    o.nt_sigma = static_cast<float>(attribution.nt_sigma);
    o.shap_samples = attribution.shap_samples;
    o.gradcam_layer = attribution.gradcam_layer;
    o.occlusion = {attribution.occlusion_h, attribution.occlusion_w, attribution.occlusion_stride};
    o.seed = attribution.seed;
    return o;
}

void ExperimentConfig::override_seed(std::uint64_t seed) {
    dataset.seed = seed;
    train.seed = seed;
    eval.seed = seed;
    attribution.seed = seed;
}

ExperimentConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorCode::kConfig, "config line " + std::to_string(e.line()) + ": " + e.message());
    }

    ExperimentConfig c;
    std::set<std::string> known;
    auto section = [&](const std::string& name) {
        known.insert(name);
        // Section names contain dots, so look them up literally rather than as paths.
        auto it = tree.find(name);
        return Section(it == tree.not_found() ? nullptr : &it->second, name);
    };

    {
        Section s = section("run");
        c.name = s.get_string("name", c.name);
        s.reject_unknown();
    }
    {
        Section s = section("dataset");
        DatasetConfig& d = c.dataset;
        d.n_classes = s.get_int("n_classes", d.n_classes);
        d.sample_rate = s.get_double("sample_rate", d.sample_rate);
        d.segment_seconds = s.get_double("segment_seconds", d.segment_seconds);
        d.segments_per_class = s.get_int("segments_per_class", d.segments_per_class);
        d.train_fraction = s.get_double("train_fraction", d.train_fraction);
        d.seed = s.get_seed("seed", d.seed);
        s.reject_unknown();
    }
    for (int k = 0; k < std::max(c.dataset.n_classes, 0); ++k) {
        Section s = section("profile." + std::to_string(k));
        if (!s.present()) {
            config_error("profile." + std::to_string(k), "missing section for class " + std::to_string(k));
        }
        ClassProfile cp;
        cp.profile.class_id = k;
        cp.profile.name = s.get_string("name", "class" + std::to_string(k));
        if (auto h = s.raw("harmonics")) {
            cp.profile.harmonics = parse_harmonics(*h, s.path("harmonics"));
        }
        if (auto am = s.raw("am")) {
            const auto parts = split(*am, ':');
            if (parts.size() != 2) {
                config_error(s.path("am"), "expected rate:depth");
            }
            cp.profile.am = signal::AmplitudeModulation{to_double(parts[0], s.path("am")),
                                                        to_double(parts[1], s.path("am"))};
        }
        cp.profile.drift_ppm = s.get_double("drift_ppm", 0.0);
        cp.profile.noise_floor = s.get_double("noise_floor", 0.0);
        cp.recording = s.get_string("recording", "");
        s.reject_unknown();
        c.dataset.profiles.push_back(std::move(cp));
    }
    {
        Section s = section("spectral");
        SpectralConfig& sp = c.spectral;
        if (auto w = s.raw("window")) {
            rethrow_as_config(s.path("window"), [&] { sp.stft.window = spectral::window_from_string(*w); });
        }
        sp.stft.window_size = s.get_size("window_size", sp.stft.window_size);
        sp.stft.hop = s.get_size("hop", sp.stft.hop);
        sp.image_h = s.get_size("image_h", sp.image_h);
        sp.image_w = s.get_size("image_w", sp.image_w);
        s.reject_unknown();
    }
    {
        Section s = section("model");
        ModelConfig& m = c.model;
        m.n_classes = s.get_int("n_classes", c.dataset.n_classes);
        m.n_blocks = s.get_int("n_blocks", m.n_blocks);
        m.channels = s.get_int("channels", m.channels);
        m.sde_sigma = s.get_double("sde_sigma", m.sde_sigma);
        m.dt = s.get_double("dt", m.dt);
        m.train_noise = s.get_bool("train_noise", m.train_noise);
        s.reject_unknown();
    }
    {
        Section s = section("train");
        TrainConfig& t = c.train;
        t.epochs = s.get_int("epochs", t.epochs);
        t.batch_size = s.get_int("batch_size", t.batch_size);
        t.lr = s.get_double("lr", t.lr);
        t.seed = s.get_seed("seed", t.seed);
        s.reject_unknown();
    }
    {
        Section s = section("eval");
        EvalConfig& e = c.eval;
        if (auto sig = s.raw("sigmas")) {
            e.sigmas.clear();
            for (const std::string& item : split(*sig, ',')) {
                e.sigmas.push_back(to_double(item, s.path("sigmas")));
            }
        }
        e.mc_samples = s.get_int("mc_samples", e.mc_samples);
        e.seed = s.get_seed("seed", e.seed);
        s.reject_unknown();
    }
    {
        Section s = section("attribution");
        AttributionConfig& a = c.attribution;
        if (auto methods = s.raw("methods")) {
            a.methods.clear();
            for (const std::string& item : split(*methods, ',')) {
                rethrow_as_config(s.path("methods"),
                                  [&] { a.methods.push_back(attribution::method_from_string(item)); });
            }
        }
        a.ig_steps = s.get_int("ig_steps", a.ig_steps);
        a.nt_samples = s.get_int("nt_samples", a.nt_samples);
        a.nt_sigma = s.get_double("nt_sigma", a.nt_sigma);
        a.shap_samples = s.get_int("shap_samples", a.shap_samples);
        a.gradcam_layer = s.get_int("gradcam_layer", a.gradcam_layer);
        if (auto win = s.raw("occlusion_window")) {
            const auto parts = split(*win, 'x');
            if (parts.size() != 2) {
                config_error(s.path("occlusion_window"), "expected HxW");
            }
            a.occlusion_h = static_cast<std::size_t>(std::max<std::int64_t>(0, to_int(parts[0], s.path("occlusion_window"))));
            a.occlusion_w = static_cast<std::size_t>(std::max<std::int64_t>(0, to_int(parts[1], s.path("occlusion_window"))));
        }
        a.occlusion_stride = s.get_size("occlusion_stride", a.occlusion_stride);
        a.samples_per_class = s.get_int("samples_per_class", a.samples_per_class);
        a.seed = s.get_seed("seed", a.seed);
        s.reject_unknown();
    }
    for (const auto& [name, _] : tree) {
        if (!known.count(name)) {
            config_error(name, "unknown section");
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        fail(ErrorCode::kConfig, "cannot read config " + path.string() + ": " + e.what());
    }
    return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "[run]\nname = " << c.name << "\n\n";

    const DatasetConfig& d = c.dataset;
    out << "[dataset]\nn_classes = " << d.n_classes << "\nsample_rate = " << format_double(d.sample_rate)
        << "\nsegment_seconds = " << format_double(d.segment_seconds)
        << "\nsegments_per_class = " << d.segments_per_class
        << "\ntrain_fraction = " << format_double(d.train_fraction) << "\nseed = " << d.seed << "\n\n";
    for (const ClassProfile& cp : d.profiles) {
        const signal::DeviceProfile& p = cp.profile;
        out << "[profile." << p.class_id << "]\nname = " << p.name << "\nharmonics = ";
        for (std::size_t i = 0; i < p.harmonics.size(); ++i) {
            const auto& h = p.harmonics[i];
            out << (i ? "; " : "") << format_double(h.frequency) << ':' << format_double(h.amplitude) << ':'
                << format_double(h.phase);
        }
        out << '\n';
        if (p.am) {
            out << "am = " << format_double(p.am->rate) << ':' << format_double(p.am->depth) << '\n';
        }
        out << "drift_ppm = " << format_double(p.drift_ppm) << "\nnoise_floor = " << format_double(p.noise_floor)
            << '\n';
        if (!cp.recording.empty()) {
            out << "recording = " << cp.recording << '\n';
        }
        out << '\n';
    }

    const SpectralConfig& sp = c.spectral;
    out << "[spectral]\nwindow = " << spectral::to_string(sp.stft.window) << "\nwindow_size = " << sp.stft.window_size
        << "\nhop = " << sp.stft.hop << "\nimage_h = " << sp.image_h << "\nimage_w = " << sp.image_w << "\n\n";

    const ModelConfig& m = c.model;
    out << "[model]\nn_classes = " << m.n_classes << "\nn_blocks = " << m.n_blocks << "\nchannels = " << m.channels
        << "\nsde_sigma = " << format_double(m.sde_sigma) << "\ndt = " << format_double(m.dt)
        << "\ntrain_noise = " << (m.train_noise ? "true" : "false") << "\n\n";

    const TrainConfig& t = c.train;
    out << "[train]\nepochs = " << t.epochs << "\nbatch_size = " << t.batch_size << "\nlr = " << format_double(t.lr)
        << "\nseed = " << t.seed << "\n\n";

    out << "[eval]\nsigmas = ";
    for (std::size_t i = 0; i < c.eval.sigmas.size(); ++i) {
        out << (i ? ", " : "") << format_double(c.eval.sigmas[i]);
    }
    out << "\nmc_samples = " << c.eval.mc_samples << "\nseed = " << c.eval.seed << "\n\n";

    const AttributionConfig& a = c.attribution;
    out << "[attribution]\nmethods = ";
    for (std::size_t i = 0; i < a.methods.size(); ++i) {
        out << (i ? ", " : "") << attribution::to_string(a.methods[i]);
    }
    out << "\nig_steps = " << a.ig_steps << "\nnt_samples = " << a.nt_samples
        << "\nnt_sigma = " << format_double(a.nt_sigma) << "\nshap_samples = " << a.shap_samples
        << "\ngradcam_layer = " << a.gradcam_layer << "\nocclusion_window = " << a.occlusion_h << 'x' << a.occlusion_w
        << "\nocclusion_stride = " << a.occlusion_stride << "\nsamples_per_class = " << a.samples_per_class
        << "\nseed = " << a.seed << '\n';
    return out.str();
}

}  // namespace ure::workbench
