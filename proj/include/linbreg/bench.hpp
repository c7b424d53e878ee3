#pragma once

#include <linbreg/error.hpp>
#include <linbreg/io.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/pdhg.hpp>
#include <linbreg/problems/classifier.hpp>
#include <linbreg/problems/counterexample.hpp>
#include <linbreg/problems/deconvolution.hpp>
#include <linbreg/problems/mri.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/solver.hpp>
#include <linbreg/tensor.hpp>
#include <linbreg/verify.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace linbreg {

/// Version of the log.csv column layout; bumped whenever the fixed columns change.
inline constexpr int kLogVersion = 1;

inline const std::vector<std::string>& problem_kinds() {
    static const std::vector<std::string> kinds{"deconvolution", "mri", "classifier", "quadratic", "counterexample"};
    return kinds;
}

inline SolverKind parse_solver_kind(const std::string& s) {
    if (s == "linbreg") return SolverKind::LinBreg;
    if (s == "proximal-gd") return SolverKind::ProximalGradient;
    if (s == "projected-gd") return SolverKind::ProjectedGradient;
    throw ArgumentError("unknown solver '" + s + "' (linbreg|proximal-gd|projected-gd)");
}

struct ExperimentConfig {
    // common
    std::string problem = "quadratic";
    std::uint64_t seed = 0;
    std::string out = "run";
    SolverKind solver = SolverKind::LinBreg;
    double tau0 = 1.0;
    double shrink = 0.75;
    std::optional<double> eps_decrease;
    int max_iter = 1000;
    std::optional<double> discrepancy_eta;
    bool discrepancy_auto = false;
    std::optional<double> iterate_gap_tol;
    std::vector<int> snapshots;
    bool monitor = true;
    std::optional<double> lipschitz;
    std::optional<double> level_set_eps;
    PdhgConfig pdhg;
    bool tv_accept_inexact = false;
    double alpha = 0.05;
    double sigma = 0.0;

    // deconvolution
    std::size_t height = 32;
    std::size_t width = 32;
    std::string kernel = "motion3x5";
    Shape kernel_support{5, 7};
    std::string image_path;

    // mri
    std::size_t size = 32;
    std::size_t coils = 2;
    std::string mask = "spiral";
    double mask_p = 0.5;
    double alpha_coil = 1.0;
    double dct_low = 1e-6;
    double dct_high = 5.0;
    double u_init = 2.0;

    // classifier
    std::string mnist_dir = "data/mnist-subset";
    std::size_t train_count = 500;
    std::size_t test_count = 100;
    std::size_t hidden = 32;
    std::string activation = "rectifier";
    std::string output_activation = "rectifier";
    std::string loss = "frobenius";
    double beta = 5.0;
    double smooth_c = 0.0;
    double kl_shift = 1e-3;
    std::vector<double> alphas{0.2, 0.2};
    double rank_tol = 1e-8;

    // quadratic
    std::size_t rows = 30;
    std::size_t cols = 20;
    std::string regularizer = "l1";
    Shape matrix_shape{4, 5};

    // counterexample
    double u0 = 0.5;

    /// Keys explicitly present in the parsed file, with their line numbers.
    std::map<std::string, std::size_t> given;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline double parse_real(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ArgumentError("expected a finite number, got '" + s + "'");
    }
    return v;
}

inline long long parse_integer(const std::string& s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ArgumentError("expected an integer, got '" + s + "'");
    return v;
}

inline std::size_t parse_count(const std::string& s) {
    const long long v = parse_integer(s);
    if (v <= 0) throw ArgumentError("expected a positive integer, got '" + s + "'");
    return static_cast<std::size_t>(v);
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ArgumentError("expected true or false, got '" + s + "'");
}

inline Shape parse_shape2(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ArgumentError("expected a shape like 5x7, got '" + s + "'");
    return {parse_count(s.substr(0, x)), parse_count(s.substr(x + 1))};
}

/// "auto"/"none" leave the optional empty.
inline std::optional<double> parse_optional_real(const std::string& s) {
    if (s == "auto" || s == "none") return std::nullopt;
    return parse_real(s);
}

inline std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string fmt(const std::optional<double>& v, const char* empty) { return v ? fmt(*v) : std::string(empty); }

inline std::string fmt(const Shape& s) { return std::to_string(s[0]) + "x" + std::to_string(s[1]); }

template <class T>
inline std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>) out += fmt(xs[i]);
        else out += std::to_string(xs[i]);
    }
    return out;
}

struct ConfigKey {
    const char* name;
    std::vector<std::string> scope; ///< problems the key applies to; empty means all
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

} // namespace detail

/// Every recognised key, in the order used for config.resolved.
inline const std::vector<detail::ConfigKey>& config_keys() {
    using C = ExperimentConfig;
    using namespace detail;
    static const std::vector<ConfigKey> keys{
        {"problem", {}, [](C& c, const std::string& v) {
             if (std::find(problem_kinds().begin(), problem_kinds().end(), v) == problem_kinds().end()) {
                 throw ArgumentError("unknown problem '" + v + "'");
             }
             c.problem = v;
         }, [](const C& c) { return c.problem; }},
        {"seed", {}, [](C& c, const std::string& v) {
             const long long s = parse_integer(v);
             if (s < 0) throw ArgumentError("seed must be >= 0");
             c.seed = static_cast<std::uint64_t>(s);
         }, [](const C& c) { return std::to_string(c.seed); }},
        {"out", {}, [](C& c, const std::string& v) { c.out = v; }, [](const C& c) { return c.out; }},
        {"solver", {}, [](C& c, const std::string& v) { c.solver = parse_solver_kind(v); },
         [](const C& c) { return to_string(c.solver); }},
        {"tau0", {}, [](C& c, const std::string& v) { c.tau0 = parse_real(v); }, [](const C& c) { return fmt(c.tau0); }},
        {"shrink", {}, [](C& c, const std::string& v) { c.shrink = parse_real(v); },
         [](const C& c) { return fmt(c.shrink); }},
        {"eps_decrease", {}, [](C& c, const std::string& v) { c.eps_decrease = parse_optional_real(v); },
         [](const C& c) { return fmt(c.eps_decrease, "auto"); }},
        {"max_iter", {}, [](C& c, const std::string& v) {
             const long long n = parse_integer(v);
             if (n < 0) throw ArgumentError("max_iter must be >= 0");
             c.max_iter = static_cast<int>(n);
         }, [](const C& c) { return std::to_string(c.max_iter); }},
        {"discrepancy_eta", {}, [](C& c, const std::string& v) {
             c.discrepancy_auto = v == "auto";
             c.discrepancy_eta = parse_optional_real(v);
         }, [](const C& c) { return c.discrepancy_auto ? std::string("auto") : fmt(c.discrepancy_eta, "none"); }},
        {"iterate_gap_tol", {}, [](C& c, const std::string& v) { c.iterate_gap_tol = parse_optional_real(v); },
         [](const C& c) { return fmt(c.iterate_gap_tol, "none"); }},
        {"snapshots", {}, [](C& c, const std::string& v) {
             c.snapshots.clear();
             if (v.empty() || v == "none") return;
             for (const auto& t : split(v, ',')) {
                 const long long k = parse_integer(t);
                 if (k < 0) throw ArgumentError("snapshot iterations must be >= 0");
                 c.snapshots.push_back(static_cast<int>(k));
             }
         }, [](const C& c) { return c.snapshots.empty() ? std::string("none") : join(c.snapshots); }},
        {"monitor", {}, [](C& c, const std::string& v) { c.monitor = parse_bool(v); },
         [](const C& c) { return std::string(c.monitor ? "true" : "false"); }},
        {"lipschitz", {}, [](C& c, const std::string& v) { c.lipschitz = parse_optional_real(v); },
         [](const C& c) { return fmt(c.lipschitz, "auto"); }},
        {"level_set_eps", {"deconvolution", "mri", "classifier"},
         [](C& c, const std::string& v) { c.level_set_eps = parse_optional_real(v); },
         [](const C& c) { return fmt(c.level_set_eps, "auto"); }},
        {"pdhg_tol", {"deconvolution", "mri"}, [](C& c, const std::string& v) { c.pdhg.tol = parse_real(v); },
         [](const C& c) { return fmt(c.pdhg.tol); }},
        {"pdhg_maxit", {"deconvolution", "mri"},
         [](C& c, const std::string& v) { c.pdhg.maxit = static_cast<int>(parse_count(v)); },
         [](const C& c) { return std::to_string(c.pdhg.maxit); }},
        {"pdhg_check_every", {"deconvolution", "mri"},
         [](C& c, const std::string& v) { c.pdhg.check_every = static_cast<int>(parse_count(v)); },
         [](const C& c) { return std::to_string(c.pdhg.check_every); }},
        {"tv_accept_inexact", {"deconvolution", "mri"},
         [](C& c, const std::string& v) { c.tv_accept_inexact = parse_bool(v); },
         [](const C& c) { return std::string(c.tv_accept_inexact ? "true" : "false"); }},
        {"alpha", {"deconvolution", "mri", "quadratic"}, [](C& c, const std::string& v) { c.alpha = parse_real(v); },
         [](const C& c) { return fmt(c.alpha); }},
        {"sigma", {"deconvolution", "mri"}, [](C& c, const std::string& v) { c.sigma = parse_real(v); },
         [](const C& c) { return fmt(c.sigma); }},
        {"height", {"deconvolution"}, [](C& c, const std::string& v) { c.height = parse_count(v); },
         [](const C& c) { return std::to_string(c.height); }},
        {"width", {"deconvolution"}, [](C& c, const std::string& v) { c.width = parse_count(v); },
         [](const C& c) { return std::to_string(c.width); }},
        {"kernel", {"deconvolution"}, [](C& c, const std::string& v) {
             if (v != "motion3x5" && v != "box3x3") throw ArgumentError("unknown kernel '" + v + "' (motion3x5|box3x3)");
             c.kernel = v;
         }, [](const C& c) { return c.kernel; }},
        {"kernel_support", {"deconvolution"}, [](C& c, const std::string& v) { c.kernel_support = parse_shape2(v); },
         [](const C& c) { return fmt(c.kernel_support); }},
        {"image_path", {"deconvolution"}, [](C& c, const std::string& v) { c.image_path = v; },
         [](const C& c) { return c.image_path.empty() ? std::string("none") : c.image_path; }},
        {"size", {"mri"}, [](C& c, const std::string& v) { c.size = parse_count(v); },
         [](const C& c) { return std::to_string(c.size); }},
        {"coils", {"mri"}, [](C& c, const std::string& v) { c.coils = parse_count(v); },
         [](const C& c) { return std::to_string(c.coils); }},
        {"mask", {"mri"}, [](C& c, const std::string& v) {
             parse_mask_kind(v);
             c.mask = v;
         }, [](const C& c) { return c.mask; }},
        {"mask_p", {"mri"}, [](C& c, const std::string& v) { c.mask_p = parse_real(v); },
         [](const C& c) { return fmt(c.mask_p); }},
        {"alpha_coil", {"mri"}, [](C& c, const std::string& v) { c.alpha_coil = parse_real(v); },
         [](const C& c) { return fmt(c.alpha_coil); }},
        {"dct_low", {"mri"}, [](C& c, const std::string& v) { c.dct_low = parse_real(v); },
         [](const C& c) { return fmt(c.dct_low); }},
        {"dct_high", {"mri"}, [](C& c, const std::string& v) { c.dct_high = parse_real(v); },
         [](const C& c) { return fmt(c.dct_high); }},
        {"u_init", {"mri"}, [](C& c, const std::string& v) { c.u_init = parse_real(v); },
         [](const C& c) { return fmt(c.u_init); }},
        {"mnist_dir", {"classifier"}, [](C& c, const std::string& v) { c.mnist_dir = v; },
         [](const C& c) { return c.mnist_dir; }},
        {"train_count", {"classifier"}, [](C& c, const std::string& v) { c.train_count = parse_count(v); },
         [](const C& c) { return std::to_string(c.train_count); }},
        {"test_count", {"classifier"}, [](C& c, const std::string& v) {
             const long long n = parse_integer(v);
             if (n < 0) throw ArgumentError("test_count must be >= 0");
             c.test_count = static_cast<std::size_t>(n);
         }, [](const C& c) { return std::to_string(c.test_count); }},
        {"hidden", {"classifier"}, [](C& c, const std::string& v) { c.hidden = parse_count(v); },
         [](const C& c) { return std::to_string(c.hidden); }},
        {"activation", {"classifier"}, [](C& c, const std::string& v) {
             parse_activation(v);
             c.activation = v;
         }, [](const C& c) { return c.activation; }},
        {"output_activation", {"classifier"}, [](C& c, const std::string& v) {
             parse_activation(v);
             c.output_activation = v;
         }, [](const C& c) { return c.output_activation; }},
        {"loss", {"classifier"}, [](C& c, const std::string& v) {
             parse_loss(v);
             c.loss = v;
         }, [](const C& c) { return c.loss; }},
        {"beta", {"classifier"}, [](C& c, const std::string& v) { c.beta = parse_real(v); },
         [](const C& c) { return fmt(c.beta); }},
        {"smooth_c", {"classifier"}, [](C& c, const std::string& v) { c.smooth_c = parse_real(v); },
         [](const C& c) { return fmt(c.smooth_c); }},
        {"kl_shift", {"classifier"}, [](C& c, const std::string& v) { c.kl_shift = parse_real(v); },
         [](const C& c) { return fmt(c.kl_shift); }},
        {"alphas", {"classifier"}, [](C& c, const std::string& v) {
             c.alphas.clear();
             for (const auto& t : split(v, ',')) c.alphas.push_back(parse_real(t));
         }, [](const C& c) { return join(c.alphas); }},
        {"rank_tol", {"classifier"}, [](C& c, const std::string& v) { c.rank_tol = parse_real(v); },
         [](const C& c) { return fmt(c.rank_tol); }},
        {"rows", {"quadratic"}, [](C& c, const std::string& v) { c.rows = parse_count(v); },
         [](const C& c) { return std::to_string(c.rows); }},
        {"cols", {"quadratic"}, [](C& c, const std::string& v) { c.cols = parse_count(v); },
         [](const C& c) { return std::to_string(c.cols); }},
        {"regularizer", {"quadratic"}, [](C& c, const std::string& v) {
             static const std::set<std::string> ok{"zero", "l1", "simplex", "nonneg", "nuclear"};
             if (!ok.count(v)) throw ArgumentError("unknown regularizer '" + v + "' (zero|l1|simplex|nonneg|nuclear)");
             c.regularizer = v;
         }, [](const C& c) { return c.regularizer; }},
        {"matrix_shape", {"quadratic"}, [](C& c, const std::string& v) { c.matrix_shape = parse_shape2(v); },
         [](const C& c) { return fmt(c.matrix_shape); }},
        {"u0", {"counterexample"}, [](C& c, const std::string& v) { c.u0 = parse_real(v); },
         [](const C& c) { return fmt(c.u0); }},
    };
    return keys;
}

namespace detail {

inline bool key_applies(const ConfigKey& key, const std::string& problem) {
    return key.scope.empty() || std::find(key.scope.begin(), key.scope.end(), problem) != key.scope.end();
}

} // namespace detail

/// Cross-field checks that do not depend on any data on disk.
inline void validate_config(const ExperimentConfig& cfg) {
    auto line_of = [&](const char* key) {
        auto it = cfg.given.find(key);
        return it == cfg.given.end() ? std::size_t{0} : it->second;
    };
    for (const auto& [name, line] : cfg.given) {
        const auto& keys = config_keys();
        auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return name == k.name; });
        if (it != keys.end() && !detail::key_applies(*it, cfg.problem)) {
            throw ConfigError("key '" + name + "' does not apply to problem '" + cfg.problem + "'", line);
        }
    }
    try {
        BacktrackingPolicy{cfg.tau0, cfg.shrink, cfg.eps_decrease}.validate();
        cfg.pdhg.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (cfg.discrepancy_auto && cfg.problem != "deconvolution") {
        throw ConfigError("discrepancy_eta = auto is only defined for deconvolution", line_of("discrepancy_eta"));
    }
    if (cfg.alpha < 0.0) throw ConfigError("alpha must be >= 0", line_of("alpha"));
    if (cfg.sigma < 0.0) throw ConfigError("sigma must be >= 0", line_of("sigma"));
    if (cfg.problem == "classifier" && cfg.alphas.size() != 2) {
        throw ConfigError("alphas needs one weight per layer (2)", line_of("alphas"));
    }
    if (cfg.problem == "quadratic" && cfg.regularizer == "nuclear" && shape_size(cfg.matrix_shape) != cfg.cols) {
        throw ConfigError("matrix_shape must have cols entries for the nuclear regularizer", line_of("matrix_shape"));
    }
    if (cfg.problem == "counterexample" && !(cfg.u0 > 0.0)) throw ConfigError("u0 must be > 0", line_of("u0"));
}

/// Parses `key = value` lines; '#' starts a comment. Unknown, duplicate and
/// malformed keys raise ConfigError with the line number.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        const auto& keys = config_keys();
        auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return key == k.name; });
        if (it == keys.end()) throw ConfigError("unknown key '" + key + "'", line);
        if (cfg.given.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
        try {
            it->set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key + ": " + e.what(), line);
        }
        cfg.given[key] = line;
    }
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_config(in);
}

/// Resolved config: every key that applies to the problem, defaults filled in.
/// Parses back to an equivalent config.
inline std::string resolved_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) {
        if (detail::key_applies(k, cfg.problem)) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Problem setup

/// Everything run_experiment needs for one problem instance.
struct ExperimentSetup {
    std::shared_ptr<const SmoothObjective> E;
    BregmanPtr R;
    Tensor x0;
    std::optional<Tensor> q0;
    std::optional<double> eta_auto;
    std::vector<std::string> extra_columns;
    /// Fills the extra columns from the accepted state.
    std::function<void(const SolverState&, MonitorRecord&)> metrics;
    /// Writes the iterate files for iteration k into `dir`.
    std::function<void(const std::filesystem::path& dir, int k, const Tensor& x)> snapshot;
    /// Problem-specific final metrics for the summary.
    std::function<void(const Tensor& x, std::vector<std::pair<std::string, std::string>>&)> summarize;
};

namespace detail {

inline Tensor kernel_by_name(const std::string& name) {
    if (name == "motion3x5") return motion_kernel_3x5();
    return Tensor(Shape{3, 3}, 1.0 / 9.0);
}

inline ExperimentSetup setup_deconvolution(const ExperimentConfig& cfg) {
    const Tensor kernel = kernel_by_name(cfg.kernel);
    std::size_t H = cfg.height, W = cfg.width;
    std::optional<Tensor> scene;
    if (!cfg.image_path.empty()) {
        PgmImage img;
        try {
            img = read_pgm(cfg.image_path);
        } catch (const IoError& e) {
            throw ConfigError(std::string("image_path: ") + e.what(), cfg.given.count("image_path") ? cfg.given.at("image_path") : 0);
        }
        scene = img.levels;
        normalise_image(*scene);
        if ((cfg.given.count("height") && cfg.height != scene->dim(0)) ||
            (cfg.given.count("width") && cfg.width != scene->dim(1))) {
            throw ConfigError("height/width disagree with the image at image_path");
        }
        H = scene->dim(0);
        W = scene->dim(1);
    }
    if (kernel.dim(0) > H || kernel.dim(1) > W || cfg.kernel_support[0] > H || cfg.kernel_support[1] > W) {
        throw ConfigError("kernel or kernel_support larger than the image");
    }
    auto syn = std::make_shared<SyntheticDeconv>(
        make_synthetic_deconv(cfg.seed, H, W, kernel, cfg.sigma, scene ? &*scene : nullptr));
    auto E = std::make_shared<BlindDeconvObjective>(syn->f, cfg.kernel_support, cfg.level_set_eps.value_or(0.0));
    ExperimentSetup s;
    s.E = E;
    s.R = make_deconv_regularizer(*E, cfg.alpha, cfg.pdhg, cfg.tv_accept_inexact);
    s.x0 = E->pack(Tensor(Shape{H, W}), uniform_kernel(cfg.kernel_support));
    s.q0 = Tensor::zeros_like(s.x0);
    s.eta_auto = deconv_discrepancy_eta(cfg.sigma, H, W);
    const bool comparable = kernel.dim(0) <= cfg.kernel_support[0] && kernel.dim(1) <= cfg.kernel_support[1];
    const std::optional<Tensor> h_ref =
        comparable ? std::optional<Tensor>(embed_kernel(syn->h_true, cfg.kernel_support)) : std::nullopt;
    s.extra_columns = {"tv_value", "data_fit", "kernel_error"};
    s.metrics = [E, h_ref](const SolverState& st, MonitorRecord& rec) {
        rec.extras.push_back({"tv_value", total_variation(E->image(st.u))});
        rec.extras.push_back({"data_fit", E->data_fit(st.u)});
        rec.extras.push_back({"kernel_error", h_ref ? norm(E->kernel(st.u) - *h_ref) : kNaN});
    };
    s.snapshot = [E](const std::filesystem::path& dir, int k, const Tensor& x) {
        const std::string stem = "iter_" + std::to_string(k);
        write_pgm_snapshot(dir / (stem + ".pgm"), E->image(x));
        write_matrix_csv(dir / (stem + "_kernel.csv"), E->kernel(x));
    };
    s.summarize = [E, h_ref, syn](const Tensor& x, auto& out) {
        out.push_back({"final_tv", fmt(total_variation(E->image(x)))});
        out.push_back({"final_data_fit", fmt(E->data_fit(x))});
        out.push_back({"final_kernel_error", h_ref ? fmt(norm(E->kernel(x) - *h_ref)) : "nan"});
        out.push_back({"final_image_error", fmt(norm(E->image(x) - syn->u_true))});
    };
    return s;
}

inline double complex_tv(const Tensor& paired) { return TotalVariation(1.0).value(paired); }

inline ExperimentSetup setup_mri(const ExperimentConfig& cfg) {
    const MaskKind kind = parse_mask_kind(cfg.mask);
    auto syn = std::make_shared<SyntheticMri>(make_synthetic_mri(cfg.seed, cfg.size, cfg.coils, kind, cfg.mask_p, cfg.sigma));
    auto E = std::make_shared<ParallelMriObjective>(
        syn->mask, syn->data, cfg.level_set_eps.value_or(std::numeric_limits<double>::epsilon()));
    ExperimentSetup s;
    s.E = E;
    s.R = make_mri_regularizer(*E, cfg.alpha, cfg.alpha_coil, mri_dct_weights(cfg.size, cfg.dct_low, cfg.dct_high),
                               cfg.pdhg, cfg.tv_accept_inexact);
    const ComplexTensor u0(Shape{cfg.size, cfg.size}, cplx(cfg.u_init, 0.0));
    s.x0 = E->pack(u0, std::vector<ComplexTensor>(cfg.coils, ComplexTensor(Shape{cfg.size, cfg.size}, cplx(1.0, 0.0))));
    s.extra_columns = {"tv_value"};
    s.metrics = [E](const SolverState& st, MonitorRecord& rec) {
        rec.extras.push_back({"tv_value", complex_tv(extract_block(st.u, E->block(0)))});
    };
    s.snapshot = [E](const std::filesystem::path& dir, int k, const Tensor& x) {
        const ComplexTensor u = E->unpack(x, 0);
        Tensor mag(u.shape());
        for (std::size_t i = 0; i < u.size(); ++i) mag[i] = std::abs(u[i]);
        write_pgm_snapshot(dir / ("iter_" + std::to_string(k) + ".pgm"), mag);
    };
    s.summarize = [E, syn](const Tensor& x, auto& out) {
        out.push_back({"final_tv", fmt(complex_tv(extract_block(x, E->block(0))))});
        out.push_back({"mask_fraction", fmt(mask_fraction(syn->mask))});
    };
    return s;
}

struct MnistSet {
    Tensor data;   ///< pixels x images, scaled to [0, 1]
    Tensor labels; ///< 10 x images one-hot
};

inline MnistSet load_mnist(const std::filesystem::path& dir, const std::string& prefix, std::size_t count) {
    const Tensor raw = read_idx_images(dir / (prefix + "-images-idx3-ubyte"), count);
    const std::vector<int> lab = read_idx_labels(dir / (prefix + "-labels-idx1-ubyte"), count);
    if (raw.dim(0) < count || lab.size() < count) {
        throw IoError(dir.string() + ": fewer than " + std::to_string(count) + " " + prefix + " images");
    }
    MnistSet set;
    set.data = transpose(raw);
    set.data *= 1.0 / 255.0;
    set.labels = one_hot(lab, 10);
    return set;
}

inline ExperimentSetup setup_classifier(const ExperimentConfig& cfg) {
    std::shared_ptr<MnistSet> train, test;
    try {
        train = std::make_shared<MnistSet>(load_mnist(cfg.mnist_dir, "train", cfg.train_count));
        if (cfg.test_count > 0) test = std::make_shared<MnistSet>(load_mnist(cfg.mnist_dir, "t10k", cfg.test_count));
    } catch (const IoError& e) {
        throw ConfigError(std::string("mnist_dir: ") + e.what(), cfg.given.count("mnist_dir") ? cfg.given.at("mnist_dir") : 0);
    }
    const std::size_t pixels = train->data.dim(0);
    const std::vector<Shape> shapes{{10, cfg.hidden}, {cfg.hidden, pixels}};
    const std::vector<Activation> acts{{parse_activation(cfg.output_activation), cfg.beta, cfg.smooth_c},
                                       {parse_activation(cfg.activation), cfg.beta, cfg.smooth_c}};
    const Loss loss{parse_loss(cfg.loss), cfg.kl_shift};
    auto E = std::make_shared<ClassifierObjective>(train->data, train->labels, shapes, acts, loss,
                                                   cfg.level_set_eps.value_or(std::numeric_limits<double>::epsilon()));
    ExperimentSetup s;
    s.E = E;
    s.R = make_classifier_regularizer(*E, cfg.alphas);
    s.x0 = E->pack(init_layers(shapes, cfg.seed));
    s.extra_columns = {"rank_A1", "rank_A2", "prediction_rate"};
    const double tol = cfg.rank_tol;
    s.metrics = [E, tol](const SolverState& st, MonitorRecord& rec) {
        const auto layers = E->unpack(st.u);
        rec.extras.push_back({"rank_A1", static_cast<double>(rank_of(layers[0], tol))});
        rec.extras.push_back({"rank_A2", static_cast<double>(rank_of(layers[1], tol))});
        rec.extras.push_back({"prediction_rate", prediction_rate(layers, E->data(), E->labels(), E->activations())});
    };
    s.snapshot = [E](const std::filesystem::path& dir, int k, const Tensor& x) {
        const auto layers = E->unpack(x);
        for (std::size_t j = 0; j < layers.size(); ++j) {
            write_matrix_csv(dir / ("iter_" + std::to_string(k) + "_A" + std::to_string(j + 1) + ".csv"), layers[j]);
        }
    };
    s.summarize = [E, test, tol](const Tensor& x, auto& out) {
        const auto layers = E->unpack(x);
        out.push_back({"final_rank_A1", std::to_string(rank_of(layers[0], tol))});
        out.push_back({"final_rank_A2", std::to_string(rank_of(layers[1], tol))});
        out.push_back({"train_prediction_rate", fmt(prediction_rate(layers, E->data(), E->labels(), E->activations()))});
        if (test) {
            out.push_back({"test_prediction_rate",
                           fmt(prediction_rate(layers, test->data, test->labels, E->activations()))});
        }
    };
    return s;
}

inline ExperimentSetup setup_quadratic(const ExperimentConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor a(Shape{cfg.rows, cfg.cols});
    for (auto& v : a) v = gauss(rng) / std::sqrt(static_cast<double>(cfg.rows));
    Tensor x_true(Shape{cfg.cols});
    for (std::size_t i = 0; i < x_true.size(); i += 3) x_true[i] = gauss(rng);
    Tensor b = matmul(a, x_true.reshaped({cfg.cols, 1})).reshaped({cfg.rows});
    auto E = std::make_shared<QuadraticObjective>(a, b);
    ExperimentSetup s;
    s.E = E;
    const bool matrix = cfg.regularizer == "nuclear";
    s.x0 = matrix ? Tensor(cfg.matrix_shape) : Tensor(Shape{cfg.cols});
    if (cfg.regularizer == "zero") s.R = std::make_shared<ZeroFunction>();
    else if (cfg.regularizer == "l1") s.R = std::make_shared<L1Norm>(cfg.alpha);
    else if (cfg.regularizer == "nonneg") s.R = std::make_shared<NonnegIndicator>();
    else if (cfg.regularizer == "nuclear") s.R = std::make_shared<NuclearNorm>(cfg.alpha);
    else {
        s.R = std::make_shared<SimplexIndicator>();
        s.x0 = Tensor(Shape{cfg.cols}, 1.0 / static_cast<double>(cfg.cols));
    }
    s.q0 = Tensor::zeros_like(s.x0);
    s.extra_columns = {"regularizer_value"};
    const BregmanPtr R = s.R;
    s.metrics = [R](const SolverState& st, MonitorRecord& rec) {
        rec.extras.push_back({"regularizer_value", R->value(st.u)});
    };
    s.snapshot = [](const std::filesystem::path& dir, int k, const Tensor& x) {
        write_matrix_csv(dir / ("iter_" + std::to_string(k) + ".csv"), x);
    };
    s.summarize = [R](const Tensor& x, auto& out) { out.push_back({"final_regularizer_value", fmt(R->value(x))}); };
    return s;
}

inline ExperimentSetup setup_counterexample(const ExperimentConfig& cfg) {
    ExperimentSetup s;
    s.E = std::make_shared<FunctionObjective>(counterexample_objective());
    s.R = std::make_shared<NonnegIndicator>();
    s.x0 = Tensor(Shape{1}, {cfg.u0});
    s.q0 = Tensor(Shape{1}, {0.0});
    s.extra_columns = {"u", "q", "gradient"};
    s.metrics = [](const SolverState& st, MonitorRecord& rec) {
        rec.extras.push_back({"u", st.u[0]});
        rec.extras.push_back({"q", st.q[0]});
        rec.extras.push_back({"gradient", st.grad[0]});
    };
    s.snapshot = [](const std::filesystem::path& dir, int k, const Tensor& x) {
        write_matrix_csv(dir / ("iter_" + std::to_string(k) + ".csv"), x);
    };
    s.summarize = [](const Tensor&, auto&) {};
    return s;
}

} // namespace detail

/// Builds objective, regularizer and initial point for the configured problem.
inline ExperimentSetup build_experiment(const ExperimentConfig& cfg) {
    if (cfg.problem == "deconvolution") return detail::setup_deconvolution(cfg);
    if (cfg.problem == "mri") return detail::setup_mri(cfg);
    if (cfg.problem == "classifier") return detail::setup_classifier(cfg);
    if (cfg.problem == "quadratic") return detail::setup_quadratic(cfg);
    if (cfg.problem == "counterexample") return detail::setup_counterexample(cfg);
    throw ConfigError("unknown problem '" + cfg.problem + "'", cfg.given.count("problem") ? cfg.given.at("problem") : 0);
}

// ---------------------------------------------------------------------------
// Running

/// Solver failure during an experiment, with the problem and iteration attached.
class ExperimentError : public std::runtime_error {
public:
    explicit ExperimentError(const std::string& what) : std::runtime_error(what) {}
};

struct RunLog {
    std::vector<MonitorRecord> records;
    std::vector<std::string> extra_columns;
    std::string stop_reason;
    int iterations = 0;
    double wall_time = 0.0;
    double final_energy = kNaN;
    Tensor final_u;
    std::vector<std::pair<std::string, std::string>> summary;
    std::filesystem::path out_dir;
};

inline std::optional<double> effective_eta(const ExperimentConfig& cfg, const ExperimentSetup& s) {
    return cfg.discrepancy_auto ? s.eta_auto : cfg.discrepancy_eta;
}

/// Runs one configured experiment and writes log.csv, config.resolved,
/// summary and snapshots/ into cfg.out.
inline RunLog run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    ExperimentSetup setup = build_experiment(cfg);

    RunLog log;
    log.out_dir = cfg.out;
    log.extra_columns = setup.extra_columns;
    const std::filesystem::path snap_dir = log.out_dir / "snapshots";
    std::filesystem::create_directories(snap_dir);
    {
        std::ofstream resolved(log.out_dir / "config.resolved");
        resolved << resolved_config(cfg);
        if (!resolved) throw IoError("cannot write config.resolved in " + log.out_dir.string());
    }
    std::ofstream csv(log.out_dir / "log.csv");
    if (!csv) throw IoError("cannot write log.csv in " + log.out_dir.string());
    write_monitor_header(csv, setup.extra_columns);

    const std::set<int> schedule(cfg.snapshots.begin(), cfg.snapshots.end());
    BacktrackingPolicy policy{cfg.tau0, cfg.shrink, cfg.eps_decrease};
    StoppingRule stop{cfg.max_iter, effective_eta(cfg, setup), cfg.iterate_gap_tol};
    RunOptions opts;
    opts.kind = cfg.solver;
    opts.lipschitz = cfg.lipschitz;
    opts.monitor_surrogate = cfg.monitor;
    opts.on_iteration = [&](const SolverState&, const SolverState& next, MonitorRecord& rec) {
        setup.metrics(next, rec);
        write_monitor_row(csv, rec, setup.extra_columns);
        if (schedule.count(next.k)) setup.snapshot(snap_dir, next.k, next.u);
    };

    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    try {
        SolverState st0 = make_initial_state(*setup.E, *setup.R, setup.x0, cfg.tau0, setup.q0);
        if (schedule.count(0)) setup.snapshot(snap_dir, 0, st0.u);
        res = run(*setup.E, *setup.R, st0, policy, stop, opts);
    } catch (const IoError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        csv.flush();
        throw ExperimentError(cfg.problem + " / " + to_string(cfg.solver) + ": " + e.what());
    }
    log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    csv.flush();

    log.records = std::move(res.records);
    log.stop_reason = res.stop_reason;
    log.iterations = res.state.k;
    log.final_energy = res.state.energy;
    log.final_u = res.state.u;

    int decrease_bad = 0, bound_bad = 0;
    for (const auto& r : log.records) {
        decrease_bad += !r.decrease_ok;
        bound_bad += !r.bound_ok;
    }
    auto& sm = log.summary;
    sm.push_back({"log_version", std::to_string(kLogVersion)});
    sm.push_back({"problem", cfg.problem});
    sm.push_back({"solver", to_string(cfg.solver)});
    sm.push_back({"stop_reason", log.stop_reason});
    sm.push_back({"iterations", std::to_string(log.iterations)});
    sm.push_back({"wall_time_s", detail::fmt(log.wall_time)});
    sm.push_back({"final_energy", detail::fmt(log.final_energy)});
    sm.push_back({"final_surrogate", detail::fmt(res.state.surrogate)});
    sm.push_back({"final_tau", detail::fmt(res.state.tau)});
    sm.push_back({"discrepancy_eta", detail::fmt(stop.discrepancy_eta, "none")});
    sm.push_back({"backtracks", std::to_string(res.backtracks)});
    sm.push_back({"inner_iterations", std::to_string(res.inner_iterations)});
    sm.push_back({"inner_unconverged", std::to_string(res.inner_unconverged)});
    sm.push_back({"decrease_flags", std::to_string(decrease_bad)});
    sm.push_back({"bound_flags", std::to_string(bound_bad)});
    setup.summarize(log.final_u, sm);

    std::ofstream summary(log.out_dir / "summary");
    for (const auto& [k, v] : sm) summary << k << " = " << v << '\n';
    if (!summary) throw IoError("cannot write summary in " + log.out_dir.string());
    return log;
}

/// Finite-difference check of the configured objective at the initial point
/// and at `points - 1` seeded perturbations of it.
inline std::vector<FdCheckReport> grad_check_experiment(const ExperimentConfig& cfg, int points = 10,
                                                        std::size_t coords = 20) {
    validate_config(cfg);
    const ExperimentSetup setup = build_experiment(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale = 0.1 * (1.0 + norm(setup.x0) / std::sqrt(static_cast<double>(setup.x0.size())));
    std::vector<FdCheckReport> out;
    for (int p = 0; p < points; ++p) {
        Tensor x = setup.x0;
        if (p > 0) {
            for (auto& v : x) v += scale * gauss(rng);
        }
        out.push_back(finite_difference_gradient_check(*setup.E, x, coords, cfg.seed + static_cast<std::uint64_t>(p)));
    }
    return out;
}

} // namespace linbreg
