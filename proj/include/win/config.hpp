#pragma once

// Flat, line-oriented key=value config with dotted section prefixes
// (model., optim., noise., data.) and a handful of run-level keys. '#' starts
// a comment. Unknown keys are rejected so typos surface as config errors.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "win/errors.hpp"
#include "win/model.hpp"
#include "win/noise.hpp"
#include "win/optim.hpp"

namespace win {

namespace detail {
inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "model.preset", "model.layers", "model.L", "model.K", "model.F", "model.bn",
        "model.skip", "model.target",
        "optim.lr", "optim.momentum", "optim.weight_decay", "optim.clip", "optim.lr_step",
        "optim.lr_gamma", "optim.batch_size",
        "noise.sigma", "noise.sigma_lo", "noise.sigma_hi", "noise.seed", "noise.seed_policy",
        "data.train_dir", "data.val_dir", "data.test_dir", "data.patch", "data.stride",
        "data.augment",
        "seed", "epochs", "checkpoint", "log", "report", "out", "input", "clean",
        "sweep.L", "sweep.K", "sweep.F",
        "eval.sigmas", "histogram.sigmas", "diagnose.epochs",
    };
    return keys;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}
}  // namespace detail

class Config {
public:
    Config() = default;

    static Config from_string(const std::string& text, const std::string& context = "<config>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(context + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
            }
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (!detail::known_config_keys().count(key)) {
                throw ConfigError(context + ":" + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
            }
            cfg.kv_[key] = value;
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError(path + ": cannot open config");
        std::ostringstream text;
        text << in.rdbuf();
        return from_string(text.str(), path);
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) {
        if (!detail::known_config_keys().count(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        kv_[key] = value;
    }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    std::string require_str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
        return it->second;
    }

    double get_f64(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_f64(key, it->second);
    }

    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_i64(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError(key + ": expected true/false, got '" + it->second + "'");
    }

    std::vector<double> get_f64_list(const std::string& key) const {
        std::vector<double> out;
        auto it = kv_.find(key);
        if (it == kv_.end()) return out;
        for (const std::string& tok : split_commas(it->second)) out.push_back(parse_f64(key, tok));
        return out;
    }

    std::vector<std::int64_t> get_i64_list(const std::string& key) const {
        std::vector<std::int64_t> out;
        auto it = kv_.find(key);
        if (it == kv_.end()) return out;
        for (const std::string& tok : split_commas(it->second)) out.push_back(parse_i64(key, tok));
        return out;
    }

private:
    static std::vector<std::string> split_commas(const std::string& s) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            std::size_t end = s.find(',', pos);
            if (end == std::string::npos) end = s.size();
            const std::string tok = detail::trim(s.substr(pos, end - pos));
            if (!tok.empty()) out.push_back(tok);
            pos = end + 1;
        }
        return out;
    }

    static double parse_f64(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a number, got '" + v + "'");
        }
    }

    static std::int64_t parse_i64(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const std::int64_t i = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return i;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected an integer, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> kv_;
};

// Everything a command needs, resolved and validated.
struct RunConfig {
    ModelSpec model_spec;
    OptimConfig optim;
    NoiseConfig noise;

    std::uint64_t seed = 0;
    std::int64_t epochs = 1;
    std::int64_t diagnose_epochs = 0;  // 0 means: use `epochs`

    std::string train_dir;
    std::string val_dir;   // empty: fall back to train_dir
    std::string test_dir;  // empty: fall back to train_dir
    std::int64_t patch = 17;
    std::int64_t stride = 8;
    bool augment_data = false;

    std::string checkpoint_path;
    std::string log_path;
    std::string report_path;
    std::string out_dir;
    std::string input_path;  // denoise input image or directory
    std::string clean_dir;   // optional clean references for denoise

    std::vector<std::int64_t> sweep_depths;
    std::vector<std::int64_t> sweep_filters;
    std::vector<std::int64_t> sweep_kernels;
    std::vector<double> eval_sigmas;
    std::vector<double> histogram_sigmas;

    // Parametric base used by sweep variants.
    std::int64_t base_depth = 3;
    std::int64_t base_filters = 8;
    std::int64_t base_kernel = 3;
    bool base_bn = false;
};

inline RunConfig parse_run_config(const Config& cfg) {
    RunConfig run;

    run.seed = static_cast<std::uint64_t>(cfg.get_i64("seed", 0));

    // Model: explicit layer list > preset > parametric win(L,K,F).
    run.base_depth = cfg.get_i64("model.L", 3);
    run.base_filters = cfg.get_i64("model.K", 8);
    run.base_kernel = cfg.get_i64("model.F", 3);
    run.base_bn = cfg.get_bool("model.bn", false);
    const bool skip = cfg.get_bool("model.skip", true);
    const TargetMode target = [&] {
        try {
            return target_mode_from_string(
                cfg.get_str("model.target", skip ? "residual_skip" : "direct"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();
    try {
        if (cfg.has("model.layers")) {
            run.model_spec.layers = parse_layer_specs(cfg.require_str("model.layers"));
            run.model_spec.skip = skip;
            run.model_spec.target = target;
        } else if (cfg.has("model.preset")) {
            run.model_spec = model_preset(cfg.require_str("model.preset"));
            if (cfg.has("model.skip")) run.model_spec.skip = skip;
            if (cfg.has("model.target")) run.model_spec.target = target;
        } else {
            run.model_spec =
                win_spec(run.base_depth, run.base_filters, run.base_kernel, run.base_bn, skip,
                         target);
        }
        run.model_spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    run.optim.base_lr = cfg.get_f64("optim.lr", 0.1);
    run.optim.momentum = cfg.get_f64("optim.momentum", 0.9);
    run.optim.weight_decay = cfg.get_f64("optim.weight_decay", 1e-4);
    run.optim.clip = cfg.get_f64("optim.clip", 0.1);
    run.optim.step_size = cfg.get_i64("optim.lr_step", 30);
    run.optim.gamma = cfg.get_f64("optim.lr_gamma", 0.1);
    run.optim.batch_size = cfg.get_i64("optim.batch_size", 64);
    try {
        run.optim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const double sigma = cfg.get_f64("noise.sigma", 50.0);
    run.noise.sigma_lo = cfg.get_f64("noise.sigma_lo", sigma);
    run.noise.sigma_hi = cfg.get_f64("noise.sigma_hi", sigma);
    const std::string policy = cfg.get_str("noise.seed_policy", "fresh");
    if (policy == "fresh") {
        run.noise.seed_policy = SeedPolicy::fresh;
    } else if (policy == "frozen") {
        run.noise.seed_policy = SeedPolicy::frozen;
    } else {
        throw ConfigError("noise.seed_policy: expected fresh or frozen, got '" + policy + "'");
    }
    run.noise.seed = static_cast<std::uint64_t>(
        cfg.get_i64("noise.seed", static_cast<std::int64_t>(run.seed)));
    try {
        run.noise.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    run.epochs = cfg.get_i64("epochs", 1);
    if (run.epochs < 1) throw ConfigError("epochs must be >= 1");
    run.diagnose_epochs = cfg.get_i64("diagnose.epochs", 0);

    run.train_dir = cfg.get_str("data.train_dir", "");
    run.val_dir = cfg.get_str("data.val_dir", "");
    run.test_dir = cfg.get_str("data.test_dir", "");
    run.patch = cfg.get_i64("data.patch", 17);
    run.stride = cfg.get_i64("data.stride", 8);
    run.augment_data = cfg.get_bool("data.augment", false);
    if (run.patch < 1 || run.stride < 1) throw ConfigError("data.patch and data.stride must be >= 1");

    run.checkpoint_path = cfg.get_str("checkpoint", "");
    run.log_path = cfg.get_str("log", "");
    run.report_path = cfg.get_str("report", "");
    run.out_dir = cfg.get_str("out", "");
    run.input_path = cfg.get_str("input", "");
    run.clean_dir = cfg.get_str("clean", "");

    run.sweep_depths = cfg.get_i64_list("sweep.L");
    run.sweep_filters = cfg.get_i64_list("sweep.K");
    run.sweep_kernels = cfg.get_i64_list("sweep.F");
    run.eval_sigmas = cfg.get_f64_list("eval.sigmas");
    run.histogram_sigmas = cfg.get_f64_list("histogram.sigmas");
    if (run.histogram_sigmas.empty()) run.histogram_sigmas = {10.0, 50.0};

    return run;
}

}  // namespace win
