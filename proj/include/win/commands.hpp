#pragma once

// Implementations of the CLI commands (train, denoise, eval, sweep,
// diagnose-seed, histogram). The binary in tools/ only parses arguments and
// dispatches here; tests call these directly.
//
// Every artifact a command writes is deterministic for a fixed config and
// seed, except the single leading "# run <timestamp>" header line of logs and
// reports.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "win/checkpoint.hpp"
#include "win/config.hpp"
#include "win/data.hpp"
#include "win/errors.hpp"
#include "win/metrics.hpp"
#include "win/train.hpp"

namespace win {

namespace detail {

inline std::string timestamp_line() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string("# run ") + buf;
}

inline void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

// Explicit path if configured, otherwise `name` inside the out dir (or the
// working directory when no out dir is set).
inline std::string resolve_out_path(const RunConfig& run, const std::string& explicit_path,
                                    const std::string& name) {
    std::string path = explicit_path;
    if (path.empty()) {
        path = run.out_dir.empty() ? name
                                   : (std::filesystem::path(run.out_dir) / name).string();
    }
    ensure_parent_dir(path);
    return path;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    return out;
}

inline std::vector<Image> load_dataset_checked(const std::string& dir, const char* what) {
    if (dir.empty()) throw ConfigError(std::string(what) + " directory is required");
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError(std::string(what) + " directory does not exist: " + dir);
    }
    std::vector<Image> images = load_dataset(dir);
    if (images.empty()) throw ConfigError(std::string(what) + " directory has no images: " + dir);
    return images;
}

inline std::string basename_of(const std::string& path) {
    return std::filesystem::path(path).filename().string();
}

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

struct TrainArtifacts {
    TrainResult result;
    std::string checkpoint_path;
    std::string log_path;
    std::int64_t param_count = 0;
    std::int64_t patch_count = 0;
};

inline TrainArtifacts cmd_train(const RunConfig& run) {
    std::vector<Image> train_images = detail::load_dataset_checked(run.train_dir, "training");
    if (run.augment_data) {
        std::vector<Image> augmented;
        for (const Image& img : train_images) {
            for (Image& v : augment(img)) augmented.push_back(std::move(v));
        }
        train_images = std::move(augmented);
    }
    const std::vector<Image> val_images =
        run.val_dir.empty() ? train_images
                            : detail::load_dataset_checked(run.val_dir, "validation");

    const PatchSet patches = extract_patches(train_images, run.patch, run.stride);

    TrainArtifacts artifacts;
    artifacts.patch_count = static_cast<std::int64_t>(patches.patches.size());
    artifacts.log_path = detail::resolve_out_path(run, run.log_path, "train.log");
    artifacts.checkpoint_path = detail::resolve_out_path(run, run.checkpoint_path, "model.ckpt");

    Model model(run.model_spec, run.seed);
    artifacts.param_count = model.param_count();

    std::ofstream log = detail::open_out(artifacts.log_path);
    log << detail::timestamp_line() << "\n";
    artifacts.result = train_model(model, patches, val_images, run.optim, run.noise, run.epochs,
                                   run.seed, &log);

    std::map<std::string, std::string> meta;
    meta["train.epochs"] = std::to_string(run.epochs);
    meta["train.seed"] = std::to_string(run.seed);
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.10e", artifacts.result.epoch_loss.back());
        meta["train.final_loss"] = buf;
    }
    save_checkpoint(artifacts.checkpoint_path, model, run.noise, meta);
    return artifacts;
}

inline QualityReport cmd_denoise(const RunConfig& run) {
    if (run.input_path.empty()) throw ConfigError("denoise: input is required");
    if (run.out_dir.empty()) throw ConfigError("denoise: out directory is required");
    if (run.checkpoint_path.empty()) throw ConfigError("denoise: checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(run.checkpoint_path);

    std::vector<std::string> inputs;
    if (std::filesystem::is_directory(run.input_path)) {
        inputs = list_images(run.input_path);
        if (inputs.empty()) throw ConfigError("denoise: no images in " + run.input_path);
    } else {
        inputs.push_back(run.input_path);
    }
    std::filesystem::create_directories(run.out_dir);

    QualityReport report;
    for (const std::string& in_path : inputs) {
        const Image noisy = load_image(in_path);
        const Tensor4 denoised = ckpt.model.denoise(noisy.to_tensor());
        const std::string name = detail::basename_of(in_path);
        save_image(Image::from_tensor(denoised),
                   (std::filesystem::path(run.out_dir) / name).string());
        if (!run.clean_dir.empty()) {
            const std::string clean_path =
                (std::filesystem::path(run.clean_dir) / name).string();
            const Image clean = load_image(clean_path);
            ImageQuality q;
            q.path = name;
            q.psnr_db = psnr(denoised, clean.to_tensor());
            q.ssim = ssim(denoised, clean.to_tensor());
            report.images.push_back(std::move(q));
        }
    }
    if (!report.images.empty()) {
        std::ofstream out =
            detail::open_out(detail::resolve_out_path(run, run.report_path, "denoise.records"));
        write_records(out, report);
        out << "# average " << detail::fmt_g(report.mean_psnr()) << " "
            << detail::fmt_g(report.mean_ssim()) << "\n";
    }
    return report;
}

inline std::vector<std::pair<double, QualityReport>> cmd_eval(const RunConfig& run) {
    if (run.checkpoint_path.empty()) throw ConfigError("eval: checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(run.checkpoint_path);
    const std::string dir = run.test_dir.empty() ? run.train_dir : run.test_dir;
    const std::vector<Image> images = detail::load_dataset_checked(dir, "test");

    std::vector<double> sigmas = run.eval_sigmas;
    if (sigmas.empty()) {
        if (run.noise.is_range()) {
            throw ConfigError("eval: eval.sigmas is required when the noise config is a range");
        }
        sigmas.push_back(run.noise.sigma_lo);
    }

    std::vector<std::pair<double, QualityReport>> per_sigma;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        NoiseConfig cfg = NoiseConfig::fixed(sigmas[i], run.noise.seed_policy,
                                             run.noise.seed + i);
        NoiseSampler sampler(cfg, streams::val);
        QualityReport report;
        for (const Image& img : images) {
            const Tensor4 clean = img.to_tensor();
            auto [noisy, sigma_used] = sampler.corrupt(clean);
            const Tensor4 denoised = ckpt.model.denoise(noisy);
            ImageQuality q;
            q.path = detail::basename_of(img.source_path);
            q.sigma = sigma_used;
            q.psnr_db = psnr(denoised, clean);
            q.ssim = ssim(denoised, clean);
            report.images.push_back(std::move(q));
        }
        per_sigma.emplace_back(sigmas[i], std::move(report));
    }

    const std::string table_path = detail::resolve_out_path(run, run.report_path, "eval.txt");
    std::ofstream table = detail::open_out(table_path);
    table << detail::timestamp_line() << "\n";
    write_quality_table(table, per_sigma);
    std::ofstream records = detail::open_out(table_path + ".records");
    for (const auto& [sigma, report] : per_sigma) write_records(records, report);
    return per_sigma;
}

struct SweepEntry {
    std::string name;
    std::int64_t params = 0;
    double final_loss = 0.0;
    double final_val_loss = 0.0;
    double final_val_psnr = 0.0;
};

inline std::vector<SweepEntry> cmd_sweep(const RunConfig& run) {
    if (run.sweep_depths.empty() && run.sweep_filters.empty() && run.sweep_kernels.empty()) {
        throw ConfigError("sweep: at least one of sweep.L, sweep.K, sweep.F is required");
    }
    const std::vector<std::int64_t> depths =
        run.sweep_depths.empty() ? std::vector<std::int64_t>{run.base_depth} : run.sweep_depths;
    const std::vector<std::int64_t> filters =
        run.sweep_filters.empty() ? std::vector<std::int64_t>{run.base_filters}
                                  : run.sweep_filters;
    const std::vector<std::int64_t> kernels =
        run.sweep_kernels.empty() ? std::vector<std::int64_t>{run.base_kernel}
                                  : run.sweep_kernels;

    std::vector<Image> train_images = detail::load_dataset_checked(run.train_dir, "training");
    const std::vector<Image> val_images =
        run.val_dir.empty() ? train_images
                            : detail::load_dataset_checked(run.val_dir, "validation");
    const PatchSet patches = extract_patches(train_images, run.patch, run.stride);

    std::vector<SweepEntry> entries;
    for (std::int64_t depth : depths) {
        for (std::int64_t filter_count : filters) {
            for (std::int64_t kernel : kernels) {
                ModelSpec spec;
                try {
                    spec = win_spec(depth, filter_count, kernel, run.base_bn,
                                    run.model_spec.skip, run.model_spec.target);
                    spec.validate();
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("sweep: ") + e.what());
                }
                char name[64];
                std::snprintf(name, sizeof(name), "L%lld_K%lld_F%lld",
                              static_cast<long long>(depth), static_cast<long long>(filter_count),
                              static_cast<long long>(kernel));

                Model model(spec, run.seed);
                const std::string log_path =
                    detail::resolve_out_path(run, "", std::string("sweep_") + name + ".log");
                std::ofstream log = detail::open_out(log_path);
                log << detail::timestamp_line() << "\n";
                TrainResult result = train_model(model, patches, val_images, run.optim,
                                                 run.noise, run.epochs, run.seed, &log);
                save_checkpoint(
                    detail::resolve_out_path(run, "", std::string("sweep_") + name + ".ckpt"),
                    model, run.noise);

                SweepEntry entry;
                entry.name = name;
                entry.params = model.param_count();
                entry.final_loss = result.epoch_loss.back();
                entry.final_val_loss = result.epoch_val_loss.back();
                entry.final_val_psnr = result.epoch_val_psnr.back();
                entries.push_back(std::move(entry));
            }
        }
    }

    std::ofstream summary =
        detail::open_out(detail::resolve_out_path(run, run.report_path, "sweep_summary.txt"));
    summary << detail::timestamp_line() << "\n";
    summary << "# variant params final_train_loss final_val_loss final_val_psnr\n";
    for (const SweepEntry& e : entries) {
        char buf[192];
        std::snprintf(buf, sizeof(buf), "%s %lld %.10e %.10e %.4f", e.name.c_str(),
                      static_cast<long long>(e.params), e.final_loss, e.final_val_loss,
                      e.final_val_psnr);
        summary << buf << "\n";
    }
    return entries;
}

struct DiagnoseResult {
    double frozen_on_frozen = 0.0;  // PSNR of the frozen-trained model on its training noise
    double frozen_on_fresh = 0.0;   // ... on noise it has never seen
    double fresh_on_frozen = 0.0;
    double fresh_on_fresh = 0.0;
    double sigma = 0.0;
    std::int64_t epochs = 0;

    double gap_frozen() const { return frozen_on_frozen - frozen_on_fresh; }
    double gap_fresh() const { return fresh_on_frozen - fresh_on_fresh; }
    double margin() const { return gap_frozen() - gap_fresh(); }
};

// Twin training runs with matched budgets: one corrupts every patch with the
// single frozen noise matrix, the other draws fresh noise per patch. Both are
// then scored on (a) the frozen realization and (b) held-out fresh noise.
// A frozen-trained model collapses on (b): it has learned to cancel one
// specific matrix, not the noise distribution.
inline DiagnoseResult cmd_diagnose_seed(const RunConfig& run) {
    std::vector<Image> train_images = detail::load_dataset_checked(run.train_dir, "training");
    const std::vector<Image> val_images =
        run.val_dir.empty() ? train_images
                            : detail::load_dataset_checked(run.val_dir, "validation");
    const PatchSet patches = extract_patches(train_images, run.patch, run.stride);
    const std::int64_t epochs = run.diagnose_epochs > 0 ? run.diagnose_epochs : run.epochs;

    NoiseConfig frozen_cfg = run.noise;
    frozen_cfg.seed_policy = SeedPolicy::frozen;
    NoiseConfig fresh_cfg = run.noise;
    fresh_cfg.seed_policy = SeedPolicy::fresh;

    Model frozen_model(run.model_spec, run.seed);
    Model fresh_model(run.model_spec, run.seed);

    const std::string frozen_log_path = detail::resolve_out_path(run, "", "diagnose_frozen.log");
    const std::string fresh_log_path = detail::resolve_out_path(run, "", "diagnose_fresh.log");
    {
        std::ofstream log = detail::open_out(frozen_log_path);
        log << detail::timestamp_line() << "\n";
        train_model(frozen_model, patches, val_images, run.optim, frozen_cfg, epochs, run.seed,
                    &log);
    }
    {
        std::ofstream log = detail::open_out(fresh_log_path);
        log << detail::timestamp_line() << "\n";
        train_model(fresh_model, patches, val_images, run.optim, fresh_cfg, epochs, run.seed,
                    &log);
    }

    // Shared evaluation tensors: the exact frozen matrix the frozen run
    // trained on, and an independent fresh stream neither model has seen.
    NoiseSampler frozen_eval(frozen_cfg, streams::val);
    NoiseConfig heldout_cfg = fresh_cfg;
    heldout_cfg.seed = fresh_cfg.seed + 1000003;
    NoiseSampler fresh_eval(heldout_cfg, streams::val);

    double ff = 0.0, fr = 0.0, gf = 0.0, gr = 0.0;
    for (const Patch& p : patches.patches) {
        auto [y_frozen, s1] = frozen_eval.corrupt(p.tensor);
        auto [y_fresh, s2] = fresh_eval.corrupt(p.tensor);
        ff += psnr(frozen_model.denoise(y_frozen), p.tensor);
        fr += psnr(frozen_model.denoise(y_fresh), p.tensor);
        gf += psnr(fresh_model.denoise(y_frozen), p.tensor);
        gr += psnr(fresh_model.denoise(y_fresh), p.tensor);
    }
    const double count = static_cast<double>(patches.patches.size());

    DiagnoseResult result;
    result.frozen_on_frozen = ff / count;
    result.frozen_on_fresh = fr / count;
    result.fresh_on_frozen = gf / count;
    result.fresh_on_fresh = gr / count;
    result.sigma = run.noise.sigma_lo;
    result.epochs = epochs;

    std::ofstream report =
        detail::open_out(detail::resolve_out_path(run, run.report_path, "diagnose.txt"));
    report << detail::timestamp_line() << "\n";
    report << "sigma=" << detail::fmt_g(result.sigma) << " epochs=" << epochs
           << " patches=" << patches.patches.size() << "\n";
    report << "# model psnr_on_frozen_noise psnr_on_fresh_noise gap\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "frozen-trained %.4f %.4f %.4f\n", result.frozen_on_frozen,
                  result.frozen_on_fresh, result.gap_frozen());
    report << buf;
    std::snprintf(buf, sizeof(buf), "fresh-trained %.4f %.4f %.4f\n", result.fresh_on_frozen,
                  result.fresh_on_fresh, result.gap_fresh());
    report << buf;
    std::snprintf(buf, sizeof(buf), "margin %.4f\n", result.margin());
    report << buf;
    return result;
}

struct HistogramPair {
    std::string a;
    std::string b;
    double distance = 0.0;
};

struct HistogramSigmaResult {
    double sigma = 0.0;
    std::vector<HistogramPair> pairs;
    double mean_distance = 0.0;
};

// Corrupt every image at each sigma and compare pixel histograms pairwise.
// Higher sigma pulls the histograms of different images toward the same
// Gaussian-blurred shape, so the pairwise distance shrinks as sigma grows.
inline std::vector<HistogramSigmaResult> cmd_histogram(const RunConfig& run) {
    const std::string dir = run.test_dir.empty() ? run.train_dir : run.test_dir;
    const std::vector<Image> images = detail::load_dataset_checked(dir, "histogram input");
    if (images.size() < 2) throw ConfigError("histogram: at least 2 images are required");

    std::vector<HistogramSigmaResult> results;
    for (std::size_t i = 0; i < run.histogram_sigmas.size(); ++i) {
        const double sigma = run.histogram_sigmas[i];
        NoiseConfig cfg = NoiseConfig::fixed(sigma, run.noise.seed_policy, run.noise.seed + i);
        NoiseSampler sampler(cfg, streams::val);
        std::vector<Histogram> hists;
        for (const Image& img : images) {
            auto [noisy, sigma_used] = sampler.corrupt(img.to_tensor());
            hists.push_back(histogram(noisy));
        }
        HistogramSigmaResult res;
        res.sigma = sigma;
        double acc = 0.0;
        for (std::size_t a = 0; a < hists.size(); ++a) {
            for (std::size_t b = a + 1; b < hists.size(); ++b) {
                HistogramPair pair;
                pair.a = detail::basename_of(images[a].source_path);
                pair.b = detail::basename_of(images[b].source_path);
                pair.distance = histogram_distance(hists[a], hists[b]);
                acc += pair.distance;
                res.pairs.push_back(std::move(pair));
            }
        }
        res.mean_distance = acc / static_cast<double>(res.pairs.size());
        results.push_back(std::move(res));
    }

    std::ofstream report =
        detail::open_out(detail::resolve_out_path(run, run.report_path, "histogram.txt"));
    report << detail::timestamp_line() << "\n";
    report << "# sigma image_a image_b l1_distance\n";
    for (const HistogramSigmaResult& res : results) {
        for (const HistogramPair& pair : res.pairs) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%g %s %s %.6f\n", res.sigma, pair.a.c_str(),
                          pair.b.c_str(), pair.distance);
            report << buf;
        }
    }
    for (const HistogramSigmaResult& res : results) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "sigma=%g mean_distance=%.6f\n", res.sigma,
                      res.mean_distance);
        report << buf;
    }
    return results;
}

}  // namespace win
