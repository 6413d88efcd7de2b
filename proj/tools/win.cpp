// Command-line entry point: train / denoise / eval / sweep / diagnose-seed /
// histogram. All heavy lifting lives in the headers; this file parses
// arguments, merges them over the config file and maps errors to exit codes
// (0 ok, 1 config error, 2 I/O error, 3 numerical failure).

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "win/commands.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    std::string checkpoint;
    std::string input;
    std::string clean;
    long long seed = 0;
    bool seed_set = false;
};

win::RunConfig make_run_config(const CliArgs& args) {
    win::Config cfg = args.config_path.empty() ? win::Config()
                                               : win::Config::from_file(args.config_path);
    if (args.seed_set) cfg.set("seed", std::to_string(args.seed));
    if (!args.out_dir.empty()) cfg.set("out", args.out_dir);
    if (!args.checkpoint.empty()) cfg.set("checkpoint", args.checkpoint);
    if (!args.input.empty()) cfg.set("input", args.input);
    if (!args.clean.empty()) cfg.set("clean", args.clean);
    return win::parse_run_config(cfg);
}

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key=value lines)");
    cmd->add_option("--seed", args.seed, "global seed, overrides the config")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--out", args.out_dir, "output directory");
}

int run_train(const CliArgs& args) {
    const win::TrainArtifacts artifacts = win::cmd_train(make_run_config(args));
    std::cout << "trained " << artifacts.result.epoch_loss.size() << " epochs, final loss "
              << artifacts.result.epoch_loss.back() << ", final val psnr "
              << artifacts.result.epoch_val_psnr.back() << " dB\n";
    std::cout << "checkpoint: " << artifacts.checkpoint_path << "\n";
    std::cout << "log: " << artifacts.log_path << "\n";
    return 0;
}

int run_denoise(const CliArgs& args) {
    const win::QualityReport report = win::cmd_denoise(make_run_config(args));
    if (!report.images.empty()) {
        std::cout << "denoised " << report.images.size() << " image(s), average psnr "
                  << report.mean_psnr() << " dB, ssim " << report.mean_ssim() << "\n";
    } else {
        std::cout << "denoised image(s) written\n";
    }
    return 0;
}

int run_eval(const CliArgs& args) {
    const auto per_sigma = win::cmd_eval(make_run_config(args));
    win::write_quality_table(std::cout, per_sigma);
    return 0;
}

int run_sweep(const CliArgs& args) {
    const auto entries = win::cmd_sweep(make_run_config(args));
    for (const win::SweepEntry& e : entries) {
        std::cout << e.name << " params=" << e.params << " final_loss=" << e.final_loss
                  << " final_val_loss=" << e.final_val_loss
                  << " final_val_psnr=" << e.final_val_psnr << "\n";
    }
    return 0;
}

int run_diagnose(const CliArgs& args) {
    const win::DiagnoseResult r = win::cmd_diagnose_seed(make_run_config(args));
    std::cout << "sigma=" << r.sigma << " epochs=" << r.epochs << "\n";
    std::cout << "model            psnr(frozen-noise)  psnr(fresh-noise)  gap\n";
    std::cout << "frozen-trained   " << r.frozen_on_frozen << "  " << r.frozen_on_fresh << "  "
              << r.gap_frozen() << "\n";
    std::cout << "fresh-trained    " << r.fresh_on_frozen << "  " << r.fresh_on_fresh << "  "
              << r.gap_fresh() << "\n";
    std::cout << "margin " << r.margin() << " dB\n";
    return 0;
}

int run_histogram(const CliArgs& args) {
    const auto results = win::cmd_histogram(make_run_config(args));
    for (const win::HistogramSigmaResult& res : results) {
        std::cout << "sigma=" << res.sigma << " mean_distance=" << res.mean_distance << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wide shallow convolutional denoiser"};
    app.require_subcommand(1);
    CliArgs args;

    CLI::App* train = app.add_subcommand("train", "train a model on a directory of images");
    add_common(train, args);
    CLI::App* denoise = app.add_subcommand("denoise", "denoise images with a checkpoint");
    add_common(denoise, args);
    denoise->add_option("--checkpoint", args.checkpoint, "checkpoint file");
    denoise->add_option("--input", args.input, "noisy image or directory");
    denoise->add_option("--clean", args.clean, "directory of clean references (optional)");
    CLI::App* eval = app.add_subcommand("eval", "corrupt clean images and score a checkpoint");
    add_common(eval, args);
    eval->add_option("--checkpoint", args.checkpoint, "checkpoint file");
    CLI::App* sweep = app.add_subcommand("sweep", "train variants over L/K/F lists");
    add_common(sweep, args);
    CLI::App* diagnose =
        app.add_subcommand("diagnose-seed", "compare frozen-noise vs fresh-noise training");
    add_common(diagnose, args);
    CLI::App* hist = app.add_subcommand("histogram", "pixel-histogram distances under noise");
    add_common(hist, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return run_train(args);
        if (denoise->parsed()) return run_denoise(args);
        if (eval->parsed()) return run_eval(args);
        if (sweep->parsed()) return run_sweep(args);
        if (diagnose->parsed()) return run_diagnose(args);
        if (hist->parsed()) return run_histogram(args);
    } catch (const win::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const win::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const win::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
