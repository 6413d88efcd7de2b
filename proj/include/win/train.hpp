#pragma once

// The training loop: shuffled mini-batches, SGD steps with gradient clipping,
// one validation pass per epoch, line-oriented logging.
//
// Everything random is derived from the master seed (weight init, shuffling,
// noise draws, validation corruption), so a rerun with the same config and
// seed reproduces checkpoints and logs bit for bit.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "win/data.hpp"
#include "win/errors.hpp"
#include "win/metrics.hpp"
#include "win/model.hpp"
#include "win/noise.hpp"
#include "win/optim.hpp"

namespace win {

struct TrainResult {
    std::vector<double> epoch_loss;      // patch-weighted mean of batch losses
    std::vector<double> epoch_val_psnr;  // mean per-image PSNR on the validation set
    std::vector<double> epoch_val_loss;  // the training objective on the validation set
};

namespace detail {
inline std::string fmt_log_line(std::int64_t epoch, double lr, double loss, double val_psnr) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%lld %g %.10e %.4f", static_cast<long long>(epoch), lr,
                  loss, val_psnr);
    return buf;
}
}  // namespace detail

struct ValScore {
    double psnr = 0.0;
    double loss = 0.0;
};

// Validation: corrupt each clean image with fresh noise drawn from a
// per-epoch stream (frozen training noise never leaks into validation, whose
// point is performance on noise the model has not seen), denoise, and score.
// PSNR is averaged per image on the clamped output; the loss is the training
// objective evaluated in inference mode on the unclamped estimate.
inline ValScore validate(const Model& model, const std::vector<Image>& val_images,
                         const NoiseConfig& noise, std::uint64_t seed, std::int64_t epoch) {
    ValScore score;
    if (val_images.empty()) return score;
    NoiseConfig val_cfg = noise;
    val_cfg.seed_policy = SeedPolicy::fresh;
    val_cfg.seed = seed + static_cast<std::uint64_t>(epoch);
    NoiseSampler sampler(val_cfg, streams::val);
    for (const Image& img : val_images) {
        const Tensor4 clean = img.to_tensor();
        auto [noisy, sigma] = sampler.corrupt(clean);
        const Tensor4 raw = model.denoise_raw(noisy);
        score.psnr += psnr(clamp01(raw), clean);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double d = raw[i] - clean[i];
            score.loss += d * d;
        }
    }
    score.psnr /= static_cast<double>(val_images.size());
    score.loss /= 2.0 * static_cast<double>(val_images.size());
    return score;
}

inline TrainResult train_model(Model& model, const PatchSet& train_patches,
                               const std::vector<Image>& val_images, const OptimConfig& optim,
                               const NoiseConfig& noise, std::int64_t epochs,
                               std::uint64_t seed, std::ostream* log = nullptr) {
    optim.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (train_patches.patches.empty()) throw ConfigError("training patch set is empty");

    OptimState state = OptimState::make(model, optim);
    NoiseSampler train_sampler(noise, streams::noise);

    if (log) {
        *log << "# params=" << model.param_count() << "\n";
        *log << "# columns: epoch lr train_loss val_psnr\n";
    }

    TrainResult result;
    Grads grads;
    for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
        state.epoch = epoch;
        state.lr = lr_at(epoch, optim);

        BatchStream batches(train_patches, train_sampler, optim.batch_size,
                            seed + static_cast<std::uint64_t>(epoch));
        Batch batch;
        double loss_acc = 0.0;
        std::int64_t patch_count = 0;
        while (batches.next(batch)) {
            const double loss = model.loss_and_grad(batch.y, batch.x, grads);
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite training loss at epoch " +
                                   std::to_string(epoch) + " after " +
                                   std::to_string(patch_count) + " patches");
            }
            clip_gradients(grads, optim.clip);
            sgd_step(model, grads, state, optim);
            const std::int64_t n = batch.x.shape().n;
            loss_acc += loss * static_cast<double>(n);
            patch_count += n;
        }
        const double epoch_loss = loss_acc / static_cast<double>(patch_count);
        const ValScore val = validate(model, val_images, noise, seed, epoch);
        result.epoch_loss.push_back(epoch_loss);
        result.epoch_val_psnr.push_back(val.psnr);
        result.epoch_val_loss.push_back(val.loss);
        if (log) *log << detail::fmt_log_line(epoch + 1, state.lr, epoch_loss, val.psnr) << "\n";
    }
    return result;
}

}  // namespace win
