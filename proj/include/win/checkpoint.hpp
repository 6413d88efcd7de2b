#pragma once

// Checkpoint format "WINCKPT1":
//   bytes 0..7   magic "WINCKPT1"
//   u32 LE       header byte length
//   header       key=value lines: model spec, target mode, noise policy and
//                training metadata
//   payload      little-endian f32 blocks in layer order: conv weights, bias,
//                then gamma, beta, running_mean, running_var for BN layers
//
// Parameters train in f64 but are stored as f32; a save/load round trip
// perturbs inference outputs by no more than the f32 quantization.

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "win/errors.hpp"
#include "win/model.hpp"
#include "win/noise.hpp"

namespace win {

inline constexpr char kCheckpointMagic[] = "WINCKPT1";

namespace detail {

inline void write_u32le(std::ostream& os, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t read_u32le(std::istream& is, const std::string& path) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (is.gcount() != 4) throw IoError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void write_f32le(std::ostream& os, double v) {
    write_u32le(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline double read_f32le(std::istream& is, const std::string& path) {
    return static_cast<double>(std::bit_cast<float>(read_u32le(is, path)));
}

inline void write_block(std::ostream& os, const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) write_f32le(os, data[i]);
}

inline void read_block(std::istream& is, double* data, std::size_t count,
                       const std::string& path) {
    for (std::size_t i = 0; i < count; ++i) data[i] = read_f32le(is, path);
}

inline std::map<std::string, std::string> parse_kv_lines(const std::string& text,
                                                         const std::string& context) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError(context + ": bad header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace detail

struct Checkpoint {
    Model model;
    NoiseConfig noise;
    std::map<std::string, std::string> meta;  // remaining header fields
};

inline void save_checkpoint(const std::string& path, const Model& model,
                            const NoiseConfig& noise,
                            const std::map<std::string, std::string>& meta = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");

    const ModelSpec& spec = model.spec();
    std::ostringstream header;
    header << "format=1\n";
    header << "layers=" << format_layer_specs(spec.layers) << "\n";
    header << "skip=" << (spec.skip ? "true" : "false") << "\n";
    header << "target=" << to_string(spec.target) << "\n";
    header << "image_channels=" << spec.image_channels << "\n";
    if (!model.layers().empty() && spec.any_bn()) {
        const BnParams* bn = nullptr;
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            if (spec.layers[i].bn) {
                bn = &model.layers()[i].bn;
                break;
            }
        }
        header << "bn_epsilon=" << bn->epsilon << "\n";
        header << "bn_momentum=" << bn->momentum << "\n";
    }
    header << "noise.sigma_lo=" << noise.sigma_lo << "\n";
    header << "noise.sigma_hi=" << noise.sigma_hi << "\n";
    header << "noise.seed_policy="
           << (noise.seed_policy == SeedPolicy::frozen ? "frozen" : "fresh") << "\n";
    header << "noise.seed=" << noise.seed << "\n";
    for (const auto& [k, v] : meta) header << k << "=" << v << "\n";

    const std::string header_text = header.str();
    out.write(kCheckpointMagic, 8);
    detail::write_u32le(out, static_cast<std::uint32_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    for (const LayerParams& p : model.layers()) {
        detail::write_block(out, p.conv.weights.data(), p.conv.weights.size());
        detail::write_block(out, p.conv.bias.data(), p.conv.bias.size());
    }
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        if (!spec.layers[i].bn) continue;
        const BnParams& bn = model.layers()[i].bn;
        detail::write_block(out, bn.gamma.data(), bn.gamma.size());
        detail::write_block(out, bn.beta.data(), bn.beta.size());
        detail::write_block(out, bn.running_mean.data(), bn.running_mean.size());
        detail::write_block(out, bn.running_var.data(), bn.running_var.size());
    }
    if (!out) throw IoError(path + ": write failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != kCheckpointMagic) {
        throw IoError(path + ": checkpoint magic mismatch");
    }
    const std::uint32_t header_len = detail::read_u32le(in, path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    if (in.gcount() != static_cast<std::streamsize>(header_len)) {
        throw IoError(path + ": truncated checkpoint header");
    }
    std::map<std::string, std::string> kv = detail::parse_kv_lines(header_text, path);

    auto take = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError(path + ": missing header field '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    if (take("format") != "1") throw IoError(path + ": unsupported checkpoint format");
    ModelSpec spec;
    spec.layers = parse_layer_specs(take("layers"));
    spec.skip = take("skip") == "true";
    spec.target = target_mode_from_string(take("target"));
    if (auto it = kv.find("image_channels"); it != kv.end()) {
        spec.image_channels = std::stoll(it->second);
        kv.erase(it);
    }

    Checkpoint ckpt;
    ckpt.model = Model(spec, 0);

    ckpt.noise.sigma_lo = std::stod(take("noise.sigma_lo"));
    ckpt.noise.sigma_hi = std::stod(take("noise.sigma_hi"));
    ckpt.noise.seed_policy =
        take("noise.seed_policy") == "frozen" ? SeedPolicy::frozen : SeedPolicy::fresh;
    ckpt.noise.seed = std::stoull(take("noise.seed"));

    double bn_epsilon = 1e-5, bn_momentum = 0.1;
    if (auto it = kv.find("bn_epsilon"); it != kv.end()) {
        bn_epsilon = std::stod(it->second);
        kv.erase(it);
    }
    if (auto it = kv.find("bn_momentum"); it != kv.end()) {
        bn_momentum = std::stod(it->second);
        kv.erase(it);
    }
    ckpt.meta = std::move(kv);

    for (LayerParams& p : ckpt.model.layers()) {
        detail::read_block(in, p.conv.weights.data(), p.conv.weights.size(), path);
        detail::read_block(in, p.conv.bias.data(), p.conv.bias.size(), path);
    }
    for (std::size_t i = 0; i < ckpt.model.layers().size(); ++i) {
        if (!spec.layers[i].bn) continue;
        BnParams& bn = ckpt.model.layers()[i].bn;
        detail::read_block(in, bn.gamma.data(), bn.gamma.size(), path);
        detail::read_block(in, bn.beta.data(), bn.beta.size(), path);
        detail::read_block(in, bn.running_mean.data(), bn.running_mean.size(), path);
        detail::read_block(in, bn.running_var.data(), bn.running_var.size(), path);
        bn.epsilon = bn_epsilon;
        bn.momentum = bn_momentum;
        bn.stats_ready = true;
    }
    return ckpt;
}

}  // namespace win
