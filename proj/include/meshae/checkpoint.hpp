#pragma once

#include "meshae/geometry.hpp"
#include "meshae/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace meshae {

struct ArchitectureConfig {
    int m = 512; // latent budget in scalars; base mesh holds <= m/3 vertices
    int k = 6;   // convolution patch size
    std::vector<int> encoder_widths{32, 64, 128};
    std::vector<int> decoder_widths{128, 64, 32};
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
    bool conv_bias = true;

    int depth() const { return static_cast<int>(encoder_widths.size()); }
    void validate() const; // throws std::runtime_error on bad values

    std::string to_json_string() const;
    static ArchitectureConfig from_json_string(const std::string& s);
    uint64_t hash() const; // FNV-1a of the canonical JSON form
};

/// Named tensor store. Vectors are held as n x 1 matrices.
struct Tensor {
    std::string name;
    MatX value;
};

struct ParamSet {
    std::vector<Tensor> tensors;

    void add(std::string name, MatX value);
    MatX& at(const std::string& name);
    const MatX& at(const std::string& name) const;

    static ParamSet zeros_like(const ParamSet& other);
    void accumulate(const ParamSet& other); // elementwise +=, same layout required
    void scale(double s);
    void quantize_f32();
};

/// All learnable and persistent model state. Every tensor is kept on the f32
/// grid (updates round through float) so the f32 checkpoint payload is an
/// exact snapshot and save/resume is bit-identical.
struct Checkpoint {
    ArchitectureConfig config;
    AdamConfig adam;
    ParamSet params;  // conv weights/biases, bn gamma/beta
    ParamSet running; // bn running statistics
    ParamSet adam_m, adam_v;
    int64_t step = 0;

    static Checkpoint init(const ArchitectureConfig& config, uint64_t seed);

    /// One optimizer step over every learnable tensor, then f32 rounding.
    void apply_gradients(const ParamSet& grads);

    /// Text manifest (layer name, shape, byte offset) followed by a raw
    /// little-endian f32 payload.
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace meshae
