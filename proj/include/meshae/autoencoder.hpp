#pragma once

#include "meshae/checkpoint.hpp"
#include "meshae/mesh.hpp"
#include "meshae/pooling.hpp"

#include <string>

namespace meshae {

/// Face-removal plan for the encoder stages: pooling removes T = 2(V - m/3)
/// faces spread over the stages, rounded up to whole collapses (4 faces each)
/// for all but the last stage; the last stage is driven by the vertex floor.
struct PoolingSchedule {
    bool empty = true;               // mesh already fits the latent budget
    uint32_t total_removed = 0;      // T
    uint32_t vertex_floor = 0;       // floor(m/3)
    std::vector<uint32_t> stage_targets; // face-count target per stage
};

PoolingSchedule make_schedule(uint32_t face_count, uint32_t vertex_count, int m, int stages = 3);

struct EncodeResult {
    Mesh base_mesh;         // latent: reconstructed base geometry + base connectivity
    PoolRecordStack records; // connectivity side channel
    PoolingSchedule schedule;
    bool schedule_reached = true;
};

/// Encoder: 9D geometric features, conv blocks with pooling, W0-only
/// projection back to 9 channels, Eq.-2 reconstruction of the base mesh.
/// With `forced` records the recorded collapse selection is replayed instead
/// of recomputed (used for gradient probes with frozen selection).
EncodeResult encode(const Mesh& mesh, const Checkpoint& ckpt, bool train_mode,
                    const PoolRecordStack* forced = nullptr);

/// Decoder: base-mesh features, unpooling + conv blocks mirroring the
/// encoder, W0-only projection, reconstruction at full resolution. The output
/// carries the original face matrix exactly.
Mesh decode(const Mesh& base_mesh, const PoolRecordStack& records, const Checkpoint& ckpt,
            bool train_mode);

struct ForwardResult {
    double loss = 0.0;
    Mesh reconstructed;
    EncodeResult encoded;
    std::vector<BatchNormObs> bn_observations; // encoder blocks then decoder blocks
    bool schedule_reached = true;
};

/// Full autoencoder pass with MSE loss against the input vertices; fills
/// `grads` (layout of ckpt.params) when non-null. Collapse selection is part
/// of the forward pass and carries no gradient.
ForwardResult forward_backward(const Mesh& mesh, const Checkpoint& ckpt, ParamSet* grads,
                               const PoolRecordStack* forced = nullptr, bool train_mode = true);

/// Folds observed batch statistics into the checkpoint's running stats, in
/// observation order.
void apply_bn_observations(Checkpoint& ckpt, const std::vector<BatchNormObs>& obs);

/// Serialized latent: base mesh quantized to f32 plus the record stack.
struct LatentCode {
    uint64_t config_hash = 0;
    std::vector<std::array<float, 3>> base_vertices;
    std::vector<FaceTriple> base_faces;
    PoolRecordStack records;

    size_t latent_scalar_count() const { return base_vertices.size() * 3; }
    size_t record_byte_size() const;
    Mesh base_mesh() const;

    static LatentCode from_encode(const EncodeResult& enc, uint64_t config_hash);
    void save(const std::string& path) const;
    static LatentCode load(const std::string& path);
};

} // namespace meshae
