#pragma once

#include "meshae/geometry.hpp"
#include "meshae/mesh.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace meshae {

struct RemovedFace {
    uint32_t id;
    FaceTriple tri; // original triple, pre-collapse vertex numbering
};

struct ModifiedFace {
    uint32_t id;
    FaceTriple before;
    FaceTriple after; // pre-collapse vertex numbering (rewrite precedes vertex removal)
};

/// Full bookkeeping of one face collapse. All ids refer to the mesh state
/// immediately before the collapse; replaying records backward restores that
/// state's face matrix bitwise.
struct CollapseRecord {
    uint32_t kept_vertex = 0;
    std::array<uint32_t, 2> removed_vertices{}; // ascending
    std::vector<RemovedFace> removed_faces;     // ascending id
    std::vector<ModifiedFace> modified_faces;   // ascending id
};

/// w_f = sum over direct edge-neighbors of the L2 feature distance.
double face_weight(const MatX& features, const Mesh& mesh, uint32_t face);

/// Dry-run of a collapse of `face` (vertices other than the smallest id merge
/// into it). Returns nullopt when the collapse is rejected: it would create a
/// duplicate face (two faces with the same vertex set) or leave a surviving
/// face with fewer than 3 distinct vertices.
std::optional<CollapseRecord> plan_collapse(const Mesh& mesh, uint32_t face);

/// Feature flow of one applied collapse, kept for the backward pass. Ids are
/// in pre-collapse numbering.
struct CollapseFlow {
    uint32_t pre_faces = 0;
    std::vector<uint32_t> removed_ids; // ascending
    // (modified face, averaging sources = {self} + pre-collapse edge-neighbors)
    std::vector<std::pair<uint32_t, std::vector<uint32_t>>> averaged;
};

/// Applies a planned collapse: replaces each modified face's features with the
/// mean of its pre-collapse neighborhood (itself + edge-neighbors), rewrites
/// triples, erases removed faces and the two merged vertices, and rebuilds
/// adjacency. Vertex coordinates are never modified. Throws when the record
/// does not match the mesh. Pass an empty features matrix (0x0) to apply the
/// structural part only.
void apply_collapse(Mesh& mesh, MatX& features, const CollapseRecord& rec,
                    CollapseFlow* flow = nullptr);

/// One pooling layer's worth of records.
struct LayerRecords {
    uint32_t pre_faces = 0;
    uint32_t post_faces = 0;
    bool target_reached = true;
    std::vector<CollapseRecord> records;
};

/// Weight-driven pooling: per round, weights are computed once, faces are
/// claimed greedily in ascending (weight, id) order subject to disjoint
/// collapse footprints, and claimed collapses are applied in claim order.
/// Stops when the face count reaches target_faces, the vertex count reaches
/// vertex_floor, or no legal collapse exists (flagged via target_reached).
LayerRecords pool_to_target(Mesh& mesh, MatX& features, uint32_t target_faces,
                            uint32_t vertex_floor = 0,
                            std::vector<CollapseFlow>* flows = nullptr);

/// Re-applies a previously recorded pooling layer (fixed collapse selection);
/// the feature flow is recomputed from the live features.
void replay_pool(Mesh& mesh, MatX& features, const LayerRecords& layer,
                 std::vector<CollapseFlow>* flows = nullptr);

/// Feature flow of one reversed collapse.
struct UnpoolFlow {
    uint32_t post_faces = 0;            // face count before this restore
    std::vector<uint32_t> inserted_ids; // ascending, restored numbering
    // per restored face in ascending-id processing order: averaging sources
    // (edge-neighbors whose features were defined at that point)
    std::vector<std::pair<uint32_t, std::vector<uint32_t>>> inits;
};

/// Replays a layer's records in reverse: restores modified faces, re-inserts
/// removed faces and vertex slots (coordinates zeroed; the decoder
/// reconstructs geometry from features), and initializes each restored face's
/// features with the mean of its already-defined edge-neighbors. Throws on
/// record/mesh inconsistency.
void unpool(Mesh& mesh, MatX& features, const LayerRecords& layer,
            std::vector<UnpoolFlow>* flows = nullptr);

/// Gradients of the (linear) feature flows, selection held fixed.
MatX pool_flow_backward(const std::vector<CollapseFlow>& flows, MatX grad);
MatX unpool_flow_backward(const std::vector<UnpoolFlow>& flows, MatX grad);

/// Connectivity side channel of the codec.
struct PoolRecordStack {
    std::vector<LayerRecords> layers;

    // Little-endian binary: u32 layer count; per layer u32 pre/post face
    // counts and u32 record count; per record kept vertex (u32), removed
    // vertices (2xu32), removed faces (count u8, then id u32 + triple 3xu32),
    // modified faces (count u16, then id u32 + 2 triples 3xu32).
    std::vector<uint8_t> serialize() const;
    static PoolRecordStack deserialize(const uint8_t* data, size_t size);
};

} // namespace meshae
