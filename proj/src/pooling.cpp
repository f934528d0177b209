#include "meshae/pooling.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace meshae {

namespace {

inline FaceTriple sorted_triple(FaceTriple t) {
    if (t[0] > t[1]) std::swap(t[0], t[1]);
    if (t[1] > t[2]) std::swap(t[1], t[2]);
    if (t[0] > t[1]) std::swap(t[0], t[1]);
    return t;
}

inline uint64_t triple_key(const FaceTriple& t) {
    FaceTriple s = sorted_triple(t);
    // vertex ids stay far below 2^21 for the mesh sizes this codec targets
    return (static_cast<uint64_t>(s[0]) << 42) | (static_cast<uint64_t>(s[1]) << 21) |
           static_cast<uint64_t>(s[2]);
}

MatX erase_rows(const MatX& m, const std::vector<uint32_t>& ids_ascending) {
    MatX out(m.rows() - static_cast<Eigen::Index>(ids_ascending.size()), m.cols());
    size_t skip = 0;
    Eigen::Index w = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (skip < ids_ascending.size() && ids_ascending[skip] == static_cast<uint32_t>(r)) {
            ++skip;
            continue;
        }
        out.row(w++) = m.row(r);
    }
    return out;
}

MatX insert_zero_rows(const MatX& m, const std::vector<uint32_t>& ids_ascending) {
    MatX out = MatX::Zero(m.rows() + static_cast<Eigen::Index>(ids_ascending.size()), m.cols());
    size_t ins = 0;
    Eigen::Index r = 0;
    for (Eigen::Index w = 0; w < out.rows(); ++w) {
        if (ins < ids_ascending.size() && ids_ascending[ins] == static_cast<uint32_t>(w)) {
            ++ins;
            continue;
        }
        out.row(w) = m.row(r++);
    }
    return out;
}

} // namespace

double face_weight(const MatX& features, const Mesh& mesh, uint32_t face) {
    double w = 0.0;
    for (uint32_t n : mesh.face_adjacency[face])
        w += (features.row(face) - features.row(n)).norm();
    return w;
}

std::optional<CollapseRecord> plan_collapse(const Mesh& mesh, uint32_t face) {
    const FaceTriple& t = mesh.faces[face];
    uint32_t a = std::min({t[0], t[1], t[2]});
    uint32_t b = 0, c = 0;
    {
        std::array<uint32_t, 2> rest{};
        int k = 0;
        for (uint32_t v : t)
            if (v != a) rest[k++] = v;
        b = std::min(rest[0], rest[1]);
        c = std::max(rest[0], rest[1]);
    }

    CollapseRecord rec;
    rec.kept_vertex = a;
    rec.removed_vertices = {b, c};

    std::vector<char> removed_mask(mesh.face_count(), 0);
    for (uint32_t f = 0; f < mesh.face_count(); ++f) {
        const FaceTriple& g = mesh.faces[f];
        int overlap = 0;
        uint32_t shared = 0;
        for (uint32_t v : g) {
            if (v == a || v == b || v == c) {
                ++overlap;
                shared = v;
            }
        }
        if (overlap >= 2) {
            // shares an edge of the central triangle: degenerates under the merge
            rec.removed_faces.push_back({f, g});
            removed_mask[f] = 1;
        } else if (overlap == 1 && shared != a) {
            FaceTriple rew = g;
            for (uint32_t& v : rew)
                if (v == b || v == c) v = a;
            if (rew[0] == rew[1] || rew[1] == rew[2] || rew[0] == rew[2]) return std::nullopt;
            rec.modified_faces.push_back({f, g, rew});
        }
    }

    // duplicate-face guard: a rewritten face may not coincide (as a vertex
    // set) with any other surviving face
    std::unordered_set<uint64_t> survivors;
    survivors.reserve(mesh.face_count());
    std::vector<char> modified_mask(mesh.face_count(), 0);
    for (const ModifiedFace& m : rec.modified_faces) modified_mask[m.id] = 1;
    for (uint32_t f = 0; f < mesh.face_count(); ++f)
        if (!removed_mask[f] && !modified_mask[f]) survivors.insert(triple_key(mesh.faces[f]));
    for (const ModifiedFace& m : rec.modified_faces) {
        uint64_t key = triple_key(m.after);
        if (survivors.count(key)) return std::nullopt;
        survivors.insert(key);
    }
    return rec;
}

void apply_collapse(Mesh& mesh, MatX& features, const CollapseRecord& rec, CollapseFlow* flow) {
    const uint32_t f_count = static_cast<uint32_t>(mesh.face_count());
    const bool with_features = features.size() > 0;
    if (with_features && features.rows() != static_cast<Eigen::Index>(f_count))
        throw std::runtime_error("apply_collapse: feature rows != face count");

    for (const RemovedFace& r : rec.removed_faces)
        if (r.id >= f_count || mesh.faces[r.id] != r.tri)
            throw std::runtime_error("apply_collapse: removed-face record does not match mesh");
    for (const ModifiedFace& m : rec.modified_faces)
        if (m.id >= f_count || mesh.faces[m.id] != m.before)
            throw std::runtime_error("apply_collapse: modified-face record does not match mesh");

    if (flow) {
        flow->pre_faces = f_count;
        flow->removed_ids.clear();
        flow->averaged.clear();
    }

    // modified faces take the mean of their pre-collapse region: themselves
    // plus every pre-collapse edge-neighbor (this is how information from the
    // removed faces survives pooling)
    if (with_features) {
        std::vector<std::pair<uint32_t, Eigen::RowVectorXd>> new_rows;
        new_rows.reserve(rec.modified_faces.size());
        for (const ModifiedFace& m : rec.modified_faces) {
            std::vector<uint32_t> srcs;
            const std::vector<uint32_t>& adj = mesh.face_adjacency[m.id];
            srcs.reserve(adj.size() + 1);
            bool self_in = false;
            for (uint32_t n : adj) {
                if (!self_in && n > m.id) {
                    srcs.push_back(m.id);
                    self_in = true;
                }
                srcs.push_back(n);
            }
            if (!self_in) srcs.push_back(m.id);
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(features.cols());
            for (uint32_t s : srcs) mean += features.row(s);
            mean /= static_cast<double>(srcs.size());
            new_rows.emplace_back(m.id, std::move(mean));
            if (flow) flow->averaged.emplace_back(m.id, std::move(srcs));
        }
        for (auto& [id, row] : new_rows) features.row(id) = row;
    } else if (flow) {
        for (const ModifiedFace& m : rec.modified_faces) {
            std::vector<uint32_t> srcs = mesh.face_adjacency[m.id];
            srcs.push_back(m.id);
            std::sort(srcs.begin(), srcs.end());
            flow->averaged.emplace_back(m.id, std::move(srcs));
        }
    }

    for (const ModifiedFace& m : rec.modified_faces) mesh.faces[m.id] = m.after;

    std::vector<uint32_t> removed_ids;
    removed_ids.reserve(rec.removed_faces.size());
    for (const RemovedFace& r : rec.removed_faces) removed_ids.push_back(r.id);
    std::sort(removed_ids.begin(), removed_ids.end());
    if (flow) flow->removed_ids = removed_ids;

    for (size_t i = removed_ids.size(); i-- > 0;)
        mesh.faces.erase(mesh.faces.begin() + removed_ids[i]);
    if (with_features) features = erase_rows(features, removed_ids);

    // merged vertices disappear from the numbering; coordinates of everything
    // else are untouched
    const uint32_t b = rec.removed_vertices[0], c = rec.removed_vertices[1];
    for (FaceTriple& t : mesh.faces) {
        for (uint32_t& v : t) {
            if (v == b || v == c)
                throw std::runtime_error("apply_collapse: surviving face references removed vertex");
            v -= (v > b ? 1 : 0) + (v > c ? 1 : 0);
        }
    }
    mesh.vertices.erase(mesh.vertices.begin() + c);
    mesh.vertices.erase(mesh.vertices.begin() + b);

    mesh.rebuild_adjacency();
}

LayerRecords pool_to_target(Mesh& mesh, MatX& features, uint32_t target_faces,
                            uint32_t vertex_floor, std::vector<CollapseFlow>* flows) {
    LayerRecords layer;
    layer.pre_faces = static_cast<uint32_t>(mesh.face_count());

    for (;;) {
        const uint32_t f_count = static_cast<uint32_t>(mesh.face_count());
        const uint32_t v_count = static_cast<uint32_t>(mesh.vertex_count());
        if (f_count <= target_faces || v_count <= vertex_floor) break;

        // one weight computation per round
        std::vector<std::pair<double, uint32_t>> order(f_count);
        for (uint32_t f = 0; f < f_count; ++f) order[f] = {face_weight(features, mesh, f), f};
        std::sort(order.begin(), order.end()); // ties break by face id

        // claim phase: greedy, footprints must not overlap
        std::vector<char> claimed_mask(f_count, 0);
        std::vector<uint32_t> claims;
        uint32_t proj_f = f_count, proj_v = v_count;
        for (const auto& [w, f] : order) {
            if (proj_f <= target_faces || proj_v <= vertex_floor) break;
            std::optional<CollapseRecord> plan = plan_collapse(mesh, f);
            if (!plan) continue;
            bool conflict = false;
            for (const RemovedFace& r : plan->removed_faces) conflict |= claimed_mask[r.id] != 0;
            for (const ModifiedFace& m : plan->modified_faces) conflict |= claimed_mask[m.id] != 0;
            if (conflict) continue;
            for (const RemovedFace& r : plan->removed_faces) claimed_mask[r.id] = 1;
            for (const ModifiedFace& m : plan->modified_faces) claimed_mask[m.id] = 1;
            claims.push_back(f);
            proj_f -= static_cast<uint32_t>(plan->removed_faces.size());
            proj_v -= 2;
        }
        if (claims.empty()) break; // no legal collapse left

        // apply phase: claims are disjoint, but erasures shift ids, so track
        // the mapping from round-start ids to current ids
        std::vector<int64_t> cur_id(f_count);
        for (uint32_t i = 0; i < f_count; ++i) cur_id[i] = i;
        size_t applied = 0;
        for (uint32_t f : claims) {
            if (mesh.face_count() <= target_faces || mesh.vertex_count() <= vertex_floor) break;
            int64_t cf = cur_id[f];
            if (cf < 0) continue;
            std::optional<CollapseRecord> plan = plan_collapse(mesh, static_cast<uint32_t>(cf));
            if (!plan) continue; // guard may fire against an earlier claim's rewrite
            CollapseFlow flow;
            apply_collapse(mesh, features, *plan, flows ? &flow : nullptr);
            layer.records.push_back(std::move(*plan));
            if (flows) flows->push_back(std::move(flow));
            ++applied;
            std::vector<uint32_t> rem;
            for (const RemovedFace& r : layer.records.back().removed_faces) rem.push_back(r.id);
            std::sort(rem.begin(), rem.end());
            for (int64_t& id : cur_id) {
                if (id < 0) continue;
                size_t below = 0;
                bool gone = false;
                for (uint32_t r : rem) {
                    if (static_cast<int64_t>(r) == id) gone = true;
                    if (static_cast<int64_t>(r) < id) ++below;
                }
                id = gone ? -1 : id - static_cast<int64_t>(below);
            }
        }
        if (applied == 0) break;
    }

    layer.post_faces = static_cast<uint32_t>(mesh.face_count());
    layer.target_reached =
        mesh.face_count() <= target_faces || mesh.vertex_count() <= vertex_floor;
    return layer;
}

void replay_pool(Mesh& mesh, MatX& features, const LayerRecords& layer,
                 std::vector<CollapseFlow>* flows) {
    for (const CollapseRecord& rec : layer.records) {
        CollapseFlow flow;
        apply_collapse(mesh, features, rec, flows ? &flow : nullptr);
        if (flows) flows->push_back(std::move(flow));
    }
}

namespace {

void uncollapse(Mesh& mesh, MatX& features, const CollapseRecord& rec, UnpoolFlow* flow) {
    const bool with_features = features.size() > 0;
    const uint32_t b = rec.removed_vertices[0], c = rec.removed_vertices[1];
    if (b >= c) throw std::runtime_error("unpool: malformed record (vertex order)");

    if (flow) {
        flow->post_faces = static_cast<uint32_t>(mesh.face_count());
        flow->inserted_ids.clear();
        flow->inits.clear();
    }

    // restore the two vertex slots; entries shift back to pre-collapse ids
    if (b > mesh.vertex_count() || c > mesh.vertex_count() + 1)
        throw std::runtime_error("unpool: vertex record out of range");
    for (FaceTriple& t : mesh.faces) {
        for (uint32_t& v : t) {
            v += (v >= b ? 1 : 0);
            v += (v >= c ? 1 : 0);
        }
    }
    mesh.vertices.insert(mesh.vertices.begin() + b, Vec3::Zero());
    mesh.vertices.insert(mesh.vertices.begin() + c, Vec3::Zero());

    // re-insert removed faces at their original positions
    std::vector<uint32_t> inserted;
    inserted.reserve(rec.removed_faces.size());
    for (const RemovedFace& r : rec.removed_faces) inserted.push_back(r.id);
    std::sort(inserted.begin(), inserted.end());
    for (size_t i = 0; i + 1 < inserted.size(); ++i)
        if (inserted[i] == inserted[i + 1])
            throw std::runtime_error("unpool: duplicate face id in record");

    std::vector<RemovedFace> by_id = rec.removed_faces;
    std::sort(by_id.begin(), by_id.end(),
              [](const RemovedFace& x, const RemovedFace& y) { return x.id < y.id; });
    for (const RemovedFace& r : by_id) {
        if (r.id > mesh.face_count())
            throw std::runtime_error("unpool: face id collision (corrupted record stack)");
        mesh.faces.insert(mesh.faces.begin() + r.id, r.tri);
    }
    if (with_features) features = insert_zero_rows(features, inserted);

    // roll modified faces back to their original triples
    for (const ModifiedFace& m : rec.modified_faces) {
        if (m.id >= mesh.face_count() || mesh.faces[m.id] != m.after)
            throw std::runtime_error("unpool: modified-face record does not match mesh");
        mesh.faces[m.id] = m.before;
    }

    for (const FaceTriple& t : mesh.faces)
        for (uint32_t v : t)
            if (v >= mesh.vertex_count())
                throw std::runtime_error("unpool: restored face references missing vertex");

    mesh.rebuild_adjacency();

    // restored faces start from the average of their already-defined
    // neighbors, in ascending face-id order (earlier restored faces become
    // visible to later ones)
    if (flow) flow->inserted_ids = inserted;
    if (with_features || flow) {
        std::vector<char> undefined(mesh.face_count(), 0);
        for (uint32_t id : inserted) undefined[id] = 1;
        for (uint32_t id : inserted) {
            std::vector<uint32_t> srcs;
            for (uint32_t n : mesh.face_adjacency[id])
                if (!undefined[n]) srcs.push_back(n);
            if (with_features) {
                if (!srcs.empty()) {
                    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(features.cols());
                    for (uint32_t s : srcs) mean += features.row(s);
                    features.row(id) = mean / static_cast<double>(srcs.size());
                }
                // no defined neighbor: the zero initialization stands
            }
            undefined[id] = 0;
            if (flow) flow->inits.emplace_back(id, std::move(srcs));
        }
    }
}

} // namespace

void unpool(Mesh& mesh, MatX& features, const LayerRecords& layer,
            std::vector<UnpoolFlow>* flows) {
    for (size_t i = layer.records.size(); i-- > 0;) {
        UnpoolFlow flow;
        uncollapse(mesh, features, layer.records[i], flows ? &flow : nullptr);
        if (flows) flows->push_back(std::move(flow));
    }
}

MatX pool_flow_backward(const std::vector<CollapseFlow>& flows, MatX grad) {
    for (size_t i = flows.size(); i-- > 0;) {
        const CollapseFlow& fl = flows[i];
        MatX gprev = MatX::Zero(fl.pre_faces, grad.cols());
        std::vector<char> averaged_mask(fl.pre_faces, 0);
        for (const auto& [m, srcs] : fl.averaged) averaged_mask[m] = 1;

        size_t rem_ptr = 0;
        for (uint32_t pre = 0; pre < fl.pre_faces; ++pre) {
            if (rem_ptr < fl.removed_ids.size() && fl.removed_ids[rem_ptr] == pre) {
                ++rem_ptr; // removed rows receive gradient only through the averages
                continue;
            }
            if (!averaged_mask[pre]) gprev.row(pre) = grad.row(pre - rem_ptr);
        }
        for (const auto& [m, srcs] : fl.averaged) {
            size_t below = 0;
            for (uint32_t r : fl.removed_ids)
                if (r < m) ++below;
            Eigen::RowVectorXd g = grad.row(m - below) / static_cast<double>(srcs.size());
            for (uint32_t s : srcs) gprev.row(s) += g;
        }
        grad = std::move(gprev);
    }
    return grad;
}

MatX unpool_flow_backward(const std::vector<UnpoolFlow>& flows, MatX grad) {
    for (size_t i = flows.size(); i-- > 0;) {
        const UnpoolFlow& fl = flows[i];
        // chain through the sequential initializations in reverse
        for (size_t k = fl.inits.size(); k-- > 0;) {
            const auto& [face, srcs] = fl.inits[k];
            if (srcs.empty()) continue;
            Eigen::RowVectorXd g = grad.row(face) / static_cast<double>(srcs.size());
            for (uint32_t s : srcs) grad.row(s) += g;
        }
        grad = erase_rows(grad, fl.inserted_ids);
    }
    return grad;
}

namespace {

struct ByteWriter {
    std::vector<uint8_t> out;
    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v) {
        out.push_back(static_cast<uint8_t>(v));
        out.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void triple(const FaceTriple& t) {
        u32(t[0]);
        u32(t[1]);
        u32(t[2]);
    }
};

struct ByteReader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;
    uint8_t u8() {
        if (pos + 1 > n) throw std::runtime_error("record stack: truncated");
        return p[pos++];
    }
    uint16_t u16() {
        uint16_t lo = u8(), hi = u8();
        return static_cast<uint16_t>(lo | (hi << 8));
    }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
        return v;
    }
    FaceTriple triple() { return {u32(), u32(), u32()}; }
};

} // namespace

std::vector<uint8_t> PoolRecordStack::serialize() const {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(layers.size()));
    for (const LayerRecords& layer : layers) {
        w.u32(layer.pre_faces);
        w.u32(layer.post_faces);
        w.u32(static_cast<uint32_t>(layer.records.size()));
        for (const CollapseRecord& r : layer.records) {
            w.u32(r.kept_vertex);
            w.u32(r.removed_vertices[0]);
            w.u32(r.removed_vertices[1]);
            if (r.removed_faces.size() > 255)
                throw std::runtime_error("record stack: removed-face count exceeds u8");
            w.u8(static_cast<uint8_t>(r.removed_faces.size()));
            for (const RemovedFace& rf : r.removed_faces) {
                w.u32(rf.id);
                w.triple(rf.tri);
            }
            if (r.modified_faces.size() > 65535)
                throw std::runtime_error("record stack: modified-face count exceeds u16");
            w.u16(static_cast<uint16_t>(r.modified_faces.size()));
            for (const ModifiedFace& mf : r.modified_faces) {
                w.u32(mf.id);
                w.triple(mf.before);
                w.triple(mf.after);
            }
        }
    }
    return std::move(w.out);
}

PoolRecordStack PoolRecordStack::deserialize(const uint8_t* data, size_t size) {
    ByteReader rd{data, size};
    PoolRecordStack stack;
    uint32_t n_layers = rd.u32();
    stack.layers.resize(n_layers);
    for (LayerRecords& layer : stack.layers) {
        layer.pre_faces = rd.u32();
        layer.post_faces = rd.u32();
        uint32_t n_rec = rd.u32();
        layer.records.resize(n_rec);
        for (CollapseRecord& r : layer.records) {
            r.kept_vertex = rd.u32();
            r.removed_vertices = {rd.u32(), rd.u32()};
            uint8_t n_rem = rd.u8();
            r.removed_faces.resize(n_rem);
            for (RemovedFace& rf : r.removed_faces) {
                rf.id = rd.u32();
                rf.tri = rd.triple();
            }
            uint16_t n_mod = rd.u16();
            r.modified_faces.resize(n_mod);
            for (ModifiedFace& mf : r.modified_faces) {
                mf.id = rd.u32();
                mf.before = rd.triple();
                mf.after = rd.triple();
            }
        }
    }
    if (rd.pos != size) throw std::runtime_error("record stack: trailing bytes");
    return stack;
}

} // namespace meshae
