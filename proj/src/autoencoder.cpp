#include "meshae/autoencoder.hpp"

#include "meshae/conv.hpp"
#include "meshae/reconstruction.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace meshae {

PoolingSchedule make_schedule(uint32_t face_count, uint32_t vertex_count, int m, int stages) {
    PoolingSchedule s;
    s.vertex_floor = static_cast<uint32_t>(m / 3);
    s.stage_targets.assign(static_cast<size_t>(stages), face_count);
    if (vertex_count <= s.vertex_floor) return s; // already fits

    s.empty = false;
    s.total_removed = (vertex_count - s.vertex_floor) * 2; // 4 faces / 2 vertices per collapse
    uint32_t per_stage = (s.total_removed + stages - 1) / static_cast<uint32_t>(stages);
    per_stage = (per_stage + 3) / 4 * 4; // whole collapses

    uint32_t running = face_count;
    for (int i = 0; i + 1 < stages; ++i) {
        running = running > per_stage + 4 ? running - per_stage : 4;
        s.stage_targets[static_cast<size_t>(i)] = std::max<uint32_t>(running, 4);
    }
    // last stage: exact total removal; the vertex floor governs on meshes
    // whose collapses remove fewer than 4 faces (boundaries)
    uint32_t last = face_count > s.total_removed + 4 ? face_count - s.total_removed : 4;
    s.stage_targets[static_cast<size_t>(stages - 1)] = std::max<uint32_t>(last, 4);
    // keep targets monotone decreasing
    for (int i = stages - 2; i >= 0; --i)
        s.stage_targets[static_cast<size_t>(i)] = std::max(s.stage_targets[static_cast<size_t>(i)],
                                                           s.stage_targets[static_cast<size_t>(i + 1)]);
    return s;
}

namespace {

struct BlockTrace {
    ConvCache conv;
    BatchNormCache bn;
    MatX bn_out; // pre-relu activations, relu backward mask
    std::vector<CollapseFlow> pool_flows;   // encoder blocks
    std::vector<UnpoolFlow> unpool_flows;   // decoder blocks
};

struct StageWeights {
    ConvWeights conv;
    VecX gamma, beta;
    BatchNormState bn;
};

VecX column(const MatX& m) { return VecX(Eigen::Map<const VecX>(m.data(), m.size())); }

BatchNormState bn_state_of(const Checkpoint& ckpt, const std::string& prefix) {
    BatchNormState s;
    s.gamma = column(ckpt.params.at(prefix + ".gamma"));
    s.beta = column(ckpt.params.at(prefix + ".beta"));
    s.running_mean = column(ckpt.running.at(prefix + ".mean"));
    s.running_var = column(ckpt.running.at(prefix + ".var"));
    s.epsilon = ckpt.config.bn_epsilon;
    s.momentum = ckpt.config.bn_momentum;
    return s;
}

struct EncoderTape {
    std::vector<BlockTrace> blocks;
    MatX head_input;                 // features entering the encoder head
    ReconstructResult base_recon;    // counts for the base-mesh reconstruction
    std::vector<FaceTriple> base_faces;
    size_t base_vertex_count = 0;
};

struct DecoderTape {
    std::vector<BlockTrace> blocks;
    MatX head_input;
    ReconstructResult out_recon;
    std::vector<FaceTriple> out_faces;
    size_t out_vertex_count = 0;
    MatX decoder_input; // extract_geom of the base mesh
};

EncodeResult encode_impl(const Mesh& mesh, const Checkpoint& ckpt, bool train_mode,
                         EncoderTape* tape, std::vector<BatchNormObs>* obs,
                         const PoolRecordStack* forced) {
    const ArchitectureConfig& cfg = ckpt.config;
    cfg.validate();
    const int depth = cfg.depth();
    if (forced && forced->layers.size() != static_cast<size_t>(depth))
        throw std::runtime_error("encode: forced record stack has wrong layer count");

    EncodeResult result;
    result.schedule = make_schedule(static_cast<uint32_t>(mesh.face_count()),
                                    static_cast<uint32_t>(mesh.vertex_count()), cfg.m, depth);

    Mesh cur = mesh;
    MatX x = extract_geom_features(cur);
    if (tape) tape->blocks.resize(static_cast<size_t>(depth));

    for (int s = 0; s < depth; ++s) {
        BlockTrace* bt = tape ? &tape->blocks[static_cast<size_t>(s)] : nullptr;
        std::string prefix = "enc" + std::to_string(s);

        std::vector<Patch> patches = build_patches(cur, cfg.k);
        const ParamSet& p = ckpt.params;
        ConvWeights w{p.at(prefix + ".conv.w0"), p.at(prefix + ".conv.w1"),
                      p.at(prefix + ".conv.w2"), p.at(prefix + ".conv.w3"),
                      cfg.conv_bias ? column(p.at(prefix + ".conv.bias")) : VecX()};
        MatX c = mesh_conv_forward(x, patches, w, bt ? &bt->conv : nullptr);

        BatchNormState bn = bn_state_of(ckpt, prefix + ".bn");
        BatchNormObs ob;
        MatX b = batch_norm_forward(c, bn, train_mode, bt ? &bt->bn : nullptr,
                                    train_mode ? &ob : nullptr);
        if (obs) obs->push_back(std::move(ob));

        MatX r = relu_forward(b);
        if (bt) bt->bn_out = std::move(b);

        LayerRecords layer;
        if (forced) {
            layer = forced->layers[static_cast<size_t>(s)];
            replay_pool(cur, r, layer, bt ? &bt->pool_flows : nullptr);
        } else {
            layer = pool_to_target(cur, r, result.schedule.stage_targets[static_cast<size_t>(s)],
                                   result.schedule.vertex_floor, bt ? &bt->pool_flows : nullptr);
        }
        result.schedule_reached = result.schedule_reached && layer.target_reached;
        result.records.layers.push_back(std::move(layer));
        x = std::move(r);
    }

    MatX head_w = ckpt.params.at("enc_head.w");
    VecX head_b = column(ckpt.params.at("enc_head.bias"));
    MatX h9 = w0_conv_forward(x, head_w, head_b);
    if (tape) tape->head_input = std::move(x);

    ReconstructResult base = reconstruct_vertices(h9, cur.faces, cur.vertex_count());
    result.base_mesh.vertices = matrix_to_vertices(base.vertices);
    result.base_mesh.faces = cur.faces;
    result.base_mesh.rebuild_adjacency();
    if (tape) {
        tape->base_recon = std::move(base);
        tape->base_faces = cur.faces;
        tape->base_vertex_count = cur.vertex_count();
    }
    return result;
}

Mesh decode_impl(const Mesh& base_mesh, const PoolRecordStack& records, const Checkpoint& ckpt,
                 bool train_mode, DecoderTape* tape, std::vector<BatchNormObs>* obs) {
    const ArchitectureConfig& cfg = ckpt.config;
    const int depth = cfg.depth();
    if (records.layers.size() != static_cast<size_t>(depth))
        throw std::runtime_error("decode: record stack layer count does not match architecture");

    Mesh cur = base_mesh;
    MatX x = extract_geom_features(cur);
    if (tape) {
        tape->decoder_input = x;
        tape->blocks.resize(static_cast<size_t>(depth));
    }

    for (int s = 0; s < depth; ++s) {
        BlockTrace* bt = tape ? &tape->blocks[static_cast<size_t>(s)] : nullptr;
        std::string prefix = "dec" + std::to_string(s);

        // mirror of the encoder: undo the last pooling layer first
        unpool(cur, x, records.layers[static_cast<size_t>(depth - 1 - s)],
               bt ? &bt->unpool_flows : nullptr);

        std::vector<Patch> patches = build_patches(cur, cfg.k);
        const ParamSet& p = ckpt.params;
        ConvWeights w{p.at(prefix + ".conv.w0"), p.at(prefix + ".conv.w1"),
                      p.at(prefix + ".conv.w2"), p.at(prefix + ".conv.w3"),
                      cfg.conv_bias ? column(p.at(prefix + ".conv.bias")) : VecX()};
        MatX c = mesh_conv_forward(x, patches, w, bt ? &bt->conv : nullptr);

        BatchNormState bn = bn_state_of(ckpt, prefix + ".bn");
        BatchNormObs ob;
        MatX b = batch_norm_forward(c, bn, train_mode, bt ? &bt->bn : nullptr,
                                    train_mode ? &ob : nullptr);
        if (obs) obs->push_back(std::move(ob));

        x = relu_forward(b);
        if (bt) bt->bn_out = std::move(b);
    }

    MatX head_w = ckpt.params.at("dec_head.w");
    VecX head_b = column(ckpt.params.at("dec_head.bias"));
    MatX h9 = w0_conv_forward(x, head_w, head_b);
    if (tape) tape->head_input = std::move(x);

    ReconstructResult out = reconstruct_vertices(h9, cur.faces, cur.vertex_count());
    Mesh result;
    result.vertices = matrix_to_vertices(out.vertices);
    result.faces = cur.faces;
    result.rebuild_adjacency();
    if (tape) {
        tape->out_recon = std::move(out);
        tape->out_faces = result.faces;
        tape->out_vertex_count = result.vertices.size();
    }
    return result;
}

// accumulate a bias gradient (stored as n x 1) into the grad set
void add_grad(ParamSet& grads, const std::string& name, const MatX& g) {
    grads.at(name) += g;
}

void add_grad_vec(ParamSet& grads, const std::string& name, const VecX& g) {
    grads.at(name) += Eigen::Map<const MatX>(g.data(), g.size(), 1);
}

} // namespace

EncodeResult encode(const Mesh& mesh, const Checkpoint& ckpt, bool train_mode,
                    const PoolRecordStack* forced) {
    return encode_impl(mesh, ckpt, train_mode, nullptr, nullptr, forced);
}

Mesh decode(const Mesh& base_mesh, const PoolRecordStack& records, const Checkpoint& ckpt,
            bool train_mode) {
    return decode_impl(base_mesh, records, ckpt, train_mode, nullptr, nullptr);
}

void apply_bn_observations(Checkpoint& ckpt, const std::vector<BatchNormObs>& obs) {
    const int depth = ckpt.config.depth();
    if (obs.size() != static_cast<size_t>(2 * depth))
        throw std::runtime_error("apply_bn_observations: observation count mismatch");
    for (int i = 0; i < 2 * depth; ++i) {
        if (obs[static_cast<size_t>(i)].mean.size() == 0) continue;
        std::string prefix = (i < depth ? "enc" + std::to_string(i) : "dec" + std::to_string(i - depth)) + ".bn";
        BatchNormState st = bn_state_of(ckpt, prefix); // reuses epsilon/momentum wiring
        update_running_stats(st, obs[static_cast<size_t>(i)]);
        ckpt.running.at(prefix + ".mean") =
            Eigen::Map<const MatX>(st.running_mean.data(), st.running_mean.size(), 1);
        ckpt.running.at(prefix + ".var") =
            Eigen::Map<const MatX>(st.running_var.data(), st.running_var.size(), 1);
    }
}

ForwardResult forward_backward(const Mesh& mesh, const Checkpoint& ckpt, ParamSet* grads,
                               const PoolRecordStack* forced, bool train_mode) {
    ForwardResult res;
    EncoderTape etape;
    DecoderTape dtape;
    std::vector<BatchNormObs>* obs = train_mode ? &res.bn_observations : nullptr;

    res.encoded = encode_impl(mesh, ckpt, train_mode, grads ? &etape : nullptr, obs, forced);
    res.schedule_reached = res.encoded.schedule_reached;
    res.reconstructed = decode_impl(res.encoded.base_mesh, res.encoded.records, ckpt, train_mode,
                                    grads ? &dtape : nullptr, obs);

    MatX target = vertices_to_matrix(mesh.vertices);
    MatX pred = vertices_to_matrix(res.reconstructed.vertices);
    MatX loss_grad;
    res.loss = mse_loss(pred, target, grads ? &loss_grad : nullptr);
    if (!grads) return res;

    const ArchitectureConfig& cfg = ckpt.config;
    const int depth = cfg.depth();
    const ParamSet& p = ckpt.params;

    // ----- decoder backward -----
    MatX g = reconstruct_backward(dtape.out_faces, dtape.out_recon.counts, loss_grad);
    {
        MatX gx, gw;
        VecX gb;
        w0_conv_backward(dtape.head_input, p.at("dec_head.w"), g, &gx, &gw, &gb);
        add_grad(*grads, "dec_head.w", gw);
        add_grad_vec(*grads, "dec_head.bias", gb);
        g = std::move(gx);
    }
    for (int s = depth - 1; s >= 0; --s) {
        BlockTrace& bt = dtape.blocks[static_cast<size_t>(s)];
        std::string prefix = "dec" + std::to_string(s);
        g = relu_backward(bt.bn_out, g);
        VecX ggamma, gbeta;
        MatX gc;
        batch_norm_backward(bt.bn, g, &gc, &ggamma, &gbeta);
        add_grad_vec(*grads, prefix + ".bn.gamma", ggamma);
        add_grad_vec(*grads, prefix + ".bn.beta", gbeta);

        ConvWeights w{p.at(prefix + ".conv.w0"), p.at(prefix + ".conv.w1"),
                      p.at(prefix + ".conv.w2"), p.at(prefix + ".conv.w3"),
                      cfg.conv_bias ? column(p.at(prefix + ".conv.bias")) : VecX()};
        ConvGrads cw;
        MatX gx;
        mesh_conv_backward(bt.conv, w, gc, &gx, &cw);
        add_grad(*grads, prefix + ".conv.w0", cw.w0);
        add_grad(*grads, prefix + ".conv.w1", cw.w1);
        add_grad(*grads, prefix + ".conv.w2", cw.w2);
        add_grad(*grads, prefix + ".conv.w3", cw.w3);
        if (cfg.conv_bias) add_grad_vec(*grads, prefix + ".conv.bias", cw.bias);

        g = unpool_flow_backward(bt.unpool_flows, std::move(gx));
    }

    // bridge: decoder input features <- base vertices <- encoder head output
    MatX g_base_vertices =
        extract_geom_backward(etape.base_faces, etape.base_vertex_count, g);
    MatX g2 = reconstruct_backward(etape.base_faces, etape.base_recon.counts, g_base_vertices);

    // ----- encoder backward -----
    {
        MatX gx, gw;
        VecX gb;
        w0_conv_backward(etape.head_input, p.at("enc_head.w"), g2, &gx, &gw, &gb);
        add_grad(*grads, "enc_head.w", gw);
        add_grad_vec(*grads, "enc_head.bias", gb);
        g2 = std::move(gx);
    }
    for (int s = depth - 1; s >= 0; --s) {
        BlockTrace& bt = etape.blocks[static_cast<size_t>(s)];
        std::string prefix = "enc" + std::to_string(s);

        g2 = pool_flow_backward(bt.pool_flows, std::move(g2));
        g2 = relu_backward(bt.bn_out, g2);
        VecX ggamma, gbeta;
        MatX gc;
        batch_norm_backward(bt.bn, g2, &gc, &ggamma, &gbeta);
        add_grad_vec(*grads, prefix + ".bn.gamma", ggamma);
        add_grad_vec(*grads, prefix + ".bn.beta", gbeta);

        ConvWeights w{p.at(prefix + ".conv.w0"), p.at(prefix + ".conv.w1"),
                      p.at(prefix + ".conv.w2"), p.at(prefix + ".conv.w3"),
                      cfg.conv_bias ? column(p.at(prefix + ".conv.bias")) : VecX()};
        ConvGrads cw;
        MatX gx;
        mesh_conv_backward(bt.conv, w, gc, &gx, &cw);
        add_grad(*grads, prefix + ".conv.w0", cw.w0);
        add_grad(*grads, prefix + ".conv.w1", cw.w1);
        add_grad(*grads, prefix + ".conv.w2", cw.w2);
        add_grad(*grads, prefix + ".conv.w3", cw.w3);
        if (cfg.conv_bias) add_grad_vec(*grads, prefix + ".conv.bias", cw.bias);
        g2 = std::move(gx); // gradient w.r.t. the block input; constants at block 0
    }
    return res;
}

size_t LatentCode::record_byte_size() const { return records.serialize().size(); }

Mesh LatentCode::base_mesh() const {
    std::vector<Vec3> verts;
    verts.reserve(base_vertices.size());
    for (const auto& v : base_vertices)
        verts.emplace_back(static_cast<double>(v[0]), static_cast<double>(v[1]),
                           static_cast<double>(v[2]));
    Mesh m;
    m.vertices = std::move(verts);
    m.faces = base_faces;
    m.rebuild_adjacency();
    return m;
}

LatentCode LatentCode::from_encode(const EncodeResult& enc, uint64_t config_hash) {
    LatentCode lc;
    lc.config_hash = config_hash;
    lc.base_vertices.reserve(enc.base_mesh.vertices.size());
    for (const Vec3& v : enc.base_mesh.vertices)
        lc.base_vertices.push_back({static_cast<float>(v.x()), static_cast<float>(v.y()),
                                    static_cast<float>(v.z())});
    lc.base_faces = enc.base_mesh.faces;
    lc.records = enc.records;
    return lc;
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error(path + ": truncated latent file");
    return v;
}

} // namespace

void LatentCode::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write("MAE1", 4);
    write_raw(out, config_hash);
    write_raw(out, static_cast<uint32_t>(base_vertices.size()));
    for (const auto& v : base_vertices)
        for (float f : v) write_raw(out, f);
    write_raw(out, static_cast<uint32_t>(base_faces.size()));
    for (const FaceTriple& t : base_faces)
        for (uint32_t v : t) write_raw(out, v);
    std::vector<uint8_t> rec = records.serialize();
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

LatentCode LatentCode::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MAE1", 4) != 0)
        throw std::runtime_error(path + ": not a latent file (bad magic)");

    LatentCode lc;
    lc.config_hash = read_raw<uint64_t>(in, path);
    uint32_t nv = read_raw<uint32_t>(in, path);
    lc.base_vertices.resize(nv);
    for (auto& v : lc.base_vertices)
        for (float& f : v) f = read_raw<float>(in, path);
    uint32_t nf = read_raw<uint32_t>(in, path);
    lc.base_faces.resize(nf);
    for (FaceTriple& t : lc.base_faces)
        for (uint32_t& v : t) v = read_raw<uint32_t>(in, path);

    std::vector<uint8_t> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    lc.records = PoolRecordStack::deserialize(rest.data(), rest.size());
    return lc;
}

} // namespace meshae
