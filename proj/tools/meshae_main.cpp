// meshae: mesh autoencoder codec CLI
//
// Commands: train, encode, decode, eval, roundtrip. Exit codes: 0 success,
// 1 configuration error, 2 data error, 3 runtime failure.

#include "meshae/autoencoder.hpp"
#include "meshae/mesh_io.hpp"
#include "meshae/rng.hpp"
#include "meshae/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace meshae;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0; // 0 = from config
};

CliConfig resolve_config(const CommonOpts& opts) {
    CliConfig cfg;
    if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path);
    if (opts.seed_set) cfg.train.seed = opts.seed;
    if (opts.workers > 0) cfg.train.workers = opts.workers;
    return cfg;
}

SplitScheme parse_scheme(const std::string& s) {
    if (s == "shrec11") return SplitScheme::Shrec11_16split;
    if (s == "manifold40") return SplitScheme::Manifold40;
    throw CLI::ValidationError("--scheme", "expected 'shrec11' or 'manifold40'");
}

int cmd_train(const CommonOpts& common, const std::string& data_root, const std::string& scheme,
              const std::string& out_dir, const std::string& resume_path, int epochs_override) {
    CliConfig cfg;
    try {
        cfg = resolve_config(common);
        if (epochs_override > 0) cfg.train.epochs = epochs_override;
        cfg.arch.validate();
        cfg.train.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    DatasetSplit split;
    Checkpoint resume;
    bool has_resume = false;
    try {
        split = load_split(data_root, parse_scheme(scheme), cfg.train.seed);
        if (!resume_path.empty()) {
            resume = Checkpoint::load(resume_path);
            has_resume = true;
        }
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        TrainLog log;
        Checkpoint ckpt = train(split, cfg.arch, cfg.train, out_dir, &log,
                                has_resume ? &resume : nullptr);
        std::filesystem::create_directories(out_dir);
        log.write_csv(out_dir + "/log.csv");
        log.write_timings_csv(out_dir + "/timings.csv");
        std::printf("trained %lld steps; final checkpoint: %s/checkpoint_final.bin\n",
                    static_cast<long long>(ckpt.step), out_dir.c_str());
        if (!log.rows.empty()) std::printf("final loss: %.8g\n", log.rows.back().loss);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_encode(const std::string& ckpt_path, const std::string& mesh_path,
               const std::string& out_path) {
    Checkpoint ckpt;
    Mesh mesh;
    try {
        ckpt = Checkpoint::load(ckpt_path);
        mesh = normalize_unit_sphere(load_mesh(mesh_path));
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    try {
        EncodeResult enc = encode(mesh, ckpt, false);
        LatentCode latent = LatentCode::from_encode(enc, ckpt.config.hash());
        latent.save(out_path);
        std::printf("latent scalars: %zu\n", latent.latent_scalar_count());
        std::printf("record bytes: %zu\n", latent.record_byte_size());
        if (!enc.schedule_reached)
            std::printf("note: pooling stopped before the schedule target\n");
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_decode(const std::string& ckpt_path, const std::string& latent_path,
               const std::string& out_path) {
    Checkpoint ckpt;
    LatentCode latent;
    try {
        ckpt = Checkpoint::load(ckpt_path);
        latent = LatentCode::load(latent_path);
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    if (latent.config_hash != ckpt.config.hash()) {
        std::cerr << "error: latent file was produced with a different architecture config "
                     "(version mismatch)\n";
        return kExitData;
    }
    try {
        Mesh out = decode(latent.base_mesh(), latent.records, ckpt, false);
        save_mesh(out, out_path);
        std::printf("decoded mesh: %zu vertices, %zu faces -> %s\n", out.vertex_count(),
                    out.face_count(), out_path.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_eval(const CommonOpts& common, const std::string& ckpt_path, const std::string& data_root,
             const std::string& scheme, const std::string& out_path) {
    CliConfig cfg;
    try {
        cfg = resolve_config(common);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    Checkpoint ckpt;
    DatasetSplit split;
    try {
        ckpt = Checkpoint::load(ckpt_path);
        split = load_split(data_root, parse_scheme(scheme), cfg.train.seed);
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    try {
        MetricReport report = evaluate(split.test, ckpt, std::max(1, cfg.train.workers));
        std::fputs(report.to_text().c_str(), stdout);
        if (!out_path.empty()) {
            std::ofstream out(out_path);
            out << report.to_json_string() << "\n";
            if (!out) throw std::runtime_error(out_path + ": write failed");
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_roundtrip(const std::string& mesh_path, uint64_t seed, int m, int stages) {
    Mesh mesh;
    try {
        mesh = load_mesh(mesh_path);
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    try {
        PoolingSchedule schedule = make_schedule(static_cast<uint32_t>(mesh.face_count()),
                                                 static_cast<uint32_t>(mesh.vertex_count()), m,
                                                 stages);
        // random features stand in for network activations
        Rng rng(seed);
        MatX features(static_cast<Eigen::Index>(mesh.face_count()), 8);
        for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.gaussian();

        Mesh work = mesh;
        PoolRecordStack stack;
        for (int s = 0; s < stages; ++s) {
            uint32_t before_f = static_cast<uint32_t>(work.face_count());
            uint32_t before_v = static_cast<uint32_t>(work.vertex_count());
            LayerRecords layer =
                pool_to_target(work, features, schedule.stage_targets[static_cast<size_t>(s)],
                               schedule.vertex_floor);
            std::printf("stage %d: dF=%lld dV=%lld (%u faces, %zu vertices)\n", s + 1,
                        static_cast<long long>(work.face_count()) - before_f,
                        static_cast<long long>(work.vertex_count()) - before_v,
                        static_cast<uint32_t>(work.face_count()), work.vertex_count());
            stack.layers.push_back(std::move(layer));
        }

        std::vector<uint8_t> bytes = stack.serialize();
        PoolRecordStack restored_stack = PoolRecordStack::deserialize(bytes.data(), bytes.size());
        for (size_t s = restored_stack.layers.size(); s-- > 0;)
            unpool(work, features, restored_stack.layers[s]);

        if (work.faces != mesh.faces) {
            std::printf("connectivity restored: FAILED\n");
            return kExitRuntime;
        }
        std::printf("connectivity restored: OK (%zu faces, record bytes: %zu)\n",
                    work.face_count(), bytes.size());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshae: triangle-mesh autoencoder for geometry compression"};
    app.require_subcommand(1);

    CommonOpts common;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "JSON config file");
        cmd->add_option("--seed", common.seed, "RNG seed (overrides config)")
            ->each([&](const std::string&) { common.seed_set = true; });
        cmd->add_option("--workers", common.workers, "parallel mesh workers (overrides config)");
    };

    // train
    std::string data_root, scheme = "shrec11", out_dir = "out", resume_path;
    int epochs_override = 0;
    CLI::App* train_cmd = app.add_subcommand("train", "train the autoencoder on a dataset");
    add_common(train_cmd);
    train_cmd->add_option("--data", data_root, "dataset root directory")->required();
    train_cmd->add_option("--scheme", scheme, "dataset layout: shrec11 | manifold40");
    train_cmd->add_option("--out", out_dir, "output directory for checkpoints and logs");
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");
    train_cmd->add_option("--epochs", epochs_override, "override epoch count");

    // encode
    std::string ckpt_path, mesh_path, out_path;
    CLI::App* encode_cmd = app.add_subcommand("encode", "encode a mesh into a latent file");
    encode_cmd->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    encode_cmd->add_option("--mesh", mesh_path, "input mesh (.off/.obj)")->required();
    encode_cmd->add_option("--out", out_path, "output latent file")->required();

    // decode
    std::string latent_path;
    CLI::App* decode_cmd = app.add_subcommand("decode", "decode a latent file into a mesh");
    decode_cmd->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    decode_cmd->add_option("--latent", latent_path, "latent file from encode")->required();
    decode_cmd->add_option("--out", out_path, "output mesh path (.off/.obj)")->required();

    // eval
    std::string report_path;
    CLI::App* eval_cmd = app.add_subcommand("eval", "compute CD/NE/CP over a test split");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    eval_cmd->add_option("--data", data_root, "dataset root directory")->required();
    eval_cmd->add_option("--scheme", scheme, "dataset layout: shrec11 | manifold40");
    eval_cmd->add_option("--out", report_path, "write the JSON report here");

    // roundtrip
    uint64_t rt_seed = 0;
    int rt_m = 48, rt_stages = 3;
    CLI::App* rt_cmd =
        app.add_subcommand("roundtrip", "pool to the vertex floor and verify exact restoration");
    rt_cmd->add_option("--mesh", mesh_path, "input mesh (.off/.obj)")->required();
    rt_cmd->add_option("--seed", rt_seed, "seed for the random features");
    rt_cmd->add_option("--m", rt_m, "latent budget for the schedule");
    rt_cmd->add_option("--stages", rt_stages, "pooling stages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (train_cmd->parsed())
        return cmd_train(common, data_root, scheme, out_dir, resume_path, epochs_override);
    if (encode_cmd->parsed()) return cmd_encode(ckpt_path, mesh_path, out_path);
    if (decode_cmd->parsed()) return cmd_decode(ckpt_path, latent_path, out_path);
    if (eval_cmd->parsed()) return cmd_eval(common, ckpt_path, data_root, scheme, report_path);
    if (rt_cmd->parsed()) return cmd_roundtrip(mesh_path, rt_seed, rt_m, rt_stages);
    return kExitConfig;
}
