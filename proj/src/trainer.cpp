#include "meshae/trainer.hpp"

#include "meshae/mesh_io.hpp"
#include "meshae/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

using nlohmann::json;

namespace meshae {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::runtime_error("config: epochs must be >= 1");
    if (batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
    if (adam.learning_rate <= 0.0) throw std::runtime_error("config: learning_rate must be > 0");
    if (adam.beta1 <= 0.0 || adam.beta1 >= 1.0 || adam.beta2 <= 0.0 || adam.beta2 >= 1.0)
        throw std::runtime_error("config: adam betas must be in (0,1)");
    if (adam.epsilon <= 0.0) throw std::runtime_error("config: adam epsilon must be > 0");
    if (aug.scale_min <= 0.0 || aug.scale_max < aug.scale_min)
        throw std::runtime_error("config: bad augmentation scale range");
    if (workers < 1) throw std::runtime_error("config: workers must be >= 1");
    if (checkpoint_interval < 0 || eval_interval < 0)
        throw std::runtime_error("config: intervals must be >= 0");
}

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

} // namespace

void TrainLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "tag,step,loss,lr,cd,ne,cp\n";
    for (const Row& r : rows) {
        if (r.tag == "step")
            out << "step," << r.step << ',' << fmt_g17(r.loss) << ',' << fmt_g17(r.lr) << ",,,\n";
        else
            out << "eval," << r.step << ",,," << fmt_g17(r.cd) << ',' << fmt_g17(r.ne) << ','
                << fmt_g17(r.cp) << '\n';
    }
}

void TrainLog::write_timings_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "tag,step,timestamp\n";
    for (const Row& r : rows) out << r.tag << ',' << r.step << ',' << r.timestamp << '\n';
}

namespace {

TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    for (auto& [key, val] : j.items()) {
        if (key == "epochs") c.epochs = val.get<int>();
        else if (key == "batch_size") c.batch_size = val.get<int>();
        else if (key == "learning_rate") c.adam.learning_rate = val.get<double>();
        else if (key == "beta1") c.adam.beta1 = val.get<double>();
        else if (key == "beta2") c.adam.beta2 = val.get<double>();
        else if (key == "adam_epsilon") c.adam.epsilon = val.get<double>();
        else if (key == "augment") c.augment = val.get<bool>();
        else if (key == "scale_min") c.aug.scale_min = val.get<double>();
        else if (key == "scale_max") c.aug.scale_max = val.get<double>();
        else if (key == "rotate") c.aug.rotate = val.get<bool>();
        else if (key == "checkpoint_interval") c.checkpoint_interval = val.get<int>();
        else if (key == "eval_interval") c.eval_interval = val.get<int>();
        else if (key == "seed") c.seed = val.get<uint64_t>();
        else if (key == "workers") c.workers = val.get<int>();
        else throw std::runtime_error("config: unknown key 'train." + key + "'");
    }
    return c;
}

} // namespace

CliConfig parse_config_json(const std::string& text) {
    json j = json::parse(text);
    CliConfig cfg;
    for (auto& [key, val] : j.items()) {
        if (key == "arch") cfg.arch = ArchitectureConfig::from_json_string(val.dump());
        else if (key == "train") cfg.train = train_from_json(val);
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    cfg.arch.validate();
    cfg.train.validate();
    return cfg;
}

CliConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_config_json(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

namespace {

// runs fn(slot) for every slot on `workers` threads, chunked round-robin
void parallel_slots(size_t count, int workers, const std::function<void(size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    size_t n_threads = std::min<size_t>(static_cast<size_t>(workers), count);
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) {
        threads.emplace_back([&, t] {
            for (size_t i = t; i < count; i += n_threads) fn(i);
        });
    }
    for (std::thread& th : threads) th.join();
}

} // namespace

Checkpoint train(const DatasetSplit& split, const ArchitectureConfig& arch, const TrainConfig& cfg,
                 const std::string& out_dir, TrainLog* log, const Checkpoint* resume,
                 const std::function<void(const std::string&)>& warn) {
    arch.validate();
    cfg.validate();
    if (split.train.empty()) throw std::runtime_error("train: empty train split");

    auto emit_warning = [&](const std::string& msg) {
        if (warn) warn(msg);
        else std::fprintf(stderr, "warning: %s\n", msg.c_str());
    };

    // load and normalize everything up front; unreadable meshes are skipped
    std::vector<Mesh> meshes;
    meshes.reserve(split.train.size());
    for (const std::string& path : split.train) {
        try {
            meshes.push_back(normalize_unit_sphere(load_mesh(path)));
        } catch (const std::exception& e) {
            emit_warning(std::string("skipping ") + path + ": " + e.what());
        }
    }
    if (meshes.empty()) throw std::runtime_error("train: no readable meshes in train split");

    Checkpoint ckpt = resume ? *resume : Checkpoint::init(arch, cfg.seed);
    ckpt.adam = cfg.adam;

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    const size_t n = meshes.size();
    const int64_t steps_per_epoch =
        static_cast<int64_t>((n + static_cast<size_t>(cfg.batch_size) - 1) /
                             static_cast<size_t>(cfg.batch_size));
    const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * steps_per_epoch;

    std::vector<size_t> order(n);
    int64_t shuffled_epoch = -1;

    struct Slot {
        ParamSet grads;
        std::vector<BatchNormObs> obs;
        double loss = 0.0;
    };

    for (int64_t step = ckpt.step; step < total_steps; ++step) {
        int64_t epoch = step / steps_per_epoch;
        int64_t batch_in_epoch = step % steps_per_epoch;
        if (epoch != shuffled_epoch) {
            for (size_t i = 0; i < n; ++i) order[i] = i;
            Rng rng(mix_seed(cfg.seed, 0xe90c0000ull + static_cast<uint64_t>(epoch)));
            rng.shuffle(order);
            shuffled_epoch = epoch;
        }

        size_t begin = static_cast<size_t>(batch_in_epoch) * static_cast<size_t>(cfg.batch_size);
        size_t end = std::min(n, begin + static_cast<size_t>(cfg.batch_size));
        size_t count = end - begin;

        std::vector<Slot> slots(count);
        parallel_slots(count, cfg.workers, [&](size_t i) {
            const Mesh& src = meshes[order[begin + i]];
            Mesh m = cfg.augment
                         ? augment(src, mix_seed(cfg.seed, mix_seed(static_cast<uint64_t>(step), i)),
                                   cfg.aug)
                         : src;
            slots[i].grads = ParamSet::zeros_like(ckpt.params);
            ForwardResult r = forward_backward(m, ckpt, &slots[i].grads, nullptr, true);
            slots[i].loss = r.loss;
            slots[i].obs = std::move(r.bn_observations);
        });

        // deterministic reduction in mesh order
        ParamSet grads = ParamSet::zeros_like(ckpt.params);
        double loss_sum = 0.0;
        for (size_t i = 0; i < count; ++i) {
            grads.accumulate(slots[i].grads);
            loss_sum += slots[i].loss;
            apply_bn_observations(ckpt, slots[i].obs);
        }
        grads.scale(1.0 / static_cast<double>(count));
        ckpt.apply_gradients(grads);

        if (log) {
            TrainLog::Row row;
            row.tag = "step";
            row.step = ckpt.step;
            row.loss = loss_sum / static_cast<double>(count);
            row.lr = cfg.adam.learning_rate;
            row.timestamp = now_iso8601();
            log->rows.push_back(row);
        }

        if (cfg.checkpoint_interval > 0 && ckpt.step % cfg.checkpoint_interval == 0 &&
            !out_dir.empty())
            ckpt.save(out_dir + "/checkpoint_" + std::to_string(ckpt.step) + ".bin");

        if (cfg.eval_interval > 0 && ckpt.step % cfg.eval_interval == 0 && !split.test.empty()) {
            MetricReport rep = evaluate(split.test, ckpt, cfg.workers);
            if (log) {
                TrainLog::Row row;
                row.tag = "eval";
                row.step = ckpt.step;
                row.cd = rep.mean_cd;
                row.ne = rep.mean_ne;
                row.cp = rep.mean_cp;
                row.timestamp = now_iso8601();
                log->rows.push_back(row);
            }
        }
    }

    if (!out_dir.empty()) ckpt.save(out_dir + "/checkpoint_final.bin");
    return ckpt;
}

MetricReport evaluate_meshes(const std::vector<Mesh>& meshes, const std::vector<std::string>& names,
                             const Checkpoint& ckpt, int workers) {
    MetricReport report;
    report.per_mesh.resize(meshes.size());
    parallel_slots(meshes.size(), workers, [&](size_t i) {
        const Mesh& m = meshes[i];
        EncodeResult enc = encode(m, ckpt, false);
        Mesh rec = decode(enc.base_mesh, enc.records, ckpt, false);
        MeshMetricsRow row;
        row.name = i < names.size() ? names[i] : "mesh" + std::to_string(i);
        row.cd = chamfer_distance(m.vertices, rec.vertices);
        row.ne = normal_error(m, rec).value;
        row.cp = curvature_preservation(m, rec);
        report.per_mesh[i] = std::move(row);
    });
    report.finalize();
    return report;
}

MetricReport evaluate(const std::vector<std::string>& paths, const Checkpoint& ckpt, int workers) {
    std::vector<Mesh> meshes;
    meshes.reserve(paths.size());
    for (const std::string& p : paths) meshes.push_back(normalize_unit_sphere(load_mesh(p)));
    return evaluate_meshes(meshes, paths, ckpt, workers);
}

} // namespace meshae
