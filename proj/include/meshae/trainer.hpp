#pragma once

#include "meshae/autoencoder.hpp"
#include "meshae/dataset.hpp"
#include "meshae/metrics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace meshae {

struct TrainConfig {
    int epochs = 300;
    int batch_size = 8; // meshes per optimizer step
    AdamConfig adam;
    bool augment = true;
    AugmentConfig aug;
    int checkpoint_interval = 0; // steps between snapshots; 0 = final only
    int eval_interval = 0;       // steps between eval sweeps; 0 = never
    uint64_t seed = 0;
    int workers = 1;

    void validate() const;
};

/// Training log. The deterministic part (losses, metrics) and the wall-clock
/// part (timings) are written to separate files so that fixed-seed runs
/// produce bit-identical loss logs.
struct TrainLog {
    struct Row {
        std::string tag; // "step" or "eval"
        int64_t step = 0;
        double loss = 0.0, lr = 0.0;
        double cd = 0.0, ne = 0.0, cp = 0.0;
        std::string timestamp; // wall clock, excluded from the deterministic log
    };
    std::vector<Row> rows;

    void write_csv(const std::string& path) const;     // tag,step,loss,lr,cd,ne,cp
    void write_timings_csv(const std::string& path) const; // tag,step,timestamp
};

struct CliConfig {
    ArchitectureConfig arch;
    TrainConfig train;
};

/// Parses the JSON config ({"arch": {...}, "train": {...}}); unknown keys at
/// any level are rejected.
CliConfig parse_config_json(const std::string& text);
CliConfig parse_config_file(const std::string& path);

/// Trains from scratch (or from `resume`) over the split's train set.
/// Per step: each mesh is normalized, optionally augmented, run through
/// forward_backward; gradients are summed in mesh order (workers only
/// parallelize the forward/backward passes), averaged, and applied with one
/// Adam step. Checkpoints land in out_dir when it is non-empty.
Checkpoint train(const DatasetSplit& split, const ArchitectureConfig& arch, const TrainConfig& cfg,
                 const std::string& out_dir = "", TrainLog* log = nullptr,
                 const Checkpoint* resume = nullptr,
                 const std::function<void(const std::string&)>& warn = {});

/// Eval-mode sweep: encode/decode each mesh and compute CD/NE/CP against the
/// normalized original. Read-only on the checkpoint.
MetricReport evaluate(const std::vector<std::string>& paths, const Checkpoint& ckpt,
                      int workers = 1);
MetricReport evaluate_meshes(const std::vector<Mesh>& meshes, const std::vector<std::string>& names,
                             const Checkpoint& ckpt, int workers = 1);

} // namespace meshae
