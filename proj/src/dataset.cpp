#include "meshae/dataset.hpp"

#include "meshae/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace meshae {

namespace {

bool is_mesh_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".off" || ext == ".obj";
}

// Sorted for determinism; the shuffle seed decides the split, not readdir order.
std::vector<std::string> list_meshes(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_mesh_file(e.path())) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> list_class_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("missing folder: " + root.string());
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no class folders under " + root.string());
    return dirs;
}

} // namespace

DatasetSplit load_split(const std::string& root, SplitScheme scheme, uint64_t seed) {
    DatasetSplit split;
    if (scheme == SplitScheme::Shrec11_16split) {
        std::vector<std::string> classes = list_class_dirs(root);
        for (size_t c = 0; c < classes.size(); ++c) {
            std::vector<std::string> meshes = list_meshes(classes[c]);
            if (meshes.size() < 20)
                throw std::runtime_error(classes[c] + ": needs at least 20 meshes, found " +
                                         std::to_string(meshes.size()));
            Rng rng(mix_seed(seed, c));
            rng.shuffle(meshes);
            for (size_t i = 0; i < 16; ++i) {
                split.train.push_back(meshes[i]);
                split.train_labels.push_back(static_cast<int>(c));
            }
            for (size_t i = 16; i < 20; ++i) {
                split.test.push_back(meshes[i]);
                split.test_labels.push_back(static_cast<int>(c));
            }
        }
    } else {
        for (const char* part : {"train", "test"}) {
            fs::path pdir = fs::path(root) / part;
            std::vector<std::string> classes = list_class_dirs(pdir);
            bool is_train = std::string(part) == "train";
            for (size_t c = 0; c < classes.size(); ++c) {
                for (std::string& m : list_meshes(classes[c])) {
                    if (is_train) {
                        split.train.push_back(std::move(m));
                        split.train_labels.push_back(static_cast<int>(c));
                    } else {
                        split.test.push_back(std::move(m));
                        split.test_labels.push_back(static_cast<int>(c));
                    }
                }
            }
        }
    }
    return split;
}

} // namespace meshae
