#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace meshae {

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::vector<int> train_labels; // class id per path, bookkeeping only
    std::vector<int> test_labels;
};

enum class SplitScheme {
    Shrec11_16split, // <root>/<class>/<meshes>, 16 train / 4 test per class
    Manifold40,      // <root>/{train,test}/<class>/<meshes>
};

/// Builds the train/test split from a dataset directory. The 16-split scheme
/// shuffles each class folder with the given seed, takes 16 meshes for
/// training and the next 4 for testing; folders with fewer than 20 meshes are
/// an error. Manifold40 uses the declared train/ and test/ folders verbatim.
DatasetSplit load_split(const std::string& root, SplitScheme scheme, uint64_t seed = 0);

} // namespace meshae
