#pragma once

#include <filesystem>
#include <vector>

#include "tiattack/tensor.hpp"

namespace tia {

/// Images in [0, 1] with integer class labels.
struct LabeledDataset {
    Tensor images;  ///< (n, c, h, w)
    std::vector<int> labels;
    int num_classes = 10;

    int size() const { return static_cast<int>(labels.size()); }
    LabeledDataset subset(int first, int count) const;
};

/// Reads an IDX3 image file (magic 0x00000803) and an IDX1 label file
/// (magic 0x00000801). Pixels are scaled by 1/255. Throws FormatError on bad
/// magic, truncation or count mismatch.
LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path, int num_classes = 10);

}  // namespace tia
