#include "tiattack/dataset.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "tiattack/errors.hpp"

namespace tia {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& what) {
    if (buf.size() < offset + 4) throw FormatError(what + ": truncated header", buf.size());
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

LabeledDataset LabeledDataset::subset(int first, int count) const {
    LabeledDataset out;
    out.images = images.slice(first, count);
    out.labels.assign(labels.begin() + first, labels.begin() + first + count);
    out.num_classes = num_classes;
    return out;
}

LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path, int num_classes) {
    const auto img = read_all(images_path);
    const auto lab = read_all(labels_path);
    const std::string img_name = images_path.filename().string();
    const std::string lab_name = labels_path.filename().string();

    if (be32(img, 0, img_name) != 0x00000803) throw FormatError(img_name + ": bad magic, expected 0x00000803", 0);
    if (be32(lab, 0, lab_name) != 0x00000801) throw FormatError(lab_name + ": bad magic, expected 0x00000801", 0);

    const std::uint32_t n = be32(img, 4, img_name);
    const std::uint32_t rows = be32(img, 8, img_name);
    const std::uint32_t cols = be32(img, 12, img_name);
    const std::uint32_t n_labels = be32(lab, 4, lab_name);
    if (n != n_labels) {
        throw FormatError("image count " + std::to_string(n) + " != label count " + std::to_string(n_labels), 4);
    }

    const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    if (img.size() < 16 + pixels) throw FormatError(img_name + ": truncated pixel data", img.size());
    if (lab.size() < 8 + static_cast<std::size_t>(n)) throw FormatError(lab_name + ": truncated label data", lab.size());

    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.images = Tensor(Shape{static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols)});
    auto px = ds.images.values();
    for (std::size_t i = 0; i < pixels; ++i) px[i] = img[16 + i] / 255.0;
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const int y = lab[8 + i];
        if (y >= num_classes) throw FormatError(lab_name + ": label " + std::to_string(y) + " out of range", 8 + i);
        ds.labels[i] = y;
    }
    return ds;
}

}  // namespace tia
