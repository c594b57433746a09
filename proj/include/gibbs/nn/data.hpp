#pragma once

#include "gibbs/nn/tensor.hpp"
#include "gibbs/random.hpp"

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace gibbs::nn {

struct DatasetSplit {
    Tensor images;  // (count, H, W, C), values in [0, 1]
    std::vector<int> labels;
    int classes = 0;

    Index count() const { return static_cast<Index>(labels.size()); }
    Shape image_shape() const { return Shape(images.shape.begin() + 1, images.shape.end()); }
    Index image_size() const { return count() ? images.size() / count() : 0; }
    void validate() const;
};

constexpr Index kCifarRecordBytes = 3073;

DatasetSplit load_cifar10_binary(const std::vector<std::filesystem::path>& paths);
/// Reads data_batch_{1..5}.bin and test_batch.bin from root (or root/cifar-10-batches-bin).
/// A positive subset keeps the first subset training and subset/5 test records.
std::pair<DatasetSplit, DatasetSplit> load_cifar10_dir(const std::filesystem::path& root, Index subset = 0);

struct SyntheticSpec {
    static constexpr Index side = 8;
    static constexpr int classes = 4;
    static constexpr double background = 0.4;
    static constexpr double amplitude = 0.2;
};

/// The four 8x8 class templates (rows of a 4 x 64 matrix), each symmetric under horizontal flip.
Eigen::MatrixXd synthetic_templates();

/// Templates plus Gaussian noise, clamped to [0, 1]; per class, 80% train and 20% test.
std::pair<DatasetSplit, DatasetSplit> synthetic_dataset(std::uint64_t seed, Index per_class, double noise = 0.3);

/// Integer shift (dy, dx) with zero fill, after an optional horizontal flip. image is (H, W, C).
Tensor shift_flip(const Tensor& image, Index dy, Index dx, bool flip);
/// Random shift of up to floor(0.1 * dim) per axis and a horizontal flip with probability 0.5.
Tensor augment(const Tensor& image, RandomSource& rng);
inline Index max_shift(Index dim) { return dim / 10; }

Tensor gather_images(const DatasetSplit& split, std::span<const Index> indices);
std::vector<int> gather_labels(const DatasetSplit& split, std::span<const Index> indices);
DatasetSplit take(const DatasetSplit& split, Index n);

}  // namespace gibbs::nn
