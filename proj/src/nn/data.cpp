#include "gibbs/nn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gibbs::nn {

void DatasetSplit::validate() const {
    if (images.rank() != 4) throw std::invalid_argument("dataset images must be (count, H, W, C)");
    if (images.dim(0) != count()) throw std::invalid_argument("image and label counts differ");
    for (int y : labels) {
        if (y < 0 || y >= classes) throw std::invalid_argument("label out of range");
    }
    if (count() && (!images.values.allFinite() || images.values.minCoeff() < 0 || images.values.maxCoeff() > 1)) {
        throw std::invalid_argument("pixel values must lie in [0, 1]");
    }
}

DatasetSplit load_cifar10_binary(const std::vector<std::filesystem::path>& paths) {
    std::vector<unsigned char> bytes;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        std::vector<unsigned char> chunk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (chunk.size() % kCifarRecordBytes != 0) {
            throw std::runtime_error(path.string() + ": size " + std::to_string(chunk.size()) +
                                     " is not a multiple of 3073 bytes");
        }
        bytes.insert(bytes.end(), chunk.begin(), chunk.end());
    }
    const Index n = static_cast<Index>(bytes.size()) / kCifarRecordBytes;
    DatasetSplit out;
    out.classes = 10;
    out.images = Tensor({n, 32, 32, 3});
    out.labels.resize(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
        if (rec[0] > 9) throw std::runtime_error("record " + std::to_string(r) + ": label byte " + std::to_string(rec[0]) + " > 9");
        out.labels[static_cast<std::size_t>(r)] = rec[0];
        double* img = out.images.values.data() + r * 3072;
        for (Index c = 0; c < 3; ++c) {
            for (Index p = 0; p < 1024; ++p) img[p * 3 + c] = rec[1 + c * 1024 + p] / 255.0;
        }
    }
    return out;
}

std::pair<DatasetSplit, DatasetSplit> load_cifar10_dir(const std::filesystem::path& root, Index subset) {
    std::filesystem::path dir = root;
    if (!std::filesystem::exists(dir / "test_batch.bin") && std::filesystem::exists(root / "cifar-10-batches-bin")) {
        dir = root / "cifar-10-batches-bin";
    }
    std::vector<std::filesystem::path> train;
    for (int i = 1; i <= 5; ++i) train.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    for (const auto& p : train) {
        if (!std::filesystem::exists(p)) throw std::runtime_error("CIFAR-10 file missing: " + p.string());
    }
    if (subset > 0) {
        // the first batch file is enough for small subsets
        const Index files = std::min<Index>(5, (subset + 9999) / 10000);
        train.resize(static_cast<std::size_t>(files));
    }
    DatasetSplit tr = load_cifar10_binary(train);
    DatasetSplit te = load_cifar10_binary({dir / "test_batch.bin"});
    if (subset > 0) {
        tr = take(tr, subset);
        te = take(te, std::max<Index>(1, subset / 5));
    }
    return {std::move(tr), std::move(te)};
}

Eigen::MatrixXd synthetic_templates() {
    constexpr Index s = SyntheticSpec::side;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, s * s);
    for (Index y = 0; y < s; ++y) {
        for (Index x = 0; x < s; ++x) {
            const Index i = y * s + x;
            t(0, i) = y < s / 2;
            t(1, i) = y % 2 == 0;
            t(2, i) = y >= 2 && y < 6 && x >= 2 && x < 6;
            t(3, i) = y == 0 || y == s - 1 || x == 0 || x == s - 1;
        }
    }
    return t;
}

std::pair<DatasetSplit, DatasetSplit> synthetic_dataset(std::uint64_t seed, Index per_class, double noise) {
    if (per_class < 1) throw std::invalid_argument("per_class must be at least 1");
    if (!(noise >= 0)) throw std::invalid_argument("noise must be non-negative");
    constexpr Index s = SyntheticSpec::side;
    constexpr int k = SyntheticSpec::classes;
    const Eigen::MatrixXd templ = synthetic_templates();
    const Index n_train = std::max<Index>(1, std::llround(0.8 * static_cast<double>(per_class)));
    const Index n_test = per_class - n_train;
    RandomSource rng(seed);

    auto make = [&](Index per, std::uint64_t stream) {
        DatasetSplit d;
        d.classes = k;
        d.images = Tensor({per * k, s, s, 1});
        d.labels.resize(static_cast<std::size_t>(per * k));
        RandomSource r = rng.substream(stream);
        for (Index i = 0; i < per * k; ++i) {
            const int y = static_cast<int>(i % k);
            d.labels[static_cast<std::size_t>(i)] = y;
            for (Index p = 0; p < s * s; ++p) {
                const double v = SyntheticSpec::background + SyntheticSpec::amplitude * templ(y, p) + noise * r.normal();
                d.images.values[i * s * s + p] = std::clamp(v, 0.0, 1.0);
            }
        }
        return d;
    };
    return {make(n_train, 1), make(n_test, 2)};
}

Tensor shift_flip(const Tensor& image, Index dy, Index dx, bool flip) {
    if (image.rank() != 3) throw std::invalid_argument("image must be (H, W, C)");
    const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
    Tensor out(image.shape);
    for (Index y = 0; y < h; ++y) {
        const Index sy = y - dy;
        if (sy < 0 || sy >= h) continue;
        for (Index x = 0; x < w; ++x) {
            Index sx = x - dx;
            if (sx < 0 || sx >= w) continue;
            if (flip) sx = w - 1 - sx;
            out.values.segment((y * w + x) * c, c) = image.values.segment((sy * w + sx) * c, c);
        }
    }
    return out;
}

Tensor augment(const Tensor& image, RandomSource& rng) {
    if (image.rank() != 3) throw std::invalid_argument("image must be (H, W, C)");
    const Index my = max_shift(image.dim(0)), mx = max_shift(image.dim(1));
    const Index dy = rng.uniform_int(-my, my);
    const Index dx = rng.uniform_int(-mx, mx);
    const bool flip = rng.bernoulli(0.5);
    return shift_flip(image, dy, dx, flip);
}

Tensor gather_images(const DatasetSplit& split, std::span<const Index> indices) {
    Shape shape = split.images.shape;
    shape[0] = static_cast<Index>(indices.size());
    Tensor out(shape);
    const Index sz = split.image_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.values.segment(static_cast<Index>(i) * sz, sz) = split.images.values.segment(indices[i] * sz, sz);
    }
    return out;
}

std::vector<int> gather_labels(const DatasetSplit& split, std::span<const Index> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (Index i : indices) out.push_back(split.labels.at(static_cast<std::size_t>(i)));
    return out;
}

DatasetSplit take(const DatasetSplit& split, Index n) {
    n = std::min(n, split.count());
    DatasetSplit out;
    out.classes = split.classes;
    Shape shape = split.images.shape;
    shape[0] = n;
    out.images = Tensor(shape, split.images.values.head(n * split.image_size()));
    out.labels.assign(split.labels.begin(), split.labels.begin() + n);
    return out;
}

}  // namespace gibbs::nn
