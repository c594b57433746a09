#include "gibbs/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gibbs::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'G', 'I', 'B', 'B', 'S', 'C', 'K', 'P'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(Network& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kCheckpointVersion);
    const auto params = net.params();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p->shape.size()));
        for (Index d : p->shape) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        put<std::uint8_t>(os, p->mask ? 1 : 0);
        os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
        if (p->mask) os.write(reinterpret_cast<const char*>(p->mask->data()), static_cast<std::streamsize>(p->mask->size()));
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

void load_checkpoint(Network& net, const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("not a checkpoint file: " + path.string());
    if (get<std::uint32_t>(is) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto params = net.params();
    if (get<std::uint32_t>(is) != params.size()) throw std::runtime_error("checkpoint parameter count does not match network");
    for (Param* p : params) {
        std::string name(get<std::uint32_t>(is), '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw std::runtime_error("checkpoint truncated");
        if (name != p->name) throw std::runtime_error("checkpoint parameter " + name + " where " + p->name + " expected");
        Shape shape(get<std::uint32_t>(is));
        for (Index& d : shape) d = static_cast<Index>(get<std::uint64_t>(is));
        if (shape != p->shape) throw std::runtime_error("shape mismatch for " + name);
        const bool has_mask = get<std::uint8_t>(is) != 0;
        Eigen::VectorXd value(p->size());
        if (!is.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(double)))) {
            throw std::runtime_error("checkpoint truncated");
        }
        std::optional<PruneMask> mask;
        if (has_mask) {
            mask.emplace(p->size());
            if (!is.read(reinterpret_cast<char*>(mask->data()), static_cast<std::streamsize>(mask->size()))) {
                throw std::runtime_error("checkpoint truncated");
            }
            if (!is_valid_mask(*mask)) throw std::runtime_error("invalid mask entries for " + name);
        }
        p->value = std::move(value);
        p->mask = std::move(mask);
    }
}

}  // namespace gibbs::nn
