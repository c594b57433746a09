#pragma once

#include "gibbs/mask_core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gibbs::exp {

struct NamedMask {
    std::string name;
    PruneMask mask;

    bool operator==(const NamedMask&) const = default;
};

/// "GIBBS-MASK 1", then per layer a line "layer <name> <N>" followed by N tokens in {-1, 1}.
std::string format_masks(const std::vector<NamedMask>& masks);
std::vector<NamedMask> parse_masks(const std::string& text);

void export_mask(const std::vector<NamedMask>& masks, const std::filesystem::path& path);
std::vector<NamedMask> import_mask(const std::filesystem::path& path);

}  // namespace gibbs::exp
