#include "gibbs/experiment/mask_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gibbs::exp {

namespace {

const std::string kHeader = "GIBBS-MASK 1";

}  // namespace

std::string format_masks(const std::vector<NamedMask>& masks) {
    std::string out = kHeader + "\n";
    for (const NamedMask& m : masks) {
        if (m.name.empty() || m.name.find_first_of(" \t\n") != std::string::npos) {
            throw std::invalid_argument("mask layer names must be non-empty without whitespace");
        }
        if (!is_valid_mask(m.mask)) throw std::invalid_argument("mask " + m.name + " has entries outside {-1, 1}");
        out += "layer " + m.name + " " + std::to_string(m.mask.size()) + "\n";
        for (Index i = 0; i < m.mask.size(); ++i) {
            if (i) out += ' ';
            out += m.mask[i] < 0 ? "-1" : "1";
        }
        out += "\n";
    }
    return out;
}

std::vector<NamedMask> parse_masks(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header.rfind("GIBBS-MASK", 0) != 0) throw std::runtime_error("not a mask file (missing GIBBS-MASK header)");
    if (header != kHeader) throw std::runtime_error("unsupported mask file version: '" + header + "'");
    std::vector<NamedMask> out;
    std::set<std::string> names;
    std::string tok;
    while (in >> tok) {
        if (tok != "layer") throw std::runtime_error("expected 'layer', got '" + tok + "'");
        NamedMask m;
        long long n = -1;
        if (!(in >> m.name)) throw std::runtime_error("missing layer name");
        if (!names.insert(m.name).second) throw std::runtime_error("duplicate layer " + m.name);
        std::string count;
        if (!(in >> count)) throw std::runtime_error("missing count for layer " + m.name);
        try {
            std::size_t used = 0;
            n = std::stoll(count, &used);
            if (used != count.size() || n < 0) throw std::invalid_argument(count);
        } catch (const std::exception&) {
            throw std::runtime_error("bad count '" + count + "' for layer " + m.name);
        }
        m.mask.resize(static_cast<Index>(n));
        for (long long i = 0; i < n; ++i) {
            if (!(in >> tok)) throw std::runtime_error("layer " + m.name + ": expected " + count + " tokens, got " + std::to_string(i));
            if (tok == "1") {
                m.mask[static_cast<Index>(i)] = 1;
            } else if (tok == "-1") {
                m.mask[static_cast<Index>(i)] = -1;
            } else {
                throw std::runtime_error("layer " + m.name + ": token '" + tok + "' is not -1 or 1");
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

void export_mask(const std::vector<NamedMask>& masks, const std::filesystem::path& path) {
    const std::string text = format_masks(masks);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os || !(os << text)) throw std::runtime_error("cannot write " + path.string());
}

std::vector<NamedMask> import_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mask file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_masks(ss.str());
}

}  // namespace gibbs::exp
