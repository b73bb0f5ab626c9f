#include "wcgnn/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "wcgnn/binary_io.hpp"

namespace wcgnn::nn {

namespace {
constexpr std::array<char, 8> kMagic{'W', 'C', 'G', 'N', 'N', 'C', 'K', 'P'};
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p += ".json";
    return p;
}

void save_tensors(const std::filesystem::path& path, const std::vector<const Tensor*>& tensors,
                  const nlohmann::json& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(kMagic.data(), kMagic.size());
    binio::write_pod(os, kCheckpointVersion);
    binio::write_pod(os, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
        binio::write_pod(os, static_cast<std::uint64_t>(t->rows()));
        binio::write_pod(os, static_cast<std::uint64_t>(t->cols()));
    }
    for (const Tensor* t : tensors) binio::write_doubles(os, t->span());
    if (!os) throw IoError("write failed for '" + path.string() + "'");

    std::ofstream side(sidecar_path(path));
    if (!side) throw IoError("cannot write checkpoint sidecar for '" + path.string() + "'");
    nlohmann::json doc{{"format", "wcgnn-checkpoint"}, {"version", kCheckpointVersion}, {"meta", meta}};
    side << doc.dump(2) << '\n';
}

LoadedTensors load_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw IoError("not a wcgnn checkpoint (bad magic): '" + path.string() + "'");
    const auto version = binio::read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const auto count = binio::read_pod<std::uint32_t>(is);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(count);
    for (auto& s : shapes) {
        s.first = binio::read_pod<std::uint64_t>(is);
        s.second = binio::read_pod<std::uint64_t>(is);
    }
    LoadedTensors out;
    for (const auto& [r, c] : shapes) {
        Tensor t(r, c);
        binio::read_doubles(is, t.span());
        out.tensors.push_back(std::move(t));
    }

    std::ifstream side(sidecar_path(path));
    if (!side) throw IoError("missing checkpoint sidecar '" + sidecar_path(path).string() + "'");
    nlohmann::json doc = nlohmann::json::parse(side, nullptr, false);
    if (doc.is_discarded() || doc.value("format", std::string{}) != "wcgnn-checkpoint") {
        throw IoError("malformed checkpoint sidecar '" + sidecar_path(path).string() + "'");
    }
    out.meta = doc.at("meta");
    return out;
}

}  // namespace wcgnn::nn
