#include "wcgnn/dataset_io.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "wcgnn/binary_io.hpp"
#include "wcgnn/error.hpp"

namespace wcgnn {

namespace {

constexpr const char* kMagic = "wcgnn-dataset";

std::size_t record_doubles(std::size_t k, std::size_t nt) { return 4 * k + 2 * k * k * nt + 2 * k; }

void pack(const Instance& inst, std::vector<double>& out) {
    out.clear();
    for (const Point& p : inst.layout.tx) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    for (const Point& p : inst.layout.rx) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    for (const auto& c : inst.channel.coefficients()) {
        out.push_back(c.real());
        out.push_back(c.imag());
    }
    out.insert(out.end(), inst.channel.weights.begin(), inst.channel.weights.end());
    out.insert(out.end(), inst.channel.noise.begin(), inst.channel.noise.end());
}

Instance unpack(std::span<const double> rec, std::size_t k, std::size_t nt) {
    Instance inst;
    std::size_t at = 0;
    inst.layout.tx.resize(k);
    inst.layout.rx.resize(k);
    for (auto& p : inst.layout.tx) {
        p.x = rec[at++];
        p.y = rec[at++];
    }
    for (auto& p : inst.layout.rx) {
        p.x = rec[at++];
        p.y = rec[at++];
    }
    inst.channel = ChannelRealization(k, nt);
    for (auto& c : inst.channel.coefficients()) {
        c = {rec[at], rec[at + 1]};
        at += 2;
    }
    for (auto& w : inst.channel.weights) w = rec[at++];
    for (auto& s : inst.channel.noise) s = rec[at++];
    return inst;
}

void check_header(const nlohmann::json& h) {
    if (!h.is_object() || h.value("magic", std::string{}) != kMagic) {
        throw IoError("not a wcgnn dataset (bad magic)");
    }
    const int version = h.value("version", -1);
    if (version != kDatasetFormatVersion) {
        throw IoError("dataset format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kDatasetFormatVersion) + ")");
    }
}

}  // namespace

void save_dataset_binary(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::size_t k = ds.config.num_pairs;
    const std::size_t nt = ds.config.num_tx_antennas;
    nlohmann::json header{
        {"magic", kMagic},
        {"version", kDatasetFormatVersion},
        {"config", ds.config},
        {"num_samples", ds.size()},
        {"num_pairs", k},
        {"num_tx_antennas", nt},
        {"record_doubles", record_doubles(k, nt)},
    };
    os << header.dump() << '\n';
    std::vector<double> rec;
    for (const Instance& inst : ds.instances) {
        if (inst.size() != k || inst.channel.num_antennas() != nt) {
            throw IoError("dataset instance dimensions differ from the config");
        }
        pack(inst, rec);
        binio::write_doubles(os, rec);
    }
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty dataset file '" + path.string() + "'");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (header.is_discarded()) throw IoError("not a wcgnn dataset (bad magic)");
    check_header(header);

    Dataset ds;
    ds.config = header.at("config").get<SystemConfig>();
    const std::size_t n = header.at("num_samples").get<std::size_t>();
    const std::size_t k = header.at("num_pairs").get<std::size_t>();
    const std::size_t nt = header.at("num_tx_antennas").get<std::size_t>();
    const std::size_t width = header.at("record_doubles").get<std::size_t>();
    if (width != record_doubles(k, nt)) throw IoError("record width does not match dimensions");

    std::vector<double> rec(width);
    ds.instances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        binio::read_doubles(is, rec);
        ds.instances.push_back(unpack(rec, k, nt));
    }
    return ds;
}

nlohmann::json dataset_to_json(const Dataset& ds) {
    nlohmann::json items = nlohmann::json::array();
    std::vector<double> rec;
    for (const Instance& inst : ds.instances) {
        pack(inst, rec);
        items.push_back(rec);
    }
    return {
        {"magic", kMagic},
        {"version", kDatasetFormatVersion},
        {"config", ds.config},
        {"num_samples", ds.size()},
        {"num_pairs", ds.config.num_pairs},
        {"num_tx_antennas", ds.config.num_tx_antennas},
        {"record_doubles", record_doubles(ds.config.num_pairs, ds.config.num_tx_antennas)},
        {"records", std::move(items)},
    };
}

Dataset dataset_from_json(const nlohmann::json& j) {
    check_header(j);
    Dataset ds;
    ds.config = j.at("config").get<SystemConfig>();
    const std::size_t k = j.at("num_pairs").get<std::size_t>();
    const std::size_t nt = j.at("num_tx_antennas").get<std::size_t>();
    for (const auto& r : j.at("records")) {
        const auto rec = r.get<std::vector<double>>();
        if (rec.size() != record_doubles(k, nt)) throw IoError("record width does not match dimensions");
        ds.instances.push_back(unpack(rec, k, nt));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    if (path.extension() == ".json") {
        std::ofstream os(path);
        if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
        // max_digits10 round-trip: nlohmann prints doubles with 17 significant digits.
        os << dataset_to_json(ds).dump() << '\n';
        return;
    }
    save_dataset_binary(ds, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (path.extension() == ".json") {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open '" + path.string() + "'");
        nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
        if (j.is_discarded()) throw IoError("not a wcgnn dataset (bad magic)");
        return dataset_from_json(j);
    }
    return load_dataset_binary(path);
}

}  // namespace wcgnn
