#pragma once

// NLSG1 grid files: one JSON header line followed by a raw payload, row-major
// with the last axis fastest. Occupancy is packed one bit per cell
// (little-endian within each byte); real-valued data is little-endian f64.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fracmin/geometry.hpp"

namespace fracmin::nlsg {

using nlohmann::json;

inline json exterior_to_json(const ExteriorRule& r) {
    json j{{"rule", r.name()}};
    switch (r.kind) {
        case ExteriorRule::Kind::halfspace:
        case ExteriorRule::Kind::complement_halfspace:
            j["nu"] = {r.nu[0], r.nu[1], r.nu[2]};
            j["offset"] = r.offset;
            break;
        case ExteriorRule::Kind::cone:
        case ExteriorRule::Kind::complement_cone: j["slope"] = r.slope; break;
        default: break;
    }
    return j;
}

inline ExteriorRule exterior_from_json(const json& j) {
    const std::string rule = j.at("rule").get<std::string>();
    auto vec = [&](const char* key) {
        Point p{0, 0, 0};
        const auto& a = j.at(key);
        for (std::size_t i = 0; i < a.size() && i < 3; ++i) p[i] = a[i].get<double>();
        return p;
    };
    if (rule == "empty") return ExteriorRule::empty();
    if (rule == "full") return ExteriorRule::full();
    if (rule == "halfspace") return ExteriorRule::halfspace(vec("nu"), j.at("offset").get<double>());
    if (rule == "complement-halfspace")
        return ExteriorRule::complement_halfspace(vec("nu"), j.at("offset").get<double>());
    if (rule == "cone") return ExteriorRule::cone(j.at("slope").get<double>());
    if (rule == "complement-cone") return ExteriorRule::cone(j.at("slope").get<double>()).complement();
    if (rule == "periodic-extend") return ExteriorRule::periodic();
    throw Error("NLSG1: unknown exterior rule '" + rule + "'");
}

inline json grid_header(const Grid& g, const std::string& payload) {
    json dims = json::array(), origin = json::array();
    for (int a = 0; a < g.n; ++a) {
        dims.push_back(g.dims[a]);
        origin.push_back(g.origin[a]);
    }
    return json{{"magic", "NLSG1"}, {"n", g.n}, {"dims", dims}, {"origin", origin}, {"h", g.h},
                {"payload", payload}};
}

inline Grid grid_from_header(const json& j) {
    if (j.value("magic", "") != "NLSG1") throw Error("NLSG1: bad magic");
    const int n = j.at("n").get<int>();
    if (n < 1 || n > 3) throw Error("NLSG1: unsupported dimension");
    std::array<long, 3> dims{1, 1, 1};
    Point o{0, 0, 0};
    if (j.at("dims").size() != std::size_t(n) || j.at("origin").size() != std::size_t(n))
        throw Error("NLSG1: dims/origin length must equal n");
    for (int a = 0; a < n; ++a) {
        dims[a] = j["dims"][a].get<long>();
        o[a] = j["origin"][a].get<double>();
    }
    return Grid(n, dims, o, j.at("h").get<double>());
}

inline std::string pack_bits(const std::vector<std::uint8_t>& occ) {
    std::string out((occ.size() + 7) / 8, '\0');
    for (std::size_t k = 0; k < occ.size(); ++k)
        if (occ[k]) out[k / 8] = char(static_cast<unsigned char>(out[k / 8]) | (1u << (k % 8)));
    return out;
}

inline std::string pack_f64(const std::vector<double>& v) {
    static_assert(std::endian::native == std::endian::little, "NLSG1 writer assumes little-endian");
    std::string out(v.size() * 8, '\0');
    std::memcpy(out.data(), v.data(), out.size());
    return out;
}

inline std::vector<double> unpack_f64(const std::string& bytes, std::size_t count) {
    if (bytes.size() != count * 8) throw Error("NLSG1: payload length mismatch");
    std::vector<double> v(count);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

/// Serialized NLSG1 image of a voxel set.
inline std::string encode(const VoxelSet& E) {
    json hdr = grid_header(E.grid, "bits");
    hdr["exterior"] = exterior_to_json(E.exterior);
    return hdr.dump() + "\n" + pack_bits(E.occ);
}

/// Serialized NLSG1 image of a graph function (payload = heights).
inline std::string encode(const GraphFunction& u) {
    json hdr = grid_header(u.base, "f64");
    hdr["kind"] = "graph";
    if (u.lipschitz_hint) hdr["lipschitz_hint"] = *u.lipschitz_hint;
    return hdr.dump() + "\n" + pack_f64(u.values);
}

inline std::string encode(const SignedDistanceGrid& d) {
    json hdr = grid_header(d.grid, "f64");
    hdr["kind"] = "signed-distance";
    return hdr.dump() + "\n" + pack_f64(d.values);
}

struct Decoded {
    json header;
    std::string payload;
};

inline Decoded split(const std::string& bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw Error("NLSG1: missing header line");
    Decoded d;
    try {
        d.header = json::parse(bytes.substr(0, nl));
    } catch (const json::exception& e) {
        throw Error(std::string("NLSG1: malformed header: ") + e.what());
    }
    d.payload = bytes.substr(nl + 1);
    return d;
}

inline VoxelSet decode_voxels(const std::string& bytes) {
    const auto d = split(bytes);
    if (d.header.value("payload", "") != "bits") throw Error("NLSG1: expected a bits payload");
    const Grid g = grid_from_header(d.header);
    VoxelSet E(g, d.header.contains("exterior") ? exterior_from_json(d.header["exterior"])
                                                : ExteriorRule::empty());
    if (d.payload.size() != (g.size() + 7) / 8) throw Error("NLSG1: payload length mismatch");
    for (std::size_t k = 0; k < g.size(); ++k)
        E.occ[k] = (static_cast<unsigned char>(d.payload[k / 8]) >> (k % 8)) & 1u;
    return E;
}

inline GraphFunction decode_graph(const std::string& bytes) {
    const auto d = split(bytes);
    if (d.header.value("payload", "") != "f64") throw Error("NLSG1: expected an f64 payload");
    const Grid g = grid_from_header(d.header);
    GraphFunction u(g, unpack_f64(d.payload, g.size()));
    if (d.header.contains("lipschitz_hint")) u.lipschitz_hint = d.header["lipschitz_hint"].get<double>();
    return u;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace fracmin::nlsg
