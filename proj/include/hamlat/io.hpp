// Binary container with a JSON manifest, shared by dataset and checkpoint
// files, plus small CSV helpers. Payloads are flat little-endian f64 blocks.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hamlat/core.hpp"

namespace hamlat::io {

using nlohmann::json;

inline constexpr char kMagic[8] = {'H', 'A', 'M', 'L', 'A', 'T', '0', '1'};

struct CorruptFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

static_assert(std::endian::native == std::endian::little,
              "file format is little-endian; big-endian hosts are unsupported");

inline void write_container(const std::filesystem::path& path, const json& manifest,
                            const Vec& payload) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    const std::string m = manifest.dump();
    const std::uint64_t mlen = m.size();
    const std::uint64_t plen = payload.size();
    f.write(kMagic, sizeof(kMagic));
    f.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    f.write(reinterpret_cast<const char*>(&plen), sizeof(plen));
    f.write(m.data(), static_cast<std::streamsize>(m.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

struct Container {
    json manifest;
    Vec payload;
};

inline Container read_container(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    char magic[8];
    std::uint64_t mlen = 0, plen = 0;
    f.read(magic, sizeof(magic));
    f.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    f.read(reinterpret_cast<char*>(&plen), sizeof(plen));
    if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw CorruptFileError("bad magic or truncated header: " + path.string());
    std::string m(mlen, '\0');
    f.read(m.data(), static_cast<std::streamsize>(mlen));
    if (!f) throw CorruptFileError("truncated manifest: " + path.string());
    Container c;
    try {
        c.manifest = json::parse(m);
    } catch (const json::parse_error&) {
        throw CorruptFileError("corrupt manifest: " + path.string());
    }
    c.payload.resize(plen);
    f.read(reinterpret_cast<char*>(c.payload.data()), static_cast<std::streamsize>(plen * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(plen * sizeof(double)))
        throw CorruptFileError("truncated payload: " + path.string());
    return c;
}

inline json spec_to_json(const LatticeSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    if (s.kind == LatticeKind::Fk2d) {
        j["rows"] = s.rows;
        j["cols"] = s.cols;
        j["a"] = s.a;
        j["b"] = s.b;
        j["rho"] = s.rho;
    } else {
        j["n"] = s.n;
        if (s.kind == LatticeKind::FkToda || s.kind == LatticeKind::FputToda) j["mu"] = s.mu;
        if (s.kind == LatticeKind::KgLri) {
            j["a"] = s.a;
            j["b"] = s.b;
        }
    }
    return j;
}

inline LatticeSpec spec_from_json(const json& j) {
    LatticeSpec s;
    s.kind = lattice_kind_from_string(j.at("kind").get<std::string>());
    if (s.kind == LatticeKind::Fk2d) {
        s.rows = j.at("rows").get<int>();
        s.cols = j.at("cols").get<int>();
        s.a = j.value("a", 1.0);
        s.b = j.value("b", 1.0);
        s.rho = j.value("rho", 1.0);
    } else {
        s.n = j.at("n").get<int>();
        s.mu = j.value("mu", 0.0);
        s.a = j.value("a", 1.0);
        s.b = j.value("b", 1.0);
    }
    s.validate();
    return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f << text;
}

}  // namespace hamlat::io
