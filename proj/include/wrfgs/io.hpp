// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrfgs/oracle.hpp"

namespace wrfgs {

inline uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ull;
    return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a64(s.data(), s.size()));
    return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f.write(data.data(), std::streamsize(data.size()));
    if (!f) throw std::runtime_error("short write to " + p.string());
}

// Little-endian binary buffer; the on-disk formats are defined in these
// terms so they are byte-exact across runs.
struct BinWriter {
    std::string buf;
    void put_bytes(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
    void put_u32(uint32_t v) {
        unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                              (unsigned char)(v >> 24)};
        put_bytes(b, 4);
    }
    void put_u64(uint64_t v) {
        put_u32(uint32_t(v));
        put_u32(uint32_t(v >> 32));
    }
    void put_i32(int32_t v) { put_u32(uint32_t(v)); }
    void put_f64(double v) {
        uint64_t u;
        std::memcpy(&u, &v, 8);
        put_u64(u);
    }
    void put_f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        put_u32(u);
    }
};

struct BinReader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit BinReader(const std::string& b) : buf(b) {}
    void get_bytes(void* p, std::size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("truncated binary data");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint32_t get_u32() {
        unsigned char b[4];
        get_bytes(b, 4);
        return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
    }
    uint64_t get_u64() {
        uint64_t lo = get_u32();
        return lo | uint64_t(get_u32()) << 32;
    }
    int32_t get_i32() { return int32_t(get_u32()); }
    double get_f64() {
        uint64_t u = get_u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    float get_f32() {
        uint32_t u = get_u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
};

// Spectrum container: 16-byte header (8-byte magic, u32 h, u32 w) followed
// by h*w row-major float32, little endian.
constexpr char spectrum_magic[8] = {'W', 'R', 'F', 'S', 'P', 'E', 'C', '1'};

inline std::string encode_spectrum(const SpatialSpectrum& s) {
    BinWriter w;
    w.put_bytes(spectrum_magic, 8);
    w.put_u32(uint32_t(s.h));
    w.put_u32(uint32_t(s.w));
    for (double v : s.values) w.put_f32(float(v));
    return std::move(w.buf);
}

inline SpatialSpectrum decode_spectrum(const std::string& data) {
    BinReader r(data);
    char magic[8];
    r.get_bytes(magic, 8);
    if (std::memcmp(magic, spectrum_magic, 8) != 0)
        throw std::runtime_error("bad spectrum magic");
    uint32_t h = r.get_u32(), w = r.get_u32();
    if (data.size() != 16 + std::size_t(h) * w * 4) throw std::runtime_error("bad spectrum size");
    SpatialSpectrum s{int(h), int(w)};
    for (auto& v : s.values) v = double(r.get_f32());
    return s;
}

inline void write_spectrum_file(const std::filesystem::path& p, const SpatialSpectrum& s) {
    write_file(p, encode_spectrum(s));
}

inline SpatialSpectrum read_spectrum_file(const std::filesystem::path& p) {
    return decode_spectrum(read_file(p));
}

// Full-precision decimal formatting; %.17g round-trips doubles exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace wrfgs
