#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "tensor.hpp"

namespace xnet {

// XTEN container: "XTEN1" magic, u8 dtype (0 = f32), u8 rank, rank x u64
// little-endian extents, raw element bytes.

namespace detail {

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("XTEN: truncated extent");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline void write_xten(std::ostream& os, const Tensor<float>& t) {
    os.write("XTEN1", 5);
    unsigned char dtype = 0, rank = static_cast<unsigned char>(t.rank());
    os.write(reinterpret_cast<const char*>(&dtype), 1);
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (std::size_t e : t.shape()) detail::write_u64_le(os, e);
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
}

inline Tensor<float> read_xten(std::istream& is) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "XTEN1", 5) != 0) throw IoError("XTEN: bad magic");
    unsigned char dtype = 0, rank = 0;
    is.read(reinterpret_cast<char*>(&dtype), 1);
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (!is) throw IoError("XTEN: truncated header");
    if (dtype != 0) throw FormatError("XTEN: unsupported dtype code " + std::to_string(dtype));
    Shape shape(rank);
    for (unsigned char i = 0; i < rank; ++i) shape[i] = static_cast<std::size_t>(detail::read_u64_le(is));
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
    if (!is) throw IoError("XTEN: truncated payload");
    return t;
}

inline void save_xten_file(const std::string& path, const Tensor<float>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_xten(os, t);
}

inline Tensor<float> load_xten_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    return read_xten(is);
}

// Weight container entry: u16 little-endian name length, UTF-8 name, XTEN
// tensor. Files are a plain sequence of entries.

inline void write_named_tensor(std::ostream& os, const std::string& name, const Tensor<float>& t) {
    if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name);
    unsigned char b[2] = {static_cast<unsigned char>(name.size() & 0xFF),
                          static_cast<unsigned char>((name.size() >> 8) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 2);
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_xten(os, t);
}

// Returns false at a clean end of stream.
inline bool read_named_tensor(std::istream& is, std::string& name, Tensor<float>& t) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (is.eof() && is.gcount() == 0) return false;
    if (!is) throw IoError("weight file: truncated name length");
    std::size_t len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
    name.resize(len);
    is.read(name.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError("weight file: truncated name");
    t = read_xten(is);
    return true;
}

}  // namespace xnet
