#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "tensor.hpp"

namespace xnet {

namespace detail {

// PNM header tokens separated by whitespace, with '#' comments to end of line.
inline std::size_t pnm_token(const std::string& bytes, std::size_t pos, std::string& tok) {
    while (pos < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("PNM: truncated header at byte " + std::to_string(start));
    tok = bytes.substr(start, pos - start);
    return pos;
}

}  // namespace detail

// Binary PGM (P5) and PPM (P6) decoder, maxval <= 255. Grayscale replicates
// to 3 channels; every value scales to [0, 1] by /maxval.
template <typename T = float>
Tensor<T> decode_pnm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError("PNM: bad magic at byte 0");
    bool color = bytes[1] == '6';
    std::string tok;
    std::size_t pos = 2;
    pos = detail::pnm_token(bytes, pos, tok);
    std::size_t w = std::stoul(tok);
    pos = detail::pnm_token(bytes, pos, tok);
    std::size_t h = std::stoul(tok);
    pos = detail::pnm_token(bytes, pos, tok);
    unsigned long maxval = std::stoul(tok);
    if (maxval == 0 || maxval > 255)
        throw FormatError("PNM: unsupported maxval " + std::to_string(maxval) + " at byte " +
                          std::to_string(pos));
    if (pos >= bytes.size()) throw FormatError("PNM: truncated after header");
    ++pos;  // single whitespace byte before the raster
    std::size_t need = w * h * (color ? 3 : 1);
    if (bytes.size() - pos < need)
        throw FormatError("PNM: truncated payload at byte " + std::to_string(bytes.size()));
    Tensor<T> out({3, h, w});
    const T scale = T(1) / static_cast<T>(maxval);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            if (color) {
                for (std::size_t c = 0; c < 3; ++c)
                    out[(c * h + i) * w + j] =
                        static_cast<T>(static_cast<unsigned char>(bytes[pos + (i * w + j) * 3 + c])) * scale;
            } else {
                T v = static_cast<T>(static_cast<unsigned char>(bytes[pos + i * w + j])) * scale;
                for (std::size_t c = 0; c < 3; ++c) out[(c * h + i) * w + j] = v;
            }
        }
    return out;
}

// Encodes channel 0 as binary PGM (P5), maxval 255, values clamped to [0,1].
template <typename T>
std::string encode_pgm(const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("encode_pgm: rank-3 (c,h,w) tensor expected");
    const std::size_t h = x.extent(1), w = x.extent(2);
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double v = static_cast<double>(x[(0 * h + i) * w + j]);
            v = std::min(1.0, std::max(0.0, v));
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    return out;
}

// Bilinear resize with half-pixel centers: source coordinate
// (i + 0.5) * in / out - 0.5, clamped to the valid range. Channels resize
// independently; output values stay inside the input's min/max.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    if (x.rank() != 3) throw ShapeError("resize_bilinear: rank-3 (c,h,w) tensor expected");
    const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
    if (out_h == h && out_w == w) return x;
    Tensor<T> y({c, out_h, out_w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* src = x.data() + ch * h * w;
        T* dst = y.data() + ch * out_h * out_w;
        for (std::size_t i = 0; i < out_h; ++i) {
            double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(h) /
                            static_cast<double>(out_h) - 0.5;
            sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
            std::size_t y0 = static_cast<std::size_t>(sy);
            std::size_t y1 = std::min(y0 + 1, h - 1);
            double fy = sy - static_cast<double>(y0);
            for (std::size_t j = 0; j < out_w; ++j) {
                double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(w) /
                                static_cast<double>(out_w) - 0.5;
                sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
                std::size_t x0 = static_cast<std::size_t>(sx);
                std::size_t x1 = std::min(x0 + 1, w - 1);
                double fx = sx - static_cast<double>(x0);
                double v = (1.0 - fy) * ((1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                           fy * ((1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
                dst[i * out_w + j] = static_cast<T>(v);
            }
        }
    }
    return y;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open file for write: " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failure: " + path);
}

}  // namespace xnet
