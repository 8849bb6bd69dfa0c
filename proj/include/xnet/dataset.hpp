#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "image.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace xnet {

// CSV manifest, header `path,label`. The class vocabulary is the labels in
// first-seen order; paths must be unique and free of commas.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<std::string> classes;

    std::size_t class_index(const std::string& label) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == label) return i;
        throw FormatError("manifest: unknown label " + label);
    }
};

inline Manifest parse_manifest(const std::string& text) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("manifest: empty file");
    if (line == "path,label\r") line = "path,label";
    if (line != "path,label") throw FormatError("manifest: expected header path,label");
    std::set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
            throw FormatError("manifest: bad row at line " + std::to_string(lineno));
        std::string path = line.substr(0, comma);
        std::string label = line.substr(comma + 1);
        if (!seen.insert(path).second)
            throw FormatError("manifest: duplicate path " + path + " at line " + std::to_string(lineno));
        if (std::find(m.classes.begin(), m.classes.end(), label) == m.classes.end())
            m.classes.push_back(label);
        m.rows.emplace_back(std::move(path), std::move(label));
    }
    return m;
}

inline Manifest load_manifest(const std::string& path) {
    return parse_manifest(read_file_bytes(path));
}

inline std::string manifest_csv(const Manifest& m) {
    std::string out = "path,label\n";
    for (const auto& [p, l] : m.rows) out += p + "," + l + "\n";
    return out;
}

struct Dataset {
    Tensor<float> inputs;  // n x 3 x size x size, values in [0, 1]
    Tensor<float> labels;  // n x k one-hot
    std::vector<std::string> classes;
};

// decode -> resize -> one-hot against the manifest vocabulary. Only PGM/PPM
// files are ingested; convert other formats externally.
inline Dataset load_dataset(const Manifest& m, const std::string& root, std::size_t size = 224) {
    if (m.rows.empty()) throw FormatError("load_dataset: empty manifest");
    Dataset d;
    d.classes = m.classes;
    d.inputs = Tensor<float>({m.rows.size(), 3, size, size});
    d.labels = Tensor<float>({m.rows.size(), m.classes.size()}, 0.0f);
    const std::size_t stride = 3 * size * size;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const auto& [rel, label] = m.rows[i];
        auto dot = rel.rfind('.');
        std::string ext = dot == std::string::npos ? "" : rel.substr(dot);
        if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
            throw FormatError("load_dataset: unsupported extension for " + rel);
        std::filesystem::path full = std::filesystem::path(root) / rel;
        std::string bytes;
        try {
            bytes = read_file_bytes(full.string());
        } catch (const IoError&) {
            throw IoError("load_dataset: missing file for manifest row " + std::to_string(i + 1) +
                          ": " + full.string());
        }
        Tensor<float> img = decode_pnm<float>(bytes);
        img = resize_bilinear(img, size, size);
        std::copy(img.data(), img.data() + stride, d.inputs.data() + i * stride);
        d.labels.at2(i, m.class_index(label)) = 1.0f;
    }
    return d;
}

// Class-conditional sinusoidal gratings (per-class orientation and frequency)
// plus seeded noise: deterministic, and separable even by a nearest-centroid
// rule on raw pixels.
inline Manifest gen_synthetic(const std::string& out_dir, std::size_t classes, std::size_t per_class,
                              std::size_t size, std::uint64_t seed) {
    if (classes < 1 || per_class < 1)
        throw std::invalid_argument("gen_synthetic: counts must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("gen_synthetic: cannot create directory " + out_dir);
    Rng rng(seed);
    Manifest m;
    for (std::size_t c = 0; c < classes; ++c) {
        double angle = 3.14159265358979323846 * static_cast<double>(c) / static_cast<double>(classes);
        double freq = 2.0 + 2.0 * static_cast<double>(c);
        std::string label = "class" + std::to_string(c);
        for (std::size_t k = 0; k < per_class; ++k) {
            Tensor<float> img({1, size, size});
            double phase = rng.uniform(0.0, 0.5);
            for (std::size_t i = 0; i < size; ++i)
                for (std::size_t j = 0; j < size; ++j) {
                    double u = static_cast<double>(i) / static_cast<double>(size);
                    double v = static_cast<double>(j) / static_cast<double>(size);
                    double t = u * std::cos(angle) + v * std::sin(angle);
                    double val = 0.5 + 0.4 * std::sin(2.0 * 3.14159265358979323846 * freq * t + phase);
                    val += rng.uniform(-0.05, 0.05);
                    img[i * size + j] = static_cast<float>(std::min(1.0, std::max(0.0, val)));
                }
            std::string fname = label + "_" + std::to_string(k) + ".pgm";
            write_file_bytes((std::filesystem::path(out_dir) / fname).string(), encode_pgm(img));
            m.rows.emplace_back(fname, label);
        }
        m.classes.push_back(label);
    }
    write_file_bytes((std::filesystem::path(out_dir) / "manifest.csv").string(), manifest_csv(m));
    return m;
}

}  // namespace xnet
