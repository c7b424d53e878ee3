#pragma once

#include <linbreg/error.hpp>
#include <linbreg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace linbreg {

/// File missing, truncated or in the wrong format.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string read_pnm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

inline std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("IDX: truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

} // namespace detail

/// Writes raw integer levels (already in [0, maxval]) as binary PGM; maxval
/// 255 gives 8-bit samples, 65535 big-endian 16-bit samples.
inline void write_pgm(const std::filesystem::path& path, const Tensor& levels, int maxval) {
    if (levels.ndim() != 2) throw DimensionError("PGM needs a 2-D array, got " + shape_str(levels.shape()));
    if (maxval != 255 && maxval != 65535) throw ArgumentError("PGM maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << levels.dim(1) << ' ' << levels.dim(0) << '\n' << maxval << '\n';
    for (double v : levels) {
        const auto q = static_cast<std::uint32_t>(std::clamp(std::lround(v), 0L, static_cast<long>(maxval)));
        if (maxval == 255) {
            out.put(static_cast<char>(q));
        } else {
            out.put(static_cast<char>(q >> 8));
            out.put(static_cast<char>(q & 0xFF));
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

struct PgmImage {
    Tensor levels; ///< raw sample values
    int maxval = 255;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (detail::read_pnm_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
    const std::string ws = detail::read_pnm_token(in), hs = detail::read_pnm_token(in),
                      ms = detail::read_pnm_token(in);
    std::size_t w = 0, h = 0;
    int maxval = 0;
    try {
        w = std::stoul(ws);
        h = std::stoul(hs);
        maxval = std::stoi(ms);
    } catch (const std::exception&) {
        throw IoError(path.string() + ": malformed PGM header");
    }
    if (w == 0 || h == 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": bad PGM header values");
    PgmImage img;
    img.maxval = maxval;
    img.levels = Tensor(Shape{h, w});
    const bool wide = maxval > 255;
    for (auto& v : img.levels) {
        unsigned char b[2] = {0, 0};
        if (!in.read(reinterpret_cast<char*>(b), wide ? 2 : 1)) throw IoError(path.string() + ": truncated data");
        v = wide ? static_cast<double>((b[0] << 8) | b[1]) : static_cast<double>(b[0]);
    }
    return img;
}

/// Affine quantisation map value = offset + scale * level.
struct SnapshotMap {
    double offset = 0.0;
    double scale = 1.0;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& pgm) {
    auto p = pgm;
    p += ".map";
    return p;
}

/// Maps the array affinely onto [0, 65535], writes a 16-bit PGM and records
/// the map in `<path>.map`.
inline SnapshotMap write_pgm_snapshot(const std::filesystem::path& path, const Tensor& values) {
    if (values.ndim() != 2) throw DimensionError("snapshot needs a 2-D array");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    SnapshotMap map{*lo, (*hi > *lo) ? (*hi - *lo) / 65535.0 : 1.0};
    Tensor levels(values.shape());
    for (std::size_t i = 0; i < values.size(); ++i) levels[i] = std::round((values[i] - map.offset) / map.scale);
    write_pgm(path, levels, 65535);
    std::ofstream side(sidecar_path(path));
    if (!side) throw IoError("cannot write sidecar for " + path.string());
    side << std::setprecision(17) << "offset " << map.offset << "\nscale " << map.scale << '\n';
    return map;
}

inline Tensor read_pgm_snapshot(const std::filesystem::path& path) {
    PgmImage img = read_pgm(path);
    std::ifstream side(sidecar_path(path));
    if (!side) throw IoError("missing sidecar " + sidecar_path(path).string());
    SnapshotMap map;
    std::string key;
    double v = 0.0;
    while (side >> key >> v) {
        if (key == "offset") map.offset = v;
        else if (key == "scale") map.scale = v;
        else throw IoError("unknown sidecar key '" + key + "'");
    }
    for (auto& x : img.levels) x = map.offset + map.scale * x;
    return img.levels;
}

/// Writes a matrix (or flattened array) as comma-separated rows.
inline void write_matrix_csv(const std::filesystem::path& path, const Tensor& a) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::size_t cols = a.ndim() >= 2 ? a.dim(a.ndim() - 1) : a.size();
    out << std::setprecision(17);
    for (std::size_t i = 0; i < a.size(); ++i) out << a[i] << ((i + 1) % cols == 0 ? '\n' : ',');
}

/// IDX image file (magic 2051): returns (count, rows * cols) raw byte values.
inline Tensor read_idx_images(const std::filesystem::path& path, std::size_t limit = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (detail::read_be32(in) != 2051) throw IoError(path.string() + ": bad IDX image magic");
    std::size_t n = detail::read_be32(in);
    const std::size_t rows = detail::read_be32(in), cols = detail::read_be32(in);
    if (limit > 0) n = std::min(n, limit);
    Tensor out(Shape{n, rows * cols});
    std::vector<unsigned char> buf(rows * cols);
    for (std::size_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw IoError(path.string() + ": truncated image data");
        }
        for (std::size_t j = 0; j < buf.size(); ++j) out(i, j) = buf[j];
    }
    return out;
}

/// IDX label file (magic 2049).
inline std::vector<int> read_idx_labels(const std::filesystem::path& path, std::size_t limit = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (detail::read_be32(in) != 2049) throw IoError(path.string() + ": bad IDX label magic");
    std::size_t n = detail::read_be32(in);
    if (limit > 0) n = std::min(n, limit);
    std::vector<int> out(n);
    for (auto& v : out) {
        char c;
        if (!in.get(c)) throw IoError(path.string() + ": truncated label data");
        v = static_cast<unsigned char>(c);
    }
    return out;
}

} // namespace linbreg
