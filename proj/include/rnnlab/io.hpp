#pragma once

// Self-describing binary container: a JSON header followed by named
// float64 blocks. Checkpoints and exported trial batches both use it.
//
// Layout, bit-exact:
//   bytes 0..7    magic "RNNLABF1"
//   bytes 8..11   uint32, little-endian: byte length L of the JSON header
//   bytes 12..    L bytes of UTF-8 JSON; its "blocks" array lists
//                 {"name", "rows", "cols"} in file order
//   then          for each block, rows*cols IEEE-754 doubles, row-major,
//                 little-endian
//
// Doubles are serialized by bit pattern, so a round trip is exact.

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "matrix.hpp"

namespace rnnlab {

inline constexpr char kBlockFileMagic[8] = {'R', 'N', 'N', 'L', 'A', 'B', 'F', '1'};

namespace detail {

inline void put_u32_le(std::ostream& os, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(b, 4);
}

inline uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
    const uint64_t u = std::bit_cast<uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline double get_f64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

}  // namespace detail

struct BlockFile {
    nlohmann::json header;
    std::vector<std::pair<std::string, Matrix>> blocks;

    const Matrix& block(const std::string& name) const {
        for (const auto& [n, m] : blocks)
            if (n == name) return m;
        throw std::runtime_error("block file: missing block '" + name + "'");
    }
};

inline void write_block_file(const std::string& path, nlohmann::json header,
                             const std::vector<std::pair<std::string, const Matrix*>>& blocks) {
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, m] : blocks)
        index.push_back({{"name", name}, {"rows", m->rows}, {"cols", m->cols}});
    header["blocks"] = std::move(index);
    const std::string head = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kBlockFileMagic, 8);
    detail::put_u32_le(os, static_cast<uint32_t>(head.size()));
    os.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, m] : blocks)
        for (double v : m->data) detail::put_f64_le(os, v);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline BlockFile read_block_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || !std::equal(magic, magic + 8, kBlockFileMagic))
        throw std::runtime_error("not a block file: " + path);
    const uint32_t len = detail::get_u32_le(is);
    std::string head(len, '\0');
    is.read(head.data(), len);
    if (!is) throw std::runtime_error("truncated header: " + path);

    BlockFile out;
    out.header = nlohmann::json::parse(head);
    for (const auto& entry : out.header.at("blocks")) {
        const std::string name = entry.at("name").get<std::string>();
        Matrix m(entry.at("rows").get<int>(), entry.at("cols").get<int>());
        for (double& v : m.data) v = detail::get_f64_le(is);
        if (!is) throw std::runtime_error("truncated block '" + name + "': " + path);
        out.blocks.emplace_back(name, std::move(m));
    }
    return out;
}

}  // namespace rnnlab
