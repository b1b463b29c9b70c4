#pragma once

// Checkpoint serialization for RnnParams. The file is a block container
// (see io.hpp) whose header records dims, alpha, and the seed/gain the
// network was initialized with; the weight blocks are w_h, w_x, w_out in
// that order.

#include <cstdint>
#include <string>

#include "io.hpp"
#include "rnn.hpp"

namespace rnnlab {

struct Checkpoint {
    RnnParams params;
    uint64_t seed = 0;
    double gain = 0.0;
};

inline void save_checkpoint(const std::string& path, const RnnParams& p, uint64_t seed, double gain) {
    nlohmann::json header = {
        {"type", "checkpoint"}, {"n", p.n},         {"n_in", p.n_in}, {"n_out", p.n_out},
        {"alpha", p.alpha},     {"seed", seed},     {"gain", gain},
    };
    write_block_file(path, header, {{"w_h", &p.w_h}, {"w_x", &p.w_x}, {"w_out", &p.w_out}});
}

inline Checkpoint load_checkpoint(const std::string& path) {
    BlockFile f = read_block_file(path);
    if (f.header.value("type", "") != "checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint c;
    c.params.n = f.header.at("n").get<int>();
    c.params.n_in = f.header.at("n_in").get<int>();
    c.params.n_out = f.header.at("n_out").get<int>();
    c.params.alpha = f.header.at("alpha").get<double>();
    c.seed = f.header.at("seed").get<uint64_t>();
    c.gain = f.header.at("gain").get<double>();
    c.params.w_h = f.block("w_h");
    c.params.w_x = f.block("w_x");
    c.params.w_out = f.block("w_out");
    require(c.params.w_h.rows == c.params.n && c.params.w_h.cols == c.params.n &&
                c.params.w_x.rows == c.params.n && c.params.w_x.cols == c.params.n_in &&
                c.params.w_out.rows == c.params.n_out && c.params.w_out.cols == c.params.n,
            "checkpoint: block shapes inconsistent with header dims");
    return c;
}

}  // namespace rnnlab
