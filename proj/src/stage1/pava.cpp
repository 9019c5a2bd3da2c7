// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage1/pava.h"

#include <stdexcept>

namespace feelab {
namespace stage1 {

namespace {

// Stack-based PAVA for a weakly increasing fit: merge a new singleton block
// with its predecessor while the predecessor's mean strictly exceeds it.
// Strict comparison keeps equal-mean blocks apart, so refitting an already
// monotone sequence returns it bit for bit.
std::vector<double> pava_up(const std::vector<double>& y) {
    if (y.empty()) throw std::invalid_argument("pava on empty sequence");

    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (double v : y) {
        Block b{v, 1};
        while (!blocks.empty() && blocks.back().mean() > b.mean()) {
            b.sum += blocks.back().sum;
            b.count += blocks.back().count;
            blocks.pop_back();
        }
        blocks.push_back(b);
    }

    std::vector<double> out;
    out.reserve(y.size());
    for (const Block& b : blocks) {
        for (std::size_t k = 0; k < b.count; ++k) out.push_back(b.mean());
    }
    return out;
}

}  // namespace

std::vector<double> pava_increasing(const std::vector<double>& values) {
    return pava_up(values);
}

std::vector<double> pava_decreasing(const std::vector<double>& values) {
    std::vector<double> neg(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) neg[i] = -values[i];
    std::vector<double> fit = pava_up(neg);
    for (double& v : fit) v = -v;
    return fit;
}

}  // namespace stage1
}  // namespace feelab
