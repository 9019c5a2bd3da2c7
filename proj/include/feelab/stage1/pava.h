// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE1_PAVA_H
#define FEELAB_STAGE1_PAVA_H

#include <vector>

namespace feelab {
namespace stage1 {

// L2-optimal weakly DECREASING fit by pool-adjacent-violators.
// Output length equals input length. Throws on empty input.
std::vector<double> pava_decreasing(const std::vector<double>& values);

// Weakly increasing variant (used by tests and the isotonic helpers).
std::vector<double> pava_increasing(const std::vector<double>& values);

}  // namespace stage1
}  // namespace feelab

#endif  // FEELAB_STAGE1_PAVA_H
