// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_CPFP_H
#define FEELAB_CORE_CPFP_H

#include <string>
#include <utility>
#include <vector>

#include "feelab/core/types.h"

namespace feelab {
namespace core {

using ParentLink = std::pair<std::string, std::string>;  // (child_id, parent_id)

// Collapses each connected parent/child package into a single observation:
// summed fee, vsize and weight, package fee rate = total fee / total vsize,
// earliest entry, confirm fields from the latest-confirming member, RBF as
// the disjunction of member flags. Unlinked transactions pass through.
// Throws on a cycle and on a link naming an unknown transaction.
std::vector<TxRecord> collapse_cpfp(const std::vector<TxRecord>& txs,
                                    const std::vector<ParentLink>& parent_links);

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_CPFP_H
