// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/core/cpfp.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace feelab {
namespace core {

namespace {

// Union-find over tx indices.
struct Dsu {
    std::vector<std::size_t> parent;
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<TxRecord> collapse_cpfp(const std::vector<TxRecord>& txs,
                                    const std::vector<ParentLink>& parent_links) {
    if (parent_links.empty()) return txs;

    std::unordered_map<std::string, std::size_t> index;
    index.reserve(txs.size());
    for (std::size_t i = 0; i < txs.size(); ++i) index.emplace(txs[i].tx_id, i);

    // Cycle check: the child->parent edges must form a forest.
    std::unordered_map<std::string, std::string> edge;
    for (const auto& [child, parent] : parent_links) {
        if (!index.count(child)) throw std::invalid_argument("cpfp link references unknown tx: " + child);
        if (!index.count(parent)) throw std::invalid_argument("cpfp link references unknown tx: " + parent);
        if (!edge.emplace(child, parent).second) {
            throw std::invalid_argument("cpfp link gives tx two parents: " + child);
        }
    }
    for (const auto& [start, _] : edge) {
        std::string cur = start;
        std::size_t hops = 0;
        while (edge.count(cur)) {
            cur = edge[cur];
            if (++hops > edge.size()) {
                throw std::invalid_argument("cycle in cpfp parent links at tx: " + start);
            }
        }
    }

    Dsu dsu(txs.size());
    for (const auto& [child, parent] : parent_links) {
        dsu.unite(index[child], index[parent]);
    }

    std::unordered_map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < txs.size(); ++i) groups[dsu.find(i)].push_back(i);

    std::vector<TxRecord> out;
    out.reserve(txs.size());
    for (std::size_t i = 0; i < txs.size(); ++i) {
        std::size_t root = dsu.find(i);
        const auto& members = groups[root];
        if (members.size() == 1) {
            out.push_back(txs[i]);
            continue;
        }
        if (members.front() != i) continue;  // emit each package once, at its first member

        TxRecord pkg = txs[i];
        pkg.cpfp_package = true;
        pkg.package_members.clear();
        pkg.fee_sats = 0;
        pkg.vsize_vb = 0;
        pkg.weight_wu = 0;
        pkg.n_inputs = 0;
        pkg.n_outputs = 0;
        pkg.total_output_sats = 0;
        pkg.rbf = false;
        pkg.has_op_return = false;
        pkg.has_inscription = false;
        pkg.entry_time = txs[members[0]].entry_time;
        pkg.confirm_time.reset();
        pkg.confirm_height.reset();
        pkg.wait_blocks.reset();

        for (std::size_t m : members) {
            const TxRecord& tx = txs[m];
            pkg.package_members.push_back(tx.tx_id);
            pkg.fee_sats += tx.fee_sats;
            pkg.vsize_vb += tx.vsize_vb;
            pkg.weight_wu += tx.weight_wu;
            pkg.n_inputs += tx.n_inputs;
            pkg.n_outputs += tx.n_outputs;
            pkg.total_output_sats += tx.total_output_sats;
            pkg.rbf = pkg.rbf || tx.rbf;
            pkg.has_op_return = pkg.has_op_return || tx.has_op_return;
            pkg.has_inscription = pkg.has_inscription || tx.has_inscription;
            pkg.entry_time = std::min(pkg.entry_time, tx.entry_time);
            if (tx.confirm_time && (!pkg.confirm_time || *tx.confirm_time > *pkg.confirm_time)) {
                pkg.confirm_time = tx.confirm_time;
                pkg.confirm_height = tx.confirm_height;
                pkg.wait_blocks = tx.wait_blocks;
            }
        }
        pkg.fee_rate = Rational(pkg.fee_sats, pkg.vsize_vb);
        out.push_back(std::move(pkg));
    }
    return out;
}

}  // namespace core
}  // namespace feelab
