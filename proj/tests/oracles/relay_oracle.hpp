// Test-side model of the ring relay, built from the node update rule alone:
// symbolic messages as dense 0/1 vectors over {X+, X-, every key}, with
// recoverability decided by comparing ranks.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<std::uint8_t>;

inline int rank_of(std::vector<Vec> rows) {
    int rank = 0;
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    for (std::size_t c = 0; c < cols && rank < static_cast<int>(rows.size()); ++c) {
        std::size_t pivot = rank;
        while (pivot < rows.size() && !rows[pivot][c]) ++pivot;
        if (pivot == rows.size()) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (r != static_cast<std::size_t>(rank) && rows[r][c])
                for (std::size_t j = 0; j < cols; ++j) rows[r][j] ^= rows[rank][j];
        ++rank;
    }
    return rank;
}

inline bool in_span(const std::vector<Vec>& rows, const Vec& target) {
    std::vector<Vec> with = rows;
    with.push_back(target);
    return rank_of(rows) == rank_of(with);
}

struct OracleSegment {
    std::vector<int> sats;                   // position 0..m
    std::vector<std::pair<int, int>> keys;   // chain positions (a, b)
    std::vector<Vec> messages;               // hops -1..m
};

struct OracleRing {
    int n = 0, i = 0, k = 0, r = 2, rings = 1;
    std::size_t per_ring = 0;
    OracleSegment seg[2];  // 0 = plus, 1 = minus

    OracleRing(int n_sats, int att_a, int att_b, int range, int n_rings = 1)
        : n(n_sats), i(att_a), k(att_b), r(range), rings(n_rings) {
        for (int s = 0; s < 2; ++s) {
            const int step = s == 0 ? 1 : n - 1;
            for (int v = i;; v = (v + step) % n) {
                seg[s].sats.push_back(v);
                if (v == k) break;
            }
            const int m = static_cast<int>(seg[s].sats.size()) - 1;
            seg[s].keys.push_back({-1, 0});
            seg[s].keys.push_back({m, m + 1});
            for (int a = -1; a <= m + 1; ++a)
                for (int b = a + 2; b <= std::min(a + r, m + 1); ++b) seg[s].keys.push_back({a, b});
        }
        per_ring = 2 + seg[0].keys.size() + seg[1].keys.size();
        for (int s = 0; s < 2; ++s) build_messages(s);
    }

    std::size_t dim() const { return per_ring * rings; }
    std::size_t secret_var(int s) const { return s; }
    std::size_t key_var(int s, std::size_t idx) const { return 2 + (s == 1 ? seg[0].keys.size() : 0) + idx; }

    // node at position p: strip keys ending at p, add keys starting at p
    void build_messages(int s) {
        auto& g = seg[s];
        const int m = static_cast<int>(g.sats.size()) - 1;
        Vec cur(per_ring, 0);
        cur[secret_var(s)] = 1;
        for (int p = -1; p <= m; ++p) {
            for (std::size_t j = 0; j < g.keys.size(); ++j)
                if (g.keys[j].second == p || g.keys[j].first == p) cur[key_var(s, j)] ^= 1;
            g.messages.push_back(cur);
        }
    }

    int position(int s, int sat) const {
        const auto& v = seg[s].sats;
        const auto it = std::find(v.begin(), v.end(), sat);
        return it == v.end() ? -100 : static_cast<int>(it - v.begin());
    }

    // Known vectors for one ring, embedded at ring offset.
    void knowledge(int ring, const std::vector<int>& comp, std::vector<Vec>& rows, int only_segment = -1) const {
        const std::size_t off = per_ring * ring;
        for (int s = 0; s < 2; ++s) {
            if (only_segment >= 0 && s != only_segment) continue;
            for (const Vec& msg : seg[s].messages) {
                Vec v(dim(), 0);
                std::copy(msg.begin(), msg.end(), v.begin() + off);
                rows.push_back(std::move(v));
            }
            for (std::size_t j = 0; j < seg[s].keys.size(); ++j) {
                bool held = false;
                for (int c : comp) {
                    const int p = position(s, c);
                    held = held || p == seg[s].keys[j].first || p == seg[s].keys[j].second;
                }
                if (!held) continue;
                Vec v(dim(), 0);
                v[off + key_var(s, j)] = 1;
                rows.push_back(std::move(v));
            }
        }
    }

    bool ring_recoverable(const std::vector<std::vector<int>>& comp) const {
        std::vector<Vec> rows;
        Vec target(dim(), 0);
        for (int ring = 0; ring < rings; ++ring) {
            static const std::vector<int> none;
            knowledge(ring, ring < static_cast<int>(comp.size()) ? comp[ring] : none, rows);
            target[per_ring * ring + 0] = 1;
            target[per_ring * ring + 1] = 1;
        }
        return in_span(rows, target);
    }

    bool segment_exposed(int s, const std::vector<int>& comp) const {
        std::vector<Vec> rows;
        knowledge(0, comp, rows, s);
        Vec target(dim(), 0);
        target[secret_var(s)] = 1;
        return in_span(rows, target);
    }
};

// Smallest subset of `candidates` satisfying pred, by exhaustive search in
// increasing size; -1 when even the full set fails.
inline int exhaustive_min(const std::vector<int>& candidates, const std::function<bool(const std::vector<int>&)>& pred) {
    const int n = static_cast<int>(candidates.size());
    for (int size = 0; size <= n; ++size) {
        std::vector<int> pick(size);
        for (int j = 0; j < size; ++j) pick[j] = j;
        while (true) {
            std::vector<int> set;
            for (int j : pick) set.push_back(candidates[j]);
            if (pred(set)) return size;
            int j = size - 1;
            while (j >= 0 && pick[j] == n - size + j) --j;
            if (j < 0) break;
            ++pick[j];
            for (int t = j + 1; t < size; ++t) pick[t] = pick[t - 1] + 1;
        }
    }
    return -1;
}

// Visits every subset of `candidates` with at most `max_size` elements.
inline void for_each_subset(const std::vector<int>& candidates, int max_size,
                            const std::function<void(const std::vector<int>&)>& fn) {
    const int n = static_cast<int>(candidates.size());
    for (int size = 0; size <= std::min(max_size, n); ++size) {
        std::vector<int> pick(size);
        for (int j = 0; j < size; ++j) pick[j] = j;
        while (true) {
            std::vector<int> set;
            for (int j : pick) set.push_back(candidates[j]);
            fn(set);
            int j = size - 1;
            while (j >= 0 && pick[j] == n - size + j) --j;
            if (j < 0) break;
            ++pick[j];
            for (int t = j + 1; t < size; ++t) pick[t] = pick[t - 1] + 1;
        }
    }
}

}  // namespace oracle
