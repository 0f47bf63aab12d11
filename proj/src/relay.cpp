#include "qkdring/relay.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"
#include "qkdring/geometry.hpp"
#include "qkdring/linkbudget.hpp"

namespace qkdring::relay {

// --- BitString -------------------------------------------------------------

BitString::BitString(std::size_t n_bits) : n_(n_bits), w_((n_bits + 63) / 64, 0) {}

BitString BitString::random(std::size_t n_bits, std::mt19937_64& rng) {
    BitString b(n_bits);
    for (auto& w : b.w_) w = rng();
    if (n_bits % 64 != 0) b.w_.back() &= (std::uint64_t{1} << (n_bits % 64)) - 1;
    return b;
}

bool BitString::get(std::size_t i) const {
    require(i < n_, "BitString: index out of range");
    return (w_[i / 64] >> (i % 64)) & 1u;
}

void BitString::set(std::size_t i, bool v) {
    require(i < n_, "BitString: index out of range");
    const std::uint64_t m = std::uint64_t{1} << (i % 64);
    if (v)
        w_[i / 64] |= m;
    else
        w_[i / 64] &= ~m;
}

void BitString::flip(std::size_t i) {
    require(i < n_, "BitString: index out of range");
    w_[i / 64] ^= std::uint64_t{1} << (i % 64);
}

BitString& BitString::operator^=(const BitString& o) {
    require(n_ == o.n_, "BitString: length mismatch in xor");
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] ^= o.w_[i];
    return *this;
}

std::size_t BitString::popcount() const {
    std::size_t c = 0;
    for (auto w : w_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::string BitString::to_string() const {
    std::string s(n_, '0');
    for (std::size_t i = 0; i < n_; ++i)
        if (get(i)) s[i] = '1';
    return s;
}

// --- paths and keys --------------------------------------------------------

std::optional<int> RingPath::position_of(Segment s, int sat) const {
    const auto& seg = segment(s);
    for (std::size_t p = 0; p < seg.size(); ++p)
        if (seg[p] == sat) return static_cast<int>(p);
    return std::nullopt;
}

int RingPath::node_at(Segment s, int position) const {
    const int m = hops(s);
    require(position >= -1 && position <= m + 1, "RingPath: chain position out of range");
    if (position == -1) return -1;
    if (position == m + 1) return -2;
    return segment(s)[static_cast<std::size_t>(position)];
}

RingPath build_paths(int n_sats, int i, int k, int r, int n_rings) {
    require(n_sats >= 3, fmt::format("relay: ring needs at least 3 satellites (got {})", n_sats));
    require(i >= 0 && i < n_sats && k >= 0 && k < n_sats, "relay: attachment index out of range");
    require(i != k, "relay: Alice and Bob must attach to different satellites");
    require(n_rings >= 1, "relay: n_rings must be >= 1");

    RingPath p;
    p.n_sats = n_sats;
    p.attach_a = i;
    p.attach_b = k;
    p.neighbor_range = r;
    p.n_rings = n_rings;
    for (int j = i;; j = (j + 1) % n_sats) {
        p.segment_plus.push_back(j);
        if (j == k) break;
    }
    for (int j = i;; j = (j - 1 + n_sats) % n_sats) {
        p.segment_minus.push_back(j);
        if (j == k) break;
    }
    const int m_min = std::min(p.hops(Segment::Plus), p.hops(Segment::Minus));
    require(r >= 2 && r <= m_min + 1,
            fmt::format("relay: neighbour range r={} must lie in [2, {}] for this ring", r, m_min + 1));
    return p;
}

KeyKind key_kind(const RingPath&, const KeyId& id) {
    return id.b - id.a == 1 ? KeyKind::PointToPoint : KeyKind::TwinField;
}

std::vector<KeyId> prescribed_keys(const RingPath& path, Segment s) {
    const int m = path.hops(s);
    const int r = path.neighbor_range;
    std::vector<KeyId> out;
    for (int a = -1; a <= m + 1; ++a) {
        if (a == -1 || a == m) out.push_back({s, a, a + 1});
        for (int d = 2; d <= r && a + d <= m + 1; ++d) out.push_back({s, a, a + d});
    }
    return out;
}

int key_count(int hops, int r) {
    int n = 2;
    for (int d = 2; d <= r; ++d) n += std::max(0, hops + 3 - d);
    return n;
}

KeyStore generate_link_keys(const RingPath& path, std::size_t key_len, std::uint64_t seed) {
    require(key_len >= 1, "generate_link_keys: key length must be >= 1");
    std::mt19937_64 rng(seed);
    KeyStore store;
    for (Segment s : {Segment::Plus, Segment::Minus}) {
        for (const KeyId& id : prescribed_keys(path, s)) {
            store.emplace(id, LinkKey{key_kind(path, id), id, BitString::random(key_len, rng)});
        }
    }
    return store;
}

namespace {

const BitString& lookup(const KeyStore& keys, const KeyId& id) {
    auto it = keys.find(id);
    if (it == keys.end())
        throw ValidationError(fmt::format("relay: missing key ({},{}) on segment {}", id.a, id.b,
                                          id.segment == Segment::Plus ? "+" : "-"));
    return it->second.bits;
}

}  // namespace

std::vector<KeyId> masking_keys(const RingPath& path, Segment s, int hop) {
    std::vector<KeyId> out;
    for (const KeyId& id : prescribed_keys(path, s))
        if (id.a <= hop && hop < id.b) out.push_back(id);
    return out;
}

ForwardTranscript forward(const RingPath& path, Segment s, const BitString& secret, const KeyStore& keys) {
    const int m = path.hops(s);
    const auto all = prescribed_keys(path, s);
    ForwardTranscript t;
    t.segment = s;
    t.secret = secret;

    BitString x = secret;
    for (int p = -1; p <= m; ++p) {
        for (const KeyId& id : all)
            if (id.b == p || id.a == p) x ^= lookup(keys, id);
        t.messages.push_back({p, x});
    }
    return t;
}

BitString recover(const RingPath& path, const ForwardTranscript& transcript, const KeyStore& keys) {
    const int m = path.hops(transcript.segment);
    auto it = std::find_if(transcript.messages.begin(), transcript.messages.end(),
                           [&](const HopMessage& h) { return h.hop == m; });
    if (it == transcript.messages.end()) throw ValidationError("recover: transcript lacks the final message");
    BitString x = it->value;
    for (const KeyId& id : prescribed_keys(path, transcript.segment))
        if (id.b == m + 1) x ^= lookup(keys, id);
    return x;
}

// --- GF(2) adversary model -------------------------------------------------

namespace {

using Bits = std::vector<std::uint64_t>;

void set_bit(Bits& v, std::size_t i) { v[i / 64] |= std::uint64_t{1} << (i % 64); }
bool test_bit(const Bits& v, std::size_t i) { return (v[i / 64] >> (i % 64)) & 1u; }
void xor_into(Bits& a, const Bits& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] ^= b[i];
}
bool is_zero(const Bits& v) {
    return std::all_of(v.begin(), v.end(), [](std::uint64_t w) { return w == 0; });
}
std::size_t lowest_bit(const Bits& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i]) return i * 64 + static_cast<std::size_t>(std::countr_zero(v[i]));
    return static_cast<std::size_t>(-1);
}

// Row-echelon basis that remembers which generators each row combines.
class Gf2Span {
public:
    Gf2Span(std::size_t n_vars, std::size_t n_gens) : vars_((n_vars + 63) / 64), gens_((n_gens + 63) / 64) {}

    void insert(Bits v, std::size_t gen) {
        Bits origin(gens_, 0);
        set_bit(origin, gen);
        for (const Row& r : rows_) {
            if (test_bit(v, r.pivot)) {
                xor_into(v, r.coef);
                xor_into(origin, r.origin);
            }
        }
        if (is_zero(v)) return;
        const std::size_t pivot = lowest_bit(v);
        rows_.push_back({std::move(v), std::move(origin), pivot});
    }

    // Generator subset whose XOR equals `target`, if any.
    std::optional<Bits> express(Bits target) const {
        Bits origin(gens_, 0);
        for (const Row& r : rows_) {
            if (test_bit(target, r.pivot)) {
                xor_into(target, r.coef);
                xor_into(origin, r.origin);
            }
        }
        if (!is_zero(target)) return std::nullopt;
        return origin;
    }

    Bits zero_vars() const { return Bits(vars_, 0); }

private:
    struct Row {
        Bits coef;
        Bits origin;
        std::size_t pivot;
    };
    std::size_t vars_, gens_;
    std::vector<Row> rows_;
};

// Variable layout of one ring: X+, X-, then the keys of each segment.
struct RingLayout {
    std::vector<KeyId> keys_plus, keys_minus;
    std::size_t dim = 0;

    explicit RingLayout(const RingPath& path)
        : keys_plus(prescribed_keys(path, Segment::Plus)), keys_minus(prescribed_keys(path, Segment::Minus)) {
        dim = 2 + keys_plus.size() + keys_minus.size();
    }
    std::size_t secret(Segment s) const { return s == Segment::Plus ? 0 : 1; }
    std::size_t key(const KeyId& id) const {
        const auto& list = id.segment == Segment::Plus ? keys_plus : keys_minus;
        const auto it = std::lower_bound(list.begin(), list.end(), id);
        require(it != list.end() && *it == id, "relay: unknown key");
        const std::size_t base = id.segment == Segment::Plus ? 2 : 2 + keys_plus.size();
        return base + static_cast<std::size_t>(it - list.begin());
    }
};

struct System {
    std::vector<Generator> gens;
    std::vector<Bits> vecs;
};

void add_segment(System& sys, const RingPath& path, const RingLayout& lay, std::size_t offset, std::size_t n_words,
                 int ring, Segment s, const std::vector<int>& compromised) {
    const int m = path.hops(s);
    for (int p = -1; p <= m; ++p) {
        Bits v(n_words, 0);
        set_bit(v, offset + lay.secret(s));
        for (const KeyId& id : masking_keys(path, s, p)) set_bit(v, offset + lay.key(id));
        Generator g;
        g.kind = Generator::Kind::Message;
        g.ring = ring;
        g.segment = s;
        g.hop = p;
        sys.gens.push_back(g);
        sys.vecs.push_back(std::move(v));
    }
    const auto& keys = s == Segment::Plus ? lay.keys_plus : lay.keys_minus;
    for (const KeyId& id : keys) {
        const int na = path.node_at(s, id.a), nb = path.node_at(s, id.b);
        const bool known = std::find_if(compromised.begin(), compromised.end(),
                                        [&](int c) { return c == na || c == nb; }) != compromised.end();
        if (!known) continue;
        Bits v(n_words, 0);
        set_bit(v, offset + lay.key(id));
        Generator g;
        g.kind = Generator::Kind::Key;
        g.ring = ring;
        g.segment = s;
        g.key = id;
        sys.gens.push_back(g);
        sys.vecs.push_back(std::move(v));
    }
}

std::optional<Bits> solve(const System& sys, std::size_t n_vars, const Bits& target) {
    Gf2Span span(n_vars, sys.gens.size());
    for (std::size_t g = 0; g < sys.vecs.size(); ++g) span.insert(sys.vecs[g], g);
    return span.express(target);
}

void check_sats(const RingPath& path, const std::vector<int>& sats) {
    for (int c : sats) require(c >= 0 && c < path.n_sats, fmt::format("relay: compromised index {} out of range", c));
}

}  // namespace

std::string Generator::to_string() const {
    const char* seg = segment == Segment::Plus ? "+" : "-";
    if (kind == Kind::Message) return fmt::format("ring{}:X{}[hop {}]", ring, seg, hop);
    return fmt::format("ring{}:K{}({},{})", ring, seg, key.a, key.b);
}

RecoveryVerdict adversary_can_recover(const RingPath& path, const CompromiseScenario& scenario) {
    require(static_cast<int>(scenario.compromised.size()) <= path.n_rings,
            "adversary: more compromise sets than rings");
    const RingLayout lay(path);
    const std::size_t n_vars = lay.dim * static_cast<std::size_t>(path.n_rings);
    const std::size_t n_words = (n_vars + 63) / 64;

    System sys;
    Bits target(n_words, 0);
    for (int ring = 0; ring < path.n_rings; ++ring) {
        static const std::vector<int> none;
        const auto& comp = ring < static_cast<int>(scenario.compromised.size())
                               ? scenario.compromised[static_cast<std::size_t>(ring)]
                               : none;
        check_sats(path, comp);
        const std::size_t off = lay.dim * static_cast<std::size_t>(ring);
        for (Segment s : {Segment::Plus, Segment::Minus}) {
            add_segment(sys, path, lay, off, n_words, ring, s, comp);
            set_bit(target, off + lay.secret(s));
        }
    }

    RecoveryVerdict v;
    if (auto origin = solve(sys, n_vars, target)) {
        v.recoverable = true;
        for (std::size_t g = 0; g < sys.gens.size(); ++g)
            if (test_bit(*origin, g)) v.witness.push_back(sys.gens[g]);
    }
    return v;
}

bool segment_secret_exposed(const RingPath& path, Segment s, const std::vector<int>& compromised) {
    check_sats(path, compromised);
    const RingLayout lay(path);
    const std::size_t n_words = (lay.dim + 63) / 64;
    System sys;
    add_segment(sys, path, lay, 0, n_words, 0, s, compromised);
    Bits target(n_words, 0);
    set_bit(target, lay.secret(s));
    return solve(sys, lay.dim, target).has_value();
}

// --- minimum compromise search --------------------------------------------

namespace {

struct SegmentSearch {
    bool possible = false;
    int lower = 0, upper = 0;
    bool exact = false;
    std::vector<int> added;  // satellites added to the fixed set
};

// Smallest subset of `candidates` that, together with `fixed`, exposes the
// segment secret. Subsets are visited by size, then lexicographically.
SegmentSearch search_segment(const RingPath& path, Segment s, const std::vector<int>& fixed,
                             const std::vector<int>& candidates, long long& budget, long long& checks) {
    SegmentSearch out;
    auto exposed = [&](const std::vector<int>& extra) {
        std::vector<int> all = fixed;
        all.insert(all.end(), extra.begin(), extra.end());
        ++checks;
        --budget;
        return segment_secret_exposed(path, s, all);
    };
    // knowledge only grows with the set, so the full set decides feasibility
    if (!exposed(candidates)) {
        out.exact = true;
        return out;
    }
    out.possible = true;
    out.upper = static_cast<int>(candidates.size());
    out.added = candidates;

    const int n = static_cast<int>(candidates.size());
    for (int size = 0; size < n; ++size) {
        std::vector<int> idx(static_cast<std::size_t>(size));
        for (int j = 0; j < size; ++j) idx[static_cast<std::size_t>(j)] = j;
        while (true) {
            if (budget <= 0) {
                out.lower = size;
                return out;
            }
            std::vector<int> pick;
            for (int j : idx) pick.push_back(candidates[static_cast<std::size_t>(j)]);
            if (exposed(pick)) {
                out.lower = out.upper = size;
                out.exact = true;
                out.added = pick;
                return out;
            }
            int j = size - 1;
            while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - size + j) --j;
            if (j < 0) break;
            ++idx[static_cast<std::size_t>(j)];
            for (int l = j + 1; l < size; ++l) idx[static_cast<std::size_t>(l)] = idx[static_cast<std::size_t>(l - 1)] + 1;
        }
    }
    out.lower = out.upper = n;
    out.exact = true;
    return out;
}

std::vector<int> interior(const RingPath& path, Segment s) {
    const auto& seg = path.segment(s);
    return std::vector<int>(seg.begin() + 1, seg.end() - 1);
}

std::vector<int> sorted_candidates(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

MinCompromiseResult min_compromise_segment(const RingPath& path, Segment s, const MinCompromiseOptions& options) {
    std::vector<int> cand = interior(path, s);
    if (options.allow_attachments) {
        cand.push_back(path.attach_a);
        cand.push_back(path.attach_b);
    }
    long long budget = options.budget, checks = 0;
    const SegmentSearch r = search_segment(path, s, {}, sorted_candidates(cand), budget, checks);
    MinCompromiseResult out;
    out.checks = checks;
    out.exact = r.exact;
    if (!r.possible) {
        out.lower = out.upper = -1;
        return out;
    }
    out.lower = r.lower;
    out.upper = r.upper;
    out.example = {sorted_candidates(r.added)};
    return out;
}

MinCompromiseResult min_compromise(const RingPath& path, const MinCompromiseOptions& options) {
    long long budget = options.budget, checks = 0;
    const auto in_plus = sorted_candidates(interior(path, Segment::Plus));
    const auto in_minus = sorted_candidates(interior(path, Segment::Minus));

    std::vector<std::vector<int>> attachment_sets = {{}};
    if (options.allow_attachments) {
        attachment_sets.push_back({path.attach_a});
        attachment_sets.push_back({path.attach_b});
        attachment_sets.push_back(sorted_candidates({path.attach_a, path.attach_b}));
    }

    bool possible = false, exact = true;
    int lower = 0, upper = 0;
    std::vector<int> best;
    for (const auto& fixed : attachment_sets) {
        const SegmentSearch p = search_segment(path, Segment::Plus, fixed, in_plus, budget, checks);
        const SegmentSearch m = search_segment(path, Segment::Minus, fixed, in_minus, budget, checks);
        if (!p.possible || !m.possible) {
            exact = exact && p.exact && m.exact;
            continue;
        }
        const int k = static_cast<int>(fixed.size());
        const int lo = k + p.lower + m.lower, hi = k + p.upper + m.upper;
        std::vector<int> set = fixed;
        set.insert(set.end(), p.added.begin(), p.added.end());
        set.insert(set.end(), m.added.begin(), m.added.end());
        set = sorted_candidates(set);
        if (!possible || lo < lower) lower = lo;
        if (!possible || hi < upper || (hi == upper && set < best)) {
            upper = hi;
            best = set;
        }
        possible = true;
        exact = exact && p.exact && m.exact;
    }

    MinCompromiseResult out;
    out.checks = checks;
    if (!possible) {
        out.lower = out.upper = -1;
        out.exact = exact;
        return out;
    }
    out.exact = exact && lower == upper;
    if (out.exact) lower = upper;
    out.lower = lower * path.n_rings;
    out.upper = upper * path.n_rings;
    out.example.assign(static_cast<std::size_t>(path.n_rings), best);
    return out;
}

int feasible_neighbor_range(int n_sats, double isl_budget_db, const linkbudget::OpticalParams& optics,
                            const NeighborRangeOptions& options) {
    require(n_sats >= 3, "feasible_neighbor_range: n_sats must be >= 3");
    const double radius = kEarthRadiusKm + options.altitude_km;
    const double limit = kEarthRadiusKm + options.atm_shell_km;
    int best = 1;
    for (int r = 2; 2 * r <= n_sats; ++r) {
        const double clearance = radius * std::cos(kPi * r / n_sats);
        if (!(clearance > limit)) break;
        const double chord = geometry::ring_chord_km(radius, n_sats, r);
        if (linkbudget::to_db(linkbudget::isl_efficiency(chord * 1e3, optics)) > isl_budget_db) break;
        best = r;
    }
    return best;
}

void write_verdict_json(std::ostream& out, const RingPath& path, const RecoveryVerdict& verdict,
                        const std::optional<MinCompromiseResult>& minimum) {
    nlohmann::ordered_json j;
    j["n_sats"] = path.n_sats;
    j["attach_a"] = path.attach_a;
    j["attach_b"] = path.attach_b;
    j["neighbor_range"] = path.neighbor_range;
    j["n_rings"] = path.n_rings;
    j["recoverable"] = verdict.recoverable;
    auto& w = j["witness"] = nlohmann::ordered_json::array();
    for (const auto& g : verdict.witness) w.push_back(g.to_string());
    if (minimum) {
        j["min_compromise"] = minimum->upper;
        j["min_compromise_lower"] = minimum->lower;
        j["min_compromise_exact"] = minimum->exact;
        j["min_compromise_example"] = minimum->example;
    }
    out << j.dump(2) << '\n';
}

}  // namespace qkdring::relay
