// XOR key forwarding along the two directed segments of a satellite ring,
// and an exact GF(2) decision procedure for what a set of compromised
// satellites can learn.
//
// A segment is a chain of positions
//   -1 (GS1), 0 (S_i), 1, ..., m (S_k), m+1 (GS2)
// with m the hop count between the attachment satellites. Point-to-point
// keys sit on (-1, 0) and (m, m+1); twin-field keys join every pair of
// positions 2..r apart. The message sent over hop p (from position p to
// p+1) is X xor every key (a, b) with a <= p < b, so each node strips the
// keys that end at it and adds the keys that start at it.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qkdring::relay {

class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n_bits);
    static BitString random(std::size_t n_bits, std::mt19937_64& rng);

    std::size_t size() const { return n_; }
    bool get(std::size_t i) const;
    void set(std::size_t i, bool v);
    void flip(std::size_t i);
    BitString& operator^=(const BitString& o);
    friend BitString operator^(BitString a, const BitString& b) { return a ^= b; }
    bool operator==(const BitString& o) const = default;
    std::size_t popcount() const;
    std::string to_string() const;

    std::vector<std::uint64_t>& words() { return w_; }
    const std::vector<std::uint64_t>& words() const { return w_; }

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> w_;
};

enum class Segment { Plus, Minus };

struct RingPath {
    int n_sats = 0;
    int attach_a = 0;  // Alice's serving satellite S_i
    int attach_b = 0;  // Bob's serving satellite S_k
    int neighbor_range = 2;
    int n_rings = 1;
    // satellite indices from S_i to S_k inclusive, in forwarding order
    std::vector<int> segment_plus;
    std::vector<int> segment_minus;

    const std::vector<int>& segment(Segment s) const { return s == Segment::Plus ? segment_plus : segment_minus; }
    /// Hop count m between the attachment satellites along a segment.
    int hops(Segment s) const { return static_cast<int>(segment(s).size()) - 1; }
    /// Chain position of a satellite on a segment, if it lies on it.
    std::optional<int> position_of(Segment s, int sat) const;
    /// Satellite index at a chain position, or -1 for GS1 and -2 for GS2.
    int node_at(Segment s, int position) const;
};

/// Requires n_sats >= 3, distinct attachments in range, n_rings >= 1 and
/// 2 <= r <= 1 + min(hops). Callers with an orbit check the geometric
/// minimum ring size separately.
RingPath build_paths(int n_sats, int i, int k, int r = 2, int n_rings = 1);

enum class KeyKind { TwinField, PointToPoint };

struct KeyId {
    Segment segment = Segment::Plus;
    int a = 0;  // chain positions, a < b
    int b = 0;
    auto operator<=>(const KeyId&) const = default;
};

KeyKind key_kind(const RingPath& path, const KeyId& id);

/// Every key a segment needs, in canonical order (by a, then b).
std::vector<KeyId> prescribed_keys(const RingPath& path, Segment s);

/// 2 + sum_{d=2..r} (m + 3 - d).
int key_count(int hops, int r);

struct LinkKey {
    KeyKind kind = KeyKind::TwinField;
    KeyId id;
    BitString bits;
};

using KeyStore = std::map<KeyId, LinkKey>;

/// Independent uniform keys for both segments (fresh per segment).
KeyStore generate_link_keys(const RingPath& path, std::size_t key_len, std::uint64_t seed);

struct HopMessage {
    int hop = 0;  // sent from position hop to hop + 1
    BitString value;
};

struct ForwardTranscript {
    Segment segment = Segment::Plus;
    std::vector<HopMessage> messages;  // hops -1 .. m
    BitString secret;
};

ForwardTranscript forward(const RingPath& path, Segment s, const BitString& secret, const KeyStore& keys);
BitString recover(const RingPath& path, const ForwardTranscript& transcript, const KeyStore& keys);

/// Keys masking hop p (those with a <= p < b).
std::vector<KeyId> masking_keys(const RingPath& path, Segment s, int hop);

struct CompromiseScenario {
    // compromised satellite indices, one list per ring
    std::vector<std::vector<int>> compromised;
};

struct Generator {
    enum class Kind { Message, Key } kind = Kind::Message;
    int ring = 0;
    Segment segment = Segment::Plus;
    int hop = 0;  // messages
    KeyId key;    // keys
    std::string to_string() const;
};

struct RecoveryVerdict {
    bool recoverable = false;
    // Known quantities whose XOR equals the ring secret (XOR across rings of
    // X+ xor X-), when recoverable.
    std::vector<Generator> witness;
};

/// Decides whether XOR across rings of (X+ xor X-) lies in the span of all
/// public messages and every key held by a compromised satellite.
RecoveryVerdict adversary_can_recover(const RingPath& path, const CompromiseScenario& scenario);

/// Same question for one segment's secret in one ring.
bool segment_secret_exposed(const RingPath& path, Segment s, const std::vector<int>& compromised);

struct MinCompromiseOptions {
    bool allow_attachments = true;
    long long budget = 5'000'000;  // recoverability checks
};

struct MinCompromiseResult {
    int lower = 0;  // certified bounds on the minimum; equal when exact
    int upper = 0;
    bool exact = false;
    std::vector<std::vector<int>> example;  // one recovering set per ring
    long long checks = 0;
};

/// Smallest number of compromised satellites that expose the final key.
/// Rings are independent, so the total is n_rings times the single-ring
/// minimum; within a ring the two segments share only the attachment
/// satellites, and each segment is searched in increasing subset size.
MinCompromiseResult min_compromise(const RingPath& path, const MinCompromiseOptions& options = {});

/// Minimum number of satellites on one segment exposing that segment's secret.
MinCompromiseResult min_compromise_segment(const RingPath& path, Segment s, const MinCompromiseOptions& options = {});

}  // namespace qkdring::relay

namespace qkdring::linkbudget {
struct OpticalParams;
}

namespace qkdring::relay {

struct NeighborRangeOptions {
    double altitude_km = 500.0;
    double atm_shell_km = 100.0;
};

/// Largest r whose ring-distance-r chord has ISL loss <= budget and clears
/// the atmospheric shell; 1 when not even r = 2 qualifies.
int feasible_neighbor_range(int n_sats, double isl_budget_db, const linkbudget::OpticalParams& optics,
                            const NeighborRangeOptions& options = {});

void write_verdict_json(std::ostream& out, const RingPath& path, const RecoveryVerdict& verdict,
                        const std::optional<MinCompromiseResult>& minimum);

}  // namespace qkdring::relay
