#pragma once

// Scan -> model-input encoding: BSSID vocabulary, learnable embedding
// table, set / sorted-sequence encodings (rows [e_i | r_i]), and the
// fixed-length RSSI vector for the MLP.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "setloc/autograd.hpp"
#include "setloc/scan.hpp"

namespace setloc {

class Vocabulary {
public:
    Vocabulary() = default;
    // Indices are dense and lexicographic by BSSID.
    explicit Vocabulary(std::vector<std::string> sorted_bssids);

    int size() const { return int(bssids_.size()); }
    std::optional<int> lookup(const std::string& bssid) const;
    const std::string& bssid_at(int index) const { return bssids_[size_t(index)]; }
    const std::vector<std::string>& bssids() const { return bssids_; }

private:
    std::vector<std::string> bssids_;
    std::unordered_map<std::string, int> index_;
};

Vocabulary build_vocabulary(const std::vector<Scan>& training_scans);

struct EmbeddingTable {
    ag::Tensor weights;  // B x dim, learnable
    int dim = 0;
    double init_scale = 0.1;
};

EmbeddingTable make_embedding_table(int vocab_size, int dim, double init_scale,
                                    std::mt19937_64& rng);

// Deterministic stand-in row for a BSSID outside the vocabulary, drawn
// from the table's initialization distribution and keyed on
// hash(bssid) ^ seed, never on global RNG state.
std::vector<double> fallback_embedding(const std::string& bssid, int dim, double init_scale,
                                       uint64_t seed);

// RSSI column scaling: maps [-100, -40] dBm to roughly [0, 1] so the
// signal column is commensurate with embedding magnitudes.
inline double normalize_rssi(double dbm) { return (dbm + 100.0) / 60.0; }

struct EncodedSet {
    ag::Tensor rows;  // n x (dim + 1), participates in the gradient graph
    int count = 0;    // n >= 1
};

EncodedSet encode_set(const Scan& scan, const Vocabulary& vocab, const EmbeddingTable& emb,
                      uint64_t fallback_seed);
// As encode_set but rows ordered by descending RSSI, ties by ascending
// BSSID, so sequence models see a canonical order.
EncodedSet encode_sequence(const Scan& scan, const Vocabulary& vocab, const EmbeddingTable& emb,
                           uint64_t fallback_seed);

// Length-B vector of raw dBm values, -100 fill for undetected BSSIDs;
// out-of-vocabulary detections are dropped. Callers normalize afterwards.
std::vector<double> encode_fixed_vector(const Scan& scan, const Vocabulary& vocab);

}  // namespace setloc
