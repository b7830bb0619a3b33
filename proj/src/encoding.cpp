#include "setloc/encoding.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "setloc/rng.hpp"

namespace setloc {

Vocabulary::Vocabulary(std::vector<std::string> sorted_bssids)
    : bssids_(std::move(sorted_bssids)) {
    index_.reserve(bssids_.size());
    for (size_t i = 0; i < bssids_.size(); ++i) {
        index_.emplace(bssids_[i], int(i));
    }
    if (index_.size() != bssids_.size()) {
        throw std::invalid_argument("Vocabulary: duplicate BSSIDs");
    }
}

std::optional<int> Vocabulary::lookup(const std::string& bssid) const {
    auto it = index_.find(bssid);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Vocabulary build_vocabulary(const std::vector<Scan>& training_scans) {
    std::set<std::string> unique;
    for (const auto& scan : training_scans) {
        for (const auto& det : scan.detections) {
            unique.insert(det.bssid);
        }
    }
    if (unique.empty()) {
        throw std::invalid_argument("build_vocabulary: no detections in training scans");
    }
    return Vocabulary(std::vector<std::string>(unique.begin(), unique.end()));
}

EmbeddingTable make_embedding_table(int vocab_size, int dim, double init_scale,
                                    std::mt19937_64& rng) {
    EmbeddingTable table;
    table.dim = dim;
    table.init_scale = init_scale;
    table.weights = ag::Tensor::uniform(vocab_size, dim, init_scale, rng, "emb.weights");
    return table;
}

std::vector<double> fallback_embedding(const std::string& bssid, int dim, double init_scale,
                                       uint64_t seed) {
    auto rng = std::mt19937_64(splitmix64(fnv1a64(bssid) ^ seed));
    std::uniform_real_distribution<double> dist(-init_scale, init_scale);
    std::vector<double> row(static_cast<size_t>(dim));
    for (auto& v : row) {
        v = dist(rng);
    }
    return row;
}

namespace {

EncodedSet encode_rows(const std::vector<const Detection*>& dets, const Vocabulary& vocab,
                       const EmbeddingTable& emb, uint64_t fallback_seed) {
    const int n = int(dets.size());
    const int dim = emb.dim;
    std::vector<int> index(size_t(n), -1);
    std::vector<double> fallback(size_t(n) * dim, 0.0);
    std::vector<double> rssi_col(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& det = *dets[size_t(i)];
        if (auto idx = vocab.lookup(det.bssid)) {
            index[size_t(i)] = *idx;
        } else {
            auto row = fallback_embedding(det.bssid, dim, emb.init_scale, fallback_seed);
            std::copy(row.begin(), row.end(), fallback.begin() + size_t(i) * dim);
        }
        rssi_col[size_t(i)] = normalize_rssi(det.rssi);
    }
    ag::Tensor fb = ag::Tensor::from(std::move(fallback), n, dim);
    ag::Tensor embedded = ag::embedding_rows(emb.weights, index, fb);
    ag::Tensor col = ag::Tensor::from(std::move(rssi_col), n, 1);
    EncodedSet out;
    out.rows = ag::concat_cols({embedded, col});
    out.count = n;
    return out;
}

}  // namespace

EncodedSet encode_set(const Scan& scan, const Vocabulary& vocab, const EmbeddingTable& emb,
                      uint64_t fallback_seed) {
    if (scan.detections.empty()) {
        throw std::invalid_argument("encode_set: scan '" + scan.id + "' has no detections");
    }
    std::vector<const Detection*> dets;
    dets.reserve(scan.detections.size());
    for (const auto& d : scan.detections) {
        dets.push_back(&d);
    }
    return encode_rows(dets, vocab, emb, fallback_seed);
}

EncodedSet encode_sequence(const Scan& scan, const Vocabulary& vocab, const EmbeddingTable& emb,
                           uint64_t fallback_seed) {
    if (scan.detections.empty()) {
        throw std::invalid_argument("encode_sequence: scan '" + scan.id + "' has no detections");
    }
    std::vector<const Detection*> dets;
    dets.reserve(scan.detections.size());
    for (const auto& d : scan.detections) {
        dets.push_back(&d);
    }
    std::sort(dets.begin(), dets.end(), [](const Detection* a, const Detection* b) {
        if (a->rssi != b->rssi) return a->rssi > b->rssi;
        return a->bssid < b->bssid;
    });
    return encode_rows(dets, vocab, emb, fallback_seed);
}

std::vector<double> encode_fixed_vector(const Scan& scan, const Vocabulary& vocab) {
    std::vector<double> out(size_t(vocab.size()), -100.0);
    for (const auto& det : scan.detections) {
        if (auto idx = vocab.lookup(det.bssid)) {
            out[size_t(*idx)] = det.rssi;
        }
    }
    return out;
}

}  // namespace setloc
