#ifndef DSNC_HAMMING_HPP
#define DSNC_HAMMING_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsnc/binary_code.hpp"
#include "dsnc/data.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/model.hpp"

namespace dsnc {

inline std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
    if (a.size() != b.size()) {
        throw ArgumentError("hamming_distance: code sizes differ (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    }
    const auto wa = a.words();
    const auto wb = b.words();
    std::size_t d = 0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
        d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    }
    return d;
}

/// Deduplicated codes seen at training time, sorted by code order, each with
/// its majority label (ties to the smallest class id) and occurrence count.
struct CodeIndex {
    std::size_t c = 0;
    std::vector<BinaryCode> codes;
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> counts;
    std::size_t total = 0; // number of indexed examples

    std::size_t size() const { return codes.size(); }
    bool empty() const { return codes.empty(); }
};

inline CodeIndex build_code_index(std::span<const BinaryCode> codes, std::span<const std::uint32_t> labels) {
    if (codes.size() != labels.size()) {
        throw ArgumentError("build_code_index: codes/labels size mismatch");
    }
    if (codes.empty()) {
        throw ArgumentError("build_code_index: nothing to index");
    }
    std::map<BinaryCode, std::map<std::uint32_t, std::uint32_t>> groups;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].size() != codes[0].size()) {
            throw ArgumentError("build_code_index: inconsistent code sizes");
        }
        ++groups[codes[i]][labels[i]];
    }
    CodeIndex idx;
    idx.c = codes[0].size();
    idx.total = codes.size();
    for (auto& [code, by_label] : groups) {
        std::uint32_t best_label = 0;
        std::uint32_t best_count = 0;
        std::uint32_t total = 0;
        // std::map iterates labels ascending, so strict > keeps the smallest id on ties.
        for (const auto& [label, count] : by_label) {
            total += count;
            if (count > best_count) {
                best_count = count;
                best_label = label;
            }
        }
        idx.codes.push_back(code);
        idx.labels.push_back(best_label);
        idx.counts.push_back(total);
    }
    return idx;
}

/// Indexes the threshold codes of every example in `data`.
inline CodeIndex build_index(const NetworkParams& model, const Dataset& data) {
    if (data.empty()) {
        throw ArgumentError("build_index: empty training set");
    }
    std::vector<BinaryCode> codes;
    std::vector<std::uint32_t> labels;
    codes.reserve(data.size());
    labels.reserve(data.size());
    for (const auto& e : data.examples) {
        codes.push_back(threshold_code(encode_probs(model, e.x).distribution));
        labels.push_back(e.y);
    }
    return build_code_index(codes, labels);
}

struct NnResult {
    std::uint32_t label = 0;
    std::size_t distance = 0;
    std::size_t entry = 0;      // position in CodeIndex
    std::size_t candidates = 0; // codes whose full distance was computed
    std::size_t radius = 0;     // final substring radius (multi-index search only)
};

/// Exhaustive scan. Distance ties go to the smallest code in code order;
/// since entries are stored in that order this is the first minimum.
inline NnResult nn_decode(const CodeIndex& index, const BinaryCode& q) {
    if (index.empty()) {
        throw ArgumentError("nn_decode: empty index");
    }
    NnResult best;
    best.distance = std::numeric_limits<std::size_t>::max();
    for (std::size_t e = 0; e < index.size(); ++e) {
        const std::size_t d = hamming_distance(index.codes[e], q);
        if (d < best.distance) {
            best.distance = d;
            best.entry = e;
        }
    }
    best.label = index.labels[best.entry];
    best.candidates = index.size();
    return best;
}

/// Default substring count: max(1, floor(c / log2(max(k, 2)))).
inline std::size_t default_substring_count(std::size_t c, std::size_t k) {
    const double lg = std::log2(static_cast<double>(std::max<std::size_t>(k, 2)));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(c) / lg)));
}

/// Multi-index hashing over a CodeIndex: codes are cut into m contiguous
/// substrings of ceil(c/m) bits (the last may be shorter), and table j maps
/// each observed value of substring j to the entries holding it. Substrings
/// are capped at 32 bits, which may raise m.
class MihIndex {
  public:
    static constexpr std::size_t kMaxSubstringBits = 32;

    MihIndex() = default;

    explicit MihIndex(const CodeIndex& index, std::optional<std::size_t> substrings = std::nullopt) {
        if (index.empty()) {
            throw ArgumentError("MihIndex: empty code index");
        }
        c_ = index.c;
        entries_ = index.size();
        std::size_t m = substrings.value_or(default_substring_count(c_, index.total));
        m = std::clamp<std::size_t>(m, 1, c_);
        m = std::max(m, (c_ + kMaxSubstringBits - 1) / kMaxSubstringBits);
        const std::size_t len = (c_ + m - 1) / m;
        for (std::size_t start = 0; start < c_; start += len) {
            parts_.push_back({start, std::min(len, c_ - start)});
        }
        tables_.resize(parts_.size());
        for (std::size_t e = 0; e < index.size(); ++e) {
            for (std::size_t j = 0; j < parts_.size(); ++j) {
                tables_[j][index.codes[e].extract(parts_[j].start, parts_[j].length)].push_back(
                    static_cast<std::uint32_t>(e));
            }
        }
    }

    // Effective substring count.
    std::size_t substrings() const { return parts_.size(); }
    std::size_t substring_length() const { return parts_.empty() ? 0 : parts_[0].length; }
    std::size_t code_size() const { return c_; }
    std::size_t entries() const { return entries_; }

    /// Exact nearest neighbour, identical to nn_decode. Probes substring radii
    /// r = 0, 1, ... and stops once the best distance found is below
    /// m * (r + 1): any code not yet probed differs from q in at least r + 1
    /// bits of every substring.
    NnResult query(const CodeIndex& index, const BinaryCode& q) const {
        if (index.size() != entries_ || index.c != c_) {
            throw ArgumentError("MihIndex::query: index mismatch");
        }
        if (q.size() != c_) {
            throw ArgumentError("MihIndex::query: query has " + std::to_string(q.size()) + " bits, index has " +
                                std::to_string(c_));
        }
        std::vector<std::uint8_t> seen(entries_, 0);
        NnResult best;
        best.distance = std::numeric_limits<std::size_t>::max();
        std::size_t max_len = 0;
        for (const auto& p : parts_) {
            max_len = std::max(max_len, p.length);
        }
        const auto visit = [&](std::uint32_t e) {
            if (seen[e]) {
                return;
            }
            seen[e] = 1;
            ++best.candidates;
            const std::size_t d = hamming_distance(index.codes[e], q);
            if (d < best.distance || (d == best.distance && e < best.entry)) {
                best.distance = d;
                best.entry = e;
            }
        };
        const std::size_t m = parts_.size();
        for (std::size_t r = 0; r <= max_len; ++r) {
            for (std::size_t j = 0; j < m; ++j) {
                probe(j, q.extract(parts_[j].start, parts_[j].length), r, visit);
            }
            best.radius = r;
            if (best.distance < m * (r + 1)) {
                break;
            }
        }
        best.label = index.labels[best.entry];
        return best;
    }

  private:
    struct Part {
        std::size_t start;
        std::size_t length;
    };

    static double binomial(std::size_t n, std::size_t k) {
        if (k > n) {
            return 0.0;
        }
        double r = 1.0;
        for (std::size_t i = 1; i <= k; ++i) {
            r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
        }
        return r;
    }

    // Visits every entry whose substring j lies at exactly distance r from key.
    template <typename Visit>
    void probe(std::size_t j, std::uint64_t key, std::size_t r, Visit& visit) const {
        const auto& table = tables_[j];
        const std::size_t len = parts_[j].length;
        if (r > len) {
            return;
        }
        if (binomial(len, r) > static_cast<double>(table.size())) {
            for (const auto& [value, ids] : table) {
                if (static_cast<std::size_t>(std::popcount(value ^ key)) == r) {
                    for (auto e : ids) {
                        visit(e);
                    }
                }
            }
            return;
        }
        // Gosper's hack over all len-bit masks with r bits set.
        const std::uint64_t limit = std::uint64_t{1} << len;
        std::uint64_t mask = (std::uint64_t{1} << r) - 1;
        while (mask < limit) {
            if (const auto it = table.find(key ^ mask); it != table.end()) {
                for (auto e : it->second) {
                    visit(e);
                }
            }
            if (mask == 0) {
                break;
            }
            const std::uint64_t t = mask | (mask - 1);
            mask = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(mask) + 1));
        }
    }

    std::size_t c_ = 0;
    std::size_t entries_ = 0;
    std::vector<Part> parts_;
    std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> tables_;
};

inline NnResult mih_query(const MihIndex& mih, const CodeIndex& index, const BinaryCode& q) {
    return mih.query(index, q);
}

/// Class of every code in {0,1}^c; entry i decodes the code whose bit j is
/// bit j of i.
struct CodeTable {
    static constexpr std::size_t kMaxCodeSize = 24;

    std::size_t c = 0;
    std::vector<std::uint32_t> classes;

    std::uint32_t lookup(const BinaryCode& code) const {
        if (code.size() != c) {
            throw ArgumentError("CodeTable::lookup: code size mismatch");
        }
        return classes[code.extract(0, c)];
    }
};

/// Linear decode of all 2^c codes. Logit accumulation replays
/// decode_logits exactly (left fold over set bits in increasing order), so
/// table and direct decoding agree bit for bit.
inline CodeTable enumerate_table(const NetworkParams& model, std::size_t limit = CodeTable::kMaxCodeSize) {
    if (model.c > limit) {
        throw ArgumentError("code size exceeds table limit (" + std::to_string(model.c) + " > " +
                            std::to_string(limit) + ")");
    }
    const std::size_t c = model.c;
    const std::size_t K = model.K;
    CodeTable table;
    table.c = c;
    table.classes.assign(std::size_t{1} << c, 0);
    // acc[depth] holds the partial sums after deciding bits 0..depth-1.
    std::vector<Vector> acc(c + 1, Vector(K, 0.0));
    Vector logits(K);
    const auto recurse = [&](auto&& self, std::size_t depth, std::uint64_t prefix) -> void {
        if (depth == c) {
            for (std::size_t k = 0; k < K; ++k) {
                logits[k] = model.dec_b[k] + acc[c][k];
            }
            table.classes[prefix] = static_cast<std::uint32_t>(argmax(logits));
            return;
        }
        acc[depth + 1] = acc[depth];
        self(self, depth + 1, prefix);
        for (std::size_t k = 0; k < K; ++k) {
            acc[depth + 1][k] = acc[depth][k] + model.dec_w(k, depth);
        }
        self(self, depth + 1, prefix | (std::uint64_t{1} << depth));
    };
    recurse(recurse, 0, 0);
    return table;
}

} // namespace dsnc

#endif
