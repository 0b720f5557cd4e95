#ifndef DSNC_DATA_HPP
#define DSNC_DATA_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "dsnc/errors.hpp"
#include "dsnc/linalg.hpp"
#include "dsnc/random.hpp"

namespace dsnc {

struct Example {
    SparseVector x;
    std::uint32_t y = 0;
};

/// Labeled sparse examples over R^n with K classes. `raw_labels[k]` is the
/// label as it appeared in the source for class id k.
struct Dataset {
    std::size_t n = 0;
    std::size_t K = 0;
    std::vector<Example> examples;
    std::vector<double> raw_labels;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }

    // Throws DataError if a feature index or label is out of range.
    void validate() const {
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const auto& e = examples[i];
            if (e.y >= K) {
                throw DataError("example " + std::to_string(i) + ": label " + std::to_string(e.y) +
                                " >= K=" + std::to_string(K));
            }
            if (!e.x.indices.empty() && e.x.indices.back() >= n) {
                throw DataError("example " + std::to_string(i) + ": feature index " +
                                std::to_string(e.x.indices.back()) + " >= n=" + std::to_string(n));
            }
        }
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(K, 0);
        for (const auto& e : examples) {
            ++counts[e.y];
        }
        return counts;
    }

    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset d;
        d.n = n;
        d.K = K;
        d.raw_labels = raw_labels;
        d.examples.reserve(rows.size());
        for (auto r : rows) {
            d.examples.push_back(examples[r]);
        }
        return d;
    }
};

struct Split {
    Dataset train;
    Dataset validation;
    Dataset test;
    std::uint64_t seed = 0;
    // Row indices into the source dataset.
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> validation_rows;
    std::vector<std::size_t> test_rows;
};

struct SvmlightOptions {
    std::optional<std::size_t> n_override;
    bool max_abs_scale = false;
};

namespace detail {

inline std::string read_text_file(const std::string& path) {
    const bool gz = path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (f == nullptr) {
            throw DataError("cannot open " + path);
        }
        std::string out;
        char buf[1 << 16];
        int got;
        while ((got = gzread(f, buf, sizeof(buf))) > 0) {
            out.append(buf, static_cast<std::size_t>(got));
        }
        const bool failed = got < 0;
        gzclose(f);
        if (failed) {
            throw DataError("gzip read error in " + path);
        }
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view s, std::uint64_t& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Parses svmlight/libsvm text ("label idx:val idx:val ..."); files ending
/// in ".gz" are decompressed. Raw labels are remapped to 0..K-1 in ascending
/// raw-label order. Blank lines and '#' comments are ignored.
inline Dataset parse_svmlight(std::string_view text, const SvmlightOptions& opts = {}) {
    struct RawRow {
        double label;
        SparseVector x;
    };
    std::vector<RawRow> rows;
    std::size_t max_index_plus_one = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        std::vector<std::string_view> tokens;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
                ++i;
            }
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) {
                ++j;
            }
            if (j > i) {
                tokens.push_back(line.substr(i, j - i));
            }
            i = j;
        }
        if (tokens.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        const auto where = "line " + std::to_string(line_no);
        RawRow row;
        if (!detail::parse_double(tokens[0], row.label)) {
            throw DataError(where + ": bad label '" + std::string(tokens[0]) + "'");
        }
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto tok = tokens[t];
            const auto colon = tok.find(':');
            std::uint64_t idx = 0;
            double val = 0.0;
            if (colon == std::string_view::npos || !detail::parse_index(tok.substr(0, colon), idx) ||
                !detail::parse_double(tok.substr(colon + 1), val) || idx > UINT32_MAX) {
                throw DataError(where + ": malformed feature '" + std::string(tok) + "'");
            }
            if (!row.x.indices.empty() && idx <= row.x.indices.back()) {
                throw DataError(where + ": feature indices not strictly increasing at '" + std::string(tok) + "'");
            }
            row.x.indices.push_back(static_cast<std::uint32_t>(idx));
            row.x.values.push_back(val);
            max_index_plus_one = std::max<std::size_t>(max_index_plus_one, idx + 1);
        }
        rows.push_back(std::move(row));
        if (end == text.size()) {
            break;
        }
    }
    if (rows.empty()) {
        throw DataError("no examples");
    }

    Dataset d;
    std::map<double, std::uint32_t> mapping;
    for (const auto& r : rows) {
        mapping.emplace(r.label, 0);
    }
    for (auto& [raw, id] : mapping) {
        id = static_cast<std::uint32_t>(d.raw_labels.size());
        d.raw_labels.push_back(raw);
    }
    d.K = d.raw_labels.size();
    d.n = max_index_plus_one;
    if (opts.n_override) {
        if (*opts.n_override < max_index_plus_one) {
            throw DataError("feature index " + std::to_string(max_index_plus_one - 1) + " exceeds n=" +
                            std::to_string(*opts.n_override));
        }
        d.n = *opts.n_override;
    }
    d.examples.reserve(rows.size());
    for (auto& r : rows) {
        d.examples.push_back({std::move(r.x), mapping.at(r.label)});
    }
    if (opts.max_abs_scale) {
        std::vector<double> scale(d.n, 0.0);
        for (const auto& e : d.examples) {
            for (std::size_t k = 0; k < e.x.nnz(); ++k) {
                scale[e.x.indices[k]] = std::max(scale[e.x.indices[k]], std::abs(e.x.values[k]));
            }
        }
        for (auto& e : d.examples) {
            for (std::size_t k = 0; k < e.x.nnz(); ++k) {
                if (scale[e.x.indices[k]] > 0.0) {
                    e.x.values[k] /= scale[e.x.indices[k]];
                }
            }
        }
    }
    return d;
}

inline Dataset load_svmlight(const std::string& path, const SvmlightOptions& opts = {}) {
    const std::string text = detail::read_text_file(path);
    try {
        return parse_svmlight(text, opts);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline std::string to_svmlight(const Dataset& d) {
    std::string out;
    for (const auto& e : d.examples) {
        out += detail::format_double(d.raw_labels.empty() ? static_cast<double>(e.y) : d.raw_labels[e.y]);
        for (std::size_t k = 0; k < e.x.nnz(); ++k) {
            out += ' ';
            out += std::to_string(e.x.indices[k]);
            out += ':';
            out += detail::format_double(e.x.values[k]);
        }
        out += '\n';
    }
    return out;
}

inline void write_svmlight(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out << to_svmlight(d);
}

/// Seeded 80/10/10 split. Validation and test get floor(10%) each; the
/// remainder goes to train.
inline Split split_dataset(const Dataset& d, std::uint64_t seed) {
    if (d.size() < 10) {
        throw ArgumentError("split_dataset: need at least 10 examples, got " + std::to_string(d.size()));
    }
    std::vector<std::size_t> perm(d.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = i;
    }
    RandomStream rng(derive_seed(seed, {0x5b117ULL}));
    rng.shuffle(perm);
    const std::size_t n_val = d.size() / 10;
    const std::size_t n_test = d.size() / 10;
    const std::size_t n_train = d.size() - n_val - n_test;

    Split s;
    s.seed = seed;
    s.train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                             perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    s.train = d.subset(s.train_rows);
    s.validation = d.subset(s.validation_rows);
    s.test = d.subset(s.test_rows);
    return s;
}

/// K Gaussian clusters around random unit-norm centers in R^n. `spread` is
/// the expected norm of the noise vector: each coordinate gets
/// N(0, spread^2 / n). Examples are ordered class by class.
inline Dataset make_blobs(std::size_t K, std::size_t n, std::size_t per_class, double spread, std::uint64_t seed) {
    if (K < 2 || n < 2) {
        throw ArgumentError("make_blobs: need K >= 2 and n >= 2");
    }
    if (spread < 0.0) {
        throw ArgumentError("make_blobs: spread must be non-negative");
    }
    RandomStream rng(derive_seed(seed, {0xb10bULL}));
    std::vector<Vector> centers(K, Vector(n));
    for (auto& c : centers) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : c) {
                v = rng.normal();
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& v : c) {
            v /= norm;
        }
    }
    const double sigma = spread / std::sqrt(static_cast<double>(n));
    Dataset d;
    d.n = n;
    d.K = K;
    for (std::size_t k = 0; k < K; ++k) {
        d.raw_labels.push_back(static_cast<double>(k));
    }
    d.examples.reserve(K * per_class);
    Vector point(n);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                point[j] = centers[k][j] + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
            }
            d.examples.push_back({SparseVector::from_dense(point), static_cast<std::uint32_t>(k)});
        }
    }
    return d;
}

} // namespace dsnc

#endif
