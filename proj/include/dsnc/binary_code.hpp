#ifndef DSNC_BINARY_CODE_HPP
#define DSNC_BINARY_CODE_HPP

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsnc/errors.hpp"
#include "dsnc/linalg.hpp"

namespace dsnc {

/// Element of {0,1}^c packed into 64-bit words: bit i lives in word i/64 at
/// position i%64. Bits past c are always zero.
///
/// Codes are totally ordered by their value as the unsigned integer
/// sum_i b_i 2^i, so word 0 holds the least significant bits and comparison
/// runs from the last word down.
class BinaryCode {
  public:
    BinaryCode() = default;
    explicit BinaryCode(std::size_t c) : c_(c), words_(word_count(c), 0) {}

    static std::size_t word_count(std::size_t c) { return (c + 63) / 64; }

    static BinaryCode from_bits(std::span<const std::uint8_t> bits) {
        BinaryCode code(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            code.set(i, bits[i] != 0);
        }
        return code;
    }

    // Code whose bit j is bit j of `value`; c <= 64.
    static BinaryCode from_integer(std::size_t c, std::uint64_t value) {
        if (c > 64) {
            throw ArgumentError("BinaryCode::from_integer: c > 64");
        }
        BinaryCode code(c);
        if (c > 0) {
            code.words_[0] = c == 64 ? value : value & ((std::uint64_t{1} << c) - 1);
        }
        return code;
    }

    static BinaryCode from_words(std::size_t c, std::vector<std::uint64_t> words) {
        if (words.size() != word_count(c)) {
            throw ArgumentError("BinaryCode::from_words: wrong word count for c=" + std::to_string(c));
        }
        BinaryCode code;
        code.c_ = c;
        code.words_ = std::move(words);
        if (c % 64 != 0 && !code.words_.empty() && (code.words_.back() >> (c % 64)) != 0) {
            throw DataError("BinaryCode::from_words: bits set beyond code size");
        }
        return code;
    }

    std::size_t size() const { return c_; }
    std::span<const std::uint64_t> words() const { return words_; }

    bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    void set(std::size_t i, bool bit) {
        const std::uint64_t mask = std::uint64_t{1} << (i % 64);
        if (bit) {
            words_[i / 64] |= mask;
        } else {
            words_[i / 64] &= ~mask;
        }
    }

    std::vector<std::uint8_t> bits() const {
        std::vector<std::uint8_t> out(c_);
        for (std::size_t i = 0; i < c_; ++i) {
            out[i] = get(i) ? 1 : 0;
        }
        return out;
    }

    Vector to_vector() const {
        Vector out(c_);
        for (std::size_t i = 0; i < c_; ++i) {
            out[i] = get(i) ? 1.0 : 0.0;
        }
        return out;
    }

    // Bits [start, start+len) as an integer, len <= 64.
    std::uint64_t extract(std::size_t start, std::size_t len) const {
        if (len == 0) {
            return 0;
        }
        const std::size_t w = start / 64;
        const std::size_t off = start % 64;
        std::uint64_t v = words_[w] >> off;
        if (off != 0 && off + len > 64 && w + 1 < words_.size()) {
            v |= words_[w + 1] << (64 - off);
        }
        return len == 64 ? v : v & ((std::uint64_t{1} << len) - 1);
    }

    // "b0 b1 ... b(c-1)" without separators.
    std::string to_string() const {
        std::string s(c_, '0');
        for (std::size_t i = 0; i < c_; ++i) {
            if (get(i)) {
                s[i] = '1';
            }
        }
        return s;
    }

    friend bool operator==(const BinaryCode&, const BinaryCode&) = default;

    friend std::strong_ordering operator<=>(const BinaryCode& a, const BinaryCode& b) {
        if (a.c_ != b.c_) {
            return a.c_ <=> b.c_;
        }
        for (std::size_t w = a.words_.size(); w-- > 0;) {
            if (a.words_[w] != b.words_[w]) {
                return a.words_[w] <=> b.words_[w];
            }
        }
        return std::strong_ordering::equal;
    }

  private:
    std::size_t c_ = 0;
    std::vector<std::uint64_t> words_;
};

struct BinaryCodeHash {
    std::size_t operator()(const BinaryCode& code) const {
        std::uint64_t h = 0x84222325cbf29ce4ULL ^ code.size();
        for (auto w : code.words()) {
            h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

} // namespace dsnc

#endif
