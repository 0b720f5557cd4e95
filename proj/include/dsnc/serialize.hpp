#ifndef DSNC_SERIALIZE_HPP
#define DSNC_SERIALIZE_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsnc/baselines.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/hamming.hpp"
#include "dsnc/model.hpp"

// Model files: 4-byte tag ("DSNC", "MLP1" or "ECOC"), a version byte, then
// little-endian u32 n, c, K and little-endian f32 parameters.
//   DSNC/MLP1: enc_w (c x n, row-major), enc_b (c), dec_w (K x c), dec_b (K)
//   ECOC:      w (c x n), b (c), then K code rows as u64 words
// A DSNC file may end with a code index section: byte 0x01, u32 entry count,
// then per entry the packed code words (u64), u32 class id, u32 count.

namespace dsnc {

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::uint8_t kIndexSectionTag = 0x01;

enum class ModelKind { dsnc, mlp, ecoc };

namespace detail {

class ByteWriter {
  public:
    void tag(std::string_view t) { out_.append(t); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f32s(std::span<const double> v) {
        for (double x : v) {
            f32(x);
        }
    }
    std::string take() { return std::move(out_); }

  private:
    std::string out_;
};

class ByteReader {
  public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t k) const {
        if (remaining() < k) {
            throw DataError("model file truncated");
        }
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        }
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    void f32s(std::span<double> out) {
        need(4 * out.size());
        for (auto& v : out) {
            v = f32();
            if (!std::isfinite(v)) {
                throw DataError("model file holds a non-finite parameter");
            }
        }
    }

  private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline const char* kind_tag(ModelKind k) {
    switch (k) {
    case ModelKind::dsnc:
        return "DSNC";
    case ModelKind::mlp:
        return "MLP1";
    case ModelKind::ecoc:
        return "ECOC";
    }
    return "????";
}

struct Header {
    ModelKind kind;
    std::size_t n, c, K;
};

inline Header read_header(ByteReader& in, std::string_view bytes) {
    if (bytes.size() < 5) {
        throw DataError("unrecognized model format");
    }
    const auto tag = bytes.substr(0, 4);
    Header h{};
    if (tag == "DSNC") {
        h.kind = ModelKind::dsnc;
    } else if (tag == "MLP1") {
        h.kind = ModelKind::mlp;
    } else if (tag == "ECOC") {
        h.kind = ModelKind::ecoc;
    } else {
        throw DataError("unrecognized model format");
    }
    for (int i = 0; i < 4; ++i) {
        in.u8();
    }
    if (const auto v = in.u8(); v != kFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(v));
    }
    h.n = in.u32();
    h.c = in.u32();
    h.K = in.u32();
    if (h.n == 0 || h.c == 0 || h.K == 0) {
        throw DataError("model file has a zero dimension");
    }
    return h;
}

inline void write_network(ByteWriter& out, ModelKind kind, const NetworkParams& m) {
    out.tag(kind_tag(kind));
    out.u8(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(m.n));
    out.u32(static_cast<std::uint32_t>(m.c));
    out.u32(static_cast<std::uint32_t>(m.K));
    out.f32s(m.enc_w.values());
    out.f32s(m.enc_b);
    out.f32s(m.dec_w.values());
    out.f32s(m.dec_b);
}

template <typename Model>
Model read_network(ByteReader& in, const Header& h) {
    const std::size_t floats = h.c * h.n + h.c + h.K * h.c + h.K;
    in.need(4 * floats);
    Model m(h.n, h.c, h.K);
    in.f32s(m.enc_w.values());
    in.f32s(m.enc_b);
    in.f32s(m.dec_w.values());
    in.f32s(m.dec_b);
    return m;
}

} // namespace detail

inline ModelKind detect_model_kind(std::string_view bytes) {
    detail::ByteReader in(bytes);
    return detail::read_header(in, bytes).kind;
}

inline std::string serialize_dsnc(const DsncModel& model, const CodeIndex* index = nullptr) {
    detail::ByteWriter out;
    detail::write_network(out, ModelKind::dsnc, model);
    if (index != nullptr) {
        if (index->c != model.c) {
            throw ArgumentError("serialize_dsnc: index code size differs from model");
        }
        out.u8(kIndexSectionTag);
        out.u32(static_cast<std::uint32_t>(index->size()));
        for (std::size_t e = 0; e < index->size(); ++e) {
            for (auto w : index->codes[e].words()) {
                out.u64(w);
            }
            out.u32(index->labels[e]);
            out.u32(index->counts[e]);
        }
    }
    return out.take();
}

struct LoadedDsnc {
    DsncModel model;
    std::optional<CodeIndex> index;
};

inline LoadedDsnc parse_dsnc(std::string_view bytes) {
    detail::ByteReader in(bytes);
    const auto h = detail::read_header(in, bytes);
    if (h.kind != ModelKind::dsnc) {
        throw DataError(std::string("expected a DSNC model, found ") + detail::kind_tag(h.kind));
    }
    LoadedDsnc out{detail::read_network<DsncModel>(in, h), std::nullopt};
    if (in.remaining() == 0) {
        return out;
    }
    if (in.u8() != kIndexSectionTag) {
        throw DataError("unknown section after model parameters");
    }
    const std::size_t entries = in.u32();
    const std::size_t words = BinaryCode::word_count(h.c);
    if (in.remaining() != entries * (8 * words + 8)) {
        throw DataError("index section length mismatch");
    }
    CodeIndex idx;
    idx.c = h.c;
    for (std::size_t e = 0; e < entries; ++e) {
        std::vector<std::uint64_t> w(words);
        for (auto& v : w) {
            v = in.u64();
        }
        idx.codes.push_back(BinaryCode::from_words(h.c, std::move(w)));
        const auto label = in.u32();
        if (label >= h.K) {
            throw DataError("index entry class out of range");
        }
        idx.labels.push_back(label);
        idx.counts.push_back(in.u32());
        idx.total += idx.counts.back();
        if (e > 0 && !(idx.codes[e - 1] < idx.codes[e])) {
            throw DataError("index entries not sorted and unique");
        }
    }
    out.index = std::move(idx);
    return out;
}

inline std::string serialize_mlp(const MlpModel& model) {
    detail::ByteWriter out;
    detail::write_network(out, ModelKind::mlp, model);
    return out.take();
}

inline MlpModel parse_mlp(std::string_view bytes) {
    detail::ByteReader in(bytes);
    const auto h = detail::read_header(in, bytes);
    if (h.kind != ModelKind::mlp) {
        throw DataError(std::string("expected an MLP1 model, found ") + detail::kind_tag(h.kind));
    }
    auto m = detail::read_network<MlpModel>(in, h);
    if (in.remaining() != 0) {
        throw DataError("trailing bytes after MLP parameters");
    }
    return m;
}

inline std::string serialize_ecoc(const EcocModel& model) {
    detail::ByteWriter out;
    out.tag("ECOC");
    out.u8(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(model.n));
    out.u32(static_cast<std::uint32_t>(model.c));
    out.u32(static_cast<std::uint32_t>(model.K));
    out.f32s(model.w.values());
    out.f32s(model.b);
    for (const auto& row : model.code_matrix) {
        for (auto w : row.words()) {
            out.u64(w);
        }
    }
    return out.take();
}

inline EcocModel parse_ecoc(std::string_view bytes) {
    detail::ByteReader in(bytes);
    const auto h = detail::read_header(in, bytes);
    if (h.kind != ModelKind::ecoc) {
        throw DataError(std::string("expected an ECOC model, found ") + detail::kind_tag(h.kind));
    }
    const std::size_t words = BinaryCode::word_count(h.c);
    if (in.remaining() != 4 * (h.c * h.n + h.c) + 8 * words * h.K) {
        throw DataError("ECOC model length mismatch");
    }
    EcocModel m;
    m.n = h.n;
    m.c = h.c;
    m.K = h.K;
    m.w = Matrix(h.c, h.n);
    m.b.assign(h.c, 0.0);
    in.f32s(m.w.values());
    in.f32s(m.b);
    for (std::size_t k = 0; k < h.K; ++k) {
        std::vector<std::uint64_t> w(words);
        for (auto& v : w) {
            v = in.u64();
        }
        m.code_matrix.push_back(BinaryCode::from_words(h.c, std::move(w)));
    }
    return m;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("write failed for " + path);
    }
}

} // namespace dsnc

#endif
