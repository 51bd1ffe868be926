// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/codec.hpp"

#include <bit>
#include <string>

#include "dualproto/errors.hpp"

namespace dualproto {

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'D', 'B', 'P'};
constexpr std::size_t kHeaderSize = 19;

enum Tag : std::uint8_t { kClient = 1, kPrototypes = 2, kScores = 3, kSampleCount = 4 };

const char* tag_name(std::uint8_t tag) {
    switch (tag) {
        case kClient:
            return "client";
        case kPrototypes:
            return "prototypes";
        case kScores:
            return "scores";
        case kSampleCount:
            return "sample_count";
    }
    return "unknown";
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t>& buffer() { return out_; }

    // Opens a section; returns the position of its length field.
    std::size_t begin_section(std::uint8_t tag) {
        u8(tag);
        const std::size_t at = out_.size();
        u64(0);
        return at;
    }
    void end_section(std::size_t length_at) {
        const std::uint64_t len = out_.size() - length_at - 8;
        for (int i = 0; i < 8; ++i) out_[length_at + i] = static_cast<std::uint8_t>(len >> (8 * i));
    }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    void set_section(std::string name) { section_ = std::move(name); }
    const std::string& section() const { return section_; }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t at) const { throw CodecError(what, at, section_); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            fail("truncated payload: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left",
                 pos_);
        }
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::string section_ = "header";
};

std::vector<std::uint8_t> coverage_bitmap(const std::vector<std::size_t>& covered, std::size_t num_classes) {
    std::vector<std::uint8_t> bitmap((num_classes + 7) / 8, 0);
    for (std::size_t c : covered) bitmap[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
    return bitmap;
}

std::vector<std::size_t> read_coverage(Reader& r, std::size_t num_classes) {
    const std::size_t at = r.pos();
    auto bitmap = r.bytes((num_classes + 7) / 8);
    std::vector<std::size_t> covered;
    for (std::size_t c = 0; c < bitmap.size() * 8; ++c) {
        if (!(bitmap[c / 8] & (1u << (c % 8)))) continue;
        if (c >= num_classes) r.fail("coverage bit set beyond class count", at + c / 8);
        covered.push_back(c);
    }
    return covered;
}

void write_prototypes(Writer& w, const PrototypeSet& set) {
    const auto at = w.begin_section(kPrototypes);
    w.u8(static_cast<std::uint8_t>(set.kind()));
    w.u32(static_cast<std::uint32_t>(set.num_classes()));
    w.u32(static_cast<std::uint32_t>(set.d_z()));
    const auto covered = set.coverage();
    w.bytes(coverage_bitmap(covered, set.num_classes()));
    for (std::size_t c : covered)
        for (double v : set.at(c)) w.f64(v);
    w.end_section(at);
}

void write_scores(Writer& w, const ImportanceScores& s) {
    const auto at = w.begin_section(kScores);
    w.u32(static_cast<std::uint32_t>(s.num_classes));
    w.u32(static_cast<std::uint32_t>(s.d_z));
    const auto covered = s.coverage();
    w.bytes(coverage_bitmap(covered, s.num_classes));
    for (std::size_t c : covered) w.u64(s.sample_counts[c]);
    for (std::size_t c : covered)
        for (double v : s.row(c)) w.f64(v);
    w.end_section(at);
}

// Reads the section header and checks the tag; returns the declared payload end.
std::size_t open_section(Reader& r, Tag expected) {
    r.set_section(tag_name(expected));
    const std::size_t at = r.pos();
    const std::uint8_t tag = r.u8();
    if (tag != expected) {
        r.fail(std::string("expected section '") + tag_name(expected) + "', found tag " + std::to_string(tag), at);
    }
    const std::uint64_t len = r.u64();
    return r.pos() + static_cast<std::size_t>(len);
}

void close_section(Reader& r, std::size_t declared_end) {
    if (r.pos() != declared_end) {
        r.fail("section length field says it ends at byte " + std::to_string(declared_end) + ", payload ended at " +
                   std::to_string(r.pos()),
               r.pos());
    }
}

PrototypeSet read_prototypes(Reader& r) {
    const std::size_t end = open_section(r, kPrototypes);
    const std::size_t kind_at = r.pos();
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(PrototypeKind::personalized)) r.fail("invalid prototype kind", kind_at);
    const std::size_t c = r.u32();
    const std::size_t d = r.u32();
    const auto covered = read_coverage(r, c);
    PrototypeSet set(static_cast<PrototypeKind>(kind), c, d);
    for (std::size_t cls : covered) {
        const std::size_t row_at = r.pos();
        std::vector<double> row(d);
        for (double& v : row) v = r.f64();
        try {
            set.set(cls, std::move(row));
        } catch (const NumericalError&) {
            r.fail("non-finite prototype entry", row_at);
        }
    }
    close_section(r, end);
    return set;
}

ImportanceScores read_scores(Reader& r) {
    const std::size_t end = open_section(r, kScores);
    const std::size_t c = r.u32();
    const std::size_t d = r.u32();
    const auto covered = read_coverage(r, c);
    ImportanceScores s(c, d);
    for (std::size_t cls : covered) {
        const std::size_t at = r.pos();
        s.sample_counts[cls] = r.u64();
        if (s.sample_counts[cls] == 0) r.fail("covered class with zero sample count", at);
    }
    for (std::size_t cls : covered)
        for (std::size_t j = 0; j < d; ++j) s.scores[cls * d + j] = r.f64();
    close_section(r, end);
    return s;
}

std::uint32_t read_client(Reader& r) {
    const std::size_t end = open_section(r, kClient);
    const std::uint32_t id = r.u32();
    close_section(r, end);
    return id;
}

std::uint64_t read_sample_count(Reader& r) {
    const std::size_t end = open_section(r, kSampleCount);
    const std::uint64_t n = r.u64();
    close_section(r, end);
    return n;
}

}  // namespace

RoundMessage make_upload_message(std::uint32_t round, ClientUpload upload) {
    return RoundMessage{Direction::upload, round, std::move(upload)};
}

RoundMessage make_download_message(std::uint32_t round, std::uint32_t client_id, PrototypeSet prototypes) {
    return RoundMessage{Direction::download, round, PrototypeDownload{client_id, std::move(prototypes)}};
}

std::vector<std::uint8_t> encode(const RoundMessage& msg) {
    const bool is_upload = std::holds_alternative<ClientUpload>(msg.payload);
    if (is_upload != (msg.direction == Direction::upload)) {
        throw ContractError("encode: payload type does not match message direction");
    }
    Writer w;
    w.bytes(kMagic);
    w.u16(kWireVersion);
    w.u8(static_cast<std::uint8_t>(msg.direction));
    w.u32(msg.round);
    w.u64(0);  // body length, patched below

    if (is_upload) {
        const auto& up = std::get<ClientUpload>(msg.payload);
        auto at = w.begin_section(kClient);
        w.u32(up.client_id);
        w.end_section(at);
        write_prototypes(w, up.prototypes);
        write_scores(w, up.scores);
        at = w.begin_section(kSampleCount);
        w.u64(up.n_k);
        w.end_section(at);
    } else {
        const auto& down = std::get<PrototypeDownload>(msg.payload);
        auto at = w.begin_section(kClient);
        w.u32(down.client_id);
        w.end_section(at);
        write_prototypes(w, down.prototypes);
    }

    auto& buf = w.buffer();
    const std::uint64_t body = buf.size() - kHeaderSize;
    for (int i = 0; i < 8; ++i) buf[11 + i] = static_cast<std::uint8_t>(body >> (8 * i));
    return std::move(buf);
}

RoundMessage decode(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) r.fail("bad magic bytes", 0);
    const std::uint16_t version = r.u16();
    if (version != kWireVersion) {
        r.fail("unsupported format version " + std::to_string(version) + " (expected " +
                   std::to_string(kWireVersion) + ")",
               4);
    }
    const std::uint8_t dir = r.u8();
    if (dir > 1) r.fail("invalid direction " + std::to_string(dir), 6);
    RoundMessage msg;
    msg.direction = static_cast<Direction>(dir);
    msg.round = r.u32();
    const std::uint64_t body = r.u64();

    const std::uint32_t client_id = read_client(r);
    PrototypeSet protos = read_prototypes(r);
    if (msg.direction == Direction::upload) {
        ImportanceScores scores = read_scores(r);
        const std::uint64_t n_k = read_sample_count(r);
        msg.payload = ClientUpload{client_id, std::move(protos), std::move(scores), n_k};
    } else {
        msg.payload = PrototypeDownload{client_id, std::move(protos)};
    }

    r.set_section("trailer");
    if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes after last section", r.pos());
    if (r.pos() - kHeaderSize != body) {
        r.fail("body length field " + std::to_string(body) + " disagrees with " + std::to_string(r.pos() - kHeaderSize) +
                   " decoded bytes",
               11);
    }
    return msg;
}

}  // namespace dualproto
