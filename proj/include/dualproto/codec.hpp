// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary framing for round messages. All integers little-endian.
//
//   offset  size  field
//   0       4     magic "FDBP"
//   4       2     format version (u16)
//   6       1     direction: 0 upload, 1 download
//   7       4     round index (u32)
//   11      8     body length in bytes (u64)
//   19      ...   sections: tag (u8), payload length (u64), payload
//
// Upload body:   client, prototypes, scores, sample_count (in this order)
// Download body: client, prototypes
//
//   client       u32 client id
//   prototypes   u8 kind, u32 C, u32 d_z, coverage bitmap (ceil(C/8) bytes,
//                bit c%8 of byte c/8), then f64 rows of covered classes
//   scores       u32 C, u32 d_z, coverage bitmap, u64 N_c per covered class,
//                then f64 rows of covered classes
//   sample_count u64 n_k

#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "dualproto/client.hpp"

namespace dualproto {

inline constexpr std::uint16_t kWireVersion = 1;

enum class Direction : std::uint8_t { upload = 0, download = 1 };

struct PrototypeDownload {
    std::uint32_t client_id = 0;
    PrototypeSet prototypes;

    bool operator==(const PrototypeDownload& other) const = default;
};

struct RoundMessage {
    Direction direction = Direction::upload;
    std::uint32_t round = 0;
    std::variant<ClientUpload, PrototypeDownload> payload;

    bool operator==(const RoundMessage& other) const = default;
};

RoundMessage make_upload_message(std::uint32_t round, ClientUpload upload);
RoundMessage make_download_message(std::uint32_t round, std::uint32_t client_id, PrototypeSet prototypes);

std::vector<std::uint8_t> encode(const RoundMessage& msg);
/// Throws CodecError carrying the byte offset and section of the failure.
RoundMessage decode(std::span<const std::uint8_t> bytes);

}  // namespace dualproto
