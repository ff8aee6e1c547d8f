// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssiot {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(ByteView b);

// Standard (RFC 4648) base64 with padding. Decoding rejects malformed input
// with std::invalid_argument.
std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);

Bytes sha256(ByteView data);
std::string sha256_hex(ByteView data);
std::string hex_encode(ByteView data);

// Fills `out` from the OS CSPRNG. Throws std::runtime_error if the entropy
// source fails.
void secure_random(std::span<std::uint8_t> out);
Bytes secure_random(std::size_t n);

// True if `needle` occurs anywhere in `haystack`. An empty needle never matches.
bool contains_subsequence(ByteView haystack, ByteView needle);

// Overwrites the buffer in a way the optimizer is not allowed to drop.
void secure_wipe(std::span<std::uint8_t> data);

}  // namespace ssiot
