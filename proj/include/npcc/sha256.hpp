#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>

namespace npcc {

/// FIPS 180-4 SHA-256 of a byte buffer. Self-contained so the model hash
/// does not pull in a crypto library dependency; checked against the NIST
/// test vectors in the unit tests.
std::array<uint8_t, 32> sha256(const uint8_t* data, size_t size);

std::string hexDigest(const std::array<uint8_t, 32>& digest);

}  // namespace npcc
