#pragma once

#include <cstdint>
#include <string>

namespace bof {

// SHA-256 of a byte string, lowercase hex. Used to fingerprint canonical
// model-config JSON in checkpoints.
std::string sha256_hex(const std::string& bytes);

}  // namespace bof
