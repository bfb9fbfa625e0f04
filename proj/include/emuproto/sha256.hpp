#pragma once

#include <cstddef>
#include <string>

namespace emuproto {

// Hex digest, used for content-addressed cache keys.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace emuproto
