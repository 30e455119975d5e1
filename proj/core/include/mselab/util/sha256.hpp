#pragma once

#include <cstdint>
#include <string>

namespace mse::util {

// FIPS 180-4 SHA-256, hex-encoded digest. Used for artifact digests in run
// manifests and for content-addressed phase caching.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

}  // namespace mse::util
