#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace simquery {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace simquery
