#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace mmshap {

// Header sniffing only; pixels are never decoded on this side.

struct ImageSize {
    std::int64_t width = 0;
    std::int64_t height = 0;
};

/// Reads dimensions from a PNG or JPEG header.
std::optional<ImageSize> probe_image_size(std::string_view bytes);

/// "image/png", "image/jpeg" or empty when unrecognized.
std::string image_mime(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Returns nullopt on characters outside the base64 alphabet.
std::optional<std::string> base64_decode(std::string_view text);

/// Resolves a dataset image reference: a path (relative to `base_dir`), a
/// data: URI, or bare base64. Returns nullopt when nothing can be loaded.
std::optional<std::string> load_image_bytes(const std::string& ref, const std::filesystem::path& base_dir);

}  // namespace mmshap
