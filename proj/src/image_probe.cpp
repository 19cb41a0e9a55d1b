#include "mmshap/image_probe.hpp"

#include <array>
#include <fstream>
#include <iterator>

namespace mmshap {

namespace {

std::uint32_t be32(std::string_view b, std::size_t at) {
    return (std::uint32_t(static_cast<unsigned char>(b[at])) << 24) |
           (std::uint32_t(static_cast<unsigned char>(b[at + 1])) << 16) |
           (std::uint32_t(static_cast<unsigned char>(b[at + 2])) << 8) |
           std::uint32_t(static_cast<unsigned char>(b[at + 3]));
}

std::uint16_t be16(std::string_view b, std::size_t at) {
    return static_cast<std::uint16_t>((static_cast<unsigned char>(b[at]) << 8) |
                                      static_cast<unsigned char>(b[at + 1]));
}

constexpr std::string_view kPngSignature("\x89PNG\r\n\x1a\n", 8);

bool is_png(std::string_view b) { return b.size() >= 24 && b.substr(0, 8) == kPngSignature; }

bool is_jpeg(std::string_view b) {
    return b.size() >= 4 && static_cast<unsigned char>(b[0]) == 0xFF &&
           static_cast<unsigned char>(b[1]) == 0xD8;
}

}  // namespace

std::optional<ImageSize> probe_image_size(std::string_view b) {
    if (is_png(b)) {
        if (b.substr(12, 4) != "IHDR") return std::nullopt;
        return ImageSize{be32(b, 16), be32(b, 20)};
    }
    if (is_jpeg(b)) {
        std::size_t i = 2;
        while (i + 9 < b.size()) {
            if (static_cast<unsigned char>(b[i]) != 0xFF) return std::nullopt;
            const unsigned marker = static_cast<unsigned char>(b[i + 1]);
            if (marker == 0xFF) {
                ++i;
                continue;
            }
            if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
                i += 2;
                continue;
            }
            const std::size_t len = be16(b, i + 2);
            // SOF0..SOF15 except DHT (C4), JPG (C8) and DAC (CC)
            if (marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC) {
                return ImageSize{be16(b, i + 7), be16(b, i + 5)};
            }
            i += 2 + len;
        }
    }
    return std::nullopt;
}

std::string image_mime(std::string_view b) {
    if (is_png(b)) return "image/png";
    if (is_jpeg(b)) return "image/jpeg";
    return {};
}

std::string base64_encode(std::string_view bytes) {
    static constexpr char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t(static_cast<unsigned char>(bytes[i])) << 16) |
                                (std::uint32_t(static_cast<unsigned char>(bytes[i + 1])) << 8) |
                                std::uint32_t(static_cast<unsigned char>(bytes[i + 2]));
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest > 0) {
        std::uint32_t v = std::uint32_t(static_cast<unsigned char>(bytes[i])) << 16;
        if (rest == 2) v |= std::uint32_t(static_cast<unsigned char>(bytes[i + 1])) << 8;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += rest == 2 ? alphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::optional<std::string> base64_decode(std::string_view text) {
    std::array<int, 256> lookup{};
    lookup.fill(-1);
    const std::string_view alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (std::size_t k = 0; k < alphabet.size(); ++k) lookup[static_cast<unsigned char>(alphabet[k])] = int(k);

    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r' || c == ' ') continue;
        const int v = lookup[static_cast<unsigned char>(c)];
        if (v < 0) return std::nullopt;
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

std::optional<std::string> load_image_bytes(const std::string& ref, const std::filesystem::path& base_dir) {
    if (ref.rfind("data:", 0) == 0) {
        const auto comma = ref.find(',');
        if (comma == std::string::npos) return std::nullopt;
        return base64_decode(std::string_view(ref).substr(comma + 1));
    }
    std::filesystem::path path(ref);
    if (path.is_relative()) path = base_dir / path;
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    if (ref.size() >= 16) {
        if (auto decoded = base64_decode(ref); decoded && !image_mime(*decoded).empty()) return decoded;
    }
    return std::nullopt;
}

}  // namespace mmshap
