#include "termclust/binary_io.hpp"

#include <cstdio>
#include <vector>

#include "termclust/rng.hpp"

namespace termclust::io {

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<char> buf(1 << 16);
    std::uint64_t h = 0;
    std::uint64_t block = 0;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        h = mix64(h ^ hash64(std::string_view(buf.data(), got), block++));
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace termclust::io
