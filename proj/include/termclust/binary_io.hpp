#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "termclust/error.hpp"

namespace termclust::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) noexcept {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> b;
        std::memcpy(b.data(), &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b.data(), sizeof(T));
    }
    return v;
}

/// Little-endian binary writer over an ofstream.
class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void magic(std::string_view tag) { os_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    template <class T>
    void put(T v) {
        v = to_little(v);
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <class T>
    void put_span(std::span<const T> values) {
        if constexpr (std::endian::native == std::endian::little) {
            os_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
        } else {
            for (T v : values) put(v);
        }
    }

    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream& os_;
};

/// Little-endian binary reader; every short read is a data error.
class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        raw(got.data(), got.size());
        if (got != tag) fail_data(source_ + ": bad magic, expected '" + std::string(tag) + "'");
    }

    template <class T>
    T get() {
        T v;
        raw(reinterpret_cast<char*>(&v), sizeof(T));
        return to_little(v);
    }

    template <class T>
    void get_span(std::span<T> out) {
        raw(reinterpret_cast<char*>(out.data()), out.size_bytes());
        if constexpr (std::endian::native != std::endian::little) {
            for (T& v : out) v = to_little(v);
        }
    }

    std::string get_string() {
        const auto len = get<std::uint32_t>();
        std::string s(len, '\0');
        raw(s.data(), len);
        return s;
    }

    bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

    const std::string& source() const noexcept { return source_; }

private:
    void raw(char* dst, std::size_t n) {
        is_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) fail_data(source_ + ": truncated file");
    }

    std::istream& is_;
    std::string source_;
};

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open " + path.string());
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_validation("cannot write " + path.string());
    return out;
}

/// Seeded FNV-1a over bytes with a splitmix64 finish. Portable across platforms.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept;

/// hash64 of a whole file, used for manifests and determinism checks.
std::uint64_t file_checksum(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);

}  // namespace termclust::io
