#pragma once

#include <cstdint>
#include <bit>
#include <cstring>
#include <string>
#include <type_traits>
#include <utility>

#include "semattn/errors.hpp"

namespace semattn::util {

// Little-endian append/read helpers for the binary containers.
template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class ByteReader {
 public:
    ByteReader(const std::string& bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        }
        T value;
        std::memcpy(&value, raw, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string take(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError(context_ + ": truncated file");
    }

    const std::string& bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

}  // namespace semattn::util
