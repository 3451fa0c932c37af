#pragma once

#include <bit>
#include <cstddef>
#include <cstring>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

namespace mdload {

template <class T>
T load_le(const std::byte* p) noexcept {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return v;
    } else {
        std::byte tmp[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) tmp[i] = p[sizeof(T) - 1 - i];
        T v;
        std::memcpy(&v, tmp, sizeof(T));
        return v;
    }
}

template <class T>
void store_le(std::byte* p, T value) noexcept {
    static_assert(std::is_arithmetic_v<T>);
    std::memcpy(p, &value, sizeof(T));
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
    }
}

template <class T>
std::vector<std::byte> to_le_bytes(std::span<const T> values) {
    std::vector<std::byte> out(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) store_le(out.data() + i * sizeof(T), values[i]);
    return out;
}

}  // namespace mdload
