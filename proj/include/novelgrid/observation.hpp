#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace novelgrid {

// Rendered RGB frame with intensities in [0, 1], row-major, 3 channels.
struct Observation {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // width * height * 3

    std::size_t size() const { return data.size(); }
    bool same_shape(const Observation& other) const {
        return width == other.width && height == other.height && data.size() == other.data.size();
    }
    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    friend bool operator==(const Observation& a, const Observation& b) {
        return a.width == b.width && a.height == b.height && a.data == b.data;
    }
};

// Hash over the raw float bits; the renderer is deterministic so identical
// frames are bit-identical.
inline std::uint64_t observation_hash(const Observation& obs) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (float v : obs.data) {
        std::uint32_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 4; ++i) {
            h ^= (bits >> (8 * i)) & 0xFFu;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

}  // namespace novelgrid
