#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace segkit {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParameterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyBoundaryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major 2D grid of pixel values.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;

    Grid(int w, int h, T fill = T{}) : width(w), height(h) {
        if (w <= 0 || h <= 0)
            throw ParameterError("Grid dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
    }

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return width == other.width && height == other.height;
    }

    bool operator==(const Grid& other) const {
        return width == other.width && height == other.height && data == other.data;
    }
};

/// Intensity image, values in [0,1].
using GrayImage = Grid<double>;

/// Segmentation label map, small non-negative integer labels.
using LabelMap = Grid<std::int32_t>;

/// Two-label map stored compactly; values are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

inline LabelMap to_label_map(const BinaryMask& mask) {
    LabelMap out(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.data[i] = mask.data[i] ? 1 : 0;
    return out;
}

/// Coordinate frame a bounding box lives in. The two named frames cover the
/// detector's downsampled grid and the full-resolution grid; anything else is
/// a custom size.
struct Frame {
    enum class Kind { downsampled128, native512, custom };

    Kind kind = Kind::custom;
    int width = 0;
    int height = 0;

    static Frame downsampled128() { return {Kind::downsampled128, 128, 128}; }
    static Frame native512() { return {Kind::native512, 512, 512}; }

    static Frame custom(int w, int h) {
        if (w <= 0 || h <= 0)
            throw ParameterError("custom frame dimensions must be positive");
        return {Kind::custom, w, h};
    }

    /// Picks the named frame when the size matches one, custom otherwise.
    static Frame of_size(int w, int h) {
        if (w == 128 && h == 128) return downsampled128();
        if (w == 512 && h == 512) return native512();
        return custom(w, h);
    }

    bool operator==(const Frame& o) const {
        return width == o.width && height == o.height;
    }
    bool operator!=(const Frame& o) const { return !(*this == o); }
};

/// Integer rectangle (x,y = top-left corner) in a named coordinate frame.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    Frame frame;

    bool valid() const {
        return w > 0 && h > 0 && x >= 0 && y >= 0 &&
               x + w <= frame.width && y + h <= frame.height;
    }

    void require_valid(const std::string& what = "bounding box") const {
        if (!valid())
            throw ParameterError(what + " does not lie inside its frame");
    }
};

}  // namespace segkit
