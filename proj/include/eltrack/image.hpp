#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace eltrack {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit interleaved RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

    Image() = default;
    Image(int w, int h, Rgb fill = {0, 0, 0});

    bool empty() const { return width == 0 || height == 0; }
    std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* at(int x, int y) const {
        return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    }
    Rgb get(int x, int y) const {
        const auto* p = at(x, y);
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) {
        auto* p = at(x, y);
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear resize (pixel-center aligned).
Image resize_bilinear(const Image& src, int width, int height);

/// Per-channel mean over all pixels.
std::array<double, 3> channel_means(const Image& img);

/// Crops the axis-aligned region [x0, x0+size) x [y0, y0+size) in source
/// pixel coordinates (fractional allowed) and resamples it to out_size
/// square. Samples falling outside the source take the `pad` color.
Image crop_resize_square(const Image& src, double x0, double y0, double size, int out_size,
                         const std::array<double, 3>& pad);

void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// One-pixel-wide rectangle outline, clipped to the image.
void draw_rectangle(Image& img, int x0, int y0, int x1, int y1, Rgb color, int thickness = 1);

}  // namespace eltrack
