#include "eltrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "eltrack/errors.hpp"

namespace eltrack {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
    if (w < 0 || h < 0) {
        throw ValidationError("image size must be non-negative");
    }
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Bilinear read at continuous source coordinates; out-of-range taps take pad.
std::array<double, 3> sample(const Image& src, double sx, double sy, const std::array<double, 3>* pad) {
    const double fx0 = std::floor(sx);
    const double fy0 = std::floor(sy);
    const double fx = sx - fx0;
    const double fy = sy - fy0;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    std::array<double, 3> out{0.0, 0.0, 0.0};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    for (int k = 0; k < 4; ++k) {
        if (ws[k] == 0.0) {
            continue;
        }
        int x = xs[k];
        int y = ys[k];
        const bool inside = x >= 0 && x < src.width && y >= 0 && y < src.height;
        if (!inside && pad != nullptr) {
            for (int c = 0; c < 3; ++c) {
                out[c] += ws[k] * (*pad)[c];
            }
            continue;
        }
        x = std::clamp(x, 0, src.width - 1);
        y = std::clamp(y, 0, src.height - 1);
        const auto* p = src.at(x, y);
        for (int c = 0; c < 3; ++c) {
            out[c] += ws[k] * p[c];
        }
    }
    return out;
}

}  // namespace

Image resize_bilinear(const Image& src, int width, int height) {
    if (src.empty() || width <= 0 || height <= 0) {
        throw ValidationError("resize_bilinear: empty source or target");
    }
    if (src.width == width && src.height == height) {
        return src;
    }
    Image dst(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto v = sample(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5, nullptr);
            dst.set(x, y, {to_byte(v[0]), to_byte(v[1]), to_byte(v[2])});
        }
    }
    return dst;
}

std::array<double, 3> channel_means(const Image& img) {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (n == 0) {
        return sum;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            sum[c] += img.pixels[i * 3 + c];
        }
    }
    for (auto& s : sum) {
        s /= static_cast<double>(n);
    }
    return sum;
}

Image crop_resize_square(const Image& src, double x0, double y0, double size, int out_size,
                         const std::array<double, 3>& pad) {
    if (src.empty() || size <= 0.0 || out_size <= 0) {
        throw ValidationError("crop_resize_square: empty source or crop");
    }
    Image dst(out_size, out_size);
    const double step = size / out_size;
    for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
            const double sx = x0 + (x + 0.5) * step - 0.5;
            const double sy = y0 + (y + 0.5) * step - 0.5;
            const auto v = sample(src, sx, sy, &pad);
            dst.set(x, y, {to_byte(v[0]), to_byte(v[1]), to_byte(v[2])});
        }
    }
    return dst;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) {
        throw IoError("short write to " + path.string());
    }
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string magic;
    int w = 0;
    int h = 0;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
        throw IoError("not an 8-bit binary PPM: " + path.string());
    }
    in.get();
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw IoError("truncated PPM: " + path.string());
    }
    return img;
}

void draw_rectangle(Image& img, int x0, int y0, int x1, int y1, Rgb color, int thickness) {
    for (int t = 0; t < thickness; ++t) {
        const int ax = x0 + t;
        const int ay = y0 + t;
        const int bx = x1 - t;
        const int by = y1 - t;
        for (int x = std::max(ax, 0); x <= std::min(bx, img.width - 1); ++x) {
            if (ay >= 0 && ay < img.height) img.set(x, ay, color);
            if (by >= 0 && by < img.height) img.set(x, by, color);
        }
        for (int y = std::max(ay, 0); y <= std::min(by, img.height - 1); ++y) {
            if (ax >= 0 && ax < img.width) img.set(ax, y, color);
            if (bx >= 0 && bx < img.width) img.set(bx, y, color);
        }
    }
}

}  // namespace eltrack
