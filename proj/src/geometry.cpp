#include "eltrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eltrack/errors.hpp"

namespace eltrack {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ValidationError(std::string("non-finite box component: ") + what);
    }
}

}  // namespace

BBox BBox::from_center(double cx, double cy, double w, double h) {
    require_finite(cx, "cx");
    require_finite(cy, "cy");
    require_finite(w, "w");
    require_finite(h, "h");
    if (w <= 0.0 || h <= 0.0) {
        throw ValidationError("box extent must be positive");
    }
    return from_corners({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
}

BBox BBox::from_corners(const CornerBox& c) {
    require_finite(c.x0, "x0");
    require_finite(c.y0, "y0");
    require_finite(c.x1, "x1");
    require_finite(c.y1, "y1");
    const double x0 = std::clamp(c.x0, 0.0, 1.0);
    const double y0 = std::clamp(c.y0, 0.0, 1.0);
    const double x1 = std::clamp(c.x1, 0.0, 1.0);
    const double y1 = std::clamp(c.y1, 0.0, 1.0);
    if (!(x1 > x0) || !(y1 > y0)) {
        throw ValidationError("box has zero extent inside the frame");
    }
    return BBox(0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0);
}

CornerBox to_corners(const BBox& b) {
    return {b.cx() - 0.5 * b.w(), b.cy() - 0.5 * b.h(), b.cx() + 0.5 * b.w(),
            b.cy() + 0.5 * b.h()};
}

BBox to_center(const CornerBox& c) { return BBox::from_corners(c); }

Point2 box_center(const BBox& b) { return {b.cx(), b.cy()}; }

OverlapMetrics corner_overlap_metrics(const CornerBox& a, const CornerBox& b) {
    const double area_a = std::max(0.0, a.width()) * std::max(0.0, a.height());
    const double area_b = std::max(0.0, b.width()) * std::max(0.0, b.height());
    const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = iw * ih;
    const double uni = area_a + area_b - inter;
    const double ew = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
    const double eh = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
    const double enclosing = ew * eh;

    OverlapMetrics m;
    if (uni <= 0.0) {
        return m;
    }
    m.iou = inter / uni;
    m.giou = enclosing > 0.0 ? m.iou - (enclosing - uni) / enclosing : m.iou;
    return m;
}

OverlapMetrics box_overlap_metrics(const BBox& a, const BBox& b) {
    return corner_overlap_metrics(to_corners(a), to_corners(b));
}

double l1_distance(const Point2& a, const Point2& b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

PixelBox to_pixels(const BBox& b, int image_width, int image_height) {
    const CornerBox c = to_corners(b);
    return {c.x0 * image_width, c.y0 * image_height, b.w() * image_width, b.h() * image_height};
}

BBox from_pixels(const PixelBox& p, int image_width, int image_height) {
    if (image_width <= 0 || image_height <= 0) {
        throw ValidationError("image size must be positive");
    }
    return BBox::from_corners({p.x0 / image_width, p.y0 / image_height,
                               (p.x0 + p.w) / image_width, (p.y0 + p.h) / image_height});
}

CornerBox pixel_corners(const PixelBox& p) { return {p.x0, p.y0, p.x0 + p.w, p.y0 + p.h}; }

}  // namespace eltrack
