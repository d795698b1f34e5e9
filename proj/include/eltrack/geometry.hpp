#pragma once

// Box algebra in normalized image coordinates. Every box lives in [0,1]^2;
// conversion to pixels happens only at I/O boundaries.

namespace eltrack {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct CornerBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    friend bool operator==(const CornerBox&, const CornerBox&) = default;
};

/// Center-form box. Construct through from_center/from_corners so the frame
/// clamp and the non-degeneracy check always run.
class BBox {
public:
    BBox() = default;

    /// Clamps the box to the unit frame; throws ValidationError on non-finite
    /// input or when nothing of the box is left inside the frame.
    static BBox from_center(double cx, double cy, double w, double h);
    static BBox from_corners(const CornerBox& corners);

    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double w() const { return w_; }
    double h() const { return h_; }
    double area() const { return w_ * h_; }

    friend bool operator==(const BBox&, const BBox&) = default;

private:
    BBox(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {}

    double cx_ = 0.5;
    double cy_ = 0.5;
    double w_ = 1.0;
    double h_ = 1.0;
};

CornerBox to_corners(const BBox& b);
BBox to_center(const CornerBox& c);

Point2 box_center(const BBox& b);

struct OverlapMetrics {
    double iou = 0.0;
    double giou = 0.0;
};

OverlapMetrics box_overlap_metrics(const BBox& a, const BBox& b);

/// Same formulas on unconstrained corner boxes (pixel space, eval toolkit).
/// Boxes with non-positive extent produce iou 0.
OverlapMetrics corner_overlap_metrics(const CornerBox& a, const CornerBox& b);

double l1_distance(const Point2& a, const Point2& b);

/// Pixel box in (x0, y0, w, h) layout as used by result and annotation files.
struct PixelBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double w = 0.0;
    double h = 0.0;

    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

PixelBox to_pixels(const BBox& b, int image_width, int image_height);
BBox from_pixels(const PixelBox& p, int image_width, int image_height);
CornerBox pixel_corners(const PixelBox& p);

}  // namespace eltrack
