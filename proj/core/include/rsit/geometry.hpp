// SPDX-License-Identifier: Apache-2.0
//
// Box geometry for remote-sensing annotations: axis-aligned boxes (HBB),
// oriented boxes stored as canonically ordered convex quads (OBB),
// normalization to [0,1] image-relative coordinates, and exact IoU for
// both box families. All computation is double precision. Image convention
// throughout: origin at the top-left corner, y grows downward.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace rsit::geom {

// Thrown when an input violates an operation's precondition
// (inverted extents, degenerate or non-convex quads, out-of-image
// coordinates in strict mode, malformed normalized values).
class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct ImageSize {
    int width = 0;
    int height = 0;

    friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Validates width >= 1, height >= 1.
ImageSize make_image_size(int width, int height);

// [xmin, ymin, xmax, ymax], pixel coordinates.
struct HorizontalBox {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }

    friend bool operator==(const HorizontalBox&, const HorizontalBox&) = default;
};

// Validates xmin < xmax, ymin < ymax, all coordinates finite and >= 0.
HorizontalBox make_hbb(double xmin, double ymin, double xmax, double ymax);

// Convex quad with corners in canonical order: corner[0] is the point
// closest to the coordinate origin (ties: smaller y, then smaller x),
// corners [1..3] sorted by ascending angle of (corner[i] - corner[0])
// (ties: smaller distance to corner[0]). Angles are measured with atan2
// in image coordinates (y-down).
struct OrientedBox {
    std::array<Point, 4> corners{};

    friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

// Orders four points (given in any order) into the canonical form above.
// Rejects inputs that are not a strictly convex quadrilateral: duplicate
// points, collinear triples, or one point inside the others' triangle.
OrientedBox canonicalize_obb(const std::array<Point, 4>& points);

// Area of the quad by the shoelace formula. Rejects degenerate quads.
double obb_area(const OrientedBox& q);

// Intersection over union of two axis-aligned boxes. Symmetric, in [0,1],
// 0 when disjoint.
double hbb_iou(const HorizontalBox& a, const HorizontalBox& b);

// Intersection over union of two convex quads: Sutherland-Hodgman clip
// of a against b, then shoelace areas. Symmetric, in [0,1].
double obb_iou(const OrientedBox& a, const OrientedBox& b);

// Tightest axis-aligned box containing all four corners.
HorizontalBox hbb_from_obb(const OrientedBox& q);

enum class BoxKind { hbb, obb };

// Image-relative box: 4 values (HBB) or 8 values (OBB x1,y1..x4,y4),
// each in [0,1] and quantized to the 1e-4 grid.
struct NormalizedBox {
    BoxKind kind = BoxKind::hbb;
    std::array<double, 8> values{};

    std::size_t count() const { return kind == BoxKind::hbb ? 4 : 8; }
    std::span<const double> coords() const { return {values.data(), count()}; }

    friend bool operator==(const NormalizedBox&, const NormalizedBox&) = default;
};

// Governs handling of coordinates outside [0,width]x[0,height]:
// strict rejects, lenient clamps to the image.
enum class BoundsMode { strict, lenient };

NormalizedBox normalize_box(const HorizontalBox& box, const ImageSize& size,
                            BoundsMode mode = BoundsMode::strict);
NormalizedBox normalize_box(const OrientedBox& box, const ImageSize& size,
                            BoundsMode mode = BoundsMode::strict);

HorizontalBox denormalize_hbb(const NormalizedBox& nbox, const ImageSize& size);
OrientedBox denormalize_obb(const NormalizedBox& nbox, const ImageSize& size);

// Snaps a value in [0,1] to the 1e-4 quantization grid.
double quantize_coord(double v);

}  // namespace rsit::geom
