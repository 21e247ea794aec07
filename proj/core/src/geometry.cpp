// SPDX-License-Identifier: Apache-2.0

#include "rsit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rsit::geom {

namespace {

bool finite_pt(const Point& p) {
    return std::isfinite(p.x) && std::isfinite(p.y);
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Signed shoelace area of the quad in its stored cyclic order.
double signed_area(const std::array<Point, 4>& q) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Point& a = q[i];
        const Point& b = q[(i + 1) & 3];
        s += a.x * b.y - a.y * b.x;
    }
    return 0.5 * s;
}

// Strict convexity in the stored cyclic order: consecutive-edge cross
// products all non-zero with a common sign. Rejects collinear corners,
// bowtie orders, and a corner inside the others' triangle.
void validate_quad(const std::array<Point, 4>& q, const char* who) {
    for (const Point& p : q) {
        if (!finite_pt(p)) throw GeometryError(std::string(who) + ": non-finite corner");
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            if (q[i] == q[j]) throw GeometryError(std::string(who) + ": duplicate corners");
        }
    }
    double scale = 1.0;
    for (const Point& p : q) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
    const double eps = 1e-9 * scale * scale;

    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const double c = cross(q[i], q[(i + 1) & 3], q[(i + 2) & 3]);
        if (std::abs(c) <= eps)
            throw GeometryError(std::string(who) + ": degenerate quad (collinear corners)");
        const int s = c > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        else if (s != sign)
            throw GeometryError(std::string(who) + ": non-convex quad");
    }
}

std::array<Point, 4> as_ccw(const std::array<Point, 4>& q) {
    if (signed_area(q) >= 0.0) return q;
    return {q[0], q[3], q[2], q[1]};
}

// Sutherland-Hodgman: clip `subject` against the CCW convex polygon `clip`.
std::vector<Point> clip_convex(std::vector<Point> subject, const std::array<Point, 4>& clip) {
    for (int e = 0; e < 4 && !subject.empty(); ++e) {
        const Point a = clip[e];
        const Point b = clip[(e + 1) & 3];
        std::vector<Point> out;
        out.reserve(subject.size() + 1);
        const std::size_t n = subject.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& cur = subject[i];
            const Point& prev = subject[(i + n - 1) % n];
            const double cur_side = cross(a, b, cur);
            const double prev_side = cross(a, b, prev);
            const bool cur_in = cur_side >= 0.0;
            const bool prev_in = prev_side >= 0.0;
            if (cur_in != prev_in) {
                // edge crossing: intersect prev->cur with line a->b
                const double t = prev_side / (prev_side - cur_side);
                out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
            }
            if (cur_in) out.push_back(cur);
        }
        subject = std::move(out);
    }
    return subject;
}

double polygon_area(const std::vector<Point>& poly) {
    if (poly.size() < 3) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % poly.size()];
        s += a.x * b.y - a.y * b.x;
    }
    return 0.5 * std::abs(s);
}

void validate_hbb(const HorizontalBox& b, const char* who) {
    if (!std::isfinite(b.xmin) || !std::isfinite(b.ymin) || !std::isfinite(b.xmax) ||
        !std::isfinite(b.ymax))
        throw GeometryError(std::string(who) + ": non-finite coordinate");
    if (!(b.xmin < b.xmax) || !(b.ymin < b.ymax))
        throw GeometryError(std::string(who) + ": inverted or empty box extents");
    if (b.xmin < 0.0 || b.ymin < 0.0)
        throw GeometryError(std::string(who) + ": negative coordinate");
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

ImageSize make_image_size(int width, int height) {
    if (width < 1 || height < 1) throw GeometryError("image size: extents must be >= 1");
    return {width, height};
}

HorizontalBox make_hbb(double xmin, double ymin, double xmax, double ymax) {
    HorizontalBox b{xmin, ymin, xmax, ymax};
    validate_hbb(b, "hbb");
    return b;
}

OrientedBox canonicalize_obb(const std::array<Point, 4>& points) {
    for (const Point& p : points) {
        if (!finite_pt(p)) throw GeometryError("canonicalize_obb: non-finite corner");
    }

    // First corner: minimal distance to origin, ties by smaller y then smaller x.
    int first = 0;
    for (int i = 1; i < 4; ++i) {
        const double di = points[i].x * points[i].x + points[i].y * points[i].y;
        const double df = points[first].x * points[first].x + points[first].y * points[first].y;
        if (di < df || (di == df && (points[i].y < points[first].y ||
                                     (points[i].y == points[first].y && points[i].x < points[first].x)))) {
            first = i;
        }
    }

    std::array<Point, 4> out{};
    out[0] = points[first];
    int k = 1;
    for (int i = 0; i < 4; ++i) {
        if (i != first) out[k++] = points[i];
    }

    const Point p1 = out[0];
    std::sort(out.begin() + 1, out.end(), [&](const Point& a, const Point& b) {
        const double aa = std::atan2(a.y - p1.y, a.x - p1.x);
        const double ab = std::atan2(b.y - p1.y, b.x - p1.x);
        if (aa != ab) return aa < ab;
        const double da = (a.x - p1.x) * (a.x - p1.x) + (a.y - p1.y) * (a.y - p1.y);
        const double db = (b.x - p1.x) * (b.x - p1.x) + (b.y - p1.y) * (b.y - p1.y);
        return da < db;
    });

    // Ascending raw atan2 is the canonical order unless the direction cone
    // from p1 straddles the atan2 branch at +-pi; then the ascending circular
    // order resumes at a different corner. Both cases are the unique rotation
    // of the sorted triple whose consecutive fan cross products are positive.
    auto fan_ok = [&](const std::array<Point, 4>& q) {
        const double c1 = cross(q[0], q[1], q[2]);
        const double c2 = cross(q[0], q[2], q[3]);
        return c1 > 0.0 && c2 > 0.0;
    };
    std::array<Point, 4> best = out;
    if (!fan_ok(best)) {
        for (int r = 1; r < 3 && !fan_ok(best); ++r) {
            best = {out[0], out[1 + r % 3], out[1 + (r + 1) % 3], out[1 + (r + 2) % 3]};
        }
    }

    OrientedBox box{best};
    validate_quad(box.corners, "canonicalize_obb");
    return box;
}

double obb_area(const OrientedBox& q) {
    validate_quad(q.corners, "obb_area");
    return std::abs(signed_area(q.corners));
}

double hbb_iou(const HorizontalBox& a, const HorizontalBox& b) {
    validate_hbb(a, "hbb_iou");
    validate_hbb(b, "hbb_iou");
    const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return clamp01(inter / uni);
}

double obb_iou(const OrientedBox& a, const OrientedBox& b) {
    validate_quad(a.corners, "obb_iou");
    validate_quad(b.corners, "obb_iou");

    const std::array<Point, 4> ca = as_ccw(a.corners);
    const std::array<Point, 4> cb = as_ccw(b.corners);

    std::vector<Point> subject(ca.begin(), ca.end());
    const double inter = polygon_area(clip_convex(std::move(subject), cb));
    const double area_a = std::abs(signed_area(ca));
    const double area_b = std::abs(signed_area(cb));
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return clamp01(inter / uni);
}

HorizontalBox hbb_from_obb(const OrientedBox& q) {
    validate_quad(q.corners, "hbb_from_obb");
    double xmin = q.corners[0].x, xmax = q.corners[0].x;
    double ymin = q.corners[0].y, ymax = q.corners[0].y;
    for (const Point& p : q.corners) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    return HorizontalBox{xmin, ymin, xmax, ymax};
}

double quantize_coord(double v) {
    return static_cast<double>(std::llround(v * 1e4)) / 1e4;
}

namespace {

double normalize_coord(double v, double extent, BoundsMode mode, const char* who) {
    if (!std::isfinite(v)) throw GeometryError(std::string(who) + ": non-finite coordinate");
    if (v < 0.0 || v > extent) {
        if (mode == BoundsMode::strict)
            throw GeometryError(std::string(who) + ": coordinate outside image bounds");
        v = std::min(extent, std::max(0.0, v));
    }
    return quantize_coord(v / extent);
}

}  // namespace

NormalizedBox normalize_box(const HorizontalBox& box, const ImageSize& size, BoundsMode mode) {
    validate_hbb(box, "normalize_box");
    const double w = static_cast<double>(size.width);
    const double h = static_cast<double>(size.height);
    NormalizedBox n;
    n.kind = BoxKind::hbb;
    n.values[0] = normalize_coord(box.xmin, w, mode, "normalize_box");
    n.values[1] = normalize_coord(box.ymin, h, mode, "normalize_box");
    n.values[2] = normalize_coord(box.xmax, w, mode, "normalize_box");
    n.values[3] = normalize_coord(box.ymax, h, mode, "normalize_box");
    return n;
}

NormalizedBox normalize_box(const OrientedBox& box, const ImageSize& size, BoundsMode mode) {
    validate_quad(box.corners, "normalize_box");
    const double w = static_cast<double>(size.width);
    const double h = static_cast<double>(size.height);
    NormalizedBox n;
    n.kind = BoxKind::obb;
    for (int i = 0; i < 4; ++i) {
        n.values[2 * i] = normalize_coord(box.corners[i].x, w, mode, "normalize_box");
        n.values[2 * i + 1] = normalize_coord(box.corners[i].y, h, mode, "normalize_box");
    }
    return n;
}

HorizontalBox denormalize_hbb(const NormalizedBox& nbox, const ImageSize& size) {
    if (nbox.kind != BoxKind::hbb) throw GeometryError("denormalize_hbb: box is not an HBB");
    const double w = static_cast<double>(size.width);
    const double h = static_cast<double>(size.height);
    return HorizontalBox{nbox.values[0] * w, nbox.values[1] * h, nbox.values[2] * w,
                         nbox.values[3] * h};
}

OrientedBox denormalize_obb(const NormalizedBox& nbox, const ImageSize& size) {
    if (nbox.kind != BoxKind::obb) throw GeometryError("denormalize_obb: box is not an OBB");
    const double w = static_cast<double>(size.width);
    const double h = static_cast<double>(size.height);
    OrientedBox q;
    for (int i = 0; i < 4; ++i) {
        q.corners[i] = {nbox.values[2 * i] * w, nbox.values[2 * i + 1] * h};
    }
    return q;
}

}  // namespace rsit::geom
