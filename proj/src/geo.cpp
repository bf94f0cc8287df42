#include "canopydw/geo.hpp"

#include <cmath>

namespace canopydw {

bool Geotransform::invertible() const noexcept {
    const double det = determinant();
    return std::isfinite(det) && det != 0.0;
}

GeoPoint pixel_to_geo(const Geotransform &gt, double col, double row) noexcept {
    return {gt.origin_x + col * gt.a + row * gt.b, gt.origin_y + col * gt.d + row * gt.e};
}

PixelPoint geo_to_pixel(const Geotransform &gt, double x, double y) noexcept {
    const double dx = x - gt.origin_x;
    const double dy = y - gt.origin_y;
    const double det = gt.determinant();
    return {(gt.e * dx - gt.b * dy) / det, (gt.a * dy - gt.d * dx) / det};
}

} // namespace canopydw
