#pragma once

#include <utility>

namespace canopydw {

/// Six-parameter affine map from pixel (column, row) to projected (x, y):
///
///     x = origin_x + col * a + row * b
///     y = origin_y + col * d + row * e
struct Geotransform {
    double origin_x = 0;
    double origin_y = 0;
    double a = 1;
    double b = 0;
    double d = 0;
    double e = 1;

    double determinant() const noexcept { return a * e - b * d; }
    bool invertible() const noexcept;

    friend bool operator==(const Geotransform &, const Geotransform &) = default;
};

struct GeoPoint {
    double x = 0;
    double y = 0;

    friend bool operator==(const GeoPoint &, const GeoPoint &) = default;
};

struct PixelPoint {
    double col = 0;
    double row = 0;
};

GeoPoint pixel_to_geo(const Geotransform &gt, double col, double row) noexcept;

/// Inverse of pixel_to_geo. The transform must be invertible.
PixelPoint geo_to_pixel(const Geotransform &gt, double x, double y) noexcept;

} // namespace canopydw
