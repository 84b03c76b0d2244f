#include "psf4d/view_map.hpp"

#include <cmath>
#include <string>

#include "psf4d/error.hpp"

namespace psf4d {

void ViewGeometry::validate() const {
    if (maps.empty()) throw ShapeError("view geometry has no views");
    if (view_height == 0 || view_width == 0 || canonical_height == 0 || canonical_width == 0) {
        throw ShapeError("view geometry has a zero extent");
    }
    for (std::size_t k = 0; k < maps.size(); ++k) {
        const ViewMap& m = maps[k];
        if (m.row_offset + view_height > canonical_height ||
            m.col_offset + view_width > canonical_width) {
            throw ShapeError("view " + std::to_string(k) + " crop leaves the canonical frame");
        }
        if (!(std::isfinite(m.gain) && m.gain != 0.0)) {
            throw FitError("view " + std::to_string(k) + " map has singular gain");
        }
    }
}

std::vector<std::size_t> ViewGeometry::coverage() const {
    std::vector<std::size_t> cov(canonical_height * canonical_width, 0);
    for (const ViewMap& m : maps) {
        for (std::size_t y = 0; y < view_height; ++y) {
            for (std::size_t x = 0; x < view_width; ++x) {
                ++cov[(y + m.row_offset) * canonical_width + x + m.col_offset];
            }
        }
    }
    return cov;
}

}  // namespace psf4d
