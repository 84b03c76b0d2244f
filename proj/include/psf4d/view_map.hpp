#pragma once

#include <cstddef>
#include <vector>

namespace psf4d {

/// Linear canonical -> view observation map: a crop of the canonical frame
/// at (row_offset, col_offset) with the view's height x width, times `gain`.
///
///   view(y, x) = gain * canonical(y + row_offset, x + col_offset)
struct ViewMap {
    std::size_t row_offset = 0;
    std::size_t col_offset = 0;
    double gain = 1.0;

    friend bool operator==(const ViewMap&, const ViewMap&) = default;
};

/// Canonical and per-view spatial extents shared by every map of a scene.
struct ViewGeometry {
    std::size_t canonical_height = 0;
    std::size_t canonical_width = 0;
    std::size_t view_height = 0;
    std::size_t view_width = 0;
    std::vector<ViewMap> maps;

    std::size_t views() const noexcept { return maps.size(); }

    /// Throws ShapeError when a crop leaves the canonical frame, FitError when
    /// a gain is zero or non-finite.
    void validate() const;

    /// Number of views covering each canonical pixel, row-major Hc x Wc.
    std::vector<std::size_t> coverage() const;
};

}  // namespace psf4d
