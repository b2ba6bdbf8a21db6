#pragma once

#include <cmath>

#include "gmn/rng.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), filled row by row.
inline Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

} // namespace gmn
