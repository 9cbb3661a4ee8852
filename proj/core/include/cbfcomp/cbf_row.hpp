#pragma once

#include "cbfcomp/geometry.hpp"

namespace cbfcomp {

/// Affine input condition A u <= b derived from one barrier at one state.
///
/// `alpha_term` is the class-K contribution alpha(-h) already folded into `b`;
/// subtracting it yields the boundary (Nagumo) form hdot <= 0.
struct CbfRow {
    Vector A;
    double b = 0.0;
    double alpha_term = 0.0;

    double nagumo_rhs() const { return b - alpha_term; }
};

}  // namespace cbfcomp
