#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cbfcomp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when operands of a linear-algebra routine disagree in shape.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

void require_same_dimension(const Vector& a, const Vector& b, const char* context);

struct Norms {
    double one = 0.0;
    double two = 0.0;
    double inf = 0.0;
};

Norms norms(const Vector& u);

/// Orthonormal basis of span(vectors), modified Gram-Schmidt with one
/// re-orthogonalization pass. A vector whose residual 2-norm falls below
/// `tol * max_input_norm` is treated as dependent and dropped.
std::vector<Vector> orthonormalize(std::span<const Vector> vectors, double tol = 1e-10);

/// u - proj_span(basis)(u). The basis may be empty or linearly dependent.
Vector gram_schmidt_residual(const Vector& u, std::span<const Vector> basis);

/// Projection of u onto span(basis).
Vector project_onto_span(const Vector& u, std::span<const Vector> basis);

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace cbfcomp
