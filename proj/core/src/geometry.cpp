#include "cbfcomp/geometry.hpp"

#include <algorithm>

namespace cbfcomp {

void require_same_dimension(const Vector& a, const Vector& b, const char* context)
{
    if (a.size() != b.size()) {
        throw DimensionError(std::string(context) + ": dimension mismatch (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

Norms norms(const Vector& u)
{
    if (u.size() == 0) return {};
    return {u.lpNorm<1>(), u.norm(), u.lpNorm<Eigen::Infinity>()};
}

std::vector<Vector> orthonormalize(std::span<const Vector> vectors, double tol)
{
    std::vector<Vector> basis;
    if (vectors.empty()) return basis;

    double scale = 0.0;
    for (const auto& v : vectors) {
        require_same_dimension(v, vectors.front(), "orthonormalize");
        scale = std::max(scale, v.norm());
    }
    if (scale == 0.0) return basis;

    for (const auto& v : vectors) {
        Vector r = v;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) r -= r.dot(b) * b;
        }
        const double n = r.norm();
        if (n < tol * scale) continue;
        basis.push_back(r / n);
    }
    return basis;
}

Vector project_onto_span(const Vector& u, std::span<const Vector> basis)
{
    for (const auto& b : basis) require_same_dimension(u, b, "project_onto_span");
    const auto onb = orthonormalize(basis);
    Vector p = Vector::Zero(u.size());
    for (const auto& b : onb) p += u.dot(b) * b;
    return p;
}

Vector gram_schmidt_residual(const Vector& u, std::span<const Vector> basis)
{
    for (const auto& b : basis) require_same_dimension(u, b, "gram_schmidt_residual");
    if (basis.empty()) return u;
    const auto onb = orthonormalize(basis);
    Vector r = u;
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : onb) r -= r.dot(b) * b;
    }
    return r;
}

}  // namespace cbfcomp
