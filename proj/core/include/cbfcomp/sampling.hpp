#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cbfcomp/geometry.hpp"

namespace cbfcomp {

using Rng = std::mt19937_64;

/// Independent stream for (seed, index); results do not depend on the order
/// in which streams are consumed.
Rng stream_rng(std::uint64_t seed, std::uint64_t index);

Vector gaussian_vector(Rng& rng, int dim);

/// Unit vector uniformly distributed on the (dim-1)-sphere.
Vector random_unit_vector(Rng& rng, int dim);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// diagonal sign of R folded into Q).
Matrix random_orthogonal(Rng& rng, int dim);

/// Haar-random unit quaternion (scalar-last); equivalent to a uniform point on S^3.
Vector random_unit_quaternion(Rng& rng);

/// Maps three numbers in [0,1) to a unit quaternion (Shoemake's subgroup
/// algorithm). Uniform inputs give Haar-distributed outputs.
Vector quaternion_from_unit_cube(double u1, double u2, double u3);

/// Point index+1 of the Halton sequence in `dim` dimensions; index 0 is (1/2, 1/3, ...).
std::vector<double> halton_point(std::uint64_t index, int dim);

/// n nearly-uniform unit vectors on S^2 (golden-angle spiral).
std::vector<Vector> fibonacci_sphere(int n);

}  // namespace cbfcomp
