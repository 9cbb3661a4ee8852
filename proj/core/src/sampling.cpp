#include "cbfcomp/sampling.hpp"

#include <cmath>
#include <numbers>

namespace cbfcomp {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

Rng stream_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(index + 1)),
                      splitmix64(index)};
    return Rng(seq);
}

Vector gaussian_vector(Rng& rng, int dim)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = n(rng);
    return v;
}

Vector random_unit_vector(Rng& rng, int dim)
{
    for (;;) {
        Vector v = gaussian_vector(rng, dim);
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

Matrix random_orthogonal(Rng& rng, int dim)
{
    Matrix g(dim, dim);
    for (int j = 0; j < dim; ++j) g.col(j) = gaussian_vector(rng, dim);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

Vector random_unit_quaternion(Rng& rng)
{
    return random_unit_vector(rng, 4);
}

Vector quaternion_from_unit_cube(double u1, double u2, double u3)
{
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2;
    const double t3 = 2.0 * std::numbers::pi * u3;
    Vector q(4);
    q << a * std::sin(t2), a * std::cos(t2), b * std::sin(t3), b * std::cos(t3);
    return q;
}

std::vector<double> halton_point(std::uint64_t index, int dim)
{
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
        const int base = kPrimes[d % 16];
        double f = 1.0;
        double r = 0.0;
        std::uint64_t i = index + 1;
        while (i > 0) {
            f /= base;
            r += f * static_cast<double>(i % base);
            i /= base;
        }
        out[static_cast<std::size_t>(d)] = r;
    }
    return out;
}

std::vector<Vector> fibonacci_sphere(int n)
{
    std::vector<Vector> pts;
    pts.reserve(static_cast<std::size_t>(n));
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        Vector p(3);
        p << r * std::cos(phi), r * std::sin(phi), z;
        pts.push_back(p);
    }
    return pts;
}

}  // namespace cbfcomp
