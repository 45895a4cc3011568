#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ripc {

namespace quad_detail {

constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;

inline double normal_pdf(double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); }

// Gauss-Legendre nodes and weights on [-1, 1], Newton on the recurrence.
inline void gauss_legendre(int p, std::vector<double>& t, std::vector<double>& w) {
    t.assign(p, 0.0);
    w.assign(p, 0.0);
    int m = (p + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (p + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= p; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = p * (z * p1 - p2) / (z * z - 1.0);
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        t[i] = -z;
        t[p - 1 - i] = z;
        w[i] = w[p - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

// Gauss-Hermite nodes (weight e^{-t^2}), Newton on the normalized recurrence.
inline void gauss_hermite(int n, std::vector<double>& t, std::vector<double>& w) {
    t.assign(n, 0.0);
    w.assign(n, 0.0);
    const double pim4 = 0.7511255444649424828587030; // pi^{-1/4}
    int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(n, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * t[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * t[1];
        else
            z = 2.0 * z - t[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        t[i] = z; // descending positive half
        t[n - 1 - i] = -z;
        w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
    }
}

} // namespace quad_detail

/**
 * Abscissae and weights for standard-normal expectations,
 * E[g(Z)] ~ sum_i w_i g(z_i) with Z ~ N(0,1).
 *
 * Two constructions: classic Gauss-Hermite, exact for polynomials but slow
 * to converge across kinks, and a composite Gauss-Legendre panel rule whose
 * panel edges can be aligned with the known kink set of the integrand. Panel
 * rules keep their edges so evaluators can split the single panel containing
 * a moving kink.
 */
struct QuadratureRule {
    std::vector<double> nodes;   // ascending abscissae
    std::vector<double> weights; // positive, sum 1
    std::vector<double> edges; // panel edges (size panels+1); empty for point rules
    int panel_pts = 0;         // Gauss-Legendre points per panel; 0 for point rules

    int order() const { return static_cast<int>(nodes.size()); }

    static QuadratureRule gauss_hermite(int n) {
        if (n < 1) throw std::invalid_argument("QuadratureRule: order must be positive");
        std::vector<double> t, wh;
        quad_detail::gauss_hermite(n, t, wh);
        QuadratureRule r;
        r.nodes.resize(n);
        r.weights.resize(n);
        // z = sqrt(2) t maps weight e^{-t^2} onto the N(0,1) density.
        std::vector<size_t> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return t[a] < t[b]; });
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            r.nodes[i] = std::sqrt(2.0) * t[idx[i]];
            r.weights[i] = wh[idx[i]];
            wsum += r.weights[i];
        }
        for (double& wi : r.weights) wi /= wsum;
        return r;
    }

    /**
     * Composite Gauss-Legendre rule over [-half_width, half_width] with the
     * normal density folded into the weights. Panel edges are the union of a
     * uniform lattice of spacing base and the supplied kink locations, so
     * every panel integrand is smooth whenever the integrand's kinks are a
     * subset of `kinks`.
     */
    static QuadratureRule kink_aligned(const std::vector<double>& kinks, double half_width = 12.0,
                                       double base = 0.25, int pts = 8) {
        if (!(half_width > 0.0) || !(base > 0.0) || pts < 2)
            throw std::invalid_argument("QuadratureRule: bad panel parameters");
        std::vector<double> bp;
        int nlat = static_cast<int>(std::ceil(2.0 * half_width / base));
        bp.reserve(nlat + kinks.size() + 2);
        for (int i = 0; i <= nlat; ++i)
            bp.push_back(-half_width + 2.0 * half_width * i / nlat);
        for (double k : kinks)
            if (k > -half_width && k < half_width) bp.push_back(k);
        std::sort(bp.begin(), bp.end());
        bp.erase(std::unique(bp.begin(), bp.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                 bp.end());

        std::vector<double> t, gw;
        quad_detail::gauss_legendre(pts, t, gw);
        QuadratureRule r;
        r.edges = bp;
        r.panel_pts = pts;
        size_t panels = bp.size() - 1;
        r.nodes.reserve(panels * pts);
        r.weights.reserve(panels * pts);
        for (size_t k = 0; k < panels; ++k) {
            double mid = 0.5 * (bp[k] + bp[k + 1]);
            double half = 0.5 * (bp[k + 1] - bp[k]);
            for (int j = 0; j < pts; ++j) {
                double zz = mid + half * t[j];
                r.nodes.push_back(zz);
                r.weights.push_back(half * gw[j] * quad_detail::normal_pdf(zz));
            }
        }
        // Truncation mass beyond half_width >= 10 is below 1e-22, so the raw
        // weights already sum to 1 at double precision; normalize anyway.
        double wsum = 0.0;
        for (double wi : r.weights) wsum += wi;
        for (double& wi : r.weights) wi /= wsum;
        return r;
    }

    // E[g(Z)] for Z ~ N(0,1).
    template <class F>
    double expect(F&& g) const {
        double s = 0.0;
        for (size_t i = 0; i < nodes.size(); ++i) s += weights[i] * g(nodes[i]);
        return s;
    }
};

} // namespace ripc
