#pragma once

#include "ksos/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ksos {

// Gauss-Legendre nodes and weights on [-1, 1].
// Newton iteration on P_n with the asymptotic cosine initial guess; nodes are
// accurate to machine precision for n up to a few thousand.
struct GaussLegendreRule {
    Vector nodes;
    Vector weights;

    explicit GaussLegendreRule(int n) : nodes(n), weights(n) {
        require(n >= 1, "Gauss-Legendre rule needs n >= 1");
        const double pi = 3.14159265358979323846;
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (x * p0 - p1) / (x * x - 1.0);
                double dx = p0 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            nodes(i) = -x;
            nodes(n - 1 - i) = x;
            double w = 2.0 / ((1.0 - x * x) * pp * pp);
            weights(i) = w;
            weights(n - 1 - i) = w;
        }
        if (n % 2 == 1) nodes(n / 2) = 0.0;
    }
};

// Panelled 1-D rule on [lo, hi]: the interval is split at the interior
// breakpoints and a Gauss-Legendre rule is mapped onto each panel. Splitting
// at kernel centers keeps the integrand smooth per panel (the Laplace kernel
// has a kink at each center), preserving spectral convergence.
struct PanelRule {
    Vector nodes;
    Vector weights;

    PanelRule(double lo, double hi, std::vector<double> breakpoints,
              int total_nodes) {
        require(hi > lo, "panel rule: empty interval");
        require(total_nodes >= 2, "panel rule: need at least 2 nodes");
        std::vector<double> edges;
        edges.push_back(lo);
        std::sort(breakpoints.begin(), breakpoints.end());
        for (double b : breakpoints) {
            if (b > lo && b < hi && (edges.empty() || b > edges.back() + 1e-14))
                edges.push_back(b);
        }
        edges.push_back(hi);

        const std::size_t panels = edges.size() - 1;
        const double total_len = hi - lo;
        std::vector<int> counts(panels);
        int assigned = 0;
        for (std::size_t p = 0; p < panels; ++p) {
            double len = edges[p + 1] - edges[p];
            int c = std::max(8, int(std::lround(total_nodes * len / total_len)));
            counts[p] = c;
            assigned += c;
        }
        (void)assigned;

        std::vector<double> xs, ws;
        for (std::size_t p = 0; p < panels; ++p) {
            GaussLegendreRule gl(counts[p]);
            double a = edges[p], b = edges[p + 1];
            double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (int i = 0; i < counts[p]; ++i) {
                xs.push_back(mid + half * gl.nodes(i));
                ws.push_back(half * gl.weights(i));
            }
        }
        nodes = Eigen::Map<Vector>(xs.data(), Eigen::Index(xs.size()));
        weights = Eigen::Map<Vector>(ws.data(), Eigen::Index(ws.size()));
    }
};

}  // namespace ksos
