#pragma once
// Independent reference values for the test suite.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double normal_pdf(double z, double var) { return std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * M_PI * var); }

/// E^x |B_{t ^ H} - y| for H the exit time of (a, b), by the image series
/// for the killed density plus the absorbed mass at the two ends.
inline double killed_bm_abs(double a, double b, double x, double y, double t) {
    const double L = b - a;
    auto density = [&](double z) {
        double p = 0.0;
        for (int n = -20; n <= 20; ++n)
            p += normal_pdf(z - x + 2.0 * n * L, t) - normal_pdf(z + x - 2.0 * a + 2.0 * n * L, t);
        return p;
    };
    const int m = 20000;
    const double h = L / m;
    double mass = 0.0, inside = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double z = a + h * i;
        const double w = (i == 0 || i == m) ? 0.5 : 1.0;
        const double p = density(z);
        mass += w * p * h;
        inside += w * p * std::abs(z - y) * h;
    }
    // exit from (a, b) at b has probability (x - a) / L overall; split the absorbed mass by
    // the optional-stopping identity E[B_{t ^ H}] = x
    double mean_inside = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double z = a + h * i;
        const double w = (i == 0 || i == m) ? 0.5 : 1.0;
        mean_inside += w * density(z) * z * h;
    }
    const double absorbed = 1.0 - mass;
    const double pb = absorbed > 0.0 ? (x - mean_inside - a * absorbed) / L : 0.0;
    const double pa = absorbed - pb;
    return inside + pa * std::abs(a - y) + pb * std::abs(b - y);
}

/// E^x |X_{t ^ H} - y| for dX = eta(X) dW absorbed at a and b, by Crank-Nicolson
/// (Rannacher start) on a fine uniform grid.
inline double absorbed_abs_pde(const std::function<double(double)>& eta, double a, double b, double x, double y,
                               double t, int nz = 2001, int nt = 4000) {
    const double h = (b - a) / (nz - 1), dt = t / nt;
    std::vector<double> z(nz), v(nz), s(nz);
    for (int i = 0; i < nz; ++i) {
        z[i] = a + h * i;
        v[i] = std::abs(z[i] - y);
        const double e = eta(z[i]);
        s[i] = 0.5 * e * e / (h * h);
    }
    std::vector<double> lo(nz), di(nz), up(nz), rhs(nz), cp(nz), dp(nz);
    for (int n = 0; n < nt; ++n) {
        const double th = n < 4 ? 1.0 : 0.5;
        for (int i = 1; i + 1 < nz; ++i) {
            const double lap = v[i - 1] - 2.0 * v[i] + v[i + 1];
            rhs[i] = v[i] + (1.0 - th) * dt * s[i] * lap;
            lo[i] = -th * dt * s[i];
            up[i] = -th * dt * s[i];
            di[i] = 1.0 + 2.0 * th * dt * s[i];
        }
        lo[0] = up[0] = 0.0;
        di[0] = 1.0;
        rhs[0] = v[0];
        lo[nz - 1] = up[nz - 1] = 0.0;
        di[nz - 1] = 1.0;
        rhs[nz - 1] = v[nz - 1];
        cp[0] = up[0] / di[0];
        dp[0] = rhs[0] / di[0];
        for (int i = 1; i < nz; ++i) {
            const double den = di[i] - lo[i] * cp[i - 1];
            cp[i] = up[i] / den;
            dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / den;
        }
        v[nz - 1] = dp[nz - 1];
        for (int i = nz - 2; i >= 0; --i) v[i] = dp[i] - cp[i] * v[i + 1];
    }
    const int i = static_cast<int>(std::floor((x - a) / h));
    const double f = (x - z[i]) / h;
    return (1.0 - f) * v[i] + f * v[std::min(i + 1, nz - 1)];
}

/// Brownian exit of (a, b) from z: E[H], E[H^2].
inline double exit_mean(double a, double b, double z) { return (z - a) * (b - z); }

inline double exit_second_moment(double a, double b, double z) {
    const double L = b - a, y = z - a, yr = b - z;
    auto on_b = [L](double u) { return -2.0 * L * u * u * u / 9.0 + std::pow(u, 5) / (15.0 * L) + 7.0 * L * L * L * u / 45.0; };
    return on_b(y) + on_b(yr);
}

}  // namespace oracle
