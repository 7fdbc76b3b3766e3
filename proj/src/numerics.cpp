#include "ibn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ibn/errors.hpp"

namespace ibn {

namespace {

double simpson_recurse(const std::function<double(double)>& f, double a, double b,
                       double fa, double fm, double fb, double whole, double rel_tol,
                       double abs_tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * (rel_tol * std::abs(left + right) + abs_tol)) {
        return left + right + err / 15.0;  // Richardson extrapolation
    }
    if (depth <= 0) {
        throw NumericError("integrate_adaptive: depth limit reached on [" +
                           std::to_string(a) + ", " + std::to_string(b) +
                           "], residual error " + std::to_string(std::abs(err)));
    }
    return simpson_recurse(f, a, m, fa, flm, fm, left, rel_tol, 0.5 * abs_tol, depth - 1) +
           simpson_recurse(f, m, b, fm, frm, fb, right, rel_tol, 0.5 * abs_tol, depth - 1);
}

// Two-sided 95% Student t quantiles for df = 1..30.
const double kT95[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                         2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                         2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                         2.060,  2.056, 2.052, 2.048, 2.045, 2.042};

double t95(int df) {
    if (df < 1) return kT95[0];
    if (df <= 30) return kT95[df - 1];
    return 1.96;
}

// Solve the symmetric positive (semi)definite system G x = h by Gaussian
// elimination with partial pivoting. Sizes here are tiny (NNLS passive sets).
std::vector<double> solve_dense(std::vector<std::vector<double>> G, std::vector<double> h) {
    const std::size_t n = h.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(G[r][col]) > std::abs(G[pivot][col])) pivot = r;
        }
        std::swap(G[col], G[pivot]);
        std::swap(h[col], h[pivot]);
        if (std::abs(G[col][col]) < 1e-300) {
            throw NumericError("solve_dense: singular system");
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = G[r][col] / G[col][col];
            for (std::size_t c = col; c < n; ++c) G[r][c] -= factor * G[col][c];
            h[r] -= factor * h[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = h[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= G[i][c] * x[c];
        x[i] = acc / G[i][i];
    }
    return x;
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol) {
    if (!(b > a)) throw ParameterError("integrate_adaptive: requires b > a");
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_recurse(f, a, b, fa, fm, fb, whole, rel_tol, abs_tol, 60);
}

LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ParameterError("ols_fit: size mismatch");
    const std::size_t n = x.size();
    std::vector<double> distinct = x;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) throw ParameterError("ols_fit: need >= 3 distinct x values");

    const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
    }
    if (sxx < 1e-30) throw ParameterError("ols_fit: degenerate x spread");

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = fit.slope * x[i] + fit.intercept;
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    fit.r_squared = ss_tot < 1e-30 ? 1.0 : std::max(0.0, 1.0 - ss_res / ss_tot);

    if (n > 2) {
        const double se = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
        fit.half_width = t95(static_cast<int>(n) - 2) * se;
    }
    return fit;
}

std::vector<double> nnls(const std::vector<std::vector<double>>& A,
                         const std::vector<double>& b) {
    const std::size_t rows = A.size();
    if (rows == 0 || rows != b.size()) throw ParameterError("nnls: bad shapes");
    const std::size_t cols = A[0].size();

    // Normal-equation pieces: G = A^T A, h = A^T b.
    std::vector<std::vector<double>> G(cols, std::vector<double>(cols, 0.0));
    std::vector<double> h(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < cols; ++i) {
            h[i] += A[r][i] * b[r];
            for (std::size_t j = i; j < cols; ++j) G[i][j] += A[r][i] * A[r][j];
        }
    }
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = 0; j < i; ++j) G[i][j] = G[j][i];
    }

    std::vector<bool> passive(cols, false);
    std::vector<double> x(cols, 0.0);
    const double tol = 1e-12 * (1.0 + std::abs(*std::max_element(
                                    h.begin(), h.end(),
                                    [](double u, double v) { return std::abs(u) < std::abs(v); })));

    auto solve_passive = [&](std::vector<double>& z) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < cols; ++i) {
            if (passive[i]) idx.push_back(i);
        }
        std::vector<std::vector<double>> Gs(idx.size(), std::vector<double>(idx.size()));
        std::vector<double> hs(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            hs[i] = h[idx[i]];
            for (std::size_t j = 0; j < idx.size(); ++j) Gs[i][j] = G[idx[i]][idx[j]];
        }
        const std::vector<double> sol = solve_dense(Gs, hs);
        z.assign(cols, 0.0);
        for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = sol[i];
    };

    for (std::size_t outer = 0; outer < 4 * cols + 16; ++outer) {
        // Gradient of 0.5||Ax - b||^2 is G x - h; descent direction is h - G x.
        std::vector<double> grad(cols, 0.0);
        for (std::size_t i = 0; i < cols; ++i) {
            double gi = h[i];
            for (std::size_t j = 0; j < cols; ++j) gi -= G[i][j] * x[j];
            grad[i] = gi;
        }
        std::size_t best = cols;
        double best_val = tol;
        for (std::size_t i = 0; i < cols; ++i) {
            if (!passive[i] && grad[i] > best_val) {
                best_val = grad[i];
                best = i;
            }
        }
        if (best == cols) break;  // KKT satisfied
        passive[best] = true;

        std::vector<double> z;
        solve_passive(z);
        for (std::size_t inner = 0; inner < 4 * cols + 16; ++inner) {
            bool feasible = true;
            for (std::size_t i = 0; i < cols; ++i) {
                if (passive[i] && z[i] <= 0.0) feasible = false;
            }
            if (feasible) break;
            // Step from x toward z, stopping at the first variable hitting zero.
            double alpha = 1.0;
            for (std::size_t i = 0; i < cols; ++i) {
                if (passive[i] && z[i] <= 0.0) {
                    alpha = std::min(alpha, x[i] / (x[i] - z[i]));
                }
            }
            for (std::size_t i = 0; i < cols; ++i) {
                if (passive[i]) x[i] += alpha * (z[i] - x[i]);
                if (passive[i] && x[i] <= 1e-14) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            solve_passive(z);
        }
        x = z;
    }
    return x;
}

UnionFind::UnionFind(std::size_t n) : parent(n), rank(n, 0) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t a) {
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

void UnionFind::unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank[a] < rank[b]) std::swap(a, b);
    parent[b] = a;
    if (rank[a] == rank[b]) ++rank[a];
}

bool UnionFind::same(std::size_t a, std::size_t b) { return find(a) == find(b); }

double median(std::vector<double> values) {
    if (values.empty()) throw ParameterError("median: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace ibn
