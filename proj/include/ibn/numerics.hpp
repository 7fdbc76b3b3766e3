#ifndef IBN_NUMERICS_HPP_
#define IBN_NUMERICS_HPP_

#include <cstddef>
#include <functional>
#include <vector>

namespace ibn {

// Adaptive Simpson quadrature of f over [a, b].
// Converged when the local Richardson error estimate satisfies
// |err| <= 15 * (rel_tol * |panel| + abs_tol_share), with abs_tol split across
// subdivisions. Throws NumericError when the recursion depth limit is hit.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double half_width = 0.0;  // 95% confidence half-width of the slope
};

// Ordinary least squares y = slope*x + intercept with the standard slope-error
// formula; the 95% half-width uses Student t quantiles (normal beyond df 30).
// Requires >= 3 distinct x values.
LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

// Non-negative least squares min ||A x - b||, x >= 0 (Lawson-Hanson active set
// on the normal equations; intended for small dense systems).
std::vector<double> nnls(const std::vector<std::vector<double>>& A,
                         const std::vector<double>& b);

struct UnionFind {
    explicit UnionFind(std::size_t n);
    std::size_t find(std::size_t a);
    void unite(std::size_t a, std::size_t b);
    bool same(std::size_t a, std::size_t b);

    std::vector<std::size_t> parent;
    std::vector<std::size_t> rank;
};

// Median of an unsorted sample (averages the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace ibn

#endif  // IBN_NUMERICS_HPP_
