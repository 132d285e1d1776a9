#pragma once

#include <functional>
#include <string>
#include <vector>

namespace atomlink::fitting {

// residuals(p) returns the (already weighted) residual vector r_i(p);
// the fitter minimizes sum r_i^2.
using ResidualFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct FitOptions {
    int max_iterations = 500;
    double relative_cost_tol = 1e-10;
    double initial_lambda = 1e-3;
    // when residuals are pre-scaled by 1/sigma_i the covariance is (J^T J)^-1;
    // otherwise it is scaled by the reduced chi-square
    bool residuals_are_weighted = false;
};

struct FitResult {
    std::vector<double> params;
    std::vector<double> std_errors;
    double cost = 0.0;          // sum of squared residuals at the solution
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;     // non-convergence report: final cost + parameter trace
};

// Damped Gauss-Newton (Levenberg-Marquardt) with a forward-difference Jacobian.
FitResult levenberg_marquardt(const ResidualFn& residuals,
                              std::vector<double> initial,
                              const FitOptions& options = {});

// Solves A x = b for a small dense system by Gaussian elimination with
// partial pivoting. A is row-major n x n.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n);

} // namespace atomlink::fitting
