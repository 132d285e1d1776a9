#include "atomlink/fitting.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace atomlink::fitting {

std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n) {
    if (a.size() != n * n || b.size() != n) throw std::invalid_argument("solve_dense: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        if (std::fabs(a[pivot * n + col]) < 1e-300)
            throw std::runtime_error("solve_dense: singular system");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return x;
}

namespace {

double cost_of(const std::vector<double>& r) {
    double c = 0.0;
    for (double v : r) c += v * v;
    return c;
}

// forward-difference Jacobian, row-major m x p
std::vector<double> jacobian(const ResidualFn& fn, const std::vector<double>& p,
                             const std::vector<double>& r0) {
    const std::size_t np = p.size(), m = r0.size();
    std::vector<double> jac(m * np);
    std::vector<double> pp = p;
    for (std::size_t j = 0; j < np; ++j) {
        const double h = std::max(1e-5 * std::fabs(p[j]), 1e-7);
        pp[j] = p[j] + h;
        const std::vector<double> r1 = fn(pp);
        pp[j] = p[j];
        for (std::size_t i = 0; i < m; ++i) jac[i * np + j] = (r1[i] - r0[i]) / h;
    }
    return jac;
}

} // namespace

FitResult levenberg_marquardt(const ResidualFn& residuals, std::vector<double> p,
                              const FitOptions& options) {
    FitResult out;
    const std::size_t np = p.size();
    std::vector<double> r = residuals(p);
    double cost = cost_of(r);
    double lambda = options.initial_lambda;
    std::vector<std::vector<double>> trace;
    trace.push_back(p);

    int iter = 0;
    bool converged = false;
    std::vector<double> jac;
    std::vector<double> cost_history;
    for (; iter < options.max_iterations; ++iter) {
        jac = jacobian(residuals, p, r);
        const std::size_t m = r.size();

        // normal equations: (J^T J + lambda * diag(J^T J)) d = -J^T r
        std::vector<double> jtj(np * np, 0.0), jtr(np, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t a = 0; a < np; ++a) {
                jtr[a] += jac[i * np + a] * r[i];
                for (std::size_t b = 0; b <= a; ++b)
                    jtj[a * np + b] += jac[i * np + a] * jac[i * np + b];
            }
        }
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = a + 1; b < np; ++b) jtj[a * np + b] = jtj[b * np + a];

        // damping floor tied to the largest curvature so structurally flat
        // directions (zero Jacobian columns) still get a finite damped step
        double dmax = 0.0;
        for (std::size_t a = 0; a < np; ++a) dmax = std::max(dmax, jtj[a * np + a]);
        const double dfloor = std::max(1e-6 * dmax, 1e-300);

        bool stepped = false;
        constexpr double kLambdaMax = 1e8;
        for (int attempt = 0; attempt < 14 && lambda <= kLambdaMax; ++attempt) {
            std::vector<double> lhs = jtj;
            for (std::size_t a = 0; a < np; ++a) {
                const double d = jtj[a * np + a];
                lhs[a * np + a] = d + lambda * std::max(d, dfloor);
            }
            std::vector<double> rhs(np);
            for (std::size_t a = 0; a < np; ++a) rhs[a] = -jtr[a];

            std::vector<double> step;
            try {
                step = solve_dense(lhs, rhs, np);
            } catch (const std::runtime_error&) {
                lambda *= 10.0;
                continue;
            }

            std::vector<double> pn(np);
            for (std::size_t a = 0; a < np; ++a) pn[a] = p[a] + step[a];
            std::vector<double> rn = residuals(pn);
            const double cn = cost_of(rn);
            if (std::isfinite(cn) && cn <= cost) {
                const double rel = (cost - cn) / std::max(cost, 1e-300);
                p = std::move(pn);
                r = std::move(rn);
                cost = cn;
                lambda = std::max(lambda / 5.0, 1e-12);
                stepped = true;
                // a plateau only counts as convergence once the damping is
                // small, otherwise tiny damped steps fake a minimum
                if (rel < options.relative_cost_tol && lambda <= 1e-2) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        trace.push_back(p);
        if (trace.size() > 6) trace.erase(trace.begin());
        if (converged) break;

        // stagnation: derivative noise at the bottom makes accept/reject
        // alternate and keeps lambda up; a flat cost over several iterations
        // is convergence all the same
        cost_history.push_back(cost);
        if (cost_history.size() >= 8) {
            const double past = cost_history[cost_history.size() - 8];
            if ((past - cost) / std::max(past, 1e-300) < 8.0 * options.relative_cost_tol) {
                converged = true;
                break;
            }
        }
        if (!stepped) {
            converged = true; // no descent direction at any damping: stationary
            break;
        }
    }

    out.params = p;
    out.cost = cost;
    out.iterations = iter + 1;
    out.converged = converged;

    // covariance from the Jacobian at the solution
    jac = jacobian(residuals, p, r);
    const std::size_t m = r.size();
    std::vector<double> jtj(np * np, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b)
                jtj[a * np + b] += jac[i * np + a] * jac[i * np + b];

    out.std_errors.assign(np, 0.0);
    const double dof = static_cast<double>(m > np ? m - np : 1);
    const double scale = options.residuals_are_weighted ? 1.0 : cost / dof;
    try {
        // invert J^T J column by column
        for (std::size_t a = 0; a < np; ++a) {
            std::vector<double> e(np, 0.0);
            e[a] = 1.0;
            const std::vector<double> col = solve_dense(jtj, e, np);
            out.std_errors[a] = std::sqrt(std::max(0.0, scale * col[a]));
        }
    } catch (const std::runtime_error&) {
        // singular at solution: leave errors at zero
    }

    if (!converged) {
        std::ostringstream os;
        os << "fit did not converge after " << out.iterations
           << " iterations, final cost " << cost << "; recent parameters:";
        for (const auto& tp : trace) {
            os << " [";
            for (std::size_t a = 0; a < tp.size(); ++a) os << (a ? ", " : "") << tp[a];
            os << "]";
        }
        out.diagnostic = os.str();
    }
    return out;
}

} // namespace atomlink::fitting
