#include "cimcs/cdp.hpp"

#include "cimcs/error.hpp"

#include <algorithm>
#include <cmath>

namespace cimcs {

namespace {

void validate(const QuboProblem& problem, const Support& sigma, const Vector& R0, double tol, int max_iter) {
    const Index n = problem.size();
    require(sigma.size() == n && R0.size() == n, "CDP: length mismatch");
    require(std::isfinite(tol) && tol > 0.0, "CDP: tol must be positive");
    require(max_iter >= 0, "CDP: max_iter must be >= 0");
    require(R0.allFinite(), "CDP: non-finite initial signal");
    const Vector& d = problem.col_norms();
    for (Index r = 0; r < n; ++r)
        if (sigma(r) && !(d(r) > 0.0)) throw InvalidArgument("CDP: zero column norm on the support");
}

// Residual 𝕳 − D R on the support, zero elsewhere. R must already vanish off σ.
void support_residual(const QuboProblem& problem, const Vector& mask, const Vector& R, Vector& work, Vector& res) {
    problem.coupling->apply_offdiag(R, work);
    res = (problem.z - work - problem.col_norms().cwiseProduct(R)).cwiseProduct(mask);
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Largest eigenvalue of D^{-1/2} G_σ D^{-1/2} via power iteration.
double scaled_lambda_max(const QuboProblem& problem, const Vector& mask, const Vector& inv_sqrt_d) {
    Vector v = mask;
    double norm = v.norm();
    if (norm == 0.0) return 1.0;
    v /= norm;
    Vector w, gv;
    double lambda = 1.0;
    for (int it = 0; it < 100; ++it) {
        w = inv_sqrt_d.cwiseProduct(v);
        problem.coupling->apply_offdiag(w, gv);
        gv = (gv + problem.col_norms().cwiseProduct(w)).cwiseProduct(inv_sqrt_d).cwiseProduct(mask);
        const double next = v.dot(gv);
        norm = gv.norm();
        if (norm == 0.0) break;
        v = gv / norm;
        if (std::abs(next - lambda) <= 1e-6 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

} // namespace

CdpResult solve_signal_jacobi(const QuboProblem& problem, const Support& sigma, const Vector& R0, double tol,
                              int max_iter) {
    validate(problem, sigma, R0, tol, max_iter);
    const Index n = problem.size();
    const Vector mask = as_real(sigma);
    CdpResult out;
    out.R = R0.cwiseProduct(mask);
    if (popcount(sigma) == 0) {
        out.converged = true;
        return out;
    }

    const Vector& d = problem.col_norms();
    Vector inv_d = Vector::Zero(n), inv_sqrt_d = Vector::Zero(n);
    for (Index r = 0; r < n; ++r)
        if (sigma(r)) {
            inv_d(r) = 1.0 / d(r);
            inv_sqrt_d(r) = 1.0 / std::sqrt(d(r));
        }
    const double omega = std::min(1.0, 1.0 / scaled_lambda_max(problem, mask, inv_sqrt_d));

    Vector work, res;
    support_residual(problem, mask, out.R, work, res);
    out.residual = max_abs(res);
    int rising = 0;
    while (out.residual > tol && out.iterations < max_iter) {
        out.R += omega * inv_d.cwiseProduct(res);
        ++out.iterations;
        const double previous = out.residual;
        support_residual(problem, mask, out.R, work, res);
        out.residual = max_abs(res);
        if (!std::isfinite(out.residual)) break;
        rising = out.residual > previous ? rising + 1 : 0;
        if (rising >= kJacobiDivergenceWindow) break;
    }
    out.converged = std::isfinite(out.residual) && out.residual <= tol;
    return out;
}

CdpResult solve_signal_cgd(const QuboProblem& problem, const Support& sigma, const Vector& R0, double tol,
                           int max_iter) {
    validate(problem, sigma, R0, tol, max_iter);
    const Vector mask = as_real(sigma);
    CdpResult out;
    out.R = R0.cwiseProduct(mask);
    if (popcount(sigma) == 0) {
        out.converged = true;
        return out;
    }

    Vector work, r;
    support_residual(problem, mask, out.R, work, r);
    out.residual = max_abs(r);
    Vector p = r;
    Vector Ap;
    double rr = r.squaredNorm();
    while (out.residual > tol && out.iterations < max_iter) {
        problem.coupling->apply_offdiag(p, work);
        Ap = (work + problem.col_norms().cwiseProduct(p)).cwiseProduct(mask);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) break;
        const double step = rr / pAp;
        out.R += step * p;
        r -= step * Ap;
        ++out.iterations;
        const double rr_next = r.squaredNorm();
        out.residual = max_abs(r);
        p = r + (rr_next / rr) * p;
        rr = rr_next;
    }
    // The recurrence drifts; report the true residual.
    support_residual(problem, mask, out.R, work, r);
    out.residual = max_abs(r);
    out.converged = std::isfinite(out.residual) && out.residual <= tol;
    return out;
}

CdpResult solve_signal(CdpSolver solver, const QuboProblem& problem, const Support& sigma, const Vector& R0,
                       double tol, int max_iter) {
    return solver == CdpSolver::Jacobi ? solve_signal_jacobi(problem, sigma, R0, tol, max_iter)
                                       : solve_signal_cgd(problem, sigma, R0, tol, max_iter);
}

double eta_schedule(int i, double eta_init, double eta_end, int velo) {
    require(velo >= 1, "eta_schedule: velo must be >= 1");
    require(eta_init >= eta_end && eta_end >= 0.0, "eta_schedule: need eta_init >= eta_end >= 0");
    return std::max(eta_init * (1.0 - static_cast<double>(i) / velo), eta_end);
}

Vector extend_signal(const QuboProblem& problem, const Vector& R, const Support& sigma) {
    const Index n = problem.size();
    require(R.size() == n && sigma.size() == n, "extend_signal: length mismatch");
    const Vector active = R.cwiseProduct(as_real(sigma));
    Vector field;
    problem.coupling->apply_offdiag(active, field);
    field = problem.z - field;
    const Vector& d = problem.col_norms();
    Vector out(n);
    for (Index r = 0; r < n; ++r) out(r) = sigma(r) ? R(r) : (d(r) > 0.0 ? field(r) / d(r) : 0.0);
    return out;
}

} // namespace cimcs
