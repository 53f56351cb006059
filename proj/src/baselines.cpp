#include "cimcs/baselines.hpp"

#include "cimcs/error.hpp"
#include "cimcs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cimcs {

void SaSchedule::validate() const {
    require(sweeps >= 1, "SaSchedule: sweeps must be >= 1");
    if (kind == Kind::Exponential)
        require(std::isfinite(T_start) && std::isfinite(T_end) && T_start > T_end && T_end > 0.0,
                "SaSchedule: exponential schedule requires T_start > T_end > 0");
}

double SaSchedule::temperature(int stage) const {
    if (kind == Kind::Zero) return 0.0;
    if (sweeps <= 1) return T_start;
    const double frac = static_cast<double>(stage) / static_cast<double>(sweeps - 1);
    return T_start * std::pow(T_end / T_start, frac);
}

SaResult sa_support_estimation(const QuboProblem& problem, const Vector& R, const SaSchedule& schedule,
                               std::uint64_t seed, const Support* initial) {
    schedule.validate();
    const Index n = problem.size();
    require(R.size() == n, "sa_support_estimation: R length mismatch");
    require(initial == nullptr || initial->size() == n, "sa_support_estimation: initial support length mismatch");

    SaResult out;
    out.sigma = initial ? *initial : Support::Zero(n);
    if (n == 0) return out;

    // field_r = Σ_{r'≠r} G_rr' R_r' σ_r'
    Vector field;
    problem.coupling->apply_offdiag(R.cwiseProduct(as_real(out.sigma)), field);
    double e = energy(problem, R, out.sigma).energy;
    out.energy_trace.reserve(static_cast<std::size_t>(schedule.sweeps) + 1);
    out.energy_trace.push_back(e);

    const auto* dense = dynamic_cast<const DenseCoupling*>(problem.coupling.get());
    Vector column(n);
    Rng rng(seed);
    std::size_t accepted = 0;
    for (int stage = 0; stage < schedule.sweeps; ++stage) {
        const double T = schedule.temperature(stage);
        for (Index k = 0; k < n; ++k) {
            const auto r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            const double u = rng.uniform();
            const double s = out.sigma(r) ? -1.0 : 1.0;
            const double dE = s * (R(r) * field(r) - problem.z(r) * R(r) + problem.lambda);
            const bool accept = dE <= 0.0 || (T > 0.0 && u < std::exp(-dE / T));
            if (!accept) continue;
            out.sigma(r) ^= 1;
            e += dE;
            if (dense != nullptr)
                field.noalias() -= (s * R(r)) * dense->J().col(r);
            else {
                problem.coupling->column_offdiag(r, column);
                field += (s * R(r)) * column;
            }
            if (++accepted % 100 == 0) {
                const double exact = energy(problem, R, out.sigma).energy;
                out.max_drift = std::max(out.max_drift, std::abs(exact - e));
                e = exact;
            }
        }
        out.energy_trace.push_back(e);
    }
    out.energy = energy(problem, R, out.sigma).energy;
    return out;
}

namespace {

// ISTA on ½xᵀGx − bᵀx + lam‖x‖₁ given x ↦ Gx. `objective_const` is added to
// recorded objective values.
template <class GramApply>
LassoResult ista(Index n, const GramApply& gram, const Vector& b, double lam, double tol, int max_iter,
                 bool record, double objective_const) {
    require(std::isfinite(lam) && lam >= 0.0, "lasso_ista: lam must be >= 0");
    require(tol > 0.0 && max_iter >= 1, "lasso_ista: invalid tolerances");
    LassoResult out;
    out.x = Vector::Zero(n);
    if (n == 0) {
        out.converged = true;
        return out;
    }

    // Power iteration for L = λmax(G).
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    Vector gv(n);
    double L = 0.0;
    for (int it = 0; it < 500; ++it) {
        gram(v, gv);
        const double next = v.dot(gv);
        const double norm = gv.norm();
        if (norm == 0.0) break;
        v = gv / norm;
        const bool settled = std::abs(next - L) <= 1e-9 * std::abs(next);
        L = next;
        if (settled) break;
    }
    // Rayleigh quotients approach λmax from below; a small margin keeps 1/L a descent step.
    L *= 1.0 + 1e-6;
    if (!(L > 0.0)) {
        out.converged = true;
        return out;
    }
    out.step = 1.0 / L;

    auto objective = [&](const Vector& x, const Vector& gx) {
        return 0.5 * x.dot(gx) - b.dot(x) + lam * x.lpNorm<1>() + objective_const;
    };

    Vector gx = Vector::Zero(n);
    Vector next(n);
    const double shrink = lam * out.step;
    for (out.iterations = 0; out.iterations < max_iter;) {
        if (record) out.objective.push_back(objective(out.x, gx));
        next = out.x - out.step * (gx - b);
        for (Index r = 0; r < n; ++r) {
            const double u = next(r);
            next(r) = u > shrink ? u - shrink : (u < -shrink ? u + shrink : 0.0);
        }
        const double change = (next - out.x).cwiseAbs().maxCoeff();
        out.x.swap(next);
        ++out.iterations;
        gram(out.x, gx);
        if (change < tol) {
            out.converged = true;
            break;
        }
    }
    if (record) out.objective.push_back(objective(out.x, gx));
    return out;
}

} // namespace

LassoResult lasso_ista(const Matrix& A, const Vector& y, double lam, double tol, int max_iter, bool record_objective) {
    require(A.rows() == y.size(), "lasso_ista: A rows must equal length of y");
    require(A.allFinite() && y.allFinite(), "lasso_ista: non-finite input");
    Vector ax(A.rows());
    auto gram = [&](const Vector& x, Vector& out) {
        ax.noalias() = A * x;
        out.noalias() = A.transpose() * ax;
    };
    return ista(A.cols(), gram, A.transpose() * y, lam, tol, max_iter, record_objective, 0.5 * y.squaredNorm());
}

LassoResult lasso_ista(const Coupling& coupling, const Vector& z, double lam, double tol, int max_iter,
                       bool record_objective) {
    require(coupling.size() == z.size(), "lasso_ista: Zeeman vector length mismatch");
    auto gram = [&](const Vector& x, Vector& out) {
        coupling.apply_offdiag(x, out);
        out += coupling.diagonal().cwiseProduct(x);
    };
    return ista(z.size(), gram, z, lam, tol, max_iter, record_objective, 0.0);
}

KsResult ks_one_sided(std::span<const double> upper, std::span<const double> lower) {
    const auto n = static_cast<std::int64_t>(upper.size());
    const auto m = static_cast<std::int64_t>(lower.size());
    require(n > 0 && m > 0, "ks_one_sided: samples must be non-empty");
    require(m * n <= 100'000'000, "ks_one_sided: samples too large for the exact distribution");

    std::vector<double> a(lower.begin(), lower.end()), b(upper.begin(), upper.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // Observed statistic as an integer numerator of i/m − j/n over m·n.
    std::int64_t best = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const double t = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] == t) ++i;
        while (j < b.size() && b[j] == t) ++j;
        best = std::max(best, static_cast<std::int64_t>(i) * n - static_cast<std::int64_t>(j) * m);
    }
    KsResult out;
    out.statistic = static_cast<double>(best) / static_cast<double>(m * n);
    if (best <= 0) return out;

    // P(every lattice point satisfies i·n − j·m < best); paths weighted uniformly.
    std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::int64_t ii = 0; ii <= m; ++ii) {
        for (std::int64_t jj = 0; jj <= n; ++jj) {
            double value;
            if (ii == 0 && jj == 0)
                value = 1.0;
            else {
                const double total = static_cast<double>(ii + jj);
                const double from_left = ii > 0 ? row[static_cast<std::size_t>(jj)] * (ii / total) : 0.0;
                const double from_below = jj > 0 ? row[static_cast<std::size_t>(jj - 1)] * (jj / total) : 0.0;
                value = from_left + from_below;
            }
            if (ii * n - jj * m >= best) value = 0.0;
            row[static_cast<std::size_t>(jj)] = value;
        }
    }
    out.p_value = std::clamp(1.0 - row[static_cast<std::size_t>(n)], 0.0, 1.0);
    return out;
}

} // namespace cimcs
