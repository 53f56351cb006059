#pragma once

#include "cimcs/qubo.hpp"
#include "cimcs/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cimcs {

// ---- Simulated annealing on the QUBO energy -------------------------------

struct SaSchedule {
    enum class Kind { Zero, Exponential };
    Kind kind = Kind::Exponential;
    double T_start = 0.02;
    double T_end = 0.00002;
    /// Number of temperature stages; each stage makes N single-flip proposals.
    int sweeps = 10000;

    void validate() const;
    /// Geometric interpolation T_k = T_start (T_end/T_start)^{k/(K−1)}; 0 for Kind::Zero.
    double temperature(int stage) const;
};

struct SaResult {
    Support sigma;
    double energy = 0.0;
    /// Energy after each sweep (sweeps + 1 entries, starting with the initial state).
    std::vector<double> energy_trace;
    /// Largest |incremental − recomputed| energy seen at the stride-100 spot checks.
    double max_drift = 0.0;
};

/// Single-site Metropolis over σ at fixed R. Starts from `initial` when given,
/// otherwise from σ = 0.
SaResult sa_support_estimation(const QuboProblem& problem, const Vector& R, const SaSchedule& schedule,
                               std::uint64_t seed, const Support* initial = nullptr);

// ---- LASSO via ISTA --------------------------------------------------------

struct LassoResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
    double step = 0.0;                // 1/L
    std::vector<double> objective;    // per iteration, when recorded
};

/// ISTA for ½‖y − Ax‖² + lam‖x‖₁, step 1/L with L = λmax(AᵀA) by power
/// iteration; stops when max|x_{k+1} − x_k| < tol.
LassoResult lasso_ista(const Matrix& A, const Vector& y, double lam, double tol = 1e-10, int max_iter = 100000,
                       bool record_objective = false);

/// Same objective written as ½xᵀGx − zᵀx + lam‖x‖₁ (+ const), where G and z
/// come from a QUBO coupling; this is the form used for the MRI operator.
LassoResult lasso_ista(const Coupling& gram, const Vector& z, double lam, double tol = 1e-10, int max_iter = 100000,
                       bool record_objective = false);

// ---- Two-sample Kolmogorov-Smirnov ------------------------------------------

struct KsResult {
    double statistic = 0.0; // D+ = sup_t (F_lower(t) − F_upper(t))
    double p_value = 1.0;
};

/// One-sided two-sample KS test of H1: `upper` is stochastically larger than
/// `lower`. Exact null distribution by lattice-path counting (sizes ≤ 10000).
KsResult ks_one_sided(std::span<const double> upper, std::span<const double> lower);

} // namespace cimcs
