#pragma once

#include "cimcs/qubo.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// Signal estimate on a fixed support σ: R_r Σ_k (A_r^k)² = σ_r 𝕳_r with
/// 𝕳_r = z_r − Σ_{r'≠r} G_rr' R_r' σ_r'.
struct CdpResult {
    Vector R;              // exactly zero off the support
    double residual = 0.0; // max_r∈σ |𝕳_r − G_rr R_r|
    int iterations = 0;
    bool converged = false;
};

enum class CdpSolver { Jacobi, Cgd };

inline constexpr double kCdpDefaultTol = 1e-10;
inline constexpr int kCdpDefaultMaxIter = 1000;
/// Jacobi gives up after this many consecutive sweeps with a rising residual.
inline constexpr int kJacobiDivergenceWindow = 25;

/// Relaxed Jacobi sweeps R ← R + ω D⁻¹(𝕳 − D R) on the support. ω is
/// 1/λmax(D⁻¹G_σ) from a power iteration, which is 1 for decoupled systems.
CdpResult solve_signal_jacobi(const QuboProblem& problem, const Support& sigma, const Vector& R0,
                              double tol = kCdpDefaultTol, int max_iter = kCdpDefaultMaxIter);

/// Conjugate gradients on G_σ R_σ = z_σ.
CdpResult solve_signal_cgd(const QuboProblem& problem, const Support& sigma, const Vector& R0,
                           double tol = kCdpDefaultTol, int max_iter = kCdpDefaultMaxIter);

CdpResult solve_signal(CdpSolver solver, const QuboProblem& problem, const Support& sigma, const Vector& R0,
                       double tol = kCdpDefaultTol, int max_iter = kCdpDefaultMaxIter);

/// η_i = max(η_init (1 − i/velo), η_end)
double eta_schedule(int i, double eta_init, double eta_end, int velo);

/// Signal handed to the CIM: R on the support, and the single-site optimum
/// 𝕳_r(R∘σ)/G_rr off it, so that currently inactive entries still carry a
/// meaningful amplitude in the R_r h_r injection.
Vector extend_signal(const QuboProblem& problem, const Vector& R, const Support& sigma);

} // namespace cimcs
