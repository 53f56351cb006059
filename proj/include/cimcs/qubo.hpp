#pragma once

#include "cimcs/types.hpp"

#include <memory>
#include <utility>

namespace cimcs {

/// Symmetric quadratic form G (the Gram matrix AᵀA plus any l2 terms) seen
/// through its off-diagonal action and its diagonal. The mutual interaction
/// of the Ising model is J̃ = -offdiag(G).
class Coupling {
public:
    virtual ~Coupling() = default;

    virtual Index size() const = 0;
    /// out_r = Σ_{r'≠r} G_{rr'} v_{r'}
    virtual void apply_offdiag(const Vector& v, Vector& out) const = 0;
    /// G_{rr}, i.e. the squared column norms for a plain observation matrix.
    virtual const Vector& diagonal() const = 0;
    /// Column r of offdiag(G). Default goes through apply_offdiag.
    virtual void column_offdiag(Index r, Vector& out) const;
};

/// J̃ materialised as a dense N×N matrix with zero diagonal.
class DenseCoupling final : public Coupling {
public:
    /// Takes J̃ (zero diagonal, symmetric) and the diagonal of G.
    DenseCoupling(Matrix J, Vector diag);

    Index size() const override { return J_.rows(); }
    void apply_offdiag(const Vector& v, Vector& out) const override;
    const Vector& diagonal() const override { return diag_; }
    void column_offdiag(Index r, Vector& out) const override;

    const Matrix& J() const { return J_; }

private:
    Matrix J_;
    Vector diag_;
};

/// The l0-regularised CS energy at fixed threshold eta (lambda = eta²/2).
struct QuboProblem {
    std::shared_ptr<const Coupling> coupling;
    Vector z;         // Zeeman / matched-filter vector Aᵀy
    double lambda = 0.0;
    double eta = 0.0;

    Index size() const { return z.size(); }
    const Vector& col_norms() const { return coupling->diagonal(); }

    /// Same couplings and Zeeman term, new threshold.
    QuboProblem with_eta(double new_eta) const;

    /// Dense J̃. Throws when the coupling is matrix-free.
    const Matrix& J() const;
};

struct EnergyReport {
    double energy = 0.0;
    double data_term = 0.0; // Σ_{r<r'} G R R σ σ − Σ z R σ
    double reg_term = 0.0;  // λ·popcount(σ)
    /// ½ Σ_r G_rr R_r² σ_r. Not part of `energy` (the pair sum is r<r'
    /// only); energy + diagonal_term is ½‖y − A(σ∘R)‖² + λ|σ| − ½‖y‖².
    double diagonal_term = 0.0;

    double objective() const { return energy + diagonal_term; }
};

QuboProblem build_qubo(const Matrix& A, const Vector& y, double eta);
QuboProblem build_qubo(std::shared_ptr<const Coupling> coupling, Vector z, double eta);

/// Dense J̃ of any coupling, built column by column. O(N) applications.
Matrix materialize_interaction(const Coupling& coupling);

EnergyReport energy(const QuboProblem& problem, const Vector& R, const Support& sigma);

/// Open-loop local field h = z − offdiag(G)(R ∘ H(c)).
Vector local_field_ol(const QuboProblem& problem, const Vector& R, const Vector& c);
void local_field_ol(const QuboProblem& problem, const Vector& R, const Vector& c, Vector& work, Vector& out);

/// CAC local field h = √(τ/g²) z − offdiag(G)(R ∘ ½(μ̃ + √(τ/g²))).
Vector local_field_cac(const QuboProblem& problem, const Vector& R, const Vector& mu_tilde, double tau, double g2);
void local_field_cac(const QuboProblem& problem, const Vector& R, const Vector& mu_tilde, double tau, double g2,
                     Vector& work, Vector& out);

/// Exhaustive minimiser of energy over σ at fixed R (N ≤ 24). Ties go to the
/// lexicographically smallest σ (first differing entry is 0).
std::pair<Support, double> brute_force_ground_state(const QuboProblem& problem, const Vector& R);

inline constexpr Index kMaxBruteForceN = 24;

} // namespace cimcs
