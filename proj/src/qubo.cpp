#include "cimcs/qubo.hpp"

#include "cimcs/error.hpp"

#include <bit>
#include <cmath>

namespace cimcs {

void Coupling::column_offdiag(Index r, Vector& out) const {
    Vector e = Vector::Zero(size());
    e(r) = 1.0;
    apply_offdiag(e, out);
}

DenseCoupling::DenseCoupling(Matrix J, Vector diag) : J_(std::move(J)), diag_(std::move(diag)) {
    require(J_.rows() == J_.cols(), "DenseCoupling: J must be square");
    require(diag_.size() == J_.rows(), "DenseCoupling: diagonal length mismatch");
    J_.diagonal().setZero();
}

void DenseCoupling::apply_offdiag(const Vector& v, Vector& out) const {
    out.noalias() = -(J_ * v);
}

void DenseCoupling::column_offdiag(Index r, Vector& out) const { out = -J_.col(r); }

QuboProblem QuboProblem::with_eta(double new_eta) const {
    require(std::isfinite(new_eta) && new_eta >= 0.0, "eta must be finite and >= 0");
    QuboProblem p = *this;
    p.eta = new_eta;
    p.lambda = 0.5 * new_eta * new_eta;
    return p;
}

const Matrix& QuboProblem::J() const {
    const auto* dense = dynamic_cast<const DenseCoupling*>(coupling.get());
    if (dense == nullptr) throw InvalidArgument("QuboProblem::J: coupling is matrix-free; use materialize_interaction");
    return dense->J();
}

QuboProblem build_qubo(const Matrix& A, const Vector& y, double eta) {
    require(A.rows() == y.size(), "build_qubo: A rows must equal length of y");
    require(A.allFinite() && y.allFinite(), "build_qubo: non-finite input");
    require(std::isfinite(eta) && eta >= 0.0, "build_qubo: eta must be finite and >= 0");
    Matrix gram = A.transpose() * A;
    Vector diag = gram.diagonal();
    Matrix J = -gram;
    J.diagonal().setZero();
    return build_qubo(std::make_shared<DenseCoupling>(std::move(J), std::move(diag)), A.transpose() * y, eta);
}

QuboProblem build_qubo(std::shared_ptr<const Coupling> coupling, Vector z, double eta) {
    require(coupling != nullptr, "build_qubo: null coupling");
    require(coupling->size() == z.size(), "build_qubo: Zeeman vector length mismatch");
    require(z.allFinite(), "build_qubo: non-finite Zeeman vector");
    require(std::isfinite(eta) && eta >= 0.0, "build_qubo: eta must be finite and >= 0");
    QuboProblem p;
    p.coupling = std::move(coupling);
    p.z = std::move(z);
    p.eta = eta;
    p.lambda = 0.5 * eta * eta;
    return p;
}

Matrix materialize_interaction(const Coupling& coupling) {
    const Index n = coupling.size();
    Matrix J(n, n);
    Vector col(n);
    for (Index r = 0; r < n; ++r) {
        coupling.column_offdiag(r, col);
        J.col(r) = -col;
    }
    J.diagonal().setZero();
    return J;
}

EnergyReport energy(const QuboProblem& problem, const Vector& R, const Support& sigma) {
    const Index n = problem.size();
    require(R.size() == n && sigma.size() == n, "energy: length mismatch");
    const Vector v = R.cwiseProduct(as_real(sigma));
    Vector gv(n);
    problem.coupling->apply_offdiag(v, gv);
    EnergyReport rep;
    rep.data_term = 0.5 * v.dot(gv) - problem.z.dot(v);
    rep.reg_term = problem.lambda * static_cast<double>(popcount(sigma));
    rep.energy = rep.data_term + rep.reg_term;
    rep.diagonal_term = 0.5 * problem.col_norms().dot(v.cwiseProduct(v));
    return rep;
}

void local_field_ol(const QuboProblem& problem, const Vector& R, const Vector& c, Vector& work, Vector& out) {
    const Index n = problem.size();
    require(R.size() == n && c.size() == n, "local_field_ol: length mismatch");
    work.resize(n);
    for (Index r = 0; r < n; ++r) work(r) = c(r) > 0.0 ? R(r) : 0.0;
    out.resize(n);
    problem.coupling->apply_offdiag(work, out);
    out = problem.z - out;
}

Vector local_field_ol(const QuboProblem& problem, const Vector& R, const Vector& c) {
    Vector work, out;
    local_field_ol(problem, R, c, work, out);
    return out;
}

void local_field_cac(const QuboProblem& problem, const Vector& R, const Vector& mu_tilde, double tau, double g2,
                     Vector& work, Vector& out) {
    const Index n = problem.size();
    require(R.size() == n && mu_tilde.size() == n, "local_field_cac: length mismatch");
    require(tau > 0.0 && g2 > 0.0, "local_field_cac: tau and g2 must be positive");
    const double target = std::sqrt(tau / g2);
    work = R.cwiseProduct(0.5 * (mu_tilde.array() + target).matrix());
    out.resize(n);
    problem.coupling->apply_offdiag(work, out);
    out = target * problem.z - out;
}

Vector local_field_cac(const QuboProblem& problem, const Vector& R, const Vector& mu_tilde, double tau, double g2) {
    Vector work, out;
    local_field_cac(problem, R, mu_tilde, tau, g2, work, out);
    return out;
}

std::pair<Support, double> brute_force_ground_state(const QuboProblem& problem, const Vector& R) {
    const Index n = problem.size();
    require(R.size() == n, "brute_force_ground_state: length mismatch");
    if (n > kMaxBruteForceN) throw InvalidArgument("brute_force_ground_state: N too large for enumeration");
    if (n == 0) return {Support(), 0.0};

    Matrix G(n, n);
    Vector col(n);
    for (Index r = 0; r < n; ++r) {
        problem.coupling->column_offdiag(r, col);
        G.col(r) = col;
    }

    // Gray-code walk. field_r = Σ_{r'≠r} G_rr' R_r' σ_r'. The running energy is
    // only used to shortlist candidates; those are re-evaluated exactly.
    Vector field = Vector::Zero(n);
    Support sigma = Support::Zero(n);
    double e = 0.0;
    Support best = sigma;
    double best_exact = 0.0;

    auto lex_less = [](const Support& a, const Support& b) {
        for (Index r = 0; r < a.size(); ++r)
            if (a(r) != b(r)) return a(r) < b(r);
        return false;
    };

    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < total; ++k) {
        const auto bit = static_cast<Index>(std::countr_zero(k));
        const double s = sigma(bit) ? -1.0 : 1.0;
        e += s * (R(bit) * field(bit) - problem.z(bit) * R(bit) + problem.lambda);
        field += (s * R(bit)) * G.col(bit);
        sigma(bit) ^= 1;
        if (e > best_exact + 1e-9 * (1.0 + std::abs(best_exact))) continue;
        const double exact = energy(problem, R, sigma).energy;
        const double tol = 1e-12 * (1.0 + std::abs(best_exact));
        if (exact < best_exact - tol || (std::abs(exact - best_exact) <= tol && lex_less(sigma, best))) {
            best = sigma;
            best_exact = exact;
        }
    }
    return {best, best_exact};
}

} // namespace cimcs
