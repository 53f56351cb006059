#pragma once

#include "cimcs/altmin.hpp"
#include "cimcs/qubo.hpp"
#include "cimcs/types.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace cimcs {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

bool is_power_of_two(Index n);

// ---- Transforms -------------------------------------------------------------

/// Full multilevel orthonormal 2-D Haar decomposition (Mallat layout: the
/// coarsest average ends up at (0,0)).
Matrix haar_forward(const Matrix& image);
Matrix haar_inverse(const Matrix& coeffs);

/// Column-major flattening used for the coefficient vector.
Vector flatten(const Matrix& image);
Matrix unflatten(const Vector& v, Index side);

/// Unitary 2-D DFT, X_{uv} = (1/side) Σ x_{ab} e^{-2πi(ua+vb)/side}.
class Dft2 {
public:
    explicit Dft2(Index side);

    Index side() const { return side_; }
    ComplexMatrix forward(const ComplexMatrix& x) const;
    ComplexMatrix inverse(const ComplexMatrix& k) const;

private:
    Index side_;
};

ComplexMatrix dft2(const ComplexMatrix& x);
ComplexMatrix idft2(const ComplexMatrix& k);

/// Periodic second difference [1, −2, 1] along columns (vertical) / rows (horizontal).
Matrix second_difference_v(const Matrix& image);
Matrix second_difference_h(const Matrix& image);

// ---- Sampling mask ----------------------------------------------------------

/// Flat k-space index u + side·v (column-major) of the conjugate frequency.
Index conjugate_index(Index k, Index side);

/// Hermitian-symmetric random mask with round(compression·side²) points; DC
/// always included. Returns sorted flat indices.
std::vector<Index> hermitian_mask(Index side, double compression, std::uint64_t seed);

void write_mask(std::ostream& out, const std::vector<Index>& mask);
std::vector<Index> read_mask(std::istream& in);

// ---- Sparse source ----------------------------------------------------------

struct SparseImage {
    Matrix pixels;
    Vector haar_coeffs;
    double sparseness = 0.0;

    Index side() const { return pixels.rows(); }
};

/// Keeps the round(target·N) largest-magnitude Haar coefficients (ties broken
/// toward the lower flat index) and reconstructs the pixels.
SparseImage make_sparse_source(const Matrix& image, double sparseness_target);

// ---- Operator and problem ---------------------------------------------------

/// G = Ψ Re(Fᴴ P F) Ψᵀ + γ Ψ(Δ_vᵀΔ_v + Δ_hᵀΔ_h)Ψᵀ applied without forming it.
class MriCoupling final : public Coupling {
public:
    MriCoupling(Index side, std::vector<Index> mask, double gamma);

    Index size() const override { return side_ * side_; }
    void apply_offdiag(const Vector& v, Vector& out) const override;
    const Vector& diagonal() const override { return diag_; }

    /// G v, diagonal included.
    void apply(const Vector& v, Vector& out) const;
    /// Ψ Re(Fᴴ P F) Ψᵀ v only.
    void apply_data(const Vector& v, Vector& out) const;

    Index side() const { return side_; }
    double gamma() const { return gamma_; }
    const std::vector<Index>& mask() const { return mask_; }
    const std::vector<unsigned char>& mask_dense() const { return dense_; }
    const Dft2& dft() const { return dft_; }

private:
    Index side_;
    std::vector<Index> mask_;
    std::vector<unsigned char> dense_;
    double gamma_;
    Dft2 dft_;
    Vector diag_;
};

struct MriProblem {
    Index side = 0;
    std::vector<Index> mask;
    double gamma = 0.0;
    double compression = 0.0;
    std::uint64_t mask_seed = 0;
    /// Sampled k-space values in mask order.
    std::vector<Complex> kspace;
    /// Real embedding: (Re, Im) of each sample in mask order, length 2·|mask|.
    Vector y;
    Vector h_z;
    std::shared_ptr<const MriCoupling> coupling;

    Index size() const { return side * side; }
    QuboProblem qubo(double eta) const;
};

MriProblem build_mri_problem(const SparseImage& source, double compression, double gamma, std::uint64_t mask_seed);

/// Dense real embedding of S F Ψᵀ: two rows per sampled frequency.
Matrix materialize_A_real(const MriProblem& problem);

/// haar_inverse(R∘σ) reshaped to side×side.
Matrix reconstruct_image(const Vector& R, const Support& sigma, Index side);

double pixel_rmse(const Matrix& a, const Matrix& b);

// ---- Reconstruction runs ----------------------------------------------------

enum class MriMethod { Lasso, WignerOl, WignerCac, PositiveP };

std::string to_string(MriMethod m);
MriMethod parse_mri_method(const std::string& name);

struct MriRunConfig {
    double lasso_lam = 0.0003;
    double lasso_tol = 1e-9;
    int lasso_max_iter = 20000;
    /// CIM settings; r_init is forced to the LASSO solution.
    AltMinConfig cac;
    AltMinConfig ol;

    /// Settings for 64×64 runs: constant η (0.022 CAC, 0.011 OL), 12 and 32
    /// iterations, K = 0.01 for CAC, K̃ = 0.25 for open loop, d = 0.4.
    static MriRunConfig defaults();
};

struct MriReconstruction {
    MriMethod method = MriMethod::Lasso;
    Matrix image;
    Vector R;
    Support sigma;
    double rmse = 0.0;
    int iterations = 0;
    double wall_seconds = 0.0;
};

/// One reconstruction. `lasso` may carry a precomputed LASSO solution reused as
/// the CIM initial condition.
MriReconstruction mri_reconstruct(const MriProblem& problem, const SparseImage& source, MriMethod method,
                                  const MriRunConfig& cfg, const Vector* lasso = nullptr);

// ---- Images -----------------------------------------------------------------

/// Binary PGM (P5), maxval ≤ 65535; pixels scaled to [0, 1].
Matrix read_pgm(std::istream& in);
Matrix read_pgm(const std::filesystem::path& path);
/// 8-bit P5; values clamped to [0, 1] and rounded to 255 levels.
void write_pgm(std::ostream& out, const Matrix& image);
void write_pgm(const std::filesystem::path& path, const Matrix& image);

/// Shepp-Logan style ellipse phantom in [0, 1] with smooth shading.
Matrix phantom(Index side);

/// Columns r, coefficient.
void write_coefficients_csv(std::ostream& out, const Vector& coeffs);

} // namespace cimcs
