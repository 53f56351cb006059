#include "cimcs/mri.hpp"

#include "cimcs/baselines.hpp"
#include "cimcs/error.hpp"
#include "cimcs/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cimcs {

bool is_power_of_two(Index n) { return n >= 1 && (n & (n - 1)) == 0; }

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void require_square_pow2(const Matrix& m, const char* what) {
    require(m.rows() == m.cols(), std::string(what) + ": image must be square");
    require(is_power_of_two(m.rows()), std::string(what) + ": side must be a power of two");
}

} // namespace

// ---- Haar -------------------------------------------------------------------

Matrix haar_forward(const Matrix& image) {
    require_square_pow2(image, "haar_forward");
    const Index side = image.rows();
    Matrix c = image;
    Vector tmp(side);
    for (Index L = side; L > 1; L /= 2) {
        const Index half = L / 2;
        for (Index i = 0; i < L; ++i) {
            for (Index k = 0; k < half; ++k) {
                const double a = c(i, 2 * k), b = c(i, 2 * k + 1);
                tmp(k) = (a + b) * kInvSqrt2;
                tmp(half + k) = (a - b) * kInvSqrt2;
            }
            for (Index k = 0; k < L; ++k) c(i, k) = tmp(k);
        }
        for (Index j = 0; j < L; ++j) {
            for (Index k = 0; k < half; ++k) {
                const double a = c(2 * k, j), b = c(2 * k + 1, j);
                tmp(k) = (a + b) * kInvSqrt2;
                tmp(half + k) = (a - b) * kInvSqrt2;
            }
            for (Index k = 0; k < L; ++k) c(k, j) = tmp(k);
        }
    }
    return c;
}

Matrix haar_inverse(const Matrix& coeffs) {
    require_square_pow2(coeffs, "haar_inverse");
    const Index side = coeffs.rows();
    Matrix x = coeffs;
    Vector tmp(side);
    for (Index L = 2; L <= side; L *= 2) {
        const Index half = L / 2;
        for (Index j = 0; j < L; ++j) {
            for (Index k = 0; k < half; ++k) {
                const double s = x(k, j), d = x(half + k, j);
                tmp(2 * k) = (s + d) * kInvSqrt2;
                tmp(2 * k + 1) = (s - d) * kInvSqrt2;
            }
            for (Index k = 0; k < L; ++k) x(k, j) = tmp(k);
        }
        for (Index i = 0; i < L; ++i) {
            for (Index k = 0; k < half; ++k) {
                const double s = x(i, k), d = x(i, half + k);
                tmp(2 * k) = (s + d) * kInvSqrt2;
                tmp(2 * k + 1) = (s - d) * kInvSqrt2;
            }
            for (Index k = 0; k < L; ++k) x(i, k) = tmp(k);
        }
    }
    return x;
}

Vector flatten(const Matrix& image) { return Eigen::Map<const Vector>(image.data(), image.size()); }

Matrix unflatten(const Vector& v, Index side) {
    require(v.size() == side * side, "unflatten: length must equal side²");
    return Eigen::Map<const Matrix>(v.data(), side, side);
}

// ---- DFT --------------------------------------------------------------------

namespace {

Eigen::FFT<double>& thread_fft() {
    thread_local Eigen::FFT<double> fft = [] {
        Eigen::FFT<double> f;
        f.SetFlag(Eigen::FFT<double>::Unscaled);
        return f;
    }();
    return fft;
}

ComplexMatrix transform2(const ComplexMatrix& in, bool forward) {
    const Index side = in.rows();
    auto& fft = thread_fft();
    ComplexMatrix out(side, side);
    std::vector<Complex> src(static_cast<std::size_t>(side)), dst;
    for (Index j = 0; j < side; ++j) {
        for (Index i = 0; i < side; ++i) src[static_cast<std::size_t>(i)] = in(i, j);
        forward ? fft.fwd(dst, src) : fft.inv(dst, src);
        for (Index i = 0; i < side; ++i) out(i, j) = dst[static_cast<std::size_t>(i)];
    }
    for (Index i = 0; i < side; ++i) {
        for (Index j = 0; j < side; ++j) src[static_cast<std::size_t>(j)] = out(i, j);
        forward ? fft.fwd(dst, src) : fft.inv(dst, src);
        for (Index j = 0; j < side; ++j) out(i, j) = dst[static_cast<std::size_t>(j)];
    }
    out /= static_cast<double>(side);
    return out;
}

} // namespace

Dft2::Dft2(Index side) : side_(side) { require(side >= 1, "Dft2: side must be >= 1"); }

ComplexMatrix Dft2::forward(const ComplexMatrix& x) const {
    require(x.rows() == side_ && x.cols() == side_, "Dft2: size mismatch");
    return transform2(x, true);
}

ComplexMatrix Dft2::inverse(const ComplexMatrix& k) const {
    require(k.rows() == side_ && k.cols() == side_, "Dft2: size mismatch");
    return transform2(k, false);
}

ComplexMatrix dft2(const ComplexMatrix& x) {
    require(x.rows() == x.cols(), "dft2: image must be square");
    return transform2(x, true);
}

ComplexMatrix idft2(const ComplexMatrix& k) {
    require(k.rows() == k.cols(), "idft2: k-space must be square");
    return transform2(k, false);
}

Matrix second_difference_v(const Matrix& image) {
    const Index n = image.rows();
    Matrix out(image.rows(), image.cols());
    for (Index j = 0; j < image.cols(); ++j)
        for (Index i = 0; i < n; ++i)
            out(i, j) = image((i + n - 1) % n, j) - 2.0 * image(i, j) + image((i + 1) % n, j);
    return out;
}

Matrix second_difference_h(const Matrix& image) {
    const Index n = image.cols();
    Matrix out(image.rows(), image.cols());
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < image.rows(); ++i)
            out(i, j) = image(i, (j + n - 1) % n) - 2.0 * image(i, j) + image(i, (j + 1) % n);
    return out;
}

// ---- Mask -------------------------------------------------------------------

Index conjugate_index(Index k, Index side) {
    const Index u = k % side, v = k / side;
    return (side - u) % side + side * ((side - v) % side);
}

std::vector<Index> hermitian_mask(Index side, double compression, std::uint64_t seed) {
    require(is_power_of_two(side) && side >= 2, "hermitian_mask: side must be a power of two >= 2");
    require(std::isfinite(compression) && compression > 0.0 && compression <= 1.0,
            "hermitian_mask: compression must lie in (0, 1]");
    const Index n = side * side;
    const auto m = static_cast<Index>(std::llround(compression * static_cast<double>(n)));
    require(m >= 1, "hermitian_mask: compression too small for any sample");

    const Index h = side / 2;
    std::array<Index, 4> self = {0, h, side * h, h + side * h};
    std::vector<Index> pairs;
    pairs.reserve(static_cast<std::size_t>((n - 4) / 2));
    for (Index k = 0; k < n; ++k) {
        const Index c = conjugate_index(k, side);
        if (k < c) pairs.push_back(k);
    }
    const auto n_pairs = static_cast<Index>(pairs.size());

    Index n_self = 0;
    for (Index s = 1; s <= 4; ++s) {
        if (m >= s && (m - s) % 2 == 0 && (m - s) / 2 <= n_pairs) {
            n_self = s;
            break;
        }
    }
    require(n_self > 0, "hermitian_mask: infeasible compression for a Hermitian-symmetric mask");

    Rng rng(derive_seed(seed, {0x4D41534BULL}));
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(m));
    out.push_back(0);
    for (Index i = 1; i < n_self; ++i) {
        const auto pick = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(4 - i)));
        std::swap(self[static_cast<std::size_t>(i)], self[static_cast<std::size_t>(pick)]);
        out.push_back(self[static_cast<std::size_t>(i)]);
    }
    const Index want = (m - n_self) / 2;
    for (Index i = 0; i < want; ++i) {
        const auto pick = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_pairs - i)));
        std::swap(pairs[static_cast<std::size_t>(i)], pairs[static_cast<std::size_t>(pick)]);
        out.push_back(pairs[static_cast<std::size_t>(i)]);
        out.push_back(conjugate_index(pairs[static_cast<std::size_t>(i)], side));
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_mask(std::ostream& out, const std::vector<Index>& mask) {
    for (Index k : mask) out << k << '\n';
}

std::vector<Index> read_mask(std::istream& in) {
    std::vector<Index> mask;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(line, &used);
        } catch (const std::exception&) {
            throw InvalidArgument("read_mask: bad line '" + line + "'");
        }
        require(used == line.size() && v >= 0, "read_mask: bad line '" + line + "'");
        require(mask.empty() || v > mask.back(), "read_mask: indices must be strictly increasing");
        mask.push_back(static_cast<Index>(v));
    }
    return mask;
}

// ---- Sparse source ----------------------------------------------------------

SparseImage make_sparse_source(const Matrix& image, double sparseness_target) {
    require_square_pow2(image, "make_sparse_source");
    require(std::isfinite(sparseness_target) && sparseness_target > 0.0 && sparseness_target <= 1.0,
            "make_sparse_source: sparseness target must lie in (0, 1]");
    const Index side = image.rows();
    const Index n = side * side;
    const Vector coeffs = flatten(haar_forward(image));
    const auto keep = static_cast<Index>(std::llround(sparseness_target * static_cast<double>(n)));

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(coeffs(a)) > std::abs(coeffs(b)); });
    SparseImage out;
    out.haar_coeffs = Vector::Zero(n);
    for (Index i = 0; i < keep; ++i) out.haar_coeffs(order[static_cast<std::size_t>(i)]) = coeffs(order[static_cast<std::size_t>(i)]);
    out.pixels = haar_inverse(unflatten(out.haar_coeffs, side));
    Index nonzero = 0;
    for (Index r = 0; r < n; ++r) nonzero += out.haar_coeffs(r) != 0.0;
    out.sparseness = static_cast<double>(nonzero) / static_cast<double>(n);
    return out;
}

// ---- Coupling ---------------------------------------------------------------

MriCoupling::MriCoupling(Index side, std::vector<Index> mask, double gamma)
    : side_(side), mask_(std::move(mask)), gamma_(gamma), dft_(side) {
    require(is_power_of_two(side) && side >= 2, "MriCoupling: side must be a power of two >= 2");
    require(std::isfinite(gamma) && gamma >= 0.0, "MriCoupling: gamma must be >= 0");
    const Index n = side * side;
    dense_.assign(static_cast<std::size_t>(n), 0);
    for (Index k : mask_) {
        require(k >= 0 && k < n, "MriCoupling: mask index out of range");
        dense_[static_cast<std::size_t>(k)] = 1;
    }
    for (Index k : mask_)
        require(dense_[static_cast<std::size_t>(conjugate_index(k, side))] != 0,
                "MriCoupling: mask must be Hermitian-symmetric");

    // G_rr = ‖P F ψ_r‖² + γ(‖Δ_v ψ_r‖² + ‖Δ_h ψ_r‖²), ψ_r = Ψᵀ e_r.
    diag_.resize(n);
    Vector e = Vector::Zero(n);
    for (Index r = 0; r < n; ++r) {
        e(r) = 1.0;
        const Matrix psi = haar_inverse(unflatten(e, side));
        e(r) = 0.0;
        const ComplexMatrix k = dft_.forward(psi.cast<Complex>());
        double acc = 0.0;
        for (Index q = 0; q < n; ++q)
            if (dense_[static_cast<std::size_t>(q)]) acc += std::norm(k.data()[q]);
        if (gamma_ > 0.0)
            acc += gamma_ * (second_difference_v(psi).squaredNorm() + second_difference_h(psi).squaredNorm());
        diag_(r) = acc;
    }
}

void MriCoupling::apply_data(const Vector& v, Vector& out) const {
    require(v.size() == size(), "MriCoupling: vector length mismatch");
    const Matrix x = haar_inverse(unflatten(v, side_));
    ComplexMatrix k = dft_.forward(x.cast<Complex>());
    for (Index q = 0; q < k.size(); ++q)
        if (!dense_[static_cast<std::size_t>(q)]) k.data()[q] = 0.0;
    out = flatten(haar_forward(dft_.inverse(k).real()));
}

void MriCoupling::apply(const Vector& v, Vector& out) const {
    require(v.size() == size(), "MriCoupling: vector length mismatch");
    const Matrix x = haar_inverse(unflatten(v, side_));
    ComplexMatrix k = dft_.forward(x.cast<Complex>());
    for (Index q = 0; q < k.size(); ++q)
        if (!dense_[static_cast<std::size_t>(q)]) k.data()[q] = 0.0;
    Matrix image = dft_.inverse(k).real();
    if (gamma_ > 0.0) {
        // Δ is symmetric, so ΔᵀΔ = Δ².
        image += gamma_ * (second_difference_v(second_difference_v(x)) + second_difference_h(second_difference_h(x)));
    }
    out = flatten(haar_forward(image));
}

void MriCoupling::apply_offdiag(const Vector& v, Vector& out) const {
    apply(v, out);
    out -= diag_.cwiseProduct(v);
}

// ---- Problem ----------------------------------------------------------------

QuboProblem MriProblem::qubo(double eta) const { return build_qubo(coupling, h_z, eta); }

MriProblem build_mri_problem(const SparseImage& source, double compression, double gamma, std::uint64_t mask_seed) {
    require_square_pow2(source.pixels, "build_mri_problem");
    const Index side = source.side();
    require(source.haar_coeffs.size() == side * side, "build_mri_problem: coefficient length mismatch");
    require(std::isfinite(gamma) && gamma >= 0.0, "build_mri_problem: gamma must be >= 0");

    MriProblem p;
    p.side = side;
    p.gamma = gamma;
    p.compression = compression;
    p.mask_seed = mask_seed;
    p.mask = hermitian_mask(side, compression, mask_seed);
    auto coupling = std::make_shared<MriCoupling>(side, p.mask, gamma);

    const Matrix x = haar_inverse(unflatten(source.haar_coeffs, side));
    ComplexMatrix k = coupling->dft().forward(x.cast<Complex>());
    p.kspace.reserve(p.mask.size());
    p.y.resize(2 * static_cast<Index>(p.mask.size()));
    for (std::size_t i = 0; i < p.mask.size(); ++i) {
        const Complex c = k.data()[p.mask[i]];
        p.kspace.push_back(c);
        p.y(2 * static_cast<Index>(i)) = c.real();
        p.y(2 * static_cast<Index>(i) + 1) = c.imag();
    }
    // h_z = Ψ Re(Fᴴ Sᵀ y) = A_realᵀ y
    const auto& dense = coupling->mask_dense();
    for (Index q = 0; q < k.size(); ++q)
        if (!dense[static_cast<std::size_t>(q)]) k.data()[q] = 0.0;
    p.h_z = flatten(haar_forward(coupling->dft().inverse(k).real()));
    p.coupling = std::move(coupling);
    return p;
}

Matrix materialize_A_real(const MriProblem& problem) {
    const Index n = problem.size();
    const auto rows = 2 * static_cast<Index>(problem.mask.size());
    Matrix A(rows, n);
    Vector e = Vector::Zero(n);
    for (Index r = 0; r < n; ++r) {
        e(r) = 1.0;
        const Matrix psi = haar_inverse(unflatten(e, problem.side));
        e(r) = 0.0;
        const ComplexMatrix k = problem.coupling->dft().forward(psi.cast<Complex>());
        for (std::size_t i = 0; i < problem.mask.size(); ++i) {
            const Complex c = k.data()[problem.mask[i]];
            A(2 * static_cast<Index>(i), r) = c.real();
            A(2 * static_cast<Index>(i) + 1, r) = c.imag();
        }
    }
    return A;
}

Matrix reconstruct_image(const Vector& R, const Support& sigma, Index side) {
    require(R.size() == side * side && sigma.size() == R.size(), "reconstruct_image: length mismatch");
    return haar_inverse(unflatten(R.cwiseProduct(as_real(sigma)), side));
}

double pixel_rmse(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "pixel_rmse: size mismatch");
    if (a.size() == 0) return 0.0;
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

// ---- Reconstruction runs ----------------------------------------------------

std::string to_string(MriMethod m) {
    switch (m) {
    case MriMethod::Lasso: return "lasso";
    case MriMethod::WignerOl: return "wigner-ol";
    case MriMethod::WignerCac: return "wigner-cac";
    case MriMethod::PositiveP: return "positive-p";
    }
    return "?";
}

MriMethod parse_mri_method(const std::string& name) {
    if (name == "lasso") return MriMethod::Lasso;
    if (name == "wigner-ol") return MriMethod::WignerOl;
    if (name == "wigner-cac") return MriMethod::WignerCac;
    if (name == "positive-p") return MriMethod::PositiveP;
    throw InvalidArgument("unknown MRI method '" + name + "'");
}

MriRunConfig MriRunConfig::defaults() {
    MriRunConfig c;
    c.cac.model = Model::WignerCac;
    c.cac.iterations = 12;
    c.cac.eta_init = c.cac.eta_end = 0.022;
    c.cac.velo = 11;
    c.cac.sde = SdeParams::defaults(Model::WignerCac);
    c.cac.sde.K = 0.01;
    c.cac.sde.d = 0.4;
    c.cac.cdp = CdpSolver::Cgd;
    c.cac.r_init = RInit::Given;

    c.ol.model = Model::WignerOl;
    c.ol.iterations = 32;
    c.ol.eta_init = c.ol.eta_end = 0.011;
    c.ol.velo = 31;
    c.ol.sde = SdeParams::defaults(Model::WignerOl);
    c.ol.cdp = CdpSolver::Cgd;
    c.ol.r_init = RInit::Given;
    return c;
}

MriReconstruction mri_reconstruct(const MriProblem& problem, const SparseImage& source, MriMethod method,
                                  const MriRunConfig& cfg, const Vector* lasso) {
    require(problem.coupling != nullptr, "mri_reconstruct: problem not built");
    require(source.side() == problem.side, "mri_reconstruct: source size mismatch");
    const auto start = std::chrono::steady_clock::now();
    MriReconstruction out;
    out.method = method;

    Vector init;
    if (lasso != nullptr) {
        require(lasso->size() == problem.size(), "mri_reconstruct: LASSO solution length mismatch");
        init = *lasso;
    } else {
        init = lasso_ista(*problem.coupling, problem.h_z, cfg.lasso_lam, cfg.lasso_tol, cfg.lasso_max_iter).x;
    }

    if (method == MriMethod::Lasso) {
        out.R = init;
        out.sigma.resize(init.size());
        for (Index r = 0; r < init.size(); ++r) out.sigma(r) = init(r) != 0.0;
    } else {
        AltMinConfig run = method == MriMethod::WignerOl ? cfg.ol : cfg.cac;
        run.model = method == MriMethod::WignerOl ? Model::WignerOl
                    : method == MriMethod::WignerCac ? Model::WignerCac
                                                     : Model::PositiveP;
        run.r_init = RInit::Given;
        run.r_given = init;
        const RunTrace trace = run_alt_min(problem.qubo(run.eta_init), run);
        out.R = trace.R;
        out.sigma = trace.sigma;
        out.iterations = static_cast<int>(trace.records.size());
    }
    out.image = reconstruct_image(out.R, out.sigma, problem.side);
    out.rmse = pixel_rmse(out.image, source.pixels);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---- Images -----------------------------------------------------------------

namespace {

std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

long pgm_number(std::istream& in, const char* what) {
    const std::string tok = pgm_token(in);
    require(!tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }),
            std::string("read_pgm: bad ") + what);
    return std::stol(tok);
}

} // namespace

Matrix read_pgm(std::istream& in) {
    require(pgm_token(in) == "P5", "read_pgm: not a binary PGM (P5)");
    const long w = pgm_number(in, "width");
    const long h = pgm_number(in, "height");
    const long maxval = pgm_number(in, "maxval");
    require(w > 0 && h > 0, "read_pgm: empty image");
    require(maxval >= 1 && maxval <= 65535, "read_pgm: maxval out of range");
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w * h * bytes));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::size_t>(in.gcount()) == buf.size(), "read_pgm: truncated pixel data");
    Matrix img(h, w);
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j) {
            const std::size_t at = static_cast<std::size_t>((i * w + j) * bytes);
            const unsigned v = bytes == 1 ? buf[at] : (static_cast<unsigned>(buf[at]) << 8) | buf[at + 1];
            require(v <= static_cast<unsigned>(maxval), "read_pgm: sample exceeds maxval");
            img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
        }
    return img;
}

Matrix read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "read_pgm: cannot open " + path.string());
    return read_pgm(in);
}

void write_pgm(std::ostream& out, const Matrix& image) {
    out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(image.size()));
    std::size_t at = 0;
    for (Index i = 0; i < image.rows(); ++i)
        for (Index j = 0; j < image.cols(); ++j) {
            const double v = std::isfinite(image(i, j)) ? std::clamp(image(i, j), 0.0, 1.0) : 0.0;
            buf[at++] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_pgm(const std::filesystem::path& path, const Matrix& image) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "write_pgm: cannot open " + path.string());
    write_pgm(out, image);
    require(static_cast<bool>(out), "write_pgm: write failed for " + path.string());
}

Matrix phantom(Index side) {
    require(side >= 1, "phantom: side must be >= 1");
    struct Ellipse {
        double value, a, b, x0, y0, phi_deg;
    };
    static constexpr std::array<Ellipse, 10> kEllipses = {{
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
        {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
        {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
        {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
        {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
        {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
        {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
        {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
        {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
    }};
    Matrix img = Matrix::Zero(side, side);
    const double pi = std::acos(-1.0);
    for (Index i = 0; i < side; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(side);
        for (Index j = 0; j < side; ++j) {
            const double x = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(side) - 1.0;
            double v = 0.0;
            for (const auto& e : kEllipses) {
                const double phi = e.phi_deg * pi / 180.0;
                const double dx = x - e.x0, dy = y - e.y0;
                const double u = dx * std::cos(phi) + dy * std::sin(phi);
                const double w = -dx * std::sin(phi) + dy * std::cos(phi);
                if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.value;
            }
            // Smooth shading so the Haar coefficients are dense; a faint
            // background keeps the outside from being exactly zero.
            if (v > 0.0) v += 0.04 * std::sin(3.1 * x + 1.7 * y) + 0.03 * std::cos(5.3 * x - 2.9 * y);
            v += 0.02 + 0.01 * std::sin(2.3 * x - 1.3 * y + 0.4);
            img(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

void write_coefficients_csv(std::ostream& out, const Vector& coeffs) {
    out << "r,coefficient\n";
    out.precision(17);
    for (Index r = 0; r < coeffs.size(); ++r) out << r << ',' << coeffs(r) << '\n';
}

} // namespace cimcs
