#pragma once

#include "cimcs/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace cimcs {

/// A compressed-sensing instance y = A (x ∘ ξ) + w.
///
/// `x` is drawn on every entry; `xi` selects the active ones. `alpha` and `a`
/// hold the realised ratios M/N and popcount(xi)/N, which differ from the
/// requested values by rounding.
struct Instance {
    Matrix A;  // M x N
    Vector y;  // M
    Vector x;  // N
    Support xi; // N
    Index N = 0;
    Index M = 0;
    double alpha = 0.0;
    double a = 0.0;
    double nu = 0.0;
    std::uint64_t seed = 0;

    /// x ∘ ξ
    Vector signal() const { return x.cwiseProduct(as_real(xi)); }
};

struct Metrics {
    double rmse = 0.0;
    double direction_cosine = 0.0;
    double hamming_loss = 0.0;
    bool degenerate_cosine = false;
};

/// Direction cosine with a flag for the all-zero case.
struct Cosine {
    double value = 0.0;
    bool degenerate = false;
};

/// round-half-away-from-zero of `ratio * n`.
Index rounded_count(double ratio, Index n);

/// Synthetic instance: A_ij ~ N(0, 1/M), x_r ~ N(0, 1), exactly round(aN)
/// support positions, w ~ N(0, nu^2). Each of {A, x, xi, w} uses its own
/// derived RNG stream.
Instance gen_instance(Index N, double alpha, double a, double nu, std::uint64_t seed);

double rmse(const Vector& R, const Support& sigma, const Vector& x, const Support& xi);
Cosine direction_cosine(const Support& xi, const Support& sigma);
double hamming_loss(const Support& sigma, const Support& xi);

Metrics evaluate(const Vector& R, const Support& sigma, const Vector& x, const Support& xi);

// Persistence. Binary layout (little-endian):
//   "CIMCSINS" | u32 version | u64 N | u64 M | f64 alpha | f64 a | f64 nu | u64 seed
//   | f64 A[M*N] row-major | f64 y[M] | f64 x[N] | u8 xi[N] | u32 crc32(all preceding bytes)
void save_instance(const Instance& inst, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);
void write_instance_binary(const Instance& inst, std::ostream& out);
Instance read_instance_binary(std::istream& in);

/// Inspection export: one row per signal entry (r, x, xi, column norm) followed
/// by the observation block (k, y).
void export_instance_csv(const Instance& inst, std::ostream& out);

/// CRC-32 of a serialised instance file (the trailing checksum).
std::uint32_t instance_checksum(const std::filesystem::path& path);

} // namespace cimcs
