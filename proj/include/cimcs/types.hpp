#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace cimcs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Binary indicator vector (0/1 entries), e.g. a support.
using Support = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

inline Vector as_real(const Support& s) { return s.cast<double>(); }

inline Index popcount(const Support& s) { return s.cast<Index>().sum(); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Heaviside step with H(0) = 0.
inline std::uint8_t heaviside(double u) { return u > 0.0 ? 1 : 0; }

} // namespace cimcs
