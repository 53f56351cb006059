#include "cimcs/instance.hpp"

#include "cimcs/error.hpp"
#include "cimcs/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <vector>

namespace cimcs {

namespace {

constexpr char kMagic[8] = {'C', 'I', 'M', 'C', 'S', 'I', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

enum Stream : std::uint64_t { kStreamA = 1, kStreamX = 2, kStreamXi = 3, kStreamW = 4 };

void check_lengths(Index n, std::initializer_list<Index> others) {
    for (auto o : others)
        if (o != n) throw InvalidArgument("vector length mismatch");
}

// Little-endian byte sink that also feeds the running CRC.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        crc_ = crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
    }
    template <class T>
    void scalar(T v) {
        static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
        bytes(&v, sizeof v);
    }
    void doubles(const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) scalar(p[i]);
    }
    uLong crc() const { return crc_; }

private:
    std::ostream& out_;
    uLong crc_ = crc32(0L, Z_NULL, 0);
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw InvalidArgument("instance file truncated");
        crc_ = crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
    }
    template <class T>
    T scalar() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }
    void doubles(double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = scalar<double>();
    }
    uLong crc() const { return crc_; }

private:
    std::istream& in_;
    uLong crc_ = crc32(0L, Z_NULL, 0);
};

} // namespace

Index rounded_count(double ratio, Index n) {
    return static_cast<Index>(std::round(ratio * static_cast<double>(n)));
}

Instance gen_instance(Index N, double alpha, double a, double nu, std::uint64_t seed) {
    if (!(N >= 2)) throw InvalidArgument("gen_instance: N must be >= 2");
    if (!std::isfinite(alpha) || !(alpha > 0.0 && alpha <= 1.0))
        throw InvalidArgument("gen_instance: alpha must lie in (0, 1]");
    if (!std::isfinite(a) || !(a > 0.0 && a <= 1.0)) throw InvalidArgument("gen_instance: a must lie in (0, 1]");
    if (!std::isfinite(nu) || nu < 0.0) throw InvalidArgument("gen_instance: nu must be finite and >= 0");

    Instance inst;
    inst.N = N;
    inst.M = std::max<Index>(1, rounded_count(alpha, N));
    const Index k = std::max<Index>(1, rounded_count(a, N));
    inst.alpha = static_cast<double>(inst.M) / static_cast<double>(N);
    inst.a = static_cast<double>(k) / static_cast<double>(N);
    inst.nu = nu;
    inst.seed = seed;

    const double a_std = 1.0 / std::sqrt(static_cast<double>(inst.M));
    Rng rng_a(derive_seed(seed, {kStreamA}));
    inst.A.resize(inst.M, N);
    // Row-major fill order, so the stream layout does not depend on Eigen's storage order.
    for (Index i = 0; i < inst.M; ++i)
        for (Index j = 0; j < N; ++j) inst.A(i, j) = a_std * rng_a.normal();

    Rng rng_x(derive_seed(seed, {kStreamX}));
    inst.x.resize(N);
    for (Index r = 0; r < N; ++r) inst.x(r) = rng_x.normal();

    // Partial Fisher-Yates: the first k slots of the permutation are the support.
    Rng rng_xi(derive_seed(seed, {kStreamXi}));
    std::vector<Index> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Index>(rng_xi.below(static_cast<std::uint64_t>(N - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    inst.xi = Support::Zero(N);
    for (Index i = 0; i < k; ++i) inst.xi(perm[static_cast<std::size_t>(i)]) = 1;

    Rng rng_w(derive_seed(seed, {kStreamW}));
    inst.y = inst.A * inst.signal();
    for (Index kk = 0; kk < inst.M; ++kk) inst.y(kk) += nu * rng_w.normal();
    return inst;
}

double rmse(const Vector& R, const Support& sigma, const Vector& x, const Support& xi) {
    check_lengths(R.size(), {sigma.size(), x.size(), xi.size()});
    if (R.size() == 0) throw InvalidArgument("rmse: empty vectors");
    const Vector diff = R.cwiseProduct(as_real(sigma)) - x.cwiseProduct(as_real(xi));
    return std::sqrt(diff.squaredNorm() / static_cast<double>(R.size()));
}

Cosine direction_cosine(const Support& xi, const Support& sigma) {
    check_lengths(xi.size(), {sigma.size()});
    const auto n_xi = static_cast<double>(popcount(xi));
    const auto n_sigma = static_cast<double>(popcount(sigma));
    if (n_xi == 0.0 || n_sigma == 0.0) return {0.0, true};
    const auto overlap = static_cast<double>(xi.cast<Index>().dot(sigma.cast<Index>()));
    return {overlap / std::sqrt(n_xi * n_sigma), false};
}

double hamming_loss(const Support& sigma, const Support& xi) {
    check_lengths(sigma.size(), {xi.size()});
    if (sigma.size() == 0) throw InvalidArgument("hamming_loss: empty vectors");
    Index mismatches = 0;
    for (Index r = 0; r < sigma.size(); ++r) mismatches += (sigma(r) != xi(r)) ? 1 : 0;
    return static_cast<double>(mismatches) / static_cast<double>(sigma.size());
}

Metrics evaluate(const Vector& R, const Support& sigma, const Vector& x, const Support& xi) {
    Metrics m;
    m.rmse = rmse(R, sigma, x, xi);
    const auto c = direction_cosine(xi, sigma);
    m.direction_cosine = c.value;
    m.degenerate_cosine = c.degenerate;
    m.hamming_loss = hamming_loss(sigma, xi);
    return m;
}

void write_instance_binary(const Instance& inst, std::ostream& out) {
    Writer w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.scalar<std::uint32_t>(kVersion);
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(inst.N));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(inst.M));
    w.scalar<double>(inst.alpha);
    w.scalar<double>(inst.a);
    w.scalar<double>(inst.nu);
    w.scalar<std::uint64_t>(inst.seed);
    for (Index i = 0; i < inst.M; ++i)
        for (Index j = 0; j < inst.N; ++j) w.scalar<double>(inst.A(i, j));
    w.doubles(inst.y.data(), static_cast<std::size_t>(inst.M));
    w.doubles(inst.x.data(), static_cast<std::size_t>(inst.N));
    w.bytes(inst.xi.data(), static_cast<std::size_t>(inst.N));
    const auto crc = static_cast<std::uint32_t>(w.crc());
    out.write(reinterpret_cast<const char*>(&crc), sizeof crc);
    if (!out) throw std::runtime_error("failed writing instance");
}

Instance read_instance_binary(std::istream& in) {
    Reader rd(in);
    char magic[8];
    rd.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InvalidArgument("not an instance file (bad magic)");
    const auto version = rd.scalar<std::uint32_t>();
    if (version != kVersion) throw InvalidArgument("unsupported instance file version " + std::to_string(version));
    Instance inst;
    inst.N = static_cast<Index>(rd.scalar<std::uint64_t>());
    inst.M = static_cast<Index>(rd.scalar<std::uint64_t>());
    if (inst.N <= 0 || inst.M <= 0 || inst.N > (Index{1} << 20) || inst.M > (Index{1} << 20))
        throw InvalidArgument("instance file has implausible dimensions");
    inst.alpha = rd.scalar<double>();
    inst.a = rd.scalar<double>();
    inst.nu = rd.scalar<double>();
    inst.seed = rd.scalar<std::uint64_t>();
    inst.A.resize(inst.M, inst.N);
    for (Index i = 0; i < inst.M; ++i)
        for (Index j = 0; j < inst.N; ++j) inst.A(i, j) = rd.scalar<double>();
    inst.y.resize(inst.M);
    rd.doubles(inst.y.data(), static_cast<std::size_t>(inst.M));
    inst.x.resize(inst.N);
    rd.doubles(inst.x.data(), static_cast<std::size_t>(inst.N));
    inst.xi.resize(inst.N);
    rd.bytes(inst.xi.data(), static_cast<std::size_t>(inst.N));
    const auto expected = static_cast<std::uint32_t>(rd.crc());
    std::uint32_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (in.gcount() != sizeof stored) throw InvalidArgument("instance file truncated");
    if (stored != expected) throw InvalidArgument("instance file checksum mismatch");
    for (Index r = 0; r < inst.N; ++r)
        if (inst.xi(r) > 1) throw InvalidArgument("instance support is not binary");
    if (!inst.A.allFinite() || !inst.y.allFinite()) throw InvalidArgument("instance contains non-finite values");
    return inst;
}

void save_instance(const Instance& inst, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_instance_binary(inst, out);
}

Instance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_instance_binary(in);
}

std::uint32_t instance_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto size = static_cast<std::streamoff>(in.tellg());
    if (size < 4) throw InvalidArgument("instance file truncated");
    in.seekg(size - 4);
    std::uint32_t crc = 0;
    in.read(reinterpret_cast<char*>(&crc), sizeof crc);
    return crc;
}

void export_instance_csv(const Instance& inst, std::ostream& out) {
    out << std::setprecision(17);
    out << "# N=" << inst.N << " M=" << inst.M << " alpha=" << inst.alpha << " a=" << inst.a << " nu=" << inst.nu
        << " seed=" << inst.seed << "\n";
    out << "r,x,xi,col_norm\n";
    for (Index r = 0; r < inst.N; ++r)
        out << r << ',' << inst.x(r) << ',' << int(inst.xi(r)) << ',' << inst.A.col(r).squaredNorm() << '\n';
    out << "k,y\n";
    for (Index k = 0; k < inst.M; ++k) out << k << ',' << inst.y(k) << '\n';
}

} // namespace cimcs
