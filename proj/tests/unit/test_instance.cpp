#include "cimcs/error.hpp"
#include "cimcs/instance.hpp"
#include "cimcs/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace cimcs;
using namespace testutil;

namespace {

Support sup(std::initializer_list<int> v) {
    Support s(static_cast<Index>(v.size()));
    Index i = 0;
    for (int b : v) s(i++) = static_cast<std::uint8_t>(b);
    return s;
}

double sample_var(const double* p, std::size_t n, double& mean) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    mean = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (p[i] - mean) * (p[i] - mean);
    return v / static_cast<double>(n - 1);
}

} // namespace

TEST_CASE("rng: reproducible streams and moments") {
    Rng a(5), b(5), c(6);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));

    Rng r(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(r.below(7) < 7u);
    }
}

TEST_CASE("gen_instance: N=500 alpha=a=0.6 dimensions and A variance") {
    const Instance inst = gen_instance(500, 0.6, 0.6, 0.0, 7);
    CHECK(inst.M == 300);
    CHECK(inst.A.rows() == 300);
    CHECK(inst.A.cols() == 500);
    CHECK(popcount(inst.xi) == 300);
    double mean = 0.0;
    const double var = sample_var(inst.A.data(), static_cast<std::size_t>(inst.A.size()), mean);
    CHECK(std::abs(var - 1.0 / 300) < 0.1 / 300);
    // tighter generator statistics over 1.5e5 entries
    CHECK(std::abs(var - 1.0 / 300) < 0.05 / 300);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(1.0 / (300.0 * 150000.0)));
    CHECK(inst.y.isApprox(inst.A * inst.signal(), 1e-12));
}

TEST_CASE("gen_instance: x and noise statistics") {
    const Instance inst = gen_instance(2000, 1.0, 0.5, 0.3, 9);
    double mean = 0.0;
    // x over many instances to pass 1e5 samples
    std::vector<double> xs;
    std::vector<double> ws;
    for (std::uint64_t s = 0; s < 60; ++s) {
        const Instance k = gen_instance(2000, 0.5, 0.5, 0.3, 100 + s);
        xs.insert(xs.end(), k.x.data(), k.x.data() + k.x.size());
        const Vector w = k.y - k.A * k.signal();
        ws.insert(ws.end(), w.data(), w.data() + w.size());
    }
    const double vx = sample_var(xs.data(), xs.size(), mean);
    CHECK(std::abs(vx - 1.0) < 0.05);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(1.0 / static_cast<double>(xs.size())));
    const double vw = sample_var(ws.data(), ws.size(), mean);
    CHECK(std::abs(vw - 0.09) < 0.05 * 0.09);
    CHECK(inst.nu == 0.3);
}

TEST_CASE("gen_instance: full support noiseless gives y = A x") {
    const Instance inst = gen_instance(10, 1.0, 1.0, 0.0, 1);
    CHECK(popcount(inst.xi) == 10);
    CHECK(inst.M == 10);
    const Vector ax = inst.A * inst.x;
    for (Index k = 0; k < 10; ++k) CHECK(inst.y(k) == doctest::Approx(ax(k)).epsilon(1e-15));
}

TEST_CASE("gen_instance: deterministic under seed") {
    const Instance a = gen_instance(50, 0.6, 0.3, 0.1, 42);
    const Instance b = gen_instance(50, 0.6, 0.3, 0.1, 42);
    CHECK(a.A == b.A);
    CHECK(a.x == b.x);
    CHECK(a.xi == b.xi);
    CHECK(a.y == b.y);
    const Instance c = gen_instance(50, 0.6, 0.3, 0.1, 43);
    CHECK(a.A != c.A);
}

TEST_CASE("gen_instance: popcount is round(aN) for a grid of (N, a)") {
    for (Index N : {2, 3, 7, 10, 33, 101, 250})
        for (double a : {0.01, 0.1, 0.25, 0.5, 0.55, 0.9, 1.0}) {
            if (rounded_count(a, N) == 0) continue;
            const Instance inst = gen_instance(N, 1.0, a, 0.0, static_cast<std::uint64_t>(N * 1000 + a * 100));
            CHECK(popcount(inst.xi) == rounded_count(a, N));
            CHECK(inst.M == N);
        }
    CHECK(rounded_count(0.5, 5) == 3);
    CHECK(rounded_count(0.6, 500) == 300);
    CHECK(rounded_count(0.25, 10) == 3);
}

TEST_CASE("gen_instance: parameter validation") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gen_instance(1, 0.5, 0.5, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, 0.0, 0.5, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, 1.5, 0.5, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, 0.5, 0.0, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, 0.5, 0.5, -1.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, nan, 0.5, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_instance(10, 0.5, 0.5, nan, 1), InvalidArgument);
}

TEST_CASE("rmse examples") {
    const Vector x = random_vector(4, 1);
    const Support xi = sup({1, 0, 1, 1});
    CHECK(rmse(x, xi, x, xi) == 0.0);
    Vector R = x;
    R(0) += 1.0;
    CHECK(rmse(R, xi, x, xi) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(rmse(Vector::Zero(3), xi, x, xi), InvalidArgument);
}

TEST_CASE("direction cosine examples") {
    CHECK(direction_cosine(sup({1, 1, 0, 0}), sup({1, 1, 0, 0})).value == 1.0);
    CHECK(direction_cosine(sup({1, 1, 0, 0}), sup({0, 0, 1, 1})).value == 0.0);
    CHECK(direction_cosine(sup({1, 1, 0, 0}), sup({1, 0, 1, 0})).value == doctest::Approx(0.5));
    const Cosine d = direction_cosine(sup({1, 1, 0, 0}), sup({0, 0, 0, 0}));
    CHECK(d.value == 0.0);
    CHECK(d.degenerate);
    CHECK_FALSE(direction_cosine(sup({1, 0}), sup({1, 0})).degenerate);
}

TEST_CASE("hamming loss examples") {
    const Support xi = sup({1, 0, 1, 0});
    CHECK(hamming_loss(xi, xi) == 0.0);
    CHECK(hamming_loss(sup({1, 1, 1, 0}), xi) == 0.25);
    CHECK(hamming_loss(sup({0, 1, 0, 1}), xi) == 1.0);
    CHECK_THROWS_AS(hamming_loss(sup({1, 0}), xi), InvalidArgument);
}

TEST_CASE("metrics agree with an independent re-evaluation on 100 random inputs") {
    for (unsigned t = 0; t < 100; ++t) {
        const Index n = 100;
        const Vector R = random_vector(n, 3 * t + 1);
        const Vector x = random_vector(n, 3 * t + 2);
        const Support s = random_support(n, 7 * t + 1, 0.3);
        const Support xi = random_support(n, 7 * t + 2, 0.4);
        double se = 0.0, both = 0.0, ns = 0.0, nxi = 0.0, mism = 0.0;
        for (Index r = 0; r < n; ++r) {
            const double d = R(r) * s(r) - x(r) * xi(r);
            se += d * d;
            both += s(r) * xi(r);
            ns += s(r);
            nxi += xi(r);
            mism += s(r) != xi(r) ? 1.0 : 0.0;
        }
        const Metrics m = evaluate(R, s, x, xi);
        CHECK(std::abs(m.rmse - std::sqrt(se / n)) < 1e-12);
        CHECK(std::abs(m.direction_cosine - both / std::sqrt(ns * nxi)) < 1e-12);
        CHECK(std::abs(m.hamming_loss - mism / n) < 1e-12);
        CHECK((m.direction_cosine >= 0.0 && m.direction_cosine <= 1.0));
    }
}

TEST_CASE("instance serialisation round trip is bit-identical") {
    const Instance a = gen_instance(37, 0.7, 0.3, 0.05, 99);
    std::stringstream ss;
    write_instance_binary(a, ss);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 8) == "CIMCSINS");
    const Instance b = read_instance_binary(ss);
    CHECK(a.A == b.A);
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
    CHECK(a.xi == b.xi);
    CHECK(a.N == b.N);
    CHECK(a.M == b.M);
    CHECK(a.alpha == b.alpha);
    CHECK(a.a == b.a);
    CHECK(a.nu == b.nu);
    CHECK(a.seed == b.seed);

    std::stringstream again;
    write_instance_binary(b, again);
    CHECK(again.str() == bytes);

    // corrupt one payload byte: checksum must catch it
    std::string bad = bytes;
    bad[100] = static_cast<char>(bad[100] ^ 0x5A);
    std::stringstream bs(bad);
    CHECK_THROWS(read_instance_binary(bs));

    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS(read_instance_binary(truncated));

    const auto path = std::filesystem::temp_directory_path() / "cimcs_test_instance.bin";
    save_instance(a, path);
    const Instance c = load_instance(path);
    CHECK(c.A == a.A);
    CHECK(instance_checksum(path) == instance_checksum(path));
    std::filesystem::remove(path);
}

TEST_CASE("instance csv export") {
    const Instance a = gen_instance(5, 0.6, 0.4, 0.0, 3);
    std::ostringstream out;
    export_instance_csv(a, out);
    const std::string s = out.str();
    std::size_t lines = 0;
    for (char ch : s) lines += ch == '\n';
    CHECK(lines >= static_cast<std::size_t>(a.N + a.M));
}
