#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "jfr/io.hpp"
#include "jfr/rng.hpp"
#include "jfr/tensor.hpp"
#include "oracles.hpp"

using jfr::Tensor;

namespace {

// Runs f and checks that it throws with a message containing every fragment.
template <class F>
void expect_throw_containing(F&& f, std::initializer_list<const char*> fragments) {
    bool threw = false;
    std::string msg;
    try {
        f();
    } catch (const std::exception& e) {
        threw = true;
        msg = e.what();
    }
    REQUIRE(threw);
    for (const char* frag : fragments) {
        INFO("message: " << msg);
        CHECK(msg.find(frag) != std::string::npos);
    }
}

// Independent copy of the splitmix64 finalizer, kept in the test on purpose.
std::uint64_t mix_oracle(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

TEST_CASE("tensor construction and invariants") {
    Tensor t({2, 3});
    CHECK(t.rank() == 2);
    CHECK(t.size() == 6);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

    Tensor u({2, 2}, {1, 2, 3, 4});
    CHECK(u(1, 0) == 3.0);

    CHECK_THROWS_AS(Tensor({2, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);

    CHECK(Tensor::full({3}, 7.5)[2] == 7.5);
    Tensor v = Tensor::of({1, 2});
    CHECK(v.rank() == 1);
    CHECK(v[1] == 2.0);
}

TEST_CASE("flat index round-trip is the row-major layout") {
    Tensor t({2, 3, 4});
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        const auto coords = t.coords_of(flat);
        CHECK(t.flat_index(coords) == flat);
    }
    // innermost axis contiguous
    CHECK(t.flat_index(std::vector<std::size_t>{0, 0, 1}) == 1);
    CHECK(t.flat_index(std::vector<std::size_t>{0, 1, 0}) == 4);
    CHECK(t.flat_index(std::vector<std::size_t>{1, 0, 0}) == 12);
    CHECK_THROWS(t.flat_index(std::vector<std::size_t>{2, 0, 0}));
}

TEST_CASE("reshape preserves data") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = t.reshaped({3, 2});
    CHECK(r(2, 1) == 6.0);
    CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
}

TEST_CASE("elementwise ops") {
    CHECK(jfr::add(Tensor::of({1, 2}), Tensor::of({3, 4}))[0] == 4.0);
    CHECK(jfr::add(Tensor::of({1, 2}), Tensor::of({3, 4}))[1] == 6.0);
    Tensor z = jfr::scale(Tensor::of({1, 2}), 0.0);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);

    jfr::Rng rng(3);
    Tensor t = rng.uniform_tensor({4, 5}, -2.0, 2.0);
    Tensor d = jfr::sub(t, t);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 0.0);

    expect_throw_containing(
        [] { jfr::add(Tensor({2, 3}), Tensor({3, 2})); }, {"[2,3]", "[3,2]"});

    Tensor y = Tensor::of({1, 1});
    jfr::axpy(y, 2.0, Tensor::of({3, 4}));
    CHECK(y[0] == 7.0);
    CHECK(y[1] == 9.0);

    CHECK(jfr::mul(Tensor::of({2, 3}), Tensor::of({4, 5}))[1] == 15.0);
    CHECK(jfr::sub(Tensor::of({2, 3}), 1.0)[0] == 1.0);
}

TEST_CASE("matmul basics and identity") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor v({2, 1}, {1, 1});
    Tensor av = jfr::matmul(a, v);
    CHECK(av(0, 0) == 3.0);
    CHECK(av(1, 0) == 7.0);

    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
    jfr::Rng rng(11);
    Tensor b = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    Tensor ib = jfr::matmul(eye, b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(ib[i] == b[i]);  // exact

    CHECK_THROWS_AS(jfr::matmul(Tensor({2, 3}), Tensor({2, 3})), std::invalid_argument);
    CHECK_THROWS_AS(jfr::matmul(Tensor({2}), Tensor({2, 2})), std::invalid_argument);
}

TEST_CASE("matmul matches the triple-loop oracle") {
    jfr::Rng rng(17);
    for (int rep = 0; rep < 25; ++rep) {
        Tensor a = rng.uniform_tensor({5, 7}, -1.0, 1.0);
        Tensor b = rng.uniform_tensor({7, 3}, -1.0, 1.0);
        Tensor got = jfr::matmul(a, b);
        Tensor want = oracle::matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got[i] - want[i]) < 1e-12);
        }
    }
}

TEST_CASE("transpose") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor at = jfr::transpose(a);
    CHECK(at.dim(0) == 3);
    CHECK(at(0, 1) == 4.0);
    Tensor back = jfr::transpose(at);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(back[i] == a[i]);
}

TEST_CASE("reductions") {
    CHECK(jfr::sum(Tensor::of({1, 2, 3})) == 6.0);
    CHECK(jfr::argmax(Tensor::of({0, 5, 5})) == 1);  // lowest index on tie

    // mean of 1000 seeded uniforms vs a streaming oracle
    jfr::Rng rng(23);
    std::vector<double> vals(1000);
    for (auto& v : vals) v = rng.next_uniform();
    Tensor t({vals.size()}, vals);
    CHECK(std::abs(jfr::mean(t) - oracle::streaming_mean(vals)) < 1e-12);

    Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor s0 = jfr::sum(m, 0);
    CHECK(s0.dim(0) == 3);
    CHECK(s0[0] == 5.0);
    CHECK(s0[2] == 9.0);
    Tensor s1 = jfr::sum(m, 1);
    CHECK(s1[0] == 6.0);
    CHECK(s1[1] == 15.0);
    CHECK(jfr::mean(m, 1)[1] == 5.0);

    Tensor am({2, 3}, {7, 7, 1, 0, 9, 9});
    Tensor a1 = jfr::argmax(am, 1);
    CHECK(a1[0] == 0.0);  // tie toward lowest
    CHECK(a1[1] == 1.0);

    CHECK_THROWS_AS(jfr::sum(m, 2), std::invalid_argument);
    CHECK_THROWS_AS(jfr::mean(m, 5), std::invalid_argument);
}

TEST_CASE("rng raw stream matches the splitmix64 recurrence") {
    const std::uint64_t golden = 0x9E3779B97F4A7C15ull;
    const std::uint64_t seed = 0xDEADBEEFCAFEF00Dull;
    jfr::Rng rng(seed);
    for (std::uint64_t i = 0; i < 64; ++i) {
        CHECK(rng.next_u64() == mix_oracle(seed + (i + 1) * golden));
    }
}

TEST_CASE("rng determinism and split independence") {
    jfr::Rng a(9), b(9);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    jfr::Rng parent(5);
    const std::uint64_t before = parent.counter();
    jfr::Rng s1 = parent.split(1);
    jfr::Rng s2 = parent.split(2);
    CHECK(parent.counter() == before);  // split does not advance the parent
    CHECK(s1.next_u64() != s2.next_u64());

    jfr::Rng s1again = parent.split(1);
    jfr::Rng s1ref = jfr::Rng(5).split(1);
    CHECK(s1again.next_u64() == s1ref.next_u64());
}

TEST_CASE("rng normal draws follow Box-Muller over the raw stream") {
    jfr::Rng rng(31), raw(31);
    for (int i = 0; i < 32; ++i) {
        const double got = rng.next_normal();
        const std::uint64_t w1 = raw.next_u64();
        const std::uint64_t w2 = raw.next_u64();
        const double u1 = (static_cast<double>(w1 >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(w2 >> 11) * 0x1.0p-53;
        const double want = std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(2.0 * std::numbers::pi * u2);
        CHECK(got == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("rng uniform and next_below ranges") {
    jfr::Rng rng(41);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_uniform(-3.0, -1.0);
        CHECK(u >= -3.0);
        CHECK(u < -1.0);
    }
    std::size_t counts[3] = {0, 0, 0};
    for (int i = 0; i < 3000; ++i) counts[rng.next_below(3)]++;
    for (std::size_t c : counts) {
        CHECK(c > 800);
        CHECK(c < 1200);
    }
    CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("normal_tensor statistics and degenerate cases") {
    jfr::Rng zero_sd(1);
    Tensor c = zero_sd.normal_tensor({10}, 2.5, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == 2.5);

    Tensor t1 = jfr::Rng(7).normal_tensor({100}, 0.0, 1.0);
    Tensor t2 = jfr::Rng(7).normal_tensor({100}, 0.0, 1.0);
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i] == t2[i]);

    Tensor big = jfr::Rng(42).normal_tensor({100000}, 0.0, 1.0);
    const double m = jfr::mean(big);
    double var = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i) var += (big[i] - m) * (big[i] - m);
    var /= static_cast<double>(big.size());
    const double sd = std::sqrt(var);
    CHECK(std::abs(m) < 0.01);
    CHECK(sd > 0.99);
    CHECK(sd < 1.01);

    CHECK_THROWS_AS(jfr::Rng(1).normal_tensor({2}, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> w = v;
    jfr::Rng a(13), b(13);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::sort(w.begin(), w.end());
    CHECK(w == std::vector<int>({1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST_CASE("tensor serialization round-trip") {
    jfr::Rng rng(55);
    Tensor t = rng.uniform_tensor({3, 4, 5}, -10.0, 10.0);
    std::stringstream ss;
    jfr::io::write_tensor(ss, t);
    Tensor back = jfr::io::read_tensor(ss, "roundtrip");
    CHECK(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);

    const std::string path = "/tmp/jfr_test_tensor.bin";
    jfr::io::save_tensor(path, t);
    Tensor loaded = jfr::io::load_tensor(path);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(loaded[i] == t[i]);
    std::remove(path.c_str());
}

TEST_CASE("tensor deserialization rejects malformed streams") {
    {
        std::stringstream ss;
        ss << "JUNKxxxxxxxxxxxxxxxx";
        expect_throw_containing([&] { jfr::io::read_tensor(ss, "ctx"); },
                                {"ctx", "bad magic"});
    }
    {
        // version 2 is unknown
        std::stringstream ss;
        jfr::io::write_magic(ss, "JTNS");
        jfr::io::write_u32(ss, 2);
        jfr::io::write_u32(ss, 1);
        jfr::io::write_u64(ss, 1);
        const double v = 1.0;
        ss.write(reinterpret_cast<const char*>(&v), sizeof v);
        expect_throw_containing([&] { jfr::io::read_tensor(ss, ""); }, {"version"});
    }
    {
        // truncated payload
        std::stringstream ss;
        jfr::io::write_tensor(ss, Tensor({2, 2}, {1, 2, 3, 4}));
        std::string buf = ss.str();
        buf.resize(buf.size() - 5);
        std::stringstream cut(buf);
        expect_throw_containing([&] { jfr::io::read_tensor(cut, "file.bin"); },
                                {"file.bin", "truncated"});
    }
    CHECK_THROWS_AS(jfr::io::write_tensor(std::cout, Tensor()), std::invalid_argument);
}
