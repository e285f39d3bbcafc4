// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "iiacheck/rng.hpp"

TEST_SUITE_BEGIN("rng");

TEST_CASE("same seed reproduces the sequence") {
  iia::RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  iia::RngStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("derived substreams are stable and independent of consumption") {
  iia::RngStream parent(7);
  const std::uint64_t before = parent.derive("child").next_u64();
  for (int i = 0; i < 50; ++i) parent.next_u64();  // consume the parent
  const std::uint64_t after = parent.derive("child").next_u64();
  CHECK(before == after);
  CHECK(parent.derive("child").next_u64() != parent.derive("other").next_u64());
  CHECK(parent.derive(std::uint64_t{0}).next_u64() !=
        parent.derive(std::uint64_t{1}).next_u64());
}

TEST_CASE("uniform lies in [0,1) with sane mean") {
  iia::RngStream rng(11);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("normal moments") {
  iia::RngStream rng(12);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("categorical frequencies follow the weights") {
  iia::RngStream rng(13);
  const std::array<double, 3> w{1.0, 2.0, 7.0};
  std::array<int, 3> counts{};
  const int n = 50000;
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(rng.categorical(w))]++;
  for (int k = 0; k < 3; ++k) {
    const double p = w[static_cast<std::size_t>(k)] / 10.0;
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] / double(n) - p) < 4 * se);
  }
}

TEST_CASE("categorical rejects all-zero weights") {
  iia::RngStream rng(1);
  const std::array<double, 2> w{0.0, 0.0};
  CHECK_THROWS_AS((void)rng.categorical(w), std::invalid_argument);
}

TEST_CASE("multinomial counts sum to n") {
  iia::RngStream rng(14);
  const std::array<double, 4> w{0.1, 0.2, 0.3, 0.4};
  std::array<int, 4> out{};
  rng.multinomial(w, 123, out);
  int total = 0;
  for (int c : out) {
    CHECK(c >= 0);
    total += c;
  }
  CHECK(total == 123);
}

TEST_CASE("gamma has the right mean and rejects shape < 1") {
  iia::RngStream rng(15);
  const double shape = 4.0;
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) sum += rng.gamma(shape);
  CHECK(std::abs(sum / n - shape) < 0.05);  // sd of the mean ~ 0.009
  CHECK_THROWS_AS((void)rng.gamma(0.5), std::invalid_argument);
}

TEST_CASE("dirichlet draws are simplex points with the right mean") {
  iia::RngStream rng(16);
  const std::array<double, 3> alpha{2.0, 3.0, 5.0};
  std::array<double, 3> mean{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    std::array<double, 3> x{};
    rng.dirichlet(alpha, x);
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      REQUIRE(x[static_cast<std::size_t>(k)] >= 0.0);
      total += x[static_cast<std::size_t>(k)];
      mean[static_cast<std::size_t>(k)] += x[static_cast<std::size_t>(k)];
    }
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (int k = 0; k < 3; ++k)
    CHECK(mean[static_cast<std::size_t>(k)] / n ==
          doctest::Approx(alpha[static_cast<std::size_t>(k)] / 10.0).epsilon(0.02));
}

TEST_SUITE_END();
