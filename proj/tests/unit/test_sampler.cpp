// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "iiacheck/rng.hpp"
#include "iiacheck/sampler.hpp"

using iia::NutsConfig;
using iia::RngStream;
using iia::ValidationError;

TEST_SUITE_BEGIN("sampler");

namespace {

// Collect one coordinate across chains.
std::vector<Eigen::VectorXd> coordinate(const iia::NutsResult& res, int dim) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& chain : res.chains) out.push_back(chain.col(dim));
  return out;
}

double pooled_mean(const std::vector<Eigen::VectorXd>& chains) {
  double total = 0.0;
  long n = 0;
  for (const auto& c : chains) {
    total += c.sum();
    n += c.size();
  }
  return total / static_cast<double>(n);
}

double pooled_var(const std::vector<Eigen::VectorXd>& chains) {
  const double mu = pooled_mean(chains);
  double total = 0.0;
  long n = 0;
  for (const auto& c : chains) {
    total += (c.array() - mu).square().sum();
    n += c.size();
  }
  return total / static_cast<double>(n - 1);
}

}  // namespace

TEST_CASE("standard normal calibration in two dimensions") {
  auto target = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad = -q;
    return -0.5 * q.squaredNorm();
  };
  NutsConfig cfg;  // library defaults: 4 chains, 2000 warmup, 2000 draws
  cfg.seed = 314;
  const auto res = iia::nuts_sample(2, target, cfg, RngStream(cfg.seed));
  REQUIRE(res.chains.size() == 4);
  REQUIRE(res.chains[0].rows() == 2000);
  REQUIRE(res.chains[0].cols() == 2);
  for (int d = 0; d < 2; ++d) {
    const auto coord = coordinate(res, d);
    CHECK(std::abs(pooled_mean(coord)) < 0.05);
    CHECK(std::abs(pooled_var(coord) - 1.0) < 0.1);
    CHECK(iia::split_rhat(coord) < 1.01);
    CHECK(iia::effective_sample_size(coord) > 400.0);
  }
  CHECK(res.divergence_fraction() == 0.0);
}

TEST_CASE("sampling is deterministic in the seed") {
  auto target = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad = -2.0 * q;
    return -q.squaredNorm();
  };
  NutsConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 200;
  cfg.draws = 100;
  cfg.seed = 7;
  const auto a = iia::nuts_sample(3, target, cfg, RngStream(cfg.seed));
  const auto b = iia::nuts_sample(3, target, cfg, RngStream(cfg.seed));
  for (std::size_t c = 0; c < 2; ++c)
    CHECK((a.chains[c] - b.chains[c]).cwiseAbs().maxCoeff() == 0.0);
  // Chains explore independently.
  CHECK((a.chains[0] - a.chains[1]).cwiseAbs().maxCoeff() > 0.0);
  cfg.seed = 8;
  const auto c8 = iia::nuts_sample(3, target, cfg, RngStream(cfg.seed));
  CHECK((a.chains[0] - c8.chains[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("correlated gaussian is handled by the diagonal mass matrix") {
  // Anisotropic scales (1, 10): warmup must adapt per-coordinate step scales.
  auto target = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad.resize(2);
    grad[0] = -q[0];
    grad[1] = -q[1] / 100.0;
    return -0.5 * (q[0] * q[0] + q[1] * q[1] / 100.0);
  };
  NutsConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 1000;
  cfg.draws = 1000;
  cfg.seed = 11;
  const auto res = iia::nuts_sample(2, target, cfg, RngStream(cfg.seed));
  const auto c0 = coordinate(res, 0);
  const auto c1 = coordinate(res, 1);
  CHECK(std::abs(pooled_mean(c0)) < 0.1);
  CHECK(std::abs(pooled_var(c0) - 1.0) < 0.15);
  CHECK(std::abs(pooled_mean(c1)) < 1.0);
  CHECK(std::abs(pooled_var(c1) - 100.0) < 15.0);
}

TEST_CASE("hard support boundaries count divergences without crashing") {
  // Log density is -inf outside the unit box.
  auto target = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad.setZero(q.size());
    if (q.cwiseAbs().maxCoeff() > 1.0)
      return -std::numeric_limits<double>::infinity();
    return 0.0;
  };
  NutsConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 300;
  cfg.draws = 300;
  cfg.seed = 5;
  cfg.init_radius = 0.5;
  const auto res = iia::nuts_sample(1, target, cfg, RngStream(cfg.seed));
  for (const auto& chain : res.chains)
    CHECK(chain.cwiseAbs().maxCoeff() <= 1.0);
  // Uniform on [-1, 1]: mean 0, var 1/3.
  const auto coord = coordinate(res, 0);
  CHECK(std::abs(pooled_mean(coord)) < 0.15);
  CHECK(std::abs(pooled_var(coord) - 1.0 / 3.0) < 0.1);
}

TEST_CASE("split r-hat separates mixed from unmixed chains") {
  RngStream rng(42);
  std::vector<Eigen::VectorXd> same, shifted;
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd a(500), b(500);
    for (int i = 0; i < 500; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal() + (c == 0 ? 3.0 : 0.0);
    }
    same.push_back(a);
    shifted.push_back(b);
  }
  CHECK(iia::split_rhat(same) < 1.01);
  CHECK(iia::split_rhat(shifted) > 1.5);
}

TEST_CASE("effective sample size tracks autocorrelation") {
  RngStream rng(43);
  std::vector<Eigen::VectorXd> iid, sticky;
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd a(2000), b(2000);
    double prev = 0.0;
    for (int i = 0; i < 2000; ++i) {
      a[i] = rng.normal();
      prev = 0.95 * prev + std::sqrt(1.0 - 0.95 * 0.95) * rng.normal();
      b[i] = prev;
    }
    iid.push_back(a);
    sticky.push_back(b);
  }
  const double ess_iid = iia::effective_sample_size(iid);
  const double ess_sticky = iia::effective_sample_size(sticky);
  CHECK(ess_iid > 2500.0);  // ~4000 nominal
  CHECK(ess_sticky < 500.0);
  CHECK(ess_sticky > 10.0);
}

TEST_CASE("config validation") {
  NutsConfig bad;
  bad.chains = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = NutsConfig{};
  bad.draws = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = NutsConfig{};
  bad.target_accept = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = NutsConfig{};
  bad.max_treedepth = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("non-finite density at every initialization attempt fails loudly") {
  auto target = [](const Eigen::VectorXd&, Eigen::VectorXd& grad) {
    grad.setZero(1);
    return -std::numeric_limits<double>::infinity();
  };
  NutsConfig cfg;
  cfg.chains = 1;
  cfg.warmup = 10;
  cfg.draws = 10;
  CHECK_THROWS_AS(
      (void)iia::nuts_sample(1, target, cfg, RngStream(1)), iia::SamplerError);
}

TEST_SUITE_END();
