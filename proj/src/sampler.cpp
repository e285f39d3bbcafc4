// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace iia {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double logp = kNegInf;
};

// Log-linear step-size search: double or halve until the one-step acceptance
// ratio crosses 1/2.
struct DualAverager {
  double target = 0.8;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double hbar = 0.0;
  double t = 0.0;

  void init(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    hbar = 0.0;
    t = 0.0;
  }
  void update(double accept) {
    t += 1.0;
    hbar += ((target - accept) - hbar) / (t + t0);
    log_eps = mu - std::sqrt(t) / gamma * hbar;
    double w = std::pow(t, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
};

struct Welford {
  long n = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;

  void reset(int dim) {
    n = 0;
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
  }
  void add(const Eigen::VectorXd& x) {
    ++n;
    Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta.cwiseProduct(x - mean);
  }
  Eigen::VectorXd variance() const {
    if (n < 2) return Eigen::VectorXd::Ones(mean.size());
    return m2 / static_cast<double>(n - 1);
  }
};

// Warm-up schedule: a fast initial buffer (step size only), expanding
// mass-estimation windows, and a fast terminal buffer.
struct WarmupSchedule {
  int init_buffer = 75;
  int term_buffer = 50;
  std::vector<int> window_ends;  // iterations (0-based, exclusive) ending a window

  explicit WarmupSchedule(int warmup) {
    int base_window = 25;
    if (warmup < init_buffer + term_buffer + base_window) {
      init_buffer = static_cast<int>(0.15 * warmup);
      term_buffer = static_cast<int>(0.10 * warmup);
      base_window = warmup - init_buffer - term_buffer;
      if (base_window <= 0) {
        init_buffer = warmup;
        term_buffer = 0;
        return;  // too short for mass adaptation: step size only
      }
    }
    int start = init_buffer;
    int size = base_window;
    while (true) {
      int end = start + size;
      // Absorb the remainder into the final window.
      if (end + 2 * size > warmup - term_buffer) {
        window_ends.push_back(warmup - term_buffer);
        break;
      }
      window_ends.push_back(end);
      start = end;
      size *= 2;
    }
  }

  bool in_mass_window(int iter) const {
    return !window_ends.empty() && iter >= init_buffer &&
           iter < window_ends.back();
  }
  bool at_window_end(int iter) const {
    for (int end : window_ends)
      if (iter + 1 == end) return true;
    return false;
  }
};

struct Subtree {
  PhasePoint near;  // endpoint adjacent to the existing trajectory
  PhasePoint far;   // endpoint one tree further out
  PhasePoint proposal;
  double log_sum_w = kNegInf;
  double sum_metro = 0.0;
  long n_states = 0;
  bool diverged = false;
  bool ok = false;  // false when divergent or turned inside
};

class ChainWorker {
 public:
  ChainWorker(int dim, const LogDensityGradient& target,
              const NutsConfig& config, RngStream rng)
      : dim_(dim), target_(target), config_(config), rng_(rng) {
    inv_mass_ = Eigen::VectorXd::Ones(dim);
  }

  void run(Eigen::MatrixXd& draws, ChainStats& stats) {
    initialize();
    DualAverager da;
    da.target = config_.target_accept;
    double eps = find_reasonable_epsilon(config_.init_step_size);
    da.init(eps);
    WarmupSchedule schedule(config_.warmup);
    Welford welford;
    welford.reset(dim_);

    for (int iter = 0; iter < config_.warmup; ++iter) {
      Transition t = transition(eps);
      da.update(t.accept_stat);
      eps = std::exp(da.log_eps);
      if (schedule.in_mass_window(iter)) welford.add(state_.q);
      if (schedule.at_window_end(iter)) {
        // Regularized diagonal metric, shrunk toward a small constant.
        double n = static_cast<double>(welford.n);
        inv_mass_ = (n / (n + 5.0)) * welford.variance().array() +
                    (5.0 / (n + 5.0)) * 1e-3;
        welford.reset(dim_);
        eps = find_reasonable_epsilon(eps);
        da.init(eps);
      }
    }
    if (config_.warmup > 0) eps = std::exp(da.log_eps_bar);

    draws.resize(config_.draws, dim_);
    stats = ChainStats{};
    stats.step_size = eps;
    double accept_sum = 0.0;
    for (int iter = 0; iter < config_.draws; ++iter) {
      Transition t = transition(eps);
      draws.row(iter) = state_.q.transpose();
      accept_sum += t.accept_stat;
      if (t.diverged) ++stats.divergences;
      if (t.hit_max_depth) ++stats.max_depth_hits;
    }
    stats.mean_accept =
        config_.draws > 0 ? accept_sum / config_.draws : 0.0;
  }

 private:
  struct Transition {
    double accept_stat = 0.0;
    bool diverged = false;
    bool hit_max_depth = false;
  };

  void initialize() {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd q(dim_);
      for (int i = 0; i < dim_; ++i)
        q[i] = config_.init_radius * (2.0 * rng_.uniform() - 1.0);
      Eigen::VectorXd grad(dim_);
      double logp = target_(q, grad);
      if (std::isfinite(logp) && grad.allFinite()) {
        state_.q = std::move(q);
        state_.grad = std::move(grad);
        state_.logp = logp;
        state_.p = Eigen::VectorXd::Zero(dim_);
        return;
      }
    }
    throw SamplerError(
        "non-finite density at initialization (100 attempts)");
  }

  double kinetic(const Eigen::VectorXd& p) const {
    return 0.5 * p.cwiseProduct(p).dot(inv_mass_);
  }

  double hamiltonian(const PhasePoint& s) const {
    if (!std::isfinite(s.logp)) return std::numeric_limits<double>::infinity();
    return -s.logp + kinetic(s.p);
  }

  void sample_momentum(Eigen::VectorXd& p) {
    for (int i = 0; i < dim_; ++i)
      p[i] = rng_.normal() / std::sqrt(inv_mass_[i]);
  }

  PhasePoint leapfrog(const PhasePoint& from, double eps) {
    PhasePoint next;
    next.p = from.p + 0.5 * eps * from.grad;
    next.q = from.q + eps * inv_mass_.cwiseProduct(next.p);
    next.grad.resize(dim_);
    next.logp = target_(next.q, next.grad);
    if (!std::isfinite(next.logp) || !next.grad.allFinite()) {
      next.logp = kNegInf;
      next.grad.setZero();
    } else {
      next.p += 0.5 * eps * next.grad;
    }
    return next;
  }

  // Velocity-based no-U-turn criterion between the two trajectory ends.
  bool turned(const PhasePoint& minus, const PhasePoint& plus) const {
    Eigen::VectorXd dq = plus.q - minus.q;
    return dq.dot(inv_mass_.cwiseProduct(minus.p)) < 0.0 ||
           dq.dot(inv_mass_.cwiseProduct(plus.p)) < 0.0;
  }

  Subtree build_tree(int depth, const PhasePoint& from, int dir, double eps,
                     double h0) {
    if (depth == 0) {
      Subtree leaf;
      leaf.near = leapfrog(from, dir * eps);
      double dh = h0 - hamiltonian(leaf.near);  // log weight relative to start
      bool finite = std::isfinite(dh) || dh == kNegInf;
      leaf.diverged = !finite || dh < -config_.max_energy_error;
      leaf.log_sum_w = leaf.diverged ? kNegInf : dh;
      leaf.sum_metro = leaf.diverged ? 0.0 : std::min(1.0, std::exp(dh));
      leaf.n_states = 1;
      leaf.far = leaf.near;
      leaf.proposal = leaf.near;
      leaf.ok = !leaf.diverged;
      return leaf;
    }
    Subtree first = build_tree(depth - 1, from, dir, eps, h0);
    if (!first.ok) return first;
    Subtree second = build_tree(depth - 1, first.far, dir, eps, h0);

    Subtree merged;
    merged.n_states = first.n_states + second.n_states;
    merged.sum_metro = first.sum_metro + second.sum_metro;
    merged.diverged = second.diverged;
    merged.near = std::move(first.near);
    merged.far = std::move(second.far);
    if (!second.ok) {
      merged.ok = false;
      merged.proposal = std::move(first.proposal);
      merged.log_sum_w = first.log_sum_w;
      return merged;
    }
    merged.log_sum_w = log_add_exp(first.log_sum_w, second.log_sum_w);
    // Uniform multinomial selection inside the subtree.
    double log_u = std::log(rng_.uniform_pos());
    merged.proposal = log_u < second.log_sum_w - merged.log_sum_w
                          ? std::move(second.proposal)
                          : std::move(first.proposal);
    bool u_turn = dir > 0 ? turned(merged.near, merged.far)
                          : turned(merged.far, merged.near);
    merged.ok = !u_turn;
    return merged;
  }

  Transition transition(double eps) {
    sample_momentum(state_.p);
    double h0 = hamiltonian(state_);

    PhasePoint minus = state_;
    PhasePoint plus = state_;
    PhasePoint sample = state_;
    double traj_lw = 0.0;  // start state carries weight exp(h0 - h0) = 1
    long n_states = 0;
    double metro_total = 0.0;

    Transition out;
    int depth = 0;
    for (; depth < config_.max_treedepth; ++depth) {
      int dir = rng_.uniform() < 0.5 ? -1 : 1;
      Subtree sub = build_tree(depth, dir > 0 ? plus : minus, dir, eps, h0);
      metro_total += sub.sum_metro;
      n_states += sub.n_states;
      if (sub.diverged) out.diverged = true;
      if (!sub.ok) break;
      // Biased progressive selection: favor the fresh subtree.
      if (std::log(rng_.uniform_pos()) < sub.log_sum_w - traj_lw)
        sample = sub.proposal;
      traj_lw = log_add_exp(traj_lw, sub.log_sum_w);
      if (dir > 0)
        plus = std::move(sub.far);
      else
        minus = std::move(sub.far);
      if (turned(minus, plus)) {
        ++depth;
        break;
      }
    }
    out.hit_max_depth = depth >= config_.max_treedepth;
    out.accept_stat = n_states > 0 ? metro_total / n_states : 0.0;

    state_.q = std::move(sample.q);
    state_.grad = std::move(sample.grad);
    state_.logp = sample.logp;
    return out;
  }

  double find_reasonable_epsilon(double eps0) {
    double eps = std::clamp(eps0, 1e-10, 1e10);
    PhasePoint s = state_;
    sample_momentum(s.p);
    double h0 = hamiltonian(s);
    auto log_ratio = [&](double e) {
      PhasePoint t = leapfrog(s, e);
      double dh = h0 - hamiltonian(t);
      return std::isnan(dh) ? kNegInf : dh;
    };
    double dh = log_ratio(eps);
    double a = dh > std::log(0.5) ? 1.0 : -1.0;
    for (int i = 0; i < 100; ++i) {
      if (!(a * dh > -a * std::log(2.0))) break;
      eps *= std::pow(2.0, a);
      if (eps < 1e-10 || eps > 1e10) break;
      dh = log_ratio(eps);
    }
    return std::clamp(eps, 1e-10, 1e10);
  }

  int dim_;
  const LogDensityGradient& target_;
  NutsConfig config_;
  RngStream rng_;
  PhasePoint state_;
  Eigen::VectorXd inv_mass_;
};

}  // namespace

void NutsConfig::validate() const {
  if (chains < 1 || warmup < 0 || draws < 1)
    throw ValidationError("sampler counts must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw ValidationError("target acceptance rate must lie in (0, 1)");
  if (max_treedepth < 1 || max_treedepth > 14)
    throw ValidationError("max_treedepth must lie in [1, 14]");
}

int NutsResult::total_divergences() const {
  int total = 0;
  for (const auto& s : stats) total += s.divergences;
  return total;
}

long NutsResult::total_draws() const {
  long total = 0;
  for (const auto& c : chains) total += c.rows();
  return total;
}

double NutsResult::divergence_fraction() const {
  long draws = total_draws();
  return draws > 0 ? static_cast<double>(total_divergences()) / draws : 0.0;
}

NutsResult nuts_sample(int dim, const LogDensityGradient& target,
                       const NutsConfig& config, RngStream root) {
  config.validate();
  if (dim < 1) throw ValidationError("sampler dimension must be positive");

  NutsResult result;
  result.chains.resize(config.chains);
  result.stats.resize(config.chains);

  int workers = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, config.chains));

  std::vector<std::exception_ptr> errors(config.chains);
  auto run_chain = [&](int c) {
    try {
      ChainWorker worker(dim, target, config,
                         root.derive("chain").derive(static_cast<uint64_t>(c)));
      worker.run(result.chains[c], result.stats[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (workers == 1) {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int c = w; c < config.chains; c += workers) run_chain(c);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return result;
}

namespace {

// Split every chain in half, dropping one draw from odd lengths.
std::vector<Eigen::VectorXd> split_chains(
    const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> halves;
  for (const auto& c : chains) {
    long n = c.size() / 2;
    if (n < 1) continue;
    halves.push_back(c.head(n));
    halves.push_back(c.tail(n));
  }
  return halves;
}

struct Moments {
  double w = 0.0;      // mean within-sequence variance
  double var_plus = 0.0;
  long n = 0;
  long m = 0;
};

Moments pooled_moments(const std::vector<Eigen::VectorXd>& seqs) {
  Moments out;
  out.m = static_cast<long>(seqs.size());
  out.n = seqs.empty() ? 0 : seqs[0].size();
  if (out.m < 2 || out.n < 2) return out;
  double grand = 0.0;
  std::vector<double> means(seqs.size());
  std::vector<double> vars(seqs.size());
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    means[j] = seqs[j].mean();
    vars[j] = (seqs[j].array() - means[j]).square().sum() /
              static_cast<double>(out.n - 1);
    grand += means[j];
  }
  grand /= static_cast<double>(out.m);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(out.n) / static_cast<double>(out.m - 1);
  for (double v : vars) out.w += v;
  out.w /= static_cast<double>(out.m);
  out.var_plus = (static_cast<double>(out.n - 1) / out.n) * out.w +
                 b / static_cast<double>(out.n);
  return out;
}

}  // namespace

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  auto halves = split_chains(chains);
  Moments mo = pooled_moments(halves);
  if (mo.m < 2 || mo.n < 2) return 1.0;
  if (mo.w <= 0.0) return 1.0;
  return std::sqrt(mo.var_plus / mo.w);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  auto halves = split_chains(chains);
  Moments mo = pooled_moments(halves);
  long m = mo.m, n = mo.n;
  if (m < 2 || n < 4) return static_cast<double>(m * n);
  if (mo.var_plus <= 0.0) return static_cast<double>(m * n);

  std::vector<double> means(halves.size());
  for (std::size_t j = 0; j < halves.size(); ++j) means[j] = halves[j].mean();

  auto acov = [&](long t) {
    double total = 0.0;
    for (std::size_t j = 0; j < halves.size(); ++j) {
      const auto& x = halves[j];
      double s = 0.0;
      for (long i = 0; i + t < n; ++i)
        s += (x[i] - means[j]) * (x[i + t] - means[j]);
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };

  // Geyer initial monotone sequence over paired autocorrelations.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (long t = 0; t + 1 < n; t += 2) {
    double rho0 = 1.0 - (mo.w - acov(t)) / mo.var_plus;
    double rho1 = 1.0 - (mo.w - acov(t + 1)) / mo.var_plus;
    double pair = rho0 + rho1;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decrease
    prev_pair = pair;
    tau += 2.0 * pair;
    if (pair < 1e-12) break;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n) + 10.0));
  double ess = static_cast<double>(m * n) / tau;
  return std::min(ess, static_cast<double>(m * n) * 10.0);
}

}  // namespace iia
