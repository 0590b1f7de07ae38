// Acceptance gate. Each test checks one release criterion end to end and
// prints exactly one "[accept NN] ...: PASS|FAIL" line with its wall time.
// Tolerances and workloads here are pinned; loosening them is not a fix.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "qrelu/codec.hpp"
#include "qrelu/dataset.hpp"
#include "qrelu/harness.hpp"
#include "qrelu/kernels.hpp"
#include "qrelu/model.hpp"
#include "qrelu/quantizer.hpp"
#include "qrelu/rng.hpp"
#include "qrelu/runtime.hpp"
#include "qrelu/sgd.hpp"

namespace {

using namespace qrelu;
using clock_type = std::chrono::steady_clock;

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

class Acceptance : public ::testing::Test {
 protected:
  void SetUp() override { start_ = clock_type::now(); }

  void TearDown() override {
    std::printf("[accept %02d] %s: %s (%.1fs)\n", id_, desc_.c_str(),
                HasFailure() ? "FAIL" : "PASS", elapsed());
    std::fflush(stdout);
  }

  void announce(int id, std::string desc) {
    id_ = id;
    desc_ = std::move(desc);
  }

  double elapsed() const {
    return std::chrono::duration<double>(clock_type::now() - start_).count();
  }

 private:
  int id_ = 0;
  std::string desc_;
  clock_type::time_point start_;
};

// Criterion 1: the quantizer is unbiased. d=32, s=4, 1e5 draws; every
// component's sample mean lies within 4 standard errors of the input.
TEST_F(Acceptance, Criterion01QuantizerUnbiased) {
  announce(1, "quantizer unbiasedness, d=32 s=4, 1e5 draws within 4 SE");

  const std::size_t d = 32, draws = 100000;
  const std::uint32_t s = 4;

  rng::stream source{rng::derive_seed(9001, "accept1-input")};
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i)
    v[i] = i % 7 == 3 ? 0.0 : source.next_gaussian();

  rng::stream q{rng::derive_seed(9001, "accept1-quant")};
  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  for (std::size_t r = 0; r < draws; ++r) {
    const std::vector<double> deq = dequantize(quantize(v, s, q));
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += deq[i];
      sumsq[i] += deq[i] * deq[i];
    }
  }
  const double n = static_cast<double>(draws);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, (sumsq[i] - n * mean * mean) / (n - 1));
    const double se = std::sqrt(var / n);
    if (se == 0.0)
      EXPECT_EQ(mean, v[i]) << "component " << i;
    else
      EXPECT_LE(std::abs(mean - v[i]), 4.0 * se) << "component " << i;
  }
  EXPECT_LT(elapsed(), 10.0);
}

// Criterion 2: the second-moment inflation stays below 1 + min(d/s^2,
// sqrt(d)/s) with 2% Monte Carlo slack, at both calibration shapes.
TEST_F(Acceptance, Criterion02QuantizerSecondMoment) {
  announce(2, "quantizer second moment within (1+min(d/s^2,sqrt(d)/s)) + 2%");

  const std::size_t draws = 100000;
  const struct {
    std::size_t d;
    std::uint32_t s;
  } cases[] = {{32, 4}, {1000, 63}};

  for (const auto& c : cases) {
    rng::stream source{rng::derive_seed(9002, "accept2-input", c.d)};
    std::vector<double> v(c.d);
    for (double& x : v) x = source.next_gaussian();
    const double vnorm2 = sqnorm(v);
    const double bound = (1.0 + variance_factor(c.d, c.s)) * vnorm2;

    rng::stream q{rng::derive_seed(9002, "accept2-quant", c.d)};
    double acc = 0.0;
    for (std::size_t r = 0; r < draws; ++r)
      acc += sqnorm(dequantize(quantize(v, c.s, q)));
    const double mean = acc / static_cast<double>(draws);
    EXPECT_LE(mean, bound * 1.02) << "d=" << c.d << " s=" << c.s;
  }
  EXPECT_LT(elapsed(), 30.0);
}

// Criterion 3: codec round trip is exact. 1e4 random cases over d in [1,64],
// b in [2,12], including zero vectors and non-maximal level counts.
TEST_F(Acceptance, Criterion03CodecRoundTrip) {
  announce(3, "codec round trip exact, 1e4 cases d in [1,64], b in [2,12]");

  rng::stream g{rng::derive_seed(9003, "accept3")};
  std::size_t failures = 0;
  for (std::size_t c = 0; c < 10000; ++c) {
    const std::size_t d = 1 + g.next_index(64);
    const std::uint32_t b = 2 + static_cast<std::uint32_t>(g.next_index(11));
    const std::uint32_t s =
        1 + static_cast<std::uint32_t>(g.next_index(levels_for_bits(b)));
    std::vector<double> v(d);
    if (c % 100 != 0)
      for (double& x : v) x = g.next_gaussian();
    const quantized_vector q = quantize(v, s, g);
    if (!(decode(encode(q, b), b) == q)) ++failures;
  }
  EXPECT_EQ(failures, 0u);
}

// Criterion 4: at differentiable points the generalized gradient is exactly
// twice the central finite difference of the loss (relative error <= 1e-5).
TEST_F(Acceptance, Criterion04GradientMatchesFiniteDifference) {
  announce(4, "gradient = 2x central FD at 100 points, rel err <= 1e-5");

  const std::size_t d = 20, n = 200;
  const dataset ds = generate_dataset(n, d, wstar_spec::gaussian(0.0, 1.0),
                                      rng::derive_seed(9004, "accept4-data"));
  rng::stream g{rng::derive_seed(9004, "accept4-points")};

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;

  std::size_t tested = 0, attempts = 0;
  while (tested < 100 && attempts < 2000) {
    ++attempts;
    std::vector<double> w(d);
    for (double& x : w) x = g.next_gaussian();
    // keep every pre-activation clear of the kink so the loss is smooth in
    // the finite-difference neighborhood
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      min_abs = std::min(min_abs, std::abs(dot(ds.row(i), w)));
    if (min_abs <= 1e-3) continue;
    ++tested;

    const std::vector<double> grad = minibatch_gradient(w, ds, all);
    std::vector<double> fd(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(w[j]));
      std::vector<double> wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      fd[j] = 2.0 * (loss(wp, ds) - loss(wm, ds)) / (2.0 * h);
    }
    EXPECT_LE(std::sqrt(sqdist(grad, fd)), 1e-5 * std::sqrt(sqnorm(fd)))
        << "point " << tested;
  }
  EXPECT_EQ(tested, 100u) << "could not find enough differentiable points";
}

// Criterion 5: SGD at scale. d=1000, n=10000, m=800, published step 0.8:
// rel err < 1e-3 within 2000 iterations on >= 9 of 10 seeds, and the median
// iteration count never increases as m grows through {200,400,600,800}.
TEST_F(Acceptance, Criterion05SgdConvergesAtScale) {
  announce(5, "SGD d=1000 n=10000: 9/10 seeds converge, median iters "
              "non-increasing in m");

  const std::size_t m_values[] = {200, 400, 600, 800};
  std::vector<std::vector<double>> iters(4);
  int converged_at_800 = 0;

  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const dataset ds =
        generate_dataset(10000, 1000, wstar_spec::gaussian(0.0, 1.0),
                         rng::derive_seed(9005, "accept5-data", trial));
    for (std::size_t j = 0; j < 4; ++j) {
      run_config cfg;
      cfg.m = m_values[j];
      cfg.policy = eta_policy::experiment;
      cfg.max_iters = 2000;
      cfg.tol = 1e-3;
      cfg.seed = rng::derive_seed(9005, "accept5-run", trial * 4 + j);
      const trace tr = run_sgd(cfg, ds);
      iters[j].push_back(tr.converged
                             ? static_cast<double>(tr.iterations())
                             : 2001.0);
      if (m_values[j] == 800) {
        EXPECT_DOUBLE_EQ(tr.eta_published, 0.8);
        if (tr.converged) ++converged_at_800;
      }
    }
  }

  EXPECT_GE(converged_at_800, 9);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < 4; ++j) {
    const double med = median(iters[j]);
    EXPECT_LE(med, prev) << "median iterations rose at m=" << m_values[j];
    prev = med;
  }
  EXPECT_LT(elapsed(), 300.0);
}

// Criterion 6: QSGD at b=7 (published step 800*7/9000 = 0.62222) converges in
// at most twice SGD's iterations; b=4 is strictly slower than b=7 by median.
TEST_F(Acceptance, Criterion06QsgdBitWidthOrdering) {
  announce(6, "QSGD b=7 within 2x SGD iterations; b=4 strictly slower");

  std::vector<double> it_sgd, it_b7, it_b4;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const dataset ds =
        generate_dataset(10000, 1000, wstar_spec::gaussian(0.0, 1.0),
                         rng::derive_seed(9006, "accept6-data", trial));

    run_config sgd_cfg;
    sgd_cfg.m = 800;
    sgd_cfg.policy = eta_policy::experiment;
    sgd_cfg.max_iters = 2000;
    sgd_cfg.tol = 1e-3;
    sgd_cfg.seed = rng::derive_seed(9006, "accept6-run", trial);
    const trace s = run_sgd(sgd_cfg, ds);
    it_sgd.push_back(s.converged ? static_cast<double>(s.iterations()) : 2001.0);

    run_config q7 = sgd_cfg;
    q7.sch = scheme::qsgd;
    q7.bits = 7;
    const trace t7 = run_qsgd_local(q7, ds);
    EXPECT_DOUBLE_EQ(t7.eta_published, 800.0 * 7.0 / (9.0 * 1000.0));
    it_b7.push_back(t7.converged ? static_cast<double>(t7.iterations())
                                 : 2001.0);

    // b=4 stalls above the tolerance; a 600-iteration budget is enough to
    // witness the ordering without burning the full budget on every seed
    run_config q4 = q7;
    q4.bits = 4;
    q4.max_iters = 600;
    const trace t4 = run_qsgd_local(q4, ds);
    it_b4.push_back(t4.converged ? static_cast<double>(t4.iterations())
                                 : 601.0);
  }

  const double med_sgd = median(it_sgd);
  const double med_b7 = median(it_b7);
  const double med_b4 = median(it_b4);
  EXPECT_LE(med_b7, 2.0 * med_sgd);
  EXPECT_LT(med_sgd, 2001.0);  // the baseline itself converged
  EXPECT_LT(med_b7, 2001.0);
  EXPECT_GT(med_b4, med_b7);
  EXPECT_LT(elapsed(), 300.0);
}

// Criterion 7: the sample-complexity phase transition scales linearly with d.
// For d in {25,50,100}: smoothed success rate is non-decreasing in n, and the
// n*/d thresholds at 90% success agree within a factor of 1.5 pairwise.
TEST_F(Acceptance, Criterion07PhaseTransitionScalesWithD) {
  announce(7, "phase transition: monotone in n, n*(90%)/d stable across d");

  std::vector<double> thresholds;
  for (const std::size_t d : {std::size_t{25}, std::size_t{50}, std::size_t{100}}) {
    phase_grid grid;
    grid.d_values = {d};
    for (const std::size_t j : {2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u, 12u})
      grid.n_values.push_back(d * j / 2);
    grid.trials_per_cell = 10;
    grid.iteration_budget = 2000;
    grid.success_tol = 1e-3;

    const phase_result res = phase_transition(grid, 9007);
    std::vector<double> rates;
    for (const phase_cell& c : res.cells) rates.push_back(c.rate());
    const std::vector<double> smooth = median_smooth(rates);
    for (std::size_t i = 0; i + 1 < smooth.size(); ++i)
      EXPECT_GE(smooth[i + 1] + 1e-12, smooth[i])
          << "d=" << d << ": smoothed success rate dipped after n="
          << grid.n_values[i];

    const auto n_star = first_n_reaching(res, d, 0.9);
    ASSERT_TRUE(n_star.has_value()) << "d=" << d << " never reached 90%";
    thresholds.push_back(static_cast<double>(*n_star) /
                         static_cast<double>(d));
  }

  for (std::size_t a = 0; a < thresholds.size(); ++a)
    for (std::size_t b = a + 1; b < thresholds.size(); ++b) {
      const double ratio = thresholds[a] / thresholds[b];
      EXPECT_LE(ratio, 1.5) << "n*/d mismatch between grids " << a << "," << b;
      EXPECT_GE(ratio, 1.0 / 1.5)
          << "n*/d mismatch between grids " << a << "," << b;
    }
  EXPECT_LT(elapsed(), 600.0);
}

// Criterion 8: the distributed runtime is bit-identical to the local QSGD
// loop for K in {1,2,4}, over both the in-process pipe and loopback TCP.
TEST_F(Acceptance, Criterion08DistributedBitIdentical) {
  announce(8, "distributed == local QSGD bit for bit, K in {1,2,4}, pipe+TCP");

  const dataset ds = generate_dataset(400, 64, wstar_spec::gaussian(0.0, 1.0),
                                      rng::derive_seed(9008, "accept8-data"));
  for (const std::uint32_t K : {1u, 2u, 4u}) {
    run_config cfg;
    cfg.sch = scheme::qsgd;
    cfg.m = 40;
    cfg.workers = K;
    cfg.bits = 7;
    cfg.max_iters = 20;
    cfg.tol = 1e-12;
    cfg.seed = 88;

    const trace local = run_qsgd_local(cfg, ds);
    ASSERT_EQ(local.records.size(), 21u);

    const trace inproc = run_distributed_inproc(cfg, ds);
    const trace tcp = run_distributed_tcp(cfg, ds);
    EXPECT_EQ(inproc.digest(), local.digest()) << "K=" << K;
    EXPECT_EQ(tcp.digest(), local.digest()) << "K=" << K;
    EXPECT_TRUE(bits_equal(inproc.final_w, local.final_w)) << "K=" << K;
    EXPECT_TRUE(bits_equal(tcp.final_w, local.final_w)) << "K=" << K;
  }
}

// Criterion 9: at d=4000, K=4, b=8, the measured upstream payload over 300
// TCP iterations is at most 0.15 of what raw float64 SGD would upload.
TEST_F(Acceptance, Criterion09UpstreamCompression) {
  announce(9, "QSGD b=8 upstream bytes <= 0.15 of raw SGD at d=4000, K=4");

  const dataset ds = generate_dataset(2000, 4000, wstar_spec::gaussian(0.0, 1.0),
                                      rng::derive_seed(9009, "accept9-data"));
  run_config cfg;
  cfg.sch = scheme::qsgd;
  cfg.m = 400;
  cfg.workers = 4;
  cfg.bits = 8;
  cfg.max_iters = 300;
  cfg.tol = 1e-15;
  cfg.seed = 99;

  const trace tr = run_distributed_tcp(cfg, ds);
  ASSERT_EQ(tr.records.size(), 301u);

  const std::uint64_t measured = tr.records.back().upstream_bytes;
  EXPECT_EQ(measured, 300u * bytes_per_iteration(scheme::qsgd, 4000, 4, 8));
  EXPECT_EQ(tr.overhead_bytes, 300u * 4u * 25u);

  const std::uint64_t raw_sgd =
      300u * bytes_per_iteration(scheme::sgd, 4000, 4, 8);
  const double ratio =
      static_cast<double>(measured) / static_cast<double>(raw_sgd);
  EXPECT_LE(ratio, 0.15);
  std::printf("[accept 09] note: measured ratio %.4f (%llu / %llu bytes)\n",
              ratio, static_cast<unsigned long long>(measured),
              static_cast<unsigned long long>(raw_sgd));
}

// Criterion 10: Monte Carlo check of the minibatch second-moment bound
// E||grad||^2 <= (9d/m + 25/16)||w - w*||^2 near the optimum, for the
// analytic (half) gradient. The 2x generalized gradient is reported too.
TEST_F(Acceptance, Criterion10SecondMomentBound) {
  announce(10, "minibatch second moment within (9d/m + 25/16)||w-w*||^2");

  const std::size_t d = 100, n = 2000, batches = 10000;
  const dataset ds = generate_dataset(n, d, wstar_spec::gaussian(0.0, 1.0),
                                      rng::derive_seed(9010, "accept10-data"));

  // w on the sphere of radius 0.03 ||w*|| around w*
  rng::stream dir{rng::derive_seed(9010, "accept10-dir")};
  std::vector<double> u(d);
  for (double& x : u) x = dir.next_gaussian();
  const double target = 0.03 * std::sqrt(sqnorm(ds.w_star));
  scale(u, target / std::sqrt(sqnorm(u)));
  std::vector<double> w = ds.w_star;
  add(w, u);
  const double dist2 = sqdist(w, ds.w_star);

  for (const std::size_t m : {std::size_t{10}, std::size_t{100}}) {
    rng::stream pick{rng::derive_seed(9010, "accept10-batch", m)};
    std::vector<std::size_t> idx(m);
    double acc = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t i = 0; i < m; ++i) idx[i] = pick.next_index(n);
      acc += sqnorm(minibatch_gradient(w, ds, idx));
    }
    const double mean_2x = acc / static_cast<double>(batches);
    const double mean_analytic = mean_2x / 4.0;
    const double bound =
        (9.0 * static_cast<double>(d) / static_cast<double>(m) + 25.0 / 16.0) *
        dist2;
    EXPECT_LE(mean_analytic, bound) << "m=" << m;
    std::printf(
        "[accept 10] note: m=%zu analytic ratio %.3f, 2x-gradient ratio %.3f\n",
        m, mean_analytic / bound, mean_2x / bound);
  }
  EXPECT_LT(elapsed(), 60.0);
}

// Criterion 11: majority voting. The fixture cluster elects its first member,
// a single trial elects itself, and the end-to-end d=100 ensemble lands
// within 1e-2 relative error.
TEST_F(Acceptance, Criterion11EnsembleSelection) {
  announce(11, "ensemble majority vote: fixture, identity, d=100 end to end");

  // synthetic finals: trials 1, 3, 4 cluster; 0 and 2 are far outliers
  const double eps = 1e-4;
  const double r = std::sqrt(eps);  // cluster spread well inside 2 sqrt(eps)
  const std::vector<std::vector<double>> finals = {
      {5.0, 5.0, 5.0},
      {1.0, 2.0, 3.0},
      {-4.0, 0.0, 1.0},
      {1.0 + r, 2.0, 3.0},
      {1.0, 2.0 - r, 3.0},
  };
  const auto pick = select_majority(finals, eps);
  ASSERT_TRUE(pick.has_value());
  EXPECT_EQ(*pick, 1u);

  const std::vector<std::vector<double>> lone = {{7.0, -7.0}};
  EXPECT_EQ(select_majority(lone, eps), 0u);

  const dataset ds = generate_dataset(1000, 100, wstar_spec::gaussian(0.0, 1.0),
                                      rng::derive_seed(9011, "accept11-data"));
  run_config cfg;
  cfg.m = 100;
  cfg.policy = eta_policy::experiment;
  cfg.tol = 1e-3;
  cfg.seed = 11;
  const ensemble_result er = ensemble_estimate(cfg, ds, 5, 400, 1e-3);
  ASSERT_EQ(er.finals.size(), 5u);
  ASSERT_TRUE(er.selected.has_value());
  EXPECT_LT(rel_error(er.w_hat, ds), 1e-2);
}

}  // namespace
