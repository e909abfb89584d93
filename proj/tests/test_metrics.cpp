#include "mtforge/metrics.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace mtforge;

namespace
{

// Textbook single-window SSIM written out with plain loops.
double ssim_oracle(const std::vector<double> &x, const std::vector<double> &y, double range)
{
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cxy += (x[i] - mx) * (y[i] - my);
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  return (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

Eigen::ArrayXd random_array(std::mt19937_64 &rng, Index n)
{
  std::normal_distribution<double> g;
  Eigen::ArrayXd a(n);
  for (Index i = 0; i < n; ++i)
    a[i] = g(rng);
  return a;
}

SampleRecord<float> record(const std::string &id, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(0.0, 3.0);
  SampleRecord<float> r;
  r.meta.id = id;
  r.meta.freqs = {0.1, 1.0, 10.0};
  r.model = ResistivityModel<float>({4, 3, 2}, {100, 100, 100});
  r.response = ResponseVolume<float>(4, 3, 3);
  for (Channel c : kAllChannels)
    for (Index p = 0; p < r.response.size(); ++p)
      r.response.channel(c)[p] = static_cast<float>(is_phase(c) ? 10.0 + 20.0 * u(rng) : std::pow(10.0, u(rng)));
  return r;
}

std::vector<SampleRecord<float>> records(std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::vector<SampleRecord<float>> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(record("s" + std::to_string(i), rng));
  return out;
}

}  // namespace

TEST(Rmse, WorkedExamples)
{
  Eigen::ArrayXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 1, 2, 3, 8;
  EXPECT_DOUBLE_EQ(rmse(a, b), 2.0);
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(rmse(a.cast<float>(), b), 2.0);
  EXPECT_THROW(rmse(a, b.head(3)), std::invalid_argument);
  EXPECT_THROW(rmse(a.head(0), b.head(0)), std::invalid_argument);
}

TEST(Rmse, IsAMetric)
{
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t)
  {
    const Eigen::ArrayXd x = random_array(rng, 64), y = random_array(rng, 64), z = random_array(rng, 64);
    EXPECT_DOUBLE_EQ(rmse(x, y), rmse(y, x));
    EXPECT_LE(rmse(x, z), rmse(x, y) + rmse(y, z) + 1e-12);
  }
}

TEST(Ssim, IdentityIsExactlyOne)
{
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t)
  {
    const Eigen::ArrayXd x = random_array(rng, 1000) * (t + 1) + t;
    EXPECT_EQ(ssim(x, x), 1.0);
    EXPECT_EQ(ssim_windowed(x, x, {10, 10, 10}, 3), 1.0);
  }
  const Eigen::ArrayXd flat = Eigen::ArrayXd::Constant(8, 3.0);
  EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, MatchesOracleAndIsSymmetric)
{
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t)
  {
    const Eigen::ArrayXd x = random_array(rng, 200);
    const Eigen::ArrayXd y = 0.7 * x + 0.3 * random_array(rng, 200) + 0.1;
    const double range = std::max(x.maxCoeff(), y.maxCoeff()) - std::min(x.minCoeff(), y.minCoeff());
    const std::vector<double> xv(x.begin(), x.end()), yv(y.begin(), y.end());
    EXPECT_NEAR(ssim(x, y), ssim_oracle(xv, yv, range), 1e-12);
    EXPECT_DOUBLE_EQ(ssim(x, y), ssim(y, x));
    EXPECT_LE(ssim(x, y), 1.0);
    EXPECT_GE(ssim(x, y), -1.0);
  }
}

TEST(Ssim, AnticorrelatedIsNegative)
{
  Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(100, -1.0, 1.0);
  const double s = ssim(x, (-x).eval());
  EXPECT_LT(s, 0.0);
  const std::vector<double> xv(x.begin(), x.end());
  std::vector<double> yv(xv);
  for (double &v : yv)
    v = -v;
  EXPECT_NEAR(s, ssim_oracle(xv, yv, 2.0), 1e-12);
}

TEST(Ssim, ExplicitRange)
{
  std::mt19937_64 rng(4);
  const Eigen::ArrayXd x = random_array(rng, 50), y = random_array(rng, 50);
  SsimOptions o;
  o.range = 10.0;
  const std::vector<double> xv(x.begin(), x.end()), yv(y.begin(), y.end());
  EXPECT_NEAR(ssim(x, y, o), ssim_oracle(xv, yv, 10.0), 1e-12);
  o.range = -1.0;
  EXPECT_THROW(ssim(x, y, o), std::invalid_argument);
}

TEST(SsimWindowed, FullWindowEqualsGlobal)
{
  std::mt19937_64 rng(5);
  const Dims3 d{6, 5, 4};
  const Eigen::ArrayXd x = random_array(rng, d.size());
  const Eigen::ArrayXd y = x + 0.5 * random_array(rng, d.size());
  EXPECT_NEAR(ssim_windowed(x, y, d, 7), ssim(x, y), 1e-12);
}

TEST(SsimWindowed, MatchesBruteForceWindows)
{
  std::mt19937_64 rng(6);
  const Dims3 d{5, 4, 3};
  const int w = 2;
  const Eigen::ArrayXd x = random_array(rng, d.size());
  const Eigen::ArrayXd y = 0.5 * x + random_array(rng, d.size());
  const double range = std::max(x.maxCoeff(), y.maxCoeff()) - std::min(x.minCoeff(), y.minCoeff());
  double total = 0;
  int count = 0;
  for (Index k = 0; k + w <= d.nz; ++k)
    for (Index j = 0; j + w <= d.ny; ++j)
      for (Index i = 0; i + w <= d.nx; ++i)
      {
        std::vector<double> xv, yv;
        for (Index c = k; c < k + w; ++c)
          for (Index b = j; b < j + w; ++b)
            for (Index a = i; a < i + w; ++a)
            {
              xv.push_back(x[a + d.nx * (b + d.ny * c)]);
              yv.push_back(y[a + d.nx * (b + d.ny * c)]);
            }
        total += ssim_oracle(xv, yv, range);
        ++count;
      }
  EXPECT_NEAR(ssim_windowed(x, y, d, w), total / count, 1e-10);
  EXPECT_THROW(ssim_windowed(x, y, d, 0), std::invalid_argument);
}

TEST(Histogram, CountsAndEdges)
{
  const Histogram h = histogram({0.0, 0.1, 0.5, 0.99, 1.0}, 4);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_DOUBLE_EQ(h.edges.front(), 0.0);
  EXPECT_DOUBLE_EQ(h.edges.back(), 1.0);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 0, 1, 2}));
  const Histogram flat = histogram({2.0, 2.0}, 3);
  EXPECT_DOUBLE_EQ(flat.edges.front(), 1.5);
  EXPECT_EQ(std::accumulate(flat.counts.begin(), flat.counts.end(), std::size_t{0}), 2u);
  EXPECT_THROW(histogram({1.0}, 0), std::invalid_argument);
}

TEST(Report, SelfComparisonIsPerfect)
{
  const auto truth = records(5, 7);
  const MetricReport r = report(truth, truth);
  EXPECT_EQ(r.ids.size(), 5u);
  for (const auto &c : r.channels)
  {
    EXPECT_EQ(c.mean_rmse, 0.0);
    EXPECT_EQ(c.mean_ssim, 1.0);
    EXPECT_EQ(std::accumulate(c.rmse_histogram.counts.begin(), c.rmse_histogram.counts.end(), std::size_t{0}), 5u);
    EXPECT_EQ(c.ssim_histogram.counts.size(), 20u);
  }
}

TEST(Report, RawModeKnownOffset)
{
  auto truth = records(1, 8);
  auto pred = truth;
  pred[0].response.channel(Channel::PhiXY) += 0.5f;
  ReportOptions o;
  o.normalized = false;
  const MetricReport r = report(pred, truth, o);
  EXPECT_NEAR(r.channels[2].mean_rmse, 0.5, 1e-5);
  EXPECT_EQ(r.channels[0].mean_rmse, 0.0);
  const std::vector<double> xv(truth[0].response.channel(Channel::PhiXY).begin(),
                               truth[0].response.channel(Channel::PhiXY).end());
  const std::vector<double> yv(pred[0].response.channel(Channel::PhiXY).begin(),
                               pred[0].response.channel(Channel::PhiXY).end());
  const auto [mn, mx] = std::minmax_element(xv.begin(), xv.end());
  const double range = std::max(*mx, *std::max_element(yv.begin(), yv.end())) - std::min(*mn, *std::min_element(yv.begin(), yv.end()));
  EXPECT_NEAR(r.channels[2].mean_ssim, ssim_oracle(yv, xv, range), 1e-9);
}

TEST(Report, NormalizedModeUsesTruthConstants)
{
  const auto truth = records(3, 9);
  auto pred = records(3, 10);
  const MetricReport r = report(pred, truth);
  NormalizationAccumulator acc;
  for (const auto &t : truth)
    acc.add(t.response);
  EXPECT_EQ(r.normalization, acc.constants());
  const auto np = normalize(pred[1].response.cast<double>(), acc.constants());
  const auto nt = normalize(truth[1].response.cast<double>(), acc.constants());
  EXPECT_NEAR(r.channels[1].rmse[1], rmse(np.channel(Channel::RhoYX), nt.channel(Channel::RhoYX)), 1e-12);
}

TEST(Report, PermutationInvariant)
{
  const auto truth = records(6, 11);
  const auto pred = records(6, 12);
  auto shuffled = pred;
  std::reverse(shuffled.begin(), shuffled.end());
  auto truth_shuffled = truth;
  std::rotate(truth_shuffled.begin(), truth_shuffled.begin() + 2, truth_shuffled.end());
  EXPECT_EQ(to_json(report(pred, truth)), to_json(report(shuffled, truth_shuffled)));
}

TEST(Report, RejectsMismatchedIds)
{
  const auto truth = records(3, 13);
  auto pred = truth;
  pred[2].meta.id = "other";
  EXPECT_THROW(report(pred, truth), std::invalid_argument);
  pred = truth;
  pred.pop_back();
  EXPECT_THROW(report(pred, truth), std::invalid_argument);
  pred = truth;
  pred[1].meta.id = pred[0].meta.id;
  EXPECT_THROW(report(pred, truth), std::invalid_argument);
  EXPECT_THROW(report({}, {}), std::invalid_argument);
}

TEST(Report, JsonLayout)
{
  const auto truth = records(2, 14);
  ReportOptions o;
  o.bins = 5;
  const nlohmann::json j = to_json(report(truth, truth, o));
  EXPECT_EQ(j.at("kind"), "mtforge.metric_report");
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("mode"), "normalized");
  EXPECT_EQ(j.at("n_samples"), 2);
  EXPECT_EQ(j.at("sample_ids"), nlohmann::json({"s0", "s1"}));
  for (const char *c : {"rho_xy", "rho_yx", "phi_xy", "phi_yx"})
  {
    const auto &ch = j.at("channels").at(c);
    EXPECT_EQ(ch.at("rmse").size(), 2u);
    EXPECT_EQ(ch.at("histograms").at("ssim").at("counts").size(), 5u);
    EXPECT_EQ(ch.at("histograms").at("rmse").at("edges").size(), 6u);
  }
  EXPECT_TRUE(j.contains("normalization"));
}
