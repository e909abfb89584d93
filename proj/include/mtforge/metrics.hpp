#pragma once

#include "mtforge/pipeline.hpp"
#include "mtforge/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtforge
{

/// sqrt(mean((a - b)^2)) over all elements.
template <typename A, typename B>
double rmse(const Eigen::DenseBase<A> &a, const Eigen::DenseBase<B> &b)
{
  if (a.rows() != b.rows() || a.cols() != b.cols())
  {
    throw std::invalid_argument("rmse: shape mismatch");
  }
  if (a.size() == 0)
  {
    throw std::invalid_argument("rmse: empty input");
  }
  const auto d = (a.derived().template cast<double>().array() -
                  b.derived().template cast<double>().array());
  return std::sqrt(d.square().mean());
}

struct SsimOptions
{
  double k1 = 0.01;
  double k2 = 0.03;
  /// Dynamic range; defaults to max(x, y) - min(x, y) over the pair.
  std::optional<double> range;
};

namespace detail
{

struct Moments
{
  double mean_x, mean_y, var_x, var_y, cov;
};

inline double ssim_from_moments(const Moments &m, double range, const SsimOptions &opt)
{
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);
  // Explicit products keep ssim(x, x) == 1 bit-exactly.
  const double xx = m.mean_x * m.mean_x, yy = m.mean_y * m.mean_y, xy = m.mean_x * m.mean_y;
  return ((xy + xy + c1) * (m.cov + m.cov + c2)) / ((xx + yy + c1) * (m.var_x + m.var_y + c2));
}

}  // namespace detail

/// Structural similarity from whole-volume statistics (population moments),
/// C1 = (k1 L)^2, C2 = (k2 L)^2. Returns 1 when L = 0 (both inputs the same
/// constant).
template <typename A, typename B>
double ssim(const Eigen::DenseBase<A> &a, const Eigen::DenseBase<B> &b, const SsimOptions &opt = {})
{
  if (a.rows() != b.rows() || a.cols() != b.cols())
  {
    throw std::invalid_argument("ssim: shape mismatch");
  }
  if (a.size() == 0)
  {
    throw std::invalid_argument("ssim: empty input");
  }
  const Eigen::ArrayXd x = a.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd y = b.derived().template cast<double>().reshaped().array();
  const double range =
    opt.range ? *opt.range : std::max(x.maxCoeff(), y.maxCoeff()) - std::min(x.minCoeff(), y.minCoeff());
  if (!(range >= 0.0))
  {
    throw std::invalid_argument("ssim: dynamic range must be non-negative");
  }
  if (range == 0.0)
  {
    return 1.0;
  }
  detail::Moments m;
  m.mean_x = x.mean();
  m.mean_y = y.mean();
  const Eigen::ArrayXd dx = x - m.mean_x;
  const Eigen::ArrayXd dy = y - m.mean_y;
  m.var_x = (dx * dx).mean();
  m.var_y = (dy * dy).mean();
  m.cov = (dx * dy).mean();
  return detail::ssim_from_moments(m, range, opt);
}

/// Mean of local SSIM over every w x w x w window (clipped to the volume) of a
/// volume laid out x fastest. L is taken from the whole pair unless given.
double ssim_windowed(const Eigen::Ref<const Eigen::ArrayXd> &x,
                     const Eigen::Ref<const Eigen::ArrayXd> &y, Dims3 dims, int window = 7,
                     const SsimOptions &opt = {});

// --- reports ------------------------------------------------------------------

struct Histogram
{
  std::vector<double> edges;  // bins + 1, increasing
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max] of the values (the last bin is closed).
/// A degenerate range is widened to [v - 0.5, v + 0.5].
Histogram histogram(const std::vector<double> &values, int bins);

struct ChannelMetrics
{
  double mean_rmse = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> rmse;  // one per sample, in report id order
  std::vector<double> ssim;
  Histogram rmse_histogram;
  Histogram ssim_histogram;
};

struct ReportOptions
{
  /// Compare normalized channels (default) or raw units.
  bool normalized = true;
  /// Constants for normalized mode; computed from the truth set when absent.
  std::optional<NormalizationConstants> normalization;
  int bins = 20;
  /// 0 selects global SSIM, otherwise the window edge length.
  int ssim_window = 0;
  SsimOptions ssim;
};

struct MetricReport
{
  std::vector<std::string> ids;  // sorted
  std::array<ChannelMetrics, 4> channels;
  ReportOptions options;
  NormalizationConstants normalization;  // meaningful in normalized mode
};

/// Pairs records by meta.id. Throws std::invalid_argument when the id sets
/// differ or a pair has mismatched shapes.
MetricReport report(const std::vector<SampleRecord<float>> &predicted,
                    const std::vector<SampleRecord<float>> &truth, const ReportOptions &options = {});

nlohmann::json to_json(const MetricReport &report);

}  // namespace mtforge
