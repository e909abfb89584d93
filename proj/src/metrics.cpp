#include "mtforge/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>

namespace mtforge
{

namespace
{

// Inclusive 3D prefix sums with a zero border: S(i+1, j+1, k+1) = sum over [0..i]x[0..j]x[0..k].
class PrefixSum3
{
public:
  PrefixSum3(const Eigen::ArrayXd &v, Dims3 d)
    : nx_(d.nx + 1), ny_(d.ny + 1), s_(Eigen::ArrayXd::Zero((d.nx + 1) * (d.ny + 1) * (d.nz + 1)))
  {
    for (Index k = 0; k < d.nz; ++k)
    {
      for (Index j = 0; j < d.ny; ++j)
      {
        for (Index i = 0; i < d.nx; ++i)
        {
          at(i + 1, j + 1, k + 1) = v[i + d.nx * (j + d.ny * k)] + at(i, j + 1, k + 1) +
                                    at(i + 1, j, k + 1) + at(i + 1, j + 1, k) - at(i, j, k + 1) -
                                    at(i, j + 1, k) - at(i + 1, j, k) + at(i, j, k);
        }
      }
    }
  }

  // Sum over [i0, i1) x [j0, j1) x [k0, k1).
  double box(Index i0, Index j0, Index k0, Index i1, Index j1, Index k1) const
  {
    return at(i1, j1, k1) - at(i0, j1, k1) - at(i1, j0, k1) - at(i1, j1, k0) + at(i0, j0, k1) +
           at(i0, j1, k0) + at(i1, j0, k0) - at(i0, j0, k0);
  }

private:
  double &at(Index i, Index j, Index k) { return s_[i + nx_ * (j + ny_ * k)]; }
  double at(Index i, Index j, Index k) const { return s_[i + nx_ * (j + ny_ * k)]; }

  Index nx_, ny_;
  Eigen::ArrayXd s_;
};

}  // namespace

double ssim_windowed(const Eigen::Ref<const Eigen::ArrayXd> &x,
                     const Eigen::Ref<const Eigen::ArrayXd> &y, Dims3 d, int window,
                     const SsimOptions &opt)
{
  if (x.size() != d.size() || y.size() != d.size())
  {
    throw std::invalid_argument("ssim_windowed: shape mismatch");
  }
  if (window < 1)
  {
    throw std::invalid_argument("ssim_windowed: window must be >= 1");
  }
  const double range =
    opt.range ? *opt.range : std::max(x.maxCoeff(), y.maxCoeff()) - std::min(x.minCoeff(), y.minCoeff());
  if (range == 0.0)
  {
    return 1.0;
  }
  const PrefixSum3 sx(x, d), sy(y, d), sxx(x * x, d), syy(y * y, d), sxy(x * y, d);
  const Index wx = std::min<Index>(window, d.nx), wy = std::min<Index>(window, d.ny),
              wz = std::min<Index>(window, d.nz);
  const double n = static_cast<double>(wx * wy * wz);
  double total = 0.0;
  Index count = 0;
  for (Index k = 0; k + wz <= d.nz; ++k)
  {
    for (Index j = 0; j + wy <= d.ny; ++j)
    {
      for (Index i = 0; i + wx <= d.nx; ++i)
      {
        detail::Moments m;
        m.mean_x = sx.box(i, j, k, i + wx, j + wy, k + wz) / n;
        m.mean_y = sy.box(i, j, k, i + wx, j + wy, k + wz) / n;
        m.var_x = sxx.box(i, j, k, i + wx, j + wy, k + wz) / n - m.mean_x * m.mean_x;
        m.var_y = syy.box(i, j, k, i + wx, j + wy, k + wz) / n - m.mean_y * m.mean_y;
        m.cov = sxy.box(i, j, k, i + wx, j + wy, k + wz) / n - m.mean_x * m.mean_y;
        total += detail::ssim_from_moments(m, range, opt);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

Histogram histogram(const std::vector<double> &values, int bins)
{
  if (bins < 1)
  {
    throw std::invalid_argument("histogram: need at least one bin");
  }
  Histogram h;
  h.counts.assign(bins, 0);
  double lo = 0.0, hi = 1.0;
  if (!values.empty())
  {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(hi > lo))
  {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b)
  {
    h.edges.push_back(b == bins ? hi : lo + width * b);
  }
  for (double v : values)
  {
    const auto b = std::clamp(static_cast<int>((v - lo) / width), 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

MetricReport report(const std::vector<SampleRecord<float>> &predicted,
                    const std::vector<SampleRecord<float>> &truth, const ReportOptions &options)
{
  if (truth.empty())
  {
    throw std::invalid_argument("report: empty sample set");
  }
  std::map<std::string, const SampleRecord<float> *> pred_by_id, truth_by_id;
  for (const auto &r : predicted)
  {
    if (!pred_by_id.emplace(r.meta.id, &r).second)
    {
      throw std::invalid_argument("report: duplicate predicted id '" + r.meta.id + "'");
    }
  }
  for (const auto &r : truth)
  {
    if (!truth_by_id.emplace(r.meta.id, &r).second)
    {
      throw std::invalid_argument("report: duplicate truth id '" + r.meta.id + "'");
    }
    if (!pred_by_id.contains(r.meta.id))
    {
      throw std::invalid_argument("report: id '" + r.meta.id + "' has no prediction");
    }
  }
  if (pred_by_id.size() != truth_by_id.size())
  {
    for (const auto &[id, r] : pred_by_id)
    {
      if (!truth_by_id.contains(id))
      {
        throw std::invalid_argument("report: id '" + id + "' has no truth");
      }
    }
  }

  MetricReport rep;
  rep.options = options;
  if (options.normalized)
  {
    if (options.normalization)
    {
      rep.normalization = *options.normalization;
    }
    else
    {
      NormalizationAccumulator acc;
      for (const auto &r : truth)
      {
        acc.add(r.response);
      }
      rep.normalization = acc.constants();
    }
  }

  for (const auto &[id, t] : truth_by_id)
  {
    const SampleRecord<float> &p = *pred_by_id.at(id);
    const auto &tv = t->response;
    const auto &pv = p.response;
    if (tv.nx != pv.nx || tv.ny != pv.ny || tv.nf != pv.nf)
    {
      throw std::invalid_argument("report: response shapes differ for '" + id + "'");
    }
    rep.ids.push_back(id);
    const ResponseVolume<double> a = options.normalized ? normalize(pv.cast<double>(), rep.normalization)
                                                        : pv.cast<double>();
    const ResponseVolume<double> b = options.normalized ? normalize(tv.cast<double>(), rep.normalization)
                                                        : tv.cast<double>();
    for (int c = 0; c < 4; ++c)
    {
      auto &ch = rep.channels[c];
      ch.rmse.push_back(rmse(a.channels[c], b.channels[c]));
      ch.ssim.push_back(options.ssim_window > 0
                          ? ssim_windowed(a.channels[c], b.channels[c], {tv.nx, tv.ny, tv.nf},
                                          options.ssim_window, options.ssim)
                          : ssim(a.channels[c], b.channels[c], options.ssim));
    }
  }

  const double n = static_cast<double>(rep.ids.size());
  for (auto &ch : rep.channels)
  {
    ch.mean_rmse = std::accumulate(ch.rmse.begin(), ch.rmse.end(), 0.0) / n;
    ch.mean_ssim = std::accumulate(ch.ssim.begin(), ch.ssim.end(), 0.0) / n;
    ch.rmse_histogram = histogram(ch.rmse, options.bins);
    ch.ssim_histogram = histogram(ch.ssim, options.bins);
  }
  return rep;
}

nlohmann::json to_json(const MetricReport &rep)
{
  auto hist = [](const Histogram &h) {
    return nlohmann::json{{"edges", h.edges}, {"counts", h.counts}};
  };
  nlohmann::json channels = nlohmann::json::object();
  for (Channel c : kAllChannels)
  {
    const auto &ch = rep.channels[static_cast<int>(c)];
    channels[std::string(channel_name(c))] = {
      {"mean_rmse", ch.mean_rmse},
      {"mean_ssim", ch.mean_ssim},
      {"rmse", ch.rmse},
      {"ssim", ch.ssim},
      {"histograms", {{"rmse", hist(ch.rmse_histogram)}, {"ssim", hist(ch.ssim_histogram)}}},
    };
  }
  nlohmann::json j = {
    {"kind", "mtforge.metric_report"},
    {"schema_version", 1},
    {"mode", rep.options.normalized ? "normalized" : "raw"},
    {"ssim",
     {{"form", rep.options.ssim_window > 0 ? "windowed" : "global"},
      {"window", rep.options.ssim_window},
      {"k1", rep.options.ssim.k1},
      {"k2", rep.options.ssim.k2}}},
    {"bins", rep.options.bins},
    {"n_samples", rep.ids.size()},
    {"sample_ids", rep.ids},
    {"channels", channels},
  };
  if (rep.options.normalized)
  {
    nlohmann::json maxima;
    for (Channel c : kAllChannels)
    {
      maxima[std::string(channel_name(c))] =
        rep.normalization.channel_max_log10[static_cast<int>(c)];
    }
    j["normalization"] = {{"phase_scaling", phase_scaling_name(rep.normalization.phase_scaling)},
                          {"channel_max_log10", maxima}};
  }
  return j;
}

}  // namespace mtforge
