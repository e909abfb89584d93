#include "mtforge/pipeline.hpp"

#include "mtforge/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

namespace mtforge
{

std::vector<double> standard_frequencies()
{
  std::vector<double> f(16);
  for (int k = 0; k < 16; ++k)
  {
    f[k] = std::pow(10.0, -3.0 + 0.4 * k);
  }
  return f;
}

std::vector<double> log_uniform_frequencies(double f_min, double f_max, int n)
{
  if (!(f_min > 0.0) || !(f_max > f_min) || n < 2)
  {
    throw std::invalid_argument("log_uniform_frequencies: need 0 < f_min < f_max and n >= 2");
  }
  std::vector<double> f(n);
  const double a = std::log10(f_min), b = std::log10(f_max);
  for (int k = 0; k < n; ++k)
  {
    f[k] = std::pow(10.0, a + (b - a) * k / (n - 1));
  }
  return f;
}

std::vector<double> resolve_frequencies(const std::string &spec)
{
  if (spec == "standard16")
  {
    return standard_frequencies();
  }
  std::ifstream in(spec);
  if (!in)
  {
    throw std::invalid_argument("frequencies: '" + spec + "' is neither 'standard16' nor a readable file");
  }
  std::vector<double> f{std::istream_iterator<double>(in), std::istream_iterator<double>()};
  if (!in.eof())
  {
    throw std::invalid_argument("frequencies: non-numeric entry in '" + spec + "'");
  }
  if (f.empty())
  {
    throw std::invalid_argument("frequencies: '" + spec + "' is empty");
  }
  for (std::size_t k = 0; k < f.size(); ++k)
  {
    if (!(f[k] > 0.0) || (k > 0 && !(f[k] > f[k - 1])))
    {
      throw std::invalid_argument("frequencies: must be positive and strictly increasing");
    }
  }
  return f;
}

std::string_view phase_scaling_name(PhaseScaling s)
{
  return s == PhaseScaling::Linear90 ? "linear90" : "log10";
}

PhaseScaling phase_scaling_from_name(std::string_view name)
{
  if (name == "log10")
  {
    return PhaseScaling::Log10;
  }
  if (name == "linear90")
  {
    return PhaseScaling::Linear90;
  }
  throw std::invalid_argument("unknown phase scaling '" + std::string(name) + "'");
}

void NormalizationAccumulator::add(const ResponseVolume<float> &response)
{
  for (int c = 0; c < 4; ++c)
  {
    const auto &v = response.channels[c];
    if (v.size() > 0)
    {
      const double m = std::max(static_cast<double>(v.maxCoeff()), kLogFloor);
      channel_max_[c] = std::max(channel_max_[c], std::log10(m));
    }
  }
}

void NormalizationAccumulator::add(const ResistivityModel<float> &model)
{
  if (model.log10_rho.size() > 0)
  {
    model_max_ = std::max(model_max_, static_cast<double>(model.log10_rho.maxCoeff()));
  }
}

void NormalizationAccumulator::merge(const NormalizationAccumulator &other)
{
  for (int c = 0; c < 4; ++c)
  {
    channel_max_[c] = std::max(channel_max_[c], other.channel_max_[c]);
  }
  model_max_ = std::max(model_max_, other.model_max_);
}

NormalizationConstants NormalizationAccumulator::constants(PhaseScaling scaling) const
{
  NormalizationConstants k;
  k.channel_max_log10 = channel_max_;
  k.model_max_log10 = model_max_;
  k.phase_scaling = scaling;
  return k;
}

namespace
{

template <typename Scalar>
ResponseVolume<Scalar> add_noise_impl(const ResponseVolume<Scalar> &response, const NoiseSpec &spec)
{
  if (!(spec.level >= 0.0) || !(spec.level < 1.0))
  {
    throw std::invalid_argument("add_noise: level must lie in [0, 1)");
  }
  if (spec.level == 0.0)
  {
    return response;
  }
  const auto floor = static_cast<Scalar>(kLogFloor);
  const Scalar phase_ceiling = std::nextafter(Scalar(90), Scalar(0));

  NormalStream normal(spec.seed);
  ResponseVolume<Scalar> out = response;
  for (Channel c : kAllChannels)
  {
    auto &v = out.channel(c);
    for (Index p = 0; p < v.size(); ++p)
    {
      const double noisy = static_cast<double>(v[p]) * (1.0 + spec.level * normal());
      Scalar x = static_cast<Scalar>(noisy);
      x = std::max(x, floor);
      if (is_phase(c))
      {
        x = std::min(x, phase_ceiling);
      }
      v[p] = x;
    }
  }
  return out;
}

// Unbiased integer in [0, n) by rejection.
std::uint64_t uniform_below(std::mt19937_64 &engine, std::uint64_t n)
{
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do
  {
    r = engine();
  } while (r >= limit);
  return r % n;
}

}  // namespace

ResponseVolume<double> add_noise(const ResponseVolume<double> &response, const NoiseSpec &spec)
{
  return add_noise_impl(response, spec);
}

ResponseVolume<float> add_noise(const ResponseVolume<float> &response, const NoiseSpec &spec)
{
  return add_noise_impl(response, spec);
}

std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3> &fractions)
{
  double sum = 0.0;
  for (double f : fractions)
  {
    if (!(f >= 0.0))
    {
      throw std::invalid_argument("split: fractions must be non-negative");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
  {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s)
  {
    const double exact = fractions[s] * static_cast<double>(n);
    // Absorb representation error such as 0.85 * 20 = 16.999...
    const double whole = std::floor(exact + 1e-9);
    counts[s] = static_cast<std::size_t>(whole);
    remainder[s] = std::max(0.0, exact - whole);
    assigned += counts[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned)
  {
    ++counts[order[r % 3]];
  }
  return counts;
}

DatasetSplits split(std::vector<std::string> ids, const std::array<double, 3> &fractions,
                    std::uint64_t seed)
{
  if (ids.empty())
  {
    throw std::invalid_argument("split: empty id list");
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
  {
    throw std::invalid_argument("split: duplicate ids");
  }
  const auto counts = split_counts(ids.size(), fractions);

  std::mt19937_64 engine(mix_seed(seed));
  for (std::size_t i = ids.size() - 1; i > 0; --i)
  {
    std::swap(ids[i], ids[uniform_below(engine, i + 1)]);
  }

  DatasetSplits s;
  auto first = ids.begin();
  s.train.assign(first, first + counts[0]);
  first += counts[0];
  s.validation.assign(first, first + counts[1]);
  first += counts[1];
  s.test.assign(first, ids.end());
  return s;
}

std::uint64_t sample_seed(std::uint64_t master_seed, double alpha, std::uint64_t index)
{
  const auto a = std::bit_cast<std::uint64_t>(alpha);
  return mix_seed(mix_seed(mix_seed(master_seed) ^ a) ^ index);
}

std::string sample_id(double alpha, std::uint64_t index)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "a%g_%05llu", alpha, static_cast<unsigned long long>(index));
  return buf;
}

}  // namespace mtforge
