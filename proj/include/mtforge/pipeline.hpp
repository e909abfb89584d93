#pragma once

#include "mtforge/femsolver.hpp"
#include "mtforge/mesh.hpp"
#include "mtforge/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtforge
{

// --- frequency sweeps ---------------------------------------------------------

/// f_k = 10^(-3 + 0.4 k), k = 0..15 (1 mHz to 1 kHz).
std::vector<double> standard_frequencies();

/// n points log-uniform over [f_min, f_max], both ends included.
std::vector<double> log_uniform_frequencies(double f_min, double f_max, int n);

/// "standard16", or a text file with one frequency (Hz) per line or whitespace
/// separated. Throws std::invalid_argument unless strictly increasing and positive.
std::vector<double> resolve_frequencies(const std::string &spec);

// --- normalization -------------------------------------------------------------

/// Values below this are clamped before taking log10.
inline constexpr double kLogFloor = 1.0e-6;

/// log10(max(v, kLogFloor)) / max_log10, elementwise.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1>
normalize(const Eigen::ArrayBase<Derived> &values, double max_log10)
{
  using Scalar = typename Derived::Scalar;
  if (!(max_log10 > 0.0) || !std::isfinite(max_log10))
  {
    throw std::invalid_argument("normalize: channel maximum (log10) must be positive");
  }
  if (!values.allFinite())
  {
    throw std::invalid_argument("normalize: non-finite input");
  }
  const Scalar inv = static_cast<Scalar>(1.0 / max_log10);
  return values.max(static_cast<Scalar>(kLogFloor)).log10() * inv;
}

/// Inverse of normalize: 10^(v * max_log10). When out_of_range is given it
/// receives the number of inputs outside [0, 1 + 1e-6].
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1>
denormalize(const Eigen::ArrayBase<Derived> &values, double max_log10,
            Index *out_of_range = nullptr)
{
  using Scalar = typename Derived::Scalar;
  if (out_of_range)
  {
    *out_of_range = ((values < Scalar(0)) || (values > static_cast<Scalar>(1.0 + 1e-6))).count();
  }
  return (values * static_cast<Scalar>(max_log10) * static_cast<Scalar>(std::log(10.0))).exp();
}

enum class PhaseScaling
{
  Log10,     // same log10 scheme as the resistivities
  Linear90,  // phi / 90
};

std::string_view phase_scaling_name(PhaseScaling s);
PhaseScaling phase_scaling_from_name(std::string_view name);

/// Dataset-global normalization constants: max log10 value per response
/// channel (rho_xy, rho_yx, phi_xy, phi_yx) and of the model.
struct NormalizationConstants
{
  std::array<double, 4> channel_max_log10{};
  double model_max_log10 = 0.0;
  PhaseScaling phase_scaling = PhaseScaling::Log10;

  bool operator==(const NormalizationConstants &) const = default;
};

/// Running maxima over a set of volumes.
class NormalizationAccumulator
{
public:
  void add(const ResponseVolume<float> &response);
  void add(const ResistivityModel<float> &model);
  void merge(const NormalizationAccumulator &other);
  NormalizationConstants constants(PhaseScaling scaling = PhaseScaling::Log10) const;

private:
  std::array<double, 4> channel_max_{-HUGE_VAL, -HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
  double model_max_ = -HUGE_VAL;
};

template <typename Scalar>
ResponseVolume<Scalar> normalize(const ResponseVolume<Scalar> &response,
                                 const NormalizationConstants &k)
{
  ResponseVolume<Scalar> out = response;
  for (Channel c : kAllChannels)
  {
    const auto &v = response.channel(c);
    if (is_phase(c) && k.phase_scaling == PhaseScaling::Linear90)
    {
      out.channel(c) = v / static_cast<Scalar>(90);
    }
    else
    {
      out.channel(c) = normalize(v, k.channel_max_log10[static_cast<int>(c)]);
    }
  }
  return out;
}

template <typename Scalar>
ResponseVolume<Scalar> denormalize(const ResponseVolume<Scalar> &normalized,
                                   const NormalizationConstants &k)
{
  ResponseVolume<Scalar> out = normalized;
  for (Channel c : kAllChannels)
  {
    const auto &v = normalized.channel(c);
    if (is_phase(c) && k.phase_scaling == PhaseScaling::Linear90)
    {
      out.channel(c) = v * static_cast<Scalar>(90);
    }
    else
    {
      out.channel(c) = denormalize(v, k.channel_max_log10[static_cast<int>(c)]);
    }
  }
  return out;
}

// --- noise ----------------------------------------------------------------------

struct NoiseSpec
{
  double level = 0.0;  // fraction of each value, e.g. 0.05
  std::uint64_t seed = 0;
};

/// Multiplicative Gaussian noise d' = d (1 + level g), g ~ N(0, 1) drawn per
/// element in channel order. Resistivities stay positive and phases stay inside
/// (0, 90) degrees.
ResponseVolume<double> add_noise(const ResponseVolume<double> &response, const NoiseSpec &spec);
ResponseVolume<float> add_noise(const ResponseVolume<float> &response, const NoiseSpec &spec);

// --- splits ---------------------------------------------------------------------

struct DatasetSplits
{
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  bool operator==(const DatasetSplits &) const = default;
};

inline constexpr std::array<double, 3> kDefaultFractions{0.85, 0.10, 0.05};

/// Split sizes by the largest-remainder rule (ties go to the earlier split).
std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3> &fractions);

/// Deterministic shuffled partition. The ids are sorted first, so the result
/// does not depend on the input order.
DatasetSplits split(std::vector<std::string> ids,
                    const std::array<double, 3> &fractions = kDefaultFractions,
                    std::uint64_t seed = 0);

// --- samples --------------------------------------------------------------------

inline constexpr std::uint32_t kSampleFormatVersion = 1;

struct SampleMeta
{
  std::string id;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::vector<double> freqs;
  double noise_level = 0.0;
  Spacing3 spacing;
  double rho_min = 1.0;
  double rho_max = 1.0e4;

  bool operator==(const SampleMeta &) const = default;
};

/// One dataset sample: log10 model on the core grid and the response volume.
template <typename Scalar>
struct SampleRecord
{
  ResistivityModel<Scalar> model;
  ResponseVolume<Scalar> response;
  SampleMeta meta;

  bool operator==(const SampleRecord &o) const
  {
    return model == o.model && response == o.response && meta == o.meta;
  }
};

/// Binary layout (little endian):
///   "MTS1" | u32 version | u32 nx, ny, nz, nf
///   | f32 model[nx*ny*nz] (x fastest, then y, then z)
///   | f32 rho_xy, rho_yx, phi_xy, phi_yx, each [nx*ny*nf] (x, y, then frequency)
/// plus a JSON sidecar next to it with the same stem. Both files are written
/// to a temporary name and renamed into place.
void write_sample(const std::string &path, const SampleRecord<float> &record);

/// Throws FormatError (with the byte offset) on bad magic, version, dims or length.
SampleRecord<float> read_sample(const std::string &path);

std::string sample_sidecar_path(const std::string &path);
nlohmann::json sample_meta_json(const SampleRecord<float> &record);

/// Builds a record from a forward run; the id is taken from meta.
SampleRecord<float> make_sample(const ResistivityModel<double> &model,
                                const ResponseVolume<double> &response, SampleMeta meta);

/// Sorted paths of every "*.mts" file in a directory.
std::vector<std::string> list_samples(const std::string &dir);

// --- dataset factory ------------------------------------------------------------

/// Per-sample seed derived from (master seed, alpha, index), independent of
/// scheduling.
std::uint64_t sample_seed(std::uint64_t master_seed, double alpha, std::uint64_t index);

/// "a<alpha>_<index, 5 digits>", e.g. "a8_00012".
std::string sample_id(double alpha, std::uint64_t index);

struct DatasetConfig
{
  std::size_t n_per_alpha = 1;
  std::vector<double> alphas{6.0, 7.0, 8.0, 9.0, 10.0};
  GridSpec grid;
  std::vector<double> freqs = standard_frequencies();
  std::string out_dir;
  int threads = 1;
  std::uint64_t master_seed = 0;
  double rho_min = 1.0;
  double rho_max = 1.0e4;
  std::array<double, 3> fractions = kDefaultFractions;
  PhaseScaling phase_scaling = PhaseScaling::Log10;
  SolverOptions solver;
  /// Abort when more than this fraction of samples fail.
  double max_failure_fraction = 0.01;
  std::function<void(std::string_view)> log;
};

struct DatasetManifest
{
  std::uint32_t format_version = kSampleFormatVersion;
  std::uint64_t master_seed = 0;
  std::vector<double> alphas;
  std::size_t n_per_alpha = 0;
  GridSpec grid;
  std::vector<double> freqs;
  std::array<double, 2> rho_bounds{1.0, 1.0e4};
  std::vector<std::string> samples;  // successful ids, generation order
  std::vector<std::string> failed;
  DatasetSplits splits;
  std::array<double, 3> fractions = kDefaultFractions;
  NormalizationConstants normalization;

  bool operator==(const DatasetManifest &) const = default;
};

nlohmann::json to_json(const DatasetManifest &manifest);
DatasetManifest manifest_from_json(const nlohmann::json &j);
void write_manifest(const std::string &path, const DatasetManifest &manifest);
DatasetManifest read_manifest(const std::string &path);

/// Generates every (alpha, index) sample that is not already present and
/// readable in out_dir, then writes out_dir/manifest.json. Per-sample failures
/// are logged and skipped; exceeding max_failure_fraction throws
/// std::runtime_error before the manifest is written.
DatasetManifest build_dataset(const DatasetConfig &config);

}  // namespace mtforge
