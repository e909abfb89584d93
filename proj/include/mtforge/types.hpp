#pragma once

#include <Eigen/Core>

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtforge
{

using Index = Eigen::Index;
using Complex = std::complex<double>;

/// Vacuum magnetic permeability (H/m), used for every medium.
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

/// Conductivity assigned to air cells (S/m). Keeps the FEM system nonsingular.
inline constexpr double kAirConductivity = 1.0e-8;

inline double angular_frequency(double freq_hz) { return 2.0 * std::numbers::pi * freq_hz; }

struct Dims3
{
  Index nx = 0;
  Index ny = 0;
  Index nz = 0;

  Index size() const { return nx * ny * nz; }
  bool operator==(const Dims3 &) const = default;
};

struct Spacing3
{
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;

  bool operator==(const Spacing3 &) const = default;
};

/// Raised when a solve misses its residual contract.
class NumericFailure : public std::runtime_error
{
public:
  NumericFailure(const std::string &what, double residual)
    : std::runtime_error(what), residual_(residual)
  {
  }
  double residual() const { return residual_; }

private:
  double residual_;
};

/// Raised by the sample/model readers; the message names the byte offset.
class FormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Provenance
{
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double rho_min = 1.0;    // Ohm-m
  double rho_max = 1.0e4;  // Ohm-m
  bool operator==(const Provenance &) const = default;
};

/// log10 resistivity on the core grid. Cell (i, j, k) lives at i + nx*(j + ny*k);
/// k = 0 is the shallowest layer.
template <typename Scalar>
struct ResistivityModel
{
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Dims3 dims;
  Spacing3 spacing;
  Array log10_rho;
  Provenance provenance;

  ResistivityModel() = default;
  ResistivityModel(Dims3 d, Spacing3 s, Scalar fill = Scalar(0))
    : dims(d), spacing(s), log10_rho(Array::Constant(d.size(), fill))
  {
  }

  Index index(Index i, Index j, Index k) const { return i + dims.nx * (j + dims.ny * k); }
  Scalar &operator()(Index i, Index j, Index k) { return log10_rho[index(i, j, k)]; }
  Scalar operator()(Index i, Index j, Index k) const { return log10_rho[index(i, j, k)]; }

  template <typename Other>
  ResistivityModel<Other> cast() const
  {
    ResistivityModel<Other> out;
    out.dims = dims;
    out.spacing = spacing;
    out.log10_rho = log10_rho.template cast<Other>();
    out.provenance = provenance;
    return out;
  }

  bool operator==(const ResistivityModel &o) const
  {
    return dims == o.dims && spacing == o.spacing && provenance == o.provenance &&
           (log10_rho == o.log10_rho).all();
  }
};

enum class Channel : int
{
  RhoXY = 0,
  RhoYX = 1,
  PhiXY = 2,
  PhiYX = 3,
};

inline constexpr std::array<Channel, 4> kAllChannels = {Channel::RhoXY, Channel::RhoYX,
                                                        Channel::PhiXY, Channel::PhiYX};

inline std::string_view channel_name(Channel c)
{
  switch (c)
  {
    case Channel::RhoXY:
      return "rho_xy";
    case Channel::RhoYX:
      return "rho_yx";
    case Channel::PhiXY:
      return "phi_xy";
    case Channel::PhiYX:
      return "phi_yx";
  }
  return "";
}

inline Channel channel_from_name(std::string_view name)
{
  for (Channel c : kAllChannels)
  {
    if (channel_name(c) == name)
    {
      return c;
    }
  }
  throw std::invalid_argument("unknown channel '" + std::string(name) + "'");
}

inline bool is_phase(Channel c) { return c == Channel::PhiXY || c == Channel::PhiYX; }

/// Apparent resistivity (Ohm-m) and phase (degrees) over nx*ny stations and nf
/// frequencies. Element (i, j, f) of a channel lives at i + nx*(j + ny*f).
template <typename Scalar>
struct ResponseVolume
{
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Index nx = 0;
  Index ny = 0;
  Index nf = 0;
  std::array<Array, 4> channels;

  ResponseVolume() = default;
  ResponseVolume(Index nx_, Index ny_, Index nf_) : nx(nx_), ny(ny_), nf(nf_)
  {
    for (auto &c : channels)
    {
      c = Array::Zero(nx * ny * nf);
    }
  }

  Index size() const { return nx * ny * nf; }
  Index index(Index i, Index j, Index f) const { return i + nx * (j + ny * f); }

  Array &channel(Channel c) { return channels[static_cast<int>(c)]; }
  const Array &channel(Channel c) const { return channels[static_cast<int>(c)]; }

  Scalar &operator()(Channel c, Index i, Index j, Index f) { return channel(c)[index(i, j, f)]; }
  Scalar operator()(Channel c, Index i, Index j, Index f) const
  {
    return channel(c)[index(i, j, f)];
  }

  template <typename Other>
  ResponseVolume<Other> cast() const
  {
    ResponseVolume<Other> out;
    out.nx = nx;
    out.ny = ny;
    out.nf = nf;
    for (int c = 0; c < 4; ++c)
    {
      out.channels[c] = channels[c].template cast<Other>();
    }
    return out;
  }

  bool operator==(const ResponseVolume &o) const
  {
    if (nx != o.nx || ny != o.ny || nf != o.nf)
    {
      return false;
    }
    for (int c = 0; c < 4; ++c)
    {
      if (!(channels[c] == o.channels[c]).all())
      {
        return false;
      }
    }
    return true;
  }
};

}  // namespace mtforge
