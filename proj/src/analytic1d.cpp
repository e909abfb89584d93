#include "mtforge/analytic1d.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace mtforge
{

namespace
{

const Complex kI(0.0, 1.0);

struct Layer
{
  double top;
  double bottom;  // +inf for the half-space
  Complex k;      // sqrt(i w mu sigma)
  Complex z;      // intrinsic impedance i w mu / k
};

}  // namespace

void LayeredModel::validate() const
{
  if (resistivities.empty())
  {
    throw std::invalid_argument("LayeredModel: at least one layer required");
  }
  for (double r : resistivities)
  {
    if (!(r > 0.0) || !std::isfinite(r))
    {
      throw std::invalid_argument("LayeredModel: resistivities must be positive");
    }
  }
  if (thicknesses.size() + 1 < resistivities.size())
  {
    throw std::invalid_argument("LayeredModel: missing layer thickness");
  }
  for (std::size_t n = 0; n + 1 < resistivities.size(); ++n)
  {
    if (!(thicknesses[n] > 0.0))
    {
      throw std::invalid_argument("LayeredModel: thicknesses must be positive");
    }
  }
}

double PlaneWaveResponse::apparent_resistivity() const
{
  return std::norm(impedance) / (kMu0 * angular_frequency(frequency));
}

double PlaneWaveResponse::phase_deg() const
{
  return std::atan2(impedance.imag(), impedance.real()) * 180.0 / std::numbers::pi;
}

double skin_depth(double rho, double freq)
{
  if (!(rho > 0.0) || !(freq > 0.0))
  {
    throw std::invalid_argument("skin_depth: rho and freq must be positive");
  }
  return std::sqrt(2.0 * rho / (angular_frequency(freq) * kMu0));
}

namespace
{

std::vector<Layer> make_layers(const LayeredModel &model, double omega)
{
  std::vector<Layer> layers;
  double top = 0.0;
  for (std::size_t n = 0; n < model.layers(); ++n)
  {
    const bool last = n + 1 == model.layers();
    const double bottom = last ? std::numeric_limits<double>::infinity() : top + model.thicknesses[n];
    const Complex k = std::sqrt(kI * omega * kMu0 / model.resistivities[n]);
    layers.push_back({top, bottom, k, kI * omega * kMu0 / k});
    top = bottom;
  }
  return layers;
}

// Impedance at the top of every layer, computed bottom-up.
std::vector<Complex> top_impedances(const std::vector<Layer> &layers)
{
  std::vector<Complex> z_top(layers.size());
  z_top.back() = layers.back().z;
  for (std::size_t n = layers.size() - 1; n-- > 0;)
  {
    const Layer &l = layers[n];
    const Complex t = std::tanh(l.k * (l.bottom - l.top));
    const Complex below = z_top[n + 1];
    z_top[n] = l.z * (below + l.z * t) / (l.z + below * t);
  }
  return z_top;
}

}  // namespace

PlaneWaveResponse impedance_recursion(const LayeredModel &model, double freq)
{
  if (!(freq > 0.0))
  {
    throw std::invalid_argument("impedance_recursion: frequency must be positive");
  }
  model.validate();
  const auto layers = make_layers(model, angular_frequency(freq));
  return {top_impedances(layers).front(), freq};
}

FieldProfile boundary_field_profile(const LayeredModel &model, double freq,
                                    std::span<const double> z_nodes, double max_depth)
{
  if (!(freq > 0.0))
  {
    throw std::invalid_argument("boundary_field_profile: frequency must be positive");
  }
  model.validate();
  const double omega = angular_frequency(freq);
  const auto layers = make_layers(model, omega);
  const auto z_top = top_impedances(layers);

  // E at the top of each layer, continuing downward from E(0) = 1. Inside a
  // finite layer of thickness h, with Zb the impedance at its bottom,
  //   E(d) / E(0) = e^{-kd} [(z + Zb) + (Zb - z) e^{-2k(h-d)}] / D
  //   H(d) / E(0) = e^{-kd} [(z + Zb) - (Zb - z) e^{-2k(h-d)}] / (z D)
  // with D = (z + Zb) + (Zb - z) e^{-2kh}; only decaying exponentials appear.
  const std::size_t n_layers = layers.size();
  std::vector<Complex> e_top(n_layers);
  e_top[0] = 1.0;
  auto layer_field = [&](std::size_t n, double d) -> std::pair<Complex, Complex> {
    const Layer &l = layers[n];
    const Complex decay = std::exp(-l.k * d);
    if (n + 1 == n_layers)
    {
      return {e_top[n] * decay, e_top[n] * decay / l.z};
    }
    const double h = l.bottom - l.top;
    const Complex zb = z_top[n + 1];
    const Complex refl = (zb - l.z) * std::exp(-2.0 * l.k * (h - d));
    const Complex denom = (l.z + zb) + (zb - l.z) * std::exp(-2.0 * l.k * h);
    return {e_top[n] * decay * ((l.z + zb) + refl) / denom,
            e_top[n] * decay * ((l.z + zb) - refl) / (l.z * denom)};
  };
  for (std::size_t n = 0; n + 1 < n_layers; ++n)
  {
    e_top[n + 1] = layer_field(n, layers[n].bottom - layers[n].top).first;
  }

  const Complex h_surface = 1.0 / z_top.front();
  const Complex air_k = std::sqrt(kI * omega * kMu0 * kAirConductivity);

  FieldProfile out;
  out.e.resize(static_cast<Index>(z_nodes.size()));
  out.h.resize(static_cast<Index>(z_nodes.size()));
  for (std::size_t p = 0; p < z_nodes.size(); ++p)
  {
    const double z = z_nodes[p];
    if (z > max_depth)
    {
      throw std::invalid_argument("boundary_field_profile: node below the modelled domain");
    }
    Complex e, h;
    if (z < 0.0)
    {
      // Air: transfer matrix of a layer with sigma_air, height d above ground.
      // dE/dz = -i w mu H and dH/dz = -sigma E, integrated upward.
      const double d = -z;
      const Complex c = std::cosh(air_k * d);
      const Complex s_over_k = std::abs(air_k * d) < 1e-8 ? Complex(d) : std::sinh(air_k * d) / air_k;
      e = c + kI * omega * kMu0 * h_surface * s_over_k;
      h = h_surface * c + kAirConductivity * s_over_k;
    }
    else
    {
      std::size_t n = 0;
      while (n + 1 < n_layers && z >= layers[n].bottom)
      {
        ++n;
      }
      std::tie(e, h) = layer_field(n, z - layers[n].top);
    }
    out.e[static_cast<Index>(p)] = e;
    out.h[static_cast<Index>(p)] = h;
  }
  return out;
}

}  // namespace mtforge
