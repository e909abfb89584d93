#pragma once

#include "mtforge/types.hpp"

#include <limits>
#include <span>
#include <vector>

namespace mtforge
{

/// Horizontally layered earth below z = 0. The last layer is a half-space and
/// its thickness entry, if present, is ignored.
struct LayeredModel
{
  std::vector<double> thicknesses;    // m, one per layer except the half-space
  std::vector<double> resistivities;  // Ohm-m

  static LayeredModel half_space(double rho) { return {{}, {rho}}; }
  std::size_t layers() const { return resistivities.size(); }
  void validate() const;
};

struct PlaneWaveResponse
{
  Complex impedance;  // Ohm
  double frequency = 0.0;

  double apparent_resistivity() const;
  double phase_deg() const;
};

/// Surface impedance of a layered earth by upward recursion from the bottom
/// half-space (e^{+iwt}, principal square roots).
PlaneWaveResponse impedance_recursion(const LayeredModel &model, double freq);

/// Plane-wave skin depth sqrt(2 / (w mu sigma)).
double skin_depth(double rho, double freq);

struct FieldProfile
{
  Eigen::VectorXcd e;  // tangential E, normalized to 1 at z = 0
  Eigen::VectorXcd h;  // matching tangential H (H = E / Z at the surface)
};

/// E and H of the plane wave at the given depths (z down, z < 0 is air). In
/// air the quasi-static field has constant H and E varying linearly with
/// height. Depths below `max_depth` are rejected.
FieldProfile boundary_field_profile(const LayeredModel &model, double freq,
                                    std::span<const double> z_nodes,
                                    double max_depth = std::numeric_limits<double>::infinity());

}  // namespace mtforge
