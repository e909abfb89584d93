#pragma once

#include "mtforge/types.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace mtforge
{

struct GrfSpec
{
  Dims3 dims{32, 32, 32};
  Spacing3 spacing{1000.0, 1000.0, 1000.0};
  double alpha = 8.0;
  std::uint64_t seed = 0;
  double rho_min = 1.0;
  double rho_max = 1.0e4;
};

/// Stochastic log10-resistivity model synthesized in the spectral domain.
///
/// Real white noise is transformed to a Hermitian white spectrum, each mode is
/// scaled by |K|^(-alpha/4) (power ~ |K|^(-alpha/2)) with the K = 0 mode
/// removed, and the inverse transform is standardized, clipped at +-3 sigma and
/// mapped affinely onto [log10 rho_min, log10 rho_max].
ResistivityModel<double> generate_grf(const GrfSpec &spec);

/// Same pipeline, stopping after standardization (zero mean, unit variance).
Eigen::ArrayXd standardized_grf(const GrfSpec &spec);

struct BlockSpec
{
  std::array<Index, 3> origin{0, 0, 0};
  std::array<Index, 3> size{0, 0, 0};
  double rho = 100.0;  // Ohm-m
};

/// Cells inside the block are set to log10(rho); the rest are untouched.
template <typename Scalar>
ResistivityModel<Scalar> embed_block(ResistivityModel<Scalar> model, const BlockSpec &block);

/// Least-squares slope of log shell-averaged power against log |K| over the
/// band 2*fundamental..Nyquist/2. Requires a cubic, non-constant model.
double radial_spectrum_slope(const ResistivityModel<double> &model);

/// Raw little-endian f32 array (x fastest) plus a `<stem>.json` sidecar.
void write_model(const std::string &path, const ResistivityModel<double> &model);
ResistivityModel<double> read_model(const std::string &path);

}  // namespace mtforge
