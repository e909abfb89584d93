#pragma once

#include "mtforge/types.hpp"

#include <unsupported/Eigen/FFT>

#include <vector>

namespace mtforge::detail
{

/// In-place 3D DFT of an x-fastest volume by 1D passes along each axis.
/// The inverse includes the 1/N scaling.
inline void fft3(Eigen::VectorXcd &data, Dims3 d, bool inverse)
{
  Eigen::FFT<double> fft;
  const std::array<Index, 3> n{d.nx, d.ny, d.nz};
  const std::array<Index, 3> stride{1, d.nx, d.nx * d.ny};
  std::vector<Complex> line, out;
  for (int axis = 0; axis < 3; ++axis)
  {
    const Index len = n[axis];
    const Index s = stride[axis];
    line.resize(len);
    // Iterate over all lines parallel to `axis`.
    for (Index base = 0; base < d.size(); ++base)
    {
      if ((base / s) % len != 0)
      {
        continue;
      }
      for (Index t = 0; t < len; ++t)
      {
        line[t] = data[base + t * s];
      }
      if (inverse)
      {
        fft.inv(out, line);
      }
      else
      {
        fft.fwd(out, line);
      }
      for (Index t = 0; t < len; ++t)
      {
        data[base + t * s] = out[t];
      }
    }
  }
}

/// Signed frequency index of DFT bin m of an n-point transform.
inline Index signed_bin(Index m, Index n) { return m <= n / 2 ? m : m - n; }

}  // namespace mtforge::detail
