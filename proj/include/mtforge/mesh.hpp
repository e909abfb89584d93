#pragma once

#include "mtforge/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>

namespace mtforge
{

/// Uniform study grid. The core occupies [0, nx*dx] x [0, ny*dy] x [0, nz*dz];
/// z points down and z = 0 is the air-earth interface.
struct CoreGrid
{
  Dims3 cells;
  Spacing3 spacing;
};

/// Node coordinates of the computational grid: core plus geometric padding on
/// the lateral sides and the bottom, and n_air air layers above z = 0.
struct PaddedGrid
{
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  int n_pad = 0;
  double expansion = 1.0;
  int n_air = 0;
  std::array<Index, 3> core_offset{0, 0, 0};
  Dims3 core;

  Index nx() const { return x.size() - 1; }
  Index ny() const { return y.size() - 1; }
  Index nz() const { return z.size() - 1; }
  Dims3 cells() const { return {nx(), ny(), nz()}; }
  Index cell_index(Index i, Index j, Index k) const { return i + nx() * (j + ny() * k); }

  /// Index of the node plane at z = 0.
  Index surface_node() const { return n_air; }
  bool is_air_layer(Index k) const { return k < n_air; }
};

/// Grid configuration as read from JSON:
/// {"core":[nx,ny,nz], "spacing_m":[dx,dy,dz], "n_pad":int, "expansion":float, "n_air":int}
struct GridSpec
{
  CoreGrid core;
  int n_pad = 0;
  double expansion = 1.0;
  int n_air = 0;

  bool operator==(const GridSpec &o) const
  {
    return core.cells == o.core.cells && core.spacing == o.core.spacing && n_pad == o.n_pad &&
           expansion == o.expansion && n_air == o.n_air;
  }
};

PaddedGrid build_padded_grid(const CoreGrid &core, int n_pad, double expansion, int n_air);
inline PaddedGrid build_padded_grid(const GridSpec &spec)
{
  return build_padded_grid(spec.core, spec.n_pad, spec.expansion, spec.n_air);
}

GridSpec grid_spec_from_json(const nlohmann::json &j);
nlohmann::json to_json(const GridSpec &spec);
GridSpec read_grid_spec(const std::string &path);

enum class Axis : int
{
  X = 0,
  Y = 1,
  Z = 2,
};

struct EdgeCoord
{
  Axis axis;
  Index i;
  Index j;
  Index k;
  bool operator==(const EdgeCoord &) const = default;
};

/// Global numbering of the edges of an Nx x Ny x Nz hexahedral grid.
///
/// x-directed edges come first, then y-directed, then z-directed; each block is
/// lexicographic with i fastest. An x-edge (i, j, k) runs from node (i, j, k) to
/// node (i+1, j, k), and likewise for the other axes. All edges are oriented
/// along the positive axis, so neighbouring cells never disagree on sign.
///
/// Local edge order inside a cell:
///   0..3   x-edges at (j, k) offsets (0,0) (1,0) (0,1) (1,1)
///   4..7   y-edges at (i, k) offsets (0,0) (1,0) (0,1) (1,1)
///   8..11  z-edges at (i, j) offsets (0,0) (1,0) (0,1) (1,1)
class EdgeNumbering
{
public:
  explicit EdgeNumbering(Dims3 cells);
  explicit EdgeNumbering(const PaddedGrid &grid) : EdgeNumbering(grid.cells()) {}

  Dims3 cells() const { return cells_; }
  Index total_edges() const { return total_; }
  Index block_size(Axis a) const { return block_[static_cast<int>(a)]; }
  Index block_offset(Axis a) const { return offset_[static_cast<int>(a)]; }

  Index x_edge(Index i, Index j, Index k) const
  {
    return i + cells_.nx * (j + (cells_.ny + 1) * k);
  }
  Index y_edge(Index i, Index j, Index k) const
  {
    return offset_[1] + i + (cells_.nx + 1) * (j + cells_.ny * k);
  }
  Index z_edge(Index i, Index j, Index k) const
  {
    return offset_[2] + i + (cells_.nx + 1) * (j + (cells_.ny + 1) * k);
  }
  Index edge(const EdgeCoord &c) const;
  EdgeCoord coord(Index edge) const;

  std::array<Index, 12> cell_edges(Index i, Index j, Index k) const;

  /// True for edges lying in the outer boundary surface (tangential edges).
  bool on_boundary(Index edge) const;

private:
  Dims3 cells_;
  std::array<Index, 3> block_{};
  std::array<Index, 3> offset_{};
  Index total_ = 0;
};

}  // namespace mtforge
