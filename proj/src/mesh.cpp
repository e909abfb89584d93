#include "mtforge/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mtforge
{

namespace
{

// Node coordinates for one lateral axis: n_pad geometric cells on each side of
// n uniform core cells starting at 0.
Eigen::VectorXd padded_axis(Index n, double h, int n_before, int n_after, double expansion)
{
  std::vector<double> nodes;
  nodes.reserve(n + n_before + n_after + 1);

  std::vector<double> before(n_before + 1, 0.0);
  double width = h;
  for (int p = 1; p <= n_before; ++p)
  {
    width *= expansion;
    before[p] = before[p - 1] - width;
  }
  for (int p = n_before; p >= 1; --p)
  {
    nodes.push_back(before[p]);
  }
  for (Index c = 0; c <= n; ++c)
  {
    nodes.push_back(static_cast<double>(c) * h);
  }
  width = h;
  for (int p = 1; p <= n_after; ++p)
  {
    width *= expansion;
    nodes.push_back(nodes.back() + width);
  }
  return Eigen::Map<Eigen::VectorXd>(nodes.data(), static_cast<Index>(nodes.size()));
}

}  // namespace

PaddedGrid build_padded_grid(const CoreGrid &core, int n_pad, double expansion, int n_air)
{
  const auto &s = core.spacing;
  if (!(s.dx > 0.0) || !(s.dy > 0.0) || !(s.dz > 0.0))
  {
    throw std::invalid_argument("build_padded_grid: cell spacing must be positive");
  }
  if (core.cells.nx < 1 || core.cells.ny < 1 || core.cells.nz < 1)
  {
    throw std::invalid_argument("build_padded_grid: core cell counts must be >= 1");
  }
  if (n_pad < 0 || n_air < 0)
  {
    throw std::invalid_argument("build_padded_grid: pad and air counts must be >= 0");
  }
  if (!(expansion >= 1.0))
  {
    throw std::invalid_argument("build_padded_grid: expansion must be >= 1");
  }

  PaddedGrid g;
  g.n_pad = n_pad;
  g.expansion = expansion;
  g.n_air = n_air;
  g.core = core.cells;
  g.x = padded_axis(core.cells.nx, s.dx, n_pad, n_pad, expansion);
  g.y = padded_axis(core.cells.ny, s.dy, n_pad, n_pad, expansion);
  // Air layers replace the top pad cells; the bottom is padded like the sides.
  g.z = padded_axis(core.cells.nz, s.dz, n_air, n_pad, expansion);
  g.core_offset = {n_pad, n_pad, n_air};
  return g;
}

GridSpec grid_spec_from_json(const nlohmann::json &j)
{
  GridSpec spec;
  try
  {
    const auto core = j.at("core").get<std::vector<Index>>();
    const auto spacing = j.at("spacing_m").get<std::vector<double>>();
    if (core.size() != 3 || spacing.size() != 3)
    {
      throw std::invalid_argument("grid spec: 'core' and 'spacing_m' need three entries");
    }
    spec.core.cells = {core[0], core[1], core[2]};
    spec.core.spacing = {spacing[0], spacing[1], spacing[2]};
    spec.n_pad = j.value("n_pad", 0);
    spec.expansion = j.value("expansion", 1.0);
    spec.n_air = j.value("n_air", 0);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw std::invalid_argument(std::string("grid spec: ") + e.what());
  }
  // Validate eagerly so a bad file fails at load time.
  build_padded_grid(spec);
  return spec;
}

nlohmann::json to_json(const GridSpec &spec)
{
  const auto &c = spec.core;
  return {{"core", {c.cells.nx, c.cells.ny, c.cells.nz}},
          {"spacing_m", {c.spacing.dx, c.spacing.dy, c.spacing.dz}},
          {"n_pad", spec.n_pad},
          {"expansion", spec.expansion},
          {"n_air", spec.n_air}};
}

GridSpec read_grid_spec(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot open grid spec '" + path + "'");
  }
  nlohmann::json j;
  try
  {
    in >> j;
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw std::invalid_argument("grid spec '" + path + "': " + e.what());
  }
  return grid_spec_from_json(j);
}

EdgeNumbering::EdgeNumbering(Dims3 cells) : cells_(cells)
{
  if (cells.nx < 1 || cells.ny < 1 || cells.nz < 1)
  {
    throw std::invalid_argument("EdgeNumbering: cell counts must be >= 1");
  }
  const Index nx = cells.nx, ny = cells.ny, nz = cells.nz;
  block_ = {nx * (ny + 1) * (nz + 1), (nx + 1) * ny * (nz + 1), (nx + 1) * (ny + 1) * nz};
  offset_ = {0, block_[0], block_[0] + block_[1]};
  total_ = block_[0] + block_[1] + block_[2];
}

Index EdgeNumbering::edge(const EdgeCoord &c) const
{
  switch (c.axis)
  {
    case Axis::X:
      return x_edge(c.i, c.j, c.k);
    case Axis::Y:
      return y_edge(c.i, c.j, c.k);
    case Axis::Z:
      return z_edge(c.i, c.j, c.k);
  }
  return -1;
}

EdgeCoord EdgeNumbering::coord(Index e) const
{
  if (e < 0 || e >= total_)
  {
    throw std::out_of_range("EdgeNumbering::coord: edge index out of range");
  }
  const Index nx = cells_.nx, ny = cells_.ny;
  if (e < offset_[1])
  {
    const Index i = e % nx, rest = e / nx;
    return {Axis::X, i, rest % (ny + 1), rest / (ny + 1)};
  }
  if (e < offset_[2])
  {
    const Index l = e - offset_[1];
    const Index i = l % (nx + 1), rest = l / (nx + 1);
    return {Axis::Y, i, rest % ny, rest / ny};
  }
  const Index l = e - offset_[2];
  const Index i = l % (nx + 1), rest = l / (nx + 1);
  return {Axis::Z, i, rest % (ny + 1), rest / (ny + 1)};
}

std::array<Index, 12> EdgeNumbering::cell_edges(Index i, Index j, Index k) const
{
  return {x_edge(i, j, k),     x_edge(i, j + 1, k),     x_edge(i, j, k + 1),
          x_edge(i, j + 1, k + 1), y_edge(i, j, k),     y_edge(i + 1, j, k),
          y_edge(i, j, k + 1),     y_edge(i + 1, j, k + 1), z_edge(i, j, k),
          z_edge(i + 1, j, k),     z_edge(i, j + 1, k),     z_edge(i + 1, j + 1, k)};
}

bool EdgeNumbering::on_boundary(Index e) const
{
  const EdgeCoord c = coord(e);
  const Index nx = cells_.nx, ny = cells_.ny, nz = cells_.nz;
  const bool i_edge = c.i == 0 || c.i == nx;
  const bool j_edge = c.j == 0 || c.j == ny;
  const bool k_edge = c.k == 0 || c.k == nz;
  switch (c.axis)
  {
    case Axis::X:
      return j_edge || k_edge;
    case Axis::Y:
      return i_edge || k_edge;
    case Axis::Z:
      return i_edge || j_edge;
  }
  return false;
}

}  // namespace mtforge
