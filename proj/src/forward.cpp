#include "mtforge/femsolver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace mtforge
{

Eigen::VectorXd padded_conductivity(const ResistivityModel<double> &model, const PaddedGrid &grid)
{
  if (model.dims != grid.core)
  {
    throw std::invalid_argument("forward: model dims do not match the core grid");
  }
  const Dims3 c = grid.cells();
  Eigen::VectorXd sigma(c.size());
  for (Index k = 0; k < c.nz; ++k)
  {
    const bool air = grid.is_air_layer(k);
    const Index mk = std::clamp<Index>(k - grid.core_offset[2], 0, model.dims.nz - 1);
    for (Index j = 0; j < c.ny; ++j)
    {
      const Index mj = std::clamp<Index>(j - grid.core_offset[1], 0, model.dims.ny - 1);
      for (Index i = 0; i < c.nx; ++i)
      {
        const Index mi = std::clamp<Index>(i - grid.core_offset[0], 0, model.dims.nx - 1);
        sigma[grid.cell_index(i, j, k)] =
          air ? kAirConductivity : std::pow(10.0, -model(mi, mj, mk));
      }
    }
  }
  return sigma;
}

LayeredModel background_model(const PaddedGrid &grid, std::span<const double> conductivity)
{
  const Dims3 c = grid.cells();
  if (static_cast<Index>(conductivity.size()) != c.size())
  {
    throw std::invalid_argument("background_model: conductivity size mismatch");
  }
  LayeredModel layered;
  const Index per_layer = c.nx * c.ny;
  for (Index k = grid.n_air; k < c.nz; ++k)
  {
    double mean = 0.0;
    for (Index p = 0; p < per_layer; ++p)
    {
      mean += conductivity[static_cast<std::size_t>(k * per_layer + p)];
    }
    mean /= static_cast<double>(per_layer);
    layered.resistivities.push_back(1.0 / mean);
    if (k + 1 < c.nz)
    {
      layered.thicknesses.push_back(grid.z[k + 1] - grid.z[k]);
    }
  }
  return layered;
}

ForwardResult forward(const ResistivityModel<double> &model, const GridSpec &spec,
                      std::span<const double> freqs, const ForwardOptions &options)
{
  const PaddedGrid grid = build_padded_grid(spec);
  if (grid.n_air < 1)
  {
    throw std::invalid_argument("forward: the grid needs at least one air layer");
  }
  for (double f : freqs)
  {
    if (!(f > 0.0))
    {
      throw std::invalid_argument("forward: frequencies must be positive");
    }
  }
  const Eigen::VectorXd sigma = padded_conductivity(model, grid);
  const std::span<const double> sigma_view(sigma.data(), static_cast<std::size_t>(sigma.size()));
  const LayeredModel background = background_model(grid, sigma_view);
  const CurlCurlOperator op = assemble_operator(grid, sigma_view);
  const EdgeNumbering numbering(grid);

  const std::size_t nf = freqs.size();
  std::vector<ImpedanceMap> maps(nf);
  std::vector<FrequencyDiagnostics> diagnostics(nf);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t f = next++; f < nf; f = next++)
    {
      try
      {
        const AssembledSystem system = assemble(op, numbering, freqs[f]);
        constexpr std::array<Polarization, 2> pols{Polarization::X, Polarization::Y};
        const ConstrainedSystem constrained = apply_boundary(system, grid, background, pols);
        const SolveResult solution = solve(constrained, options.solver);
        const SurfaceFields s1 = surface_fields(solution.edge_fields.col(0), grid, freqs[f]);
        const SurfaceFields s2 = surface_fields(solution.edge_fields.col(1), grid, freqs[f]);
        maps[f] = impedance_tensor(s1, s2, freqs[f]);
        diagnostics[f] = {freqs[f], constrained.matrix.rows(), symmetry_error(system.matrix),
                          {solution.relative_residuals[0], solution.relative_residuals[1]},
                          solution.iterative};
      }
      catch (...)
      {
        std::lock_guard lock(failure_mutex);
        if (!failure)
        {
          failure = std::current_exception();
        }
      }
    }
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(nf)));
  if (threads == 1)
  {
    worker();
  }
  else
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
    {
      pool.emplace_back(worker);
    }
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }

  ForwardResult result;
  result.impedance = stack_frequencies(maps);
  result.response = rho_phase(result.impedance);
  result.diagnostics = std::move(diagnostics);
  return result;
}

}  // namespace mtforge
