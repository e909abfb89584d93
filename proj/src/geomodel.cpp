#include "mtforge/geomodel.hpp"

#include "fft3.hpp"
#include "mtforge/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mtforge
{

namespace
{

void validate(const GrfSpec &spec)
{
  if (spec.dims.nx < 4 || spec.dims.ny < 4 || spec.dims.nz < 4)
  {
    throw std::invalid_argument("generate_grf: every dimension must be >= 4");
  }
  if (!(spec.alpha >= 0.0))
  {
    throw std::invalid_argument("generate_grf: alpha must be >= 0");
  }
  if (!(spec.rho_min > 0.0) || !(spec.rho_min < spec.rho_max))
  {
    throw std::invalid_argument("generate_grf: need 0 < rho_min < rho_max");
  }
  if (!(spec.spacing.dx > 0.0) || !(spec.spacing.dy > 0.0) || !(spec.spacing.dz > 0.0))
  {
    throw std::invalid_argument("generate_grf: spacing must be positive");
  }
}

}  // namespace

Eigen::ArrayXd standardized_grf(const GrfSpec &spec)
{
  validate(spec);
  const Dims3 d = spec.dims;
  const Index n = d.size();

  NormalStream normal(spec.seed);
  Eigen::VectorXcd field(n);
  for (Index p = 0; p < n; ++p)
  {
    field[p] = normal();
  }
  detail::fft3(field, d, false);

  const double two_pi = 2.0 * std::numbers::pi;
  const double lx = d.nx * spec.spacing.dx, ly = d.ny * spec.spacing.dy, lz = d.nz * spec.spacing.dz;
  for (Index k = 0; k < d.nz; ++k)
  {
    const double kz = two_pi * detail::signed_bin(k, d.nz) / lz;
    for (Index j = 0; j < d.ny; ++j)
    {
      const double ky = two_pi * detail::signed_bin(j, d.ny) / ly;
      for (Index i = 0; i < d.nx; ++i)
      {
        const double kx = two_pi * detail::signed_bin(i, d.nx) / lx;
        const double k2 = kx * kx + ky * ky + kz * kz;
        const Index p = i + d.nx * (j + d.ny * k);
        // |K|^(-alpha/4) = (|K|^2)^(-alpha/8)
        field[p] *= k2 > 0.0 ? std::pow(k2, -spec.alpha / 8.0) : 0.0;
      }
    }
  }
  detail::fft3(field, d, true);

  Eigen::ArrayXd out = field.real().array();
  out -= out.mean();
  const double sd = std::sqrt(out.square().mean());
  if (!(sd > 0.0))
  {
    throw std::runtime_error("generate_grf: degenerate field");
  }
  return out / sd;
}

ResistivityModel<double> generate_grf(const GrfSpec &spec)
{
  const Eigen::ArrayXd s = standardized_grf(spec);
  const double lo = std::log10(spec.rho_min), hi = std::log10(spec.rho_max);

  ResistivityModel<double> model(spec.dims, spec.spacing);
  model.log10_rho = lo + (s.max(-3.0).min(3.0) + 3.0) / 6.0 * (hi - lo);
  // Guard the endpoints against rounding in the affine map.
  model.log10_rho = model.log10_rho.max(lo).min(hi);
  model.provenance = {spec.seed, spec.alpha, spec.rho_min, spec.rho_max};
  return model;
}

template <typename Scalar>
ResistivityModel<Scalar> embed_block(ResistivityModel<Scalar> model, const BlockSpec &block)
{
  const std::array<Index, 3> n{model.dims.nx, model.dims.ny, model.dims.nz};
  for (int a = 0; a < 3; ++a)
  {
    if (block.origin[a] < 0 || block.size[a] < 0 || block.origin[a] + block.size[a] > n[a])
    {
      throw std::invalid_argument("embed_block: block extends outside the model grid");
    }
  }
  if (!(block.rho > 0.0))
  {
    throw std::invalid_argument("embed_block: block resistivity must be positive");
  }
  const auto value = static_cast<Scalar>(std::log10(block.rho));
  for (Index k = block.origin[2]; k < block.origin[2] + block.size[2]; ++k)
  {
    for (Index j = block.origin[1]; j < block.origin[1] + block.size[1]; ++j)
    {
      for (Index i = block.origin[0]; i < block.origin[0] + block.size[0]; ++i)
      {
        model(i, j, k) = value;
      }
    }
  }
  return model;
}

template ResistivityModel<double> embed_block(ResistivityModel<double>, const BlockSpec &);
template ResistivityModel<float> embed_block(ResistivityModel<float>, const BlockSpec &);

double radial_spectrum_slope(const ResistivityModel<double> &model)
{
  const Dims3 d = model.dims;
  if (d.nx != d.ny || d.ny != d.nz)
  {
    throw std::invalid_argument("radial_spectrum_slope: model must be cubic");
  }
  const Index n = d.nx;
  if (n < 8)
  {
    throw std::invalid_argument("radial_spectrum_slope: need at least 8 cells per axis");
  }

  Eigen::VectorXcd field = (model.log10_rho - model.log10_rho.mean()).matrix().cast<Complex>();
  detail::fft3(field, d, false);

  // Shell sums keyed by rounded index radius.
  std::map<Index, std::array<double, 3>> shells;  // power, radius, count
  const Index r_lo = 2, r_hi = n / 4;
  double total = 0.0;
  for (Index k = 0; k < n; ++k)
  {
    for (Index j = 0; j < n; ++j)
    {
      for (Index i = 0; i < n; ++i)
      {
        const double mx = detail::signed_bin(i, n), my = detail::signed_bin(j, n),
                     mz = detail::signed_bin(k, n);
        const double r = std::sqrt(mx * mx + my * my + mz * mz);
        const double power = std::norm(field[i + n * (j + n * k)]);
        total += power;
        const auto shell = static_cast<Index>(std::lround(r));
        if (shell < r_lo || shell > r_hi)
        {
          continue;
        }
        auto &s = shells[shell];
        s[0] += power;
        s[1] += r;
        s[2] += 1.0;
      }
    }
  }
  if (!(total > 0.0))
  {
    throw std::invalid_argument("radial_spectrum_slope: constant field has no power at K > 0");
  }

  // Ordinary least squares on (log mean radius, log mean power).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double m = 0;
  for (const auto &[shell, s] : shells)
  {
    if (!(s[0] > 0.0))
    {
      throw std::invalid_argument("radial_spectrum_slope: empty power in fitting band");
    }
    const double x = std::log(s[1] / s[2]);
    const double y = std::log(s[0] / s[2]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    m += 1.0;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

namespace
{

std::filesystem::path sidecar_path(const std::string &path)
{
  return std::filesystem::path(path).replace_extension(".json");
}

}  // namespace

void write_model(const std::string &path, const ResistivityModel<double> &model)
{
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw std::runtime_error("cannot write model '" + path + "'");
  }
  const Eigen::ArrayXf data = model.log10_rho.cast<float>();
  out.write(reinterpret_cast<const char *>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));

  const auto &p = model.provenance;
  const nlohmann::json meta = {
    {"seed", p.seed},
    {"alpha", p.alpha},
    {"dims", {model.dims.nx, model.dims.ny, model.dims.nz}},
    {"spacing_m", {model.spacing.dx, model.spacing.dy, model.spacing.dz}},
    {"rho_bounds", {p.rho_min, p.rho_max}},
    {"units", "log10_ohm_m"},
  };
  std::ofstream side(sidecar_path(path));
  side << meta.dump(2) << '\n';
}

ResistivityModel<double> read_model(const std::string &path)
{
  std::ifstream side(sidecar_path(path));
  if (!side)
  {
    throw FormatError("model '" + path + "': missing JSON sidecar");
  }
  ResistivityModel<double> model;
  try
  {
    nlohmann::json meta;
    side >> meta;
    const auto dims = meta.at("dims").get<std::vector<Index>>();
    const auto spacing = meta.at("spacing_m").get<std::vector<double>>();
    const auto bounds = meta.value("rho_bounds", std::vector<double>{1.0, 1.0e4});
    if (dims.size() != 3 || spacing.size() != 3 || bounds.size() != 2)
    {
      throw FormatError("model '" + path + "': sidecar dims/spacing need three entries");
    }
    model = ResistivityModel<double>({dims[0], dims[1], dims[2]},
                                     {spacing[0], spacing[1], spacing[2]});
    model.provenance = {meta.value("seed", std::uint64_t{0}), meta.value("alpha", 0.0), bounds[0],
                        bounds[1]};
  }
  catch (const nlohmann::json::exception &e)
  {
    throw FormatError("model '" + path + "': bad sidecar: " + e.what());
  }

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in)
  {
    throw FormatError("model '" + path + "': cannot open");
  }
  const auto bytes = static_cast<std::size_t>(in.tellg());
  const auto expected = static_cast<std::size_t>(model.dims.size()) * sizeof(float);
  if (bytes != expected)
  {
    throw FormatError("model '" + path + "': payload has " + std::to_string(bytes) +
                      " bytes, sidecar dims need " + std::to_string(expected) + " (offset " +
                      std::to_string(std::min(bytes, expected)) + ")");
  }
  in.seekg(0);
  Eigen::ArrayXf data(model.dims.size());
  in.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(expected));
  model.log10_rho = data.cast<double>();
  return model;
}

}  // namespace mtforge
