#include "mtforge/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace mtforge
{

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace
{

namespace fs = std::filesystem;

constexpr char kMagic[4] = {'M', 'T', 'S', '1'};
constexpr std::size_t kHeaderBytes = 24;

void put_u32(std::string &buf, std::uint32_t v)
{
  buf.append(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename Derived>
void put_floats(std::string &buf, const Eigen::DenseBase<Derived> &a)
{
  const Eigen::ArrayXf f = a.template cast<float>().array();
  buf.append(reinterpret_cast<const char *>(f.data()), f.size() * sizeof(float));
}

void write_atomic(const fs::path &path, const std::string &bytes)
{
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
    {
      throw std::runtime_error("short write to '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

std::string read_all(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError("sample '" + path + "': cannot open");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t get_u32(const std::string &buf, std::size_t offset)
{
  std::uint32_t v;
  std::memcpy(&v, buf.data() + offset, sizeof v);
  return v;
}

Eigen::ArrayXf get_floats(const std::string &buf, std::size_t offset, std::size_t count)
{
  Eigen::ArrayXf a(static_cast<Index>(count));
  std::memcpy(a.data(), buf.data() + offset, count * sizeof(float));
  return a;
}

}  // namespace

std::string sample_sidecar_path(const std::string &path)
{
  return fs::path(path).replace_extension(".json").string();
}

nlohmann::json sample_meta_json(const SampleRecord<float> &r)
{
  const auto &m = r.meta;
  return {
    {"format", "MTS1"},
    {"version", kSampleFormatVersion},
    {"id", m.id},
    {"seed", m.seed},
    {"alpha", m.alpha},
    {"model_dims", {r.model.dims.nx, r.model.dims.ny, r.model.dims.nz}},
    {"nf", r.response.nf},
    {"freqs_hz", m.freqs},
    {"spacing_m", {m.spacing.dx, m.spacing.dy, m.spacing.dz}},
    {"rho_bounds", {m.rho_min, m.rho_max}},
    {"noise_level", m.noise_level},
    {"channels", {"rho_xy", "rho_yx", "phi_xy", "phi_yx"}},
    {"units", {{"model", "log10_ohm_m"}, {"rho", "ohm_m"}, {"phi", "deg"}}},
  };
}

void write_sample(const std::string &path, const SampleRecord<float> &r)
{
  const Dims3 d = r.model.dims;
  const auto &v = r.response;
  if (v.nx != d.nx || v.ny != d.ny)
  {
    throw std::invalid_argument("write_sample: response stations do not match the model grid");
  }
  if (r.model.log10_rho.size() != d.size())
  {
    throw std::invalid_argument("write_sample: model payload does not match its dims");
  }
  for (const auto &c : v.channels)
  {
    if (c.size() != v.size())
    {
      throw std::invalid_argument("write_sample: channel payload does not match its dims");
    }
  }
  if (static_cast<Index>(r.meta.freqs.size()) != v.nf)
  {
    throw std::invalid_argument("write_sample: meta.freqs length differs from nf");
  }

  std::string buf;
  buf.reserve(kHeaderBytes + sizeof(float) * (d.size() + 4 * v.size()));
  buf.append(kMagic, 4);
  put_u32(buf, kSampleFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(d.nx));
  put_u32(buf, static_cast<std::uint32_t>(d.ny));
  put_u32(buf, static_cast<std::uint32_t>(d.nz));
  put_u32(buf, static_cast<std::uint32_t>(v.nf));
  put_floats(buf, r.model.log10_rho);
  for (const auto &c : v.channels)
  {
    put_floats(buf, c);
  }

  write_atomic(sample_sidecar_path(path), sample_meta_json(r).dump(2) + "\n");
  write_atomic(path, buf);
}

SampleRecord<float> read_sample(const std::string &path)
{
  const std::string buf = read_all(path);
  const std::string where = "sample '" + path + "': ";
  if (buf.size() < kHeaderBytes)
  {
    throw FormatError(where + "truncated header, file ends at offset " + std::to_string(buf.size()));
  }
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
  {
    throw FormatError(where + "bad magic at offset 0");
  }
  if (const auto version = get_u32(buf, 4); version != kSampleFormatVersion)
  {
    throw FormatError(where + "unsupported version " + std::to_string(version) + " at offset 4");
  }
  std::array<std::uint64_t, 4> n{};
  for (int a = 0; a < 4; ++a)
  {
    n[a] = get_u32(buf, 8 + 4 * a);
    if (n[a] == 0)
    {
      throw FormatError(where + "zero dimension at offset " + std::to_string(8 + 4 * a));
    }
  }
  const std::uint64_t model_count = n[0] * n[1] * n[2];
  const std::uint64_t channel_count = n[0] * n[1] * n[3];
  const std::uint64_t expected = kHeaderBytes + sizeof(float) * (model_count + 4 * channel_count);
  if (buf.size() < expected)
  {
    throw FormatError(where + "payload truncated at offset " + std::to_string(buf.size()) +
                      ", header dims need " + std::to_string(expected) + " bytes");
  }
  if (buf.size() > expected)
  {
    throw FormatError(where + "unexpected trailing bytes at offset " + std::to_string(expected));
  }

  SampleRecord<float> r;
  r.model.dims = {static_cast<Index>(n[0]), static_cast<Index>(n[1]), static_cast<Index>(n[2])};
  r.model.log10_rho = get_floats(buf, kHeaderBytes, model_count);
  r.response = ResponseVolume<float>(r.model.dims.nx, r.model.dims.ny, static_cast<Index>(n[3]));
  std::size_t offset = kHeaderBytes + sizeof(float) * model_count;
  for (auto &c : r.response.channels)
  {
    c = get_floats(buf, offset, channel_count);
    offset += sizeof(float) * channel_count;
  }

  const std::string side_path = sample_sidecar_path(path);
  std::ifstream side(side_path);
  if (!side)
  {
    throw FormatError(where + "missing sidecar '" + side_path + "'");
  }
  try
  {
    nlohmann::json j;
    side >> j;
    const auto dims = j.at("model_dims").get<std::array<Index, 3>>();
    if (dims[0] != r.model.dims.nx || dims[1] != r.model.dims.ny || dims[2] != r.model.dims.nz ||
        j.at("nf").get<Index>() != r.response.nf)
    {
      throw FormatError(where + "sidecar dims disagree with the header at offset 8");
    }
    auto &m = r.meta;
    m.id = j.at("id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.alpha = j.at("alpha").get<double>();
    m.freqs = j.at("freqs_hz").get<std::vector<double>>();
    m.noise_level = j.at("noise_level").get<double>();
    const auto spacing = j.at("spacing_m").get<std::array<double, 3>>();
    m.spacing = {spacing[0], spacing[1], spacing[2]};
    const auto bounds = j.at("rho_bounds").get<std::array<double, 2>>();
    m.rho_min = bounds[0];
    m.rho_max = bounds[1];
    if (static_cast<Index>(m.freqs.size()) != r.response.nf)
    {
      throw FormatError(where + "sidecar lists " + std::to_string(m.freqs.size()) +
                        " frequencies, header nf at offset 20 is " + std::to_string(n[3]));
    }
  }
  catch (const nlohmann::json::exception &e)
  {
    throw FormatError(where + "bad sidecar: " + e.what());
  }
  r.model.spacing = r.meta.spacing;
  r.model.provenance = {r.meta.seed, r.meta.alpha, r.meta.rho_min, r.meta.rho_max};
  return r;
}

SampleRecord<float> make_sample(const ResistivityModel<double> &model,
                                const ResponseVolume<double> &response, SampleMeta meta)
{
  SampleRecord<float> r;
  r.meta = std::move(meta);
  r.meta.spacing = model.spacing;
  r.model = model.cast<float>();
  r.model.provenance = {r.meta.seed, r.meta.alpha, r.meta.rho_min, r.meta.rho_max};
  r.response = response.cast<float>();
  return r;
}

std::vector<std::string> list_samples(const std::string &dir)
{
  std::vector<std::string> paths;
  for (const auto &entry : fs::directory_iterator(dir))
  {
    if (entry.is_regular_file() && entry.path().extension() == ".mts")
    {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

}  // namespace mtforge
