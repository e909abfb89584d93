#include "mtforge/geomodel.hpp"
#include "mtforge/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace mtforge
{

namespace fs = std::filesystem;

nlohmann::json to_json(const DatasetManifest &m)
{
  nlohmann::json channel_max;
  for (Channel c : kAllChannels)
  {
    channel_max[std::string(channel_name(c))] =
      m.normalization.channel_max_log10[static_cast<int>(c)];
  }
  return {
    {"format", "MTS1"},
    {"version", m.format_version},
    {"master_seed", m.master_seed},
    {"alphas", m.alphas},
    {"n_per_alpha", m.n_per_alpha},
    {"grid", to_json(m.grid)},
    {"freqs_hz", m.freqs},
    {"rho_bounds", m.rho_bounds},
    {"normalization",
     {{"phase_scaling", phase_scaling_name(m.normalization.phase_scaling)},
      {"channel_max_log10", channel_max},
      {"model_max_log10", m.normalization.model_max_log10}}},
    {"fractions", m.fractions},
    {"splits", {{"train", m.splits.train}, {"validation", m.splits.validation}, {"test", m.splits.test}}},
    {"samples", m.samples},
    {"failed", m.failed},
  };
}

DatasetManifest manifest_from_json(const nlohmann::json &j)
{
  DatasetManifest m;
  try
  {
    m.format_version = j.at("version").get<std::uint32_t>();
    if (m.format_version != kSampleFormatVersion)
    {
      throw FormatError("manifest: unsupported version " + std::to_string(m.format_version));
    }
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.n_per_alpha = j.at("n_per_alpha").get<std::size_t>();
    m.grid = grid_spec_from_json(j.at("grid"));
    m.freqs = j.at("freqs_hz").get<std::vector<double>>();
    m.rho_bounds = j.at("rho_bounds").get<std::array<double, 2>>();
    const auto &norm = j.at("normalization");
    m.normalization.phase_scaling =
      phase_scaling_from_name(norm.at("phase_scaling").get<std::string>());
    for (Channel c : kAllChannels)
    {
      m.normalization.channel_max_log10[static_cast<int>(c)] =
        norm.at("channel_max_log10").at(std::string(channel_name(c))).get<double>();
    }
    m.normalization.model_max_log10 = norm.at("model_max_log10").get<double>();
    m.fractions = j.at("fractions").get<std::array<double, 3>>();
    const auto &s = j.at("splits");
    m.splits.train = s.at("train").get<std::vector<std::string>>();
    m.splits.validation = s.at("validation").get<std::vector<std::string>>();
    m.splits.test = s.at("test").get<std::vector<std::string>>();
    m.samples = j.at("samples").get<std::vector<std::string>>();
    m.failed = j.at("failed").get<std::vector<std::string>>();
  }
  catch (const nlohmann::json::exception &e)
  {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::string &path, const DatasetManifest &manifest)
{
  const fs::path tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out)
    {
      throw std::runtime_error("cannot write manifest '" + path + "'");
    }
    out << to_json(manifest).dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

DatasetManifest read_manifest(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw FormatError("manifest '" + path + "': cannot open");
  }
  nlohmann::json j;
  try
  {
    in >> j;
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw FormatError("manifest '" + path + "': " + e.what());
  }
  return manifest_from_json(j);
}

namespace
{

struct Task
{
  double alpha;
  std::uint64_t index;
  std::string id;
  std::uint64_t seed;
};

bool reusable(const SampleRecord<float> &r, const Task &t, const DatasetConfig &cfg)
{
  return r.meta.id == t.id && r.meta.seed == t.seed && r.meta.alpha == t.alpha &&
         r.meta.freqs == cfg.freqs && r.model.dims == cfg.grid.core.cells &&
         r.meta.spacing == cfg.grid.core.spacing && r.meta.rho_min == cfg.rho_min &&
         r.meta.rho_max == cfg.rho_max && r.meta.noise_level == 0.0;
}

}  // namespace

DatasetManifest build_dataset(const DatasetConfig &cfg)
{
  if (cfg.n_per_alpha == 0 || cfg.alphas.empty())
  {
    throw std::invalid_argument("build_dataset: need at least one alpha and one sample per alpha");
  }
  if (cfg.out_dir.empty())
  {
    throw std::invalid_argument("build_dataset: output directory is empty");
  }
  if (cfg.freqs.empty())
  {
    throw std::invalid_argument("build_dataset: empty frequency sweep");
  }
  fs::create_directories(cfg.out_dir);

  std::vector<Task> tasks;
  for (double alpha : cfg.alphas)
  {
    for (std::uint64_t i = 0; i < cfg.n_per_alpha; ++i)
    {
      tasks.push_back({alpha, i, sample_id(alpha, i), sample_seed(cfg.master_seed, alpha, i)});
    }
  }
  const std::size_t total = tasks.size();
  const auto max_failures =
    static_cast<std::size_t>(std::floor(cfg.max_failure_fraction * static_cast<double>(total)));

  std::mutex log_mutex;
  auto log = [&](const std::string &msg) {
    if (cfg.log)
    {
      std::lock_guard lock(log_mutex);
      cfg.log(msg);
    }
  };

  std::vector<NormalizationAccumulator> stats(total);
  std::vector<char> ok(total, 0);
  std::atomic<std::size_t> next{0}, failures{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    for (std::size_t t = next++; t < total && !abort; t = next++)
    {
      const Task &task = tasks[t];
      const std::string path = (fs::path(cfg.out_dir) / (task.id + ".mts")).string();
      try
      {
        SampleRecord<float> record;
        bool reused = false;
        if (fs::exists(path))
        {
          try
          {
            record = read_sample(path);
            reused = reusable(record, task, cfg);
          }
          catch (const FormatError &)
          {
          }
        }
        if (reused)
        {
          log("skip " + task.id + " (present)");
        }
        else
        {
          GrfSpec grf;
          grf.dims = cfg.grid.core.cells;
          grf.spacing = cfg.grid.core.spacing;
          grf.alpha = task.alpha;
          grf.seed = task.seed;
          grf.rho_min = cfg.rho_min;
          grf.rho_max = cfg.rho_max;
          const ResistivityModel<double> model = generate_grf(grf);
          const ForwardResult fwd = forward(model, cfg.grid, cfg.freqs, {1, cfg.solver});

          SampleMeta meta;
          meta.id = task.id;
          meta.seed = task.seed;
          meta.alpha = task.alpha;
          meta.freqs = cfg.freqs;
          meta.rho_min = cfg.rho_min;
          meta.rho_max = cfg.rho_max;
          record = make_sample(model, fwd.response, std::move(meta));
          write_sample(path, record);
          log("wrote " + task.id);
        }
        stats[t].add(record.response);
        stats[t].add(record.model);
        ok[t] = 1;
      }
      catch (const std::exception &e)
      {
        log("failed " + task.id + ": " + e.what());
        if (++failures > max_failures)
        {
          abort = true;
        }
      }
    }
  };

  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(total)));
  if (threads == 1)
  {
    worker();
  }
  else
  {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i)
    {
      pool.emplace_back(worker);
    }
  }
  if (failures > max_failures)
  {
    throw std::runtime_error("build_dataset: " + std::to_string(failures.load()) + " of " +
                             std::to_string(total) + " samples failed, aborting");
  }

  DatasetManifest m;
  m.master_seed = cfg.master_seed;
  m.alphas = cfg.alphas;
  m.n_per_alpha = cfg.n_per_alpha;
  m.grid = cfg.grid;
  m.freqs = cfg.freqs;
  m.rho_bounds = {cfg.rho_min, cfg.rho_max};
  m.fractions = cfg.fractions;
  NormalizationAccumulator all;
  for (std::size_t t = 0; t < total; ++t)
  {
    if (ok[t])
    {
      m.samples.push_back(tasks[t].id);
      all.merge(stats[t]);
    }
    else
    {
      m.failed.push_back(tasks[t].id);
    }
  }
  if (m.samples.empty())
  {
    throw std::runtime_error("build_dataset: no samples were produced");
  }
  m.normalization = all.constants(cfg.phase_scaling);
  m.splits = split(m.samples, cfg.fractions, cfg.master_seed);
  write_manifest((fs::path(cfg.out_dir) / "manifest.json").string(), m);
  return m;
}

}  // namespace mtforge
