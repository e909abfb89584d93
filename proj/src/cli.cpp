#include "mtforge/cli.hpp"

#include "mtforge/analytic1d.hpp"
#include "mtforge/femsolver.hpp"
#include "mtforge/geomodel.hpp"
#include "mtforge/metrics.hpp"
#include "mtforge/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace mtforge
{

namespace
{

namespace fs = std::filesystem;

std::string num(double v, int digits = 10)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Writes to `path`, or to `out` when path is empty or "-".
template <typename Fn>
void emit(const std::string &path, std::ostream &out, Fn &&fn)
{
  if (path.empty() || path == "-")
  {
    fn(out);
    return;
  }
  std::ofstream file(path);
  if (!file)
  {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  fn(file);
}

std::array<double, 3> parse_fractions(const std::vector<double> &f)
{
  if (f.size() != 3)
  {
    throw std::invalid_argument("--fractions needs three values (train, validation, test)");
  }
  return {f[0], f[1], f[2]};
}

int threads_or_one(int t) { return std::max(1, t); }

// --- subcommands -------------------------------------------------------------

struct GenModelsArgs
{
  std::size_t n = 1;
  double alpha = 8.0;
  std::vector<Index> dims{32, 32, 32};
  double spacing = 1000.0;
  std::string grid;
  std::uint64_t master_seed = 0;
  double rho_min = 1.0, rho_max = 1.0e4;
  std::vector<double> block;
  std::string out;
};

void gen_models(const GenModelsArgs &a, std::ostream &out)
{
  GrfSpec spec;
  spec.alpha = a.alpha;
  spec.rho_min = a.rho_min;
  spec.rho_max = a.rho_max;
  if (!a.grid.empty())
  {
    const GridSpec g = read_grid_spec(a.grid);
    spec.dims = g.core.cells;
    spec.spacing = g.core.spacing;
  }
  else
  {
    spec.dims = {a.dims[0], a.dims[1], a.dims[2]};
    spec.spacing = {a.spacing, a.spacing, a.spacing};
  }
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.n; ++i)
  {
    spec.seed = sample_seed(a.master_seed, a.alpha, i);
    ResistivityModel<double> model = generate_grf(spec);
    if (!a.block.empty())
    {
      BlockSpec b;
      for (int d = 0; d < 3; ++d)
      {
        b.origin[d] = static_cast<Index>(a.block[d]);
        b.size[d] = static_cast<Index>(a.block[3 + d]);
      }
      b.rho = a.block[6];
      model = embed_block(std::move(model), b);
    }
    const std::string path = (fs::path(a.out) / (sample_id(a.alpha, i) + ".f32")).string();
    write_model(path, model);
    out << path << '\n';
  }
}

struct ForwardArgs
{
  std::string model, grid, freqs = "standard16", out, diagnostics;
  int threads = 1;
  Index iterative_threshold = SolverOptions{}.iterative_threshold;
};

void forward_cmd(const ForwardArgs &a, std::ostream &err)
{
  const ResistivityModel<double> model = read_model(a.model);
  const GridSpec grid = read_grid_spec(a.grid);
  if (model.dims != grid.core.cells)
  {
    throw std::invalid_argument("model dims do not match the grid core");
  }
  if (model.spacing != grid.core.spacing)
  {
    throw std::invalid_argument("model spacing does not match the grid core spacing");
  }
  const std::vector<double> freqs = resolve_frequencies(a.freqs);
  ForwardOptions opts;
  opts.threads = threads_or_one(a.threads);
  opts.solver.iterative_threshold = a.iterative_threshold;
  const ForwardResult result = forward(model, grid, freqs, opts);

  SampleMeta meta;
  meta.id = fs::path(a.out).stem().string();
  meta.seed = model.provenance.seed;
  meta.alpha = model.provenance.alpha;
  meta.rho_min = model.provenance.rho_min;
  meta.rho_max = model.provenance.rho_max;
  meta.freqs = freqs;
  write_sample(a.out, make_sample(model, result.response, std::move(meta)));

  nlohmann::json diag = nlohmann::json::array();
  for (const auto &d : result.diagnostics)
  {
    diag.push_back({{"frequency_hz", d.frequency},
                    {"unknowns", d.unknowns},
                    {"symmetry_error", d.symmetry_error},
                    {"residuals", d.residuals},
                    {"solver", d.iterative ? "bicgstab" : "lu"}});
  }
  err << "diagnostics: " << diag.dump() << '\n';
  if (!a.diagnostics.empty())
  {
    std::ofstream(a.diagnostics) << diag.dump(2) << '\n';
  }
}

struct Forward1dArgs
{
  std::vector<double> rho, thick;
  std::string freqs = "standard16", out;
};

void forward1d_cmd(const Forward1dArgs &a, std::ostream &out)
{
  LayeredModel model{a.thick, a.rho};
  if (model.thicknesses.size() + 1 != model.resistivities.size())
  {
    throw std::invalid_argument("--thick needs one entry per layer above the half-space");
  }
  model.validate();
  const std::vector<double> freqs = resolve_frequencies(a.freqs);
  emit(a.out, out, [&](std::ostream &os) {
    os << "freq_hz,rho_a_ohm_m,phase_deg,z_re_ohm,z_im_ohm\n";
    for (double f : freqs)
    {
      const PlaneWaveResponse r = impedance_recursion(model, f);
      os << num(f) << ',' << num(r.apparent_resistivity()) << ',' << num(r.phase_deg()) << ','
         << num(r.impedance.real()) << ',' << num(r.impedance.imag()) << '\n';
    }
  });
}

struct BuildDatasetArgs
{
  std::size_t n_per_alpha = 1;
  std::vector<double> alphas{6, 7, 8, 9, 10};
  std::string grid, freqs = "standard16", out, phase_scaling = "log10";
  int threads = 1;
  std::uint64_t master_seed = 0;
  double rho_min = 1.0, rho_max = 1.0e4;
  std::vector<double> fractions{0.85, 0.10, 0.05};
  bool quiet = false;
};

void build_dataset_cmd(const BuildDatasetArgs &a, std::ostream &out, std::ostream &err)
{
  DatasetConfig cfg;
  cfg.n_per_alpha = a.n_per_alpha;
  cfg.alphas = a.alphas;
  cfg.grid = read_grid_spec(a.grid);
  cfg.freqs = resolve_frequencies(a.freqs);
  cfg.out_dir = a.out;
  cfg.threads = threads_or_one(a.threads);
  cfg.master_seed = a.master_seed;
  cfg.rho_min = a.rho_min;
  cfg.rho_max = a.rho_max;
  cfg.fractions = parse_fractions(a.fractions);
  cfg.phase_scaling = phase_scaling_from_name(a.phase_scaling);
  if (!a.quiet)
  {
    cfg.log = [&err](std::string_view msg) { err << msg << '\n'; };
  }
  const DatasetManifest m = build_dataset(cfg);
  out << (fs::path(a.out) / "manifest.json").string() << '\n';
  err << m.samples.size() << " samples, " << m.failed.size() << " failed\n";
}

struct AddNoiseArgs
{
  double level = 0.0;
  std::uint64_t seed = 0;
  std::string in, out;
};

void add_noise_cmd(const AddNoiseArgs &a)
{
  SampleRecord<float> r = read_sample(a.in);
  r.response = add_noise(r.response, {a.level, a.seed});
  r.meta.noise_level = a.level;
  write_sample(a.out, r);
}

struct SplitArgs
{
  std::vector<double> fractions{0.85, 0.10, 0.05};
  std::uint64_t seed = 0;
  std::string dir, ids, out;
};

void split_cmd(const SplitArgs &a, std::ostream &out)
{
  std::vector<std::string> ids;
  if (!a.dir.empty())
  {
    for (const auto &p : list_samples(a.dir))
    {
      ids.push_back(fs::path(p).stem().string());
    }
  }
  else
  {
    std::ifstream in(a.ids);
    if (!in)
    {
      throw std::runtime_error("cannot read id list '" + a.ids + "'");
    }
    for (std::string line; std::getline(in, line);)
    {
      if (!line.empty())
      {
        ids.push_back(line);
      }
    }
  }
  const DatasetSplits s = split(ids, parse_fractions(a.fractions), a.seed);
  const nlohmann::json j = {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
  emit(a.out, out, [&](std::ostream &os) { os << j.dump(2) << '\n'; });
}

struct MetricsArgs
{
  std::string pred, truth, out, manifest;
  bool raw = false;
  int bins = 20;
  int ssim_window = 0;
};

std::vector<SampleRecord<float>> read_dir(const std::string &dir)
{
  std::vector<SampleRecord<float>> records;
  for (const auto &p : list_samples(dir))
  {
    records.push_back(read_sample(p));
  }
  if (records.empty())
  {
    throw std::runtime_error("no .mts samples in '" + dir + "'");
  }
  return records;
}

void metrics_cmd(const MetricsArgs &a, std::ostream &out, std::ostream &err)
{
  ReportOptions opts;
  opts.normalized = !a.raw;
  opts.bins = a.bins;
  opts.ssim_window = a.ssim_window;
  if (!a.manifest.empty())
  {
    opts.normalization = read_manifest(a.manifest).normalization;
  }
  const MetricReport rep = report(read_dir(a.pred), read_dir(a.truth), opts);
  emit(a.out, out, [&](std::ostream &os) { os << to_json(rep).dump(2) << '\n'; });
  for (Channel c : kAllChannels)
  {
    const auto &ch = rep.channels[static_cast<int>(c)];
    err << channel_name(c) << ": mean SSIM " << num(ch.mean_ssim, 6) << ", mean RMSE "
        << num(ch.mean_rmse, 6) << '\n';
  }
}

struct ExportSliceArgs
{
  std::string sample, channel = "rho_xy", out;
  Index index = 0;
};

void export_slice_cmd(const ExportSliceArgs &a, std::ostream &out)
{
  const SampleRecord<float> r = read_sample(a.sample);
  const bool model = a.channel == "model";
  const Index nx = r.model.dims.nx, ny = r.model.dims.ny;
  const Index depth = model ? r.model.dims.nz : r.response.nf;
  if (a.index < 0 || a.index >= depth)
  {
    throw std::invalid_argument("--freq-index " + std::to_string(a.index) + " outside [0, " +
                                std::to_string(depth) + ")");
  }
  const Eigen::ArrayXf &v = model ? r.model.log10_rho : r.response.channel(channel_from_name(a.channel));
  emit(a.out, out, [&](std::ostream &os) {
    for (Index j = 0; j < ny; ++j)
    {
      for (Index i = 0; i < nx; ++i)
      {
        os << (i ? "," : "") << num(v[i + nx * (j + ny * a.index)], 9);
      }
      os << '\n';
    }
  });
}

// Resolved options of one subcommand as a TOML section that the root --config
// option reads back.
std::string echo_config(const CLI::App &sub)
{
  auto quote = [](const std::string &v) {
    std::string q = "\"";
    for (char c : v)
    {
      if (c == '"' || c == '\\')
      {
        q += '\\';
      }
      q += c;
    }
    return q + "\"";
  };
  std::string s = "[" + sub.get_name() + "]\n";
  for (const CLI::Option *opt : sub.get_options())
  {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty())
    {
      continue;
    }
    std::vector<std::string> values;
    if (opt->count() > 0)
    {
      values = opt->reduced_results();
    }
    else if (!opt->get_default_str().empty())
    {
      values = {opt->get_default_str()};
    }
    if (opt->get_type_size() == 0)
    {
      s += name + "=" + (opt->count() > 0 ? "true" : "false") + "\n";
      continue;
    }
    if (values.empty())
    {
      continue;
    }
    if (values.size() == 1)
    {
      s += name + "=" + quote(values[0]) + "\n";
    }
    else
    {
      s += name + "=[";
      for (std::size_t i = 0; i < values.size(); ++i)
      {
        s += (i ? ", " : "") + quote(values[i]);
      }
      s += "]\n";
    }
  }
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Magnetotelluric forward modeling and synthetic dataset toolkit", "mtforge"};
  app.require_subcommand(1);

  app.set_config("--config", "", "Read options from a TOML file, e.g. an echoed config");
  auto config = [](CLI::App *sub) { sub->configurable(); };

  GenModelsArgs gm;
  auto *gen = app.add_subcommand("gen-models", "Generate Gaussian random field resistivity models");
  config(gen);
  gen->add_option("--n", gm.n, "Number of models")->capture_default_str();
  gen->add_option("--alpha", gm.alpha, "Spectral exponent")->capture_default_str();
  gen->add_option("--dims", gm.dims, "Core cells nx,ny,nz")->delimiter(',')->expected(3)->capture_default_str();
  gen->add_option("--spacing", gm.spacing, "Cell size (m)")->capture_default_str();
  gen->add_option("--grid", gm.grid, "Grid JSON; overrides --dims/--spacing")->check(CLI::ExistingFile);
  gen->add_option("--master-seed", gm.master_seed)->capture_default_str();
  gen->add_option("--rho-min", gm.rho_min, "Ohm-m")->capture_default_str();
  gen->add_option("--rho-max", gm.rho_max, "Ohm-m")->capture_default_str();
  gen->add_option("--block", gm.block, "Anomaly i,j,k,li,lj,lk,rho")->delimiter(',')->expected(7);
  gen->add_option("--out", gm.out, "Output directory")->required();

  ForwardArgs fw;
  auto *fwd = app.add_subcommand("forward", "3D edge-element forward response of one model");
  config(fwd);
  fwd->add_option("--model", fw.model, "Model file (.f32 with .json sidecar)")->required()->check(CLI::ExistingFile);
  fwd->add_option("--grid", fw.grid, "Grid JSON")->required()->check(CLI::ExistingFile);
  fwd->add_option("--freqs", fw.freqs, "'standard16' or a file of frequencies (Hz)")->capture_default_str();
  fwd->add_option("--out", fw.out, "Output sample (.mts)")->required();
  fwd->add_option("--threads", fw.threads, "Worker threads")->envname("MTFORGE_THREADS")->capture_default_str();
  fwd->add_option("--iterative-threshold", fw.iterative_threshold, "Unknowns above which BiCGSTAB is used")
    ->capture_default_str();
  fwd->add_option("--diagnostics", fw.diagnostics, "Write per-frequency solver diagnostics (JSON)");

  Forward1dArgs f1;
  auto *f1d = app.add_subcommand("forward1d", "Layered-earth plane-wave response as CSV");
  config(f1d);
  f1d->add_option("--rho", f1.rho, "Layer resistivities (Ohm-m), top first")->delimiter(',')->required();
  f1d->add_option("--thick", f1.thick, "Layer thicknesses (m) above the half-space")->delimiter(',');
  f1d->add_option("--freqs", f1.freqs)->capture_default_str();
  f1d->add_option("--out", f1.out, "CSV file (default: stdout)");

  BuildDatasetArgs bd;
  auto *build = app.add_subcommand("build-dataset", "Generate models, run forward modeling, write samples and manifest");
  config(build);
  build->add_option("--n-per-alpha", bd.n_per_alpha)->capture_default_str();
  build->add_option("--alphas", bd.alphas)->delimiter(',')->capture_default_str();
  build->add_option("--grid", bd.grid, "Grid JSON")->required()->check(CLI::ExistingFile);
  build->add_option("--freqs", bd.freqs)->capture_default_str();
  build->add_option("--out", bd.out, "Output directory")->required();
  build->add_option("--threads", bd.threads)->envname("MTFORGE_THREADS")->capture_default_str();
  build->add_option("--master-seed", bd.master_seed)->capture_default_str();
  build->add_option("--rho-min", bd.rho_min)->capture_default_str();
  build->add_option("--rho-max", bd.rho_max)->capture_default_str();
  build->add_option("--fractions", bd.fractions)->delimiter(',')->expected(3)->capture_default_str();
  build->add_option("--phase-scaling", bd.phase_scaling)
    ->check(CLI::IsMember({"log10", "linear90"}))
    ->capture_default_str();
  build->add_flag("--quiet", bd.quiet, "Suppress per-sample progress");

  AddNoiseArgs an;
  auto *noise = app.add_subcommand("add-noise", "Multiplicative Gaussian noise on a sample's response");
  config(noise);
  noise->add_option("--level", an.level, "Relative noise level, e.g. 0.05")->required();
  noise->add_option("--seed", an.seed)->capture_default_str();
  noise->add_option("in", an.in, "Input sample")->required()->check(CLI::ExistingFile);
  noise->add_option("out", an.out, "Output sample")->required();

  SplitArgs sp;
  auto *spl = app.add_subcommand("split", "Train/validation/test partition of sample ids (JSON)");
  config(spl);
  spl->add_option("--fractions", sp.fractions)->delimiter(',')->expected(3)->capture_default_str();
  spl->add_option("--seed", sp.seed)->capture_default_str();
  auto *dir_opt = spl->add_option("--dir", sp.dir, "Directory of .mts samples")->check(CLI::ExistingDirectory);
  auto *ids_opt = spl->add_option("--ids", sp.ids, "File with one id per line")->check(CLI::ExistingFile);
  dir_opt->excludes(ids_opt);
  spl->add_option("--out", sp.out, "JSON file (default: stdout)");

  MetricsArgs mt;
  auto *met = app.add_subcommand("metrics", "SSIM/RMSE report between two sample directories");
  config(met);
  met->add_option("--pred", mt.pred)->required()->check(CLI::ExistingDirectory);
  met->add_option("--truth", mt.truth)->required()->check(CLI::ExistingDirectory);
  met->add_option("--out", mt.out, "Report JSON (default: stdout)");
  met->add_option("--manifest", mt.manifest, "Take normalization maxima from a dataset manifest")
    ->check(CLI::ExistingFile);
  met->add_flag("--raw", mt.raw, "Compare raw units instead of normalized channels");
  met->add_option("--bins", mt.bins)->check(CLI::PositiveNumber)->capture_default_str();
  met->add_option("--ssim-window", mt.ssim_window, "Windowed SSIM edge length (0 = global)")
    ->check(CLI::NonNegativeNumber)
    ->capture_default_str();

  ExportSliceArgs ex;
  auto *exs = app.add_subcommand("export-slice", "Write one x-y plane of a sample as a CSV grid");
  config(exs);
  exs->add_option("--sample", ex.sample)->required()->check(CLI::ExistingFile);
  exs->add_option("--channel", ex.channel, "rho_xy, rho_yx, phi_xy, phi_yx or model")
    ->check(CLI::IsMember({"rho_xy", "rho_yx", "phi_xy", "phi_yx", "model"}))
    ->capture_default_str();
  exs->add_option("--freq-index", ex.index, "Frequency index (depth index for 'model')")->capture_default_str();
  exs->add_option("--out", ex.out, "CSV file (default: stdout)");

  try
  {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App *sub = app.get_subcommands().front();
  err << "# config (replay with: mtforge --config <file>)\n" << echo_config(*sub) << "# end config\n";

  try
  {
    if (sub == gen)
    {
      gen_models(gm, out);
    }
    else if (sub == fwd)
    {
      forward_cmd(fw, err);
    }
    else if (sub == f1d)
    {
      forward1d_cmd(f1, out);
    }
    else if (sub == build)
    {
      build_dataset_cmd(bd, out, err);
    }
    else if (sub == noise)
    {
      add_noise_cmd(an);
    }
    else if (sub == spl)
    {
      if (sp.dir.empty() && sp.ids.empty())
      {
        err << "split: one of --dir or --ids is required\n" << spl->help();
        return kExitUsage;
      }
      split_cmd(sp, out);
    }
    else if (sub == met)
    {
      metrics_cmd(mt, out, err);
    }
    else if (sub == exs)
    {
      export_slice_cmd(ex, out);
    }
  }
  catch (const std::exception &e)
  {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace mtforge
