#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "helmfluid/datagen.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/gradcheck_suite.hpp"
#include "helmfluid/helmholtz.hpp"
#include "helmfluid/json_io.hpp"
#include "helmfluid/npy.hpp"
#include "helmfluid/parallel.hpp"
#include "helmfluid/pipeline.hpp"
#include "helmfluid/spectral_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace helmfluid;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HELMFLUID_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("HELMFLUID_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  return 0;
}

std::optional<SplitCounts> split_counts(int train, int val, int test) {
  if (train < 0 && val < 0 && test < 0) return std::nullopt;
  if (train < 0 || val < 0 || test < 0) throw UsageError("--train, --val and --test must be given together");
  return SplitCounts{train, val, test};
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

// Shared dataset-generation flags.
struct GenArgs {
  fs::path out;
  int n = 0;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
  int train = -1, val = -1, test = -1;

  void add(CLI::App* sub) {
    sub->add_option("--out", out, "Output dataset directory")->required();
    sub->add_option("--n", n, "Number of sequences")->required()->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Master seed (falls back to HELMFLUID_SEED, then 0)");
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--train", train, "Train split size (with --val and --test)");
    sub->add_option("--val", val, "Validation split size");
    sub->add_option("--test", test, "Test split size");
  }
};

json manifest_summary(const Manifest& m, const fs::path& out) {
  return {{"out", out.string()},
          {"kind", m.kind},
          {"sequences", m.sequences.size()},
          {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}},
          {"master_seed", m.master_seed}};
}

struct TrainArgs {
  fs::path data, run, config;
  std::optional<int> epochs, batch_size, input_len, pred_len, eval_every;
  std::optional<double> lr, grad_clip;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> velocity_mode, splat_mode;
  bool no_mask = false;
  bool resume = false;
  int workers = default_workers();
};

std::pair<model::ModelConfig, pipeline::TrainConfig> load_configs(const TrainArgs& a) {
  json mj = json::object(), tj = json::object();
  fs::path source = a.config;
  if (source.empty() && a.resume && fs::exists(a.run / "config.json")) source = a.run / "config.json";
  if (!source.empty()) {
    const auto j = read_json_file(source);
    if (j.contains("model")) mj = j.at("model");
    if (j.contains("train")) tj = j.at("train");
  }
  if (a.epochs) tj["epochs"] = *a.epochs;
  if (a.batch_size) tj["batch_size"] = *a.batch_size;
  if (a.input_len) tj["input_len"] = *a.input_len;
  if (a.pred_len) tj["pred_len"] = *a.pred_len;
  if (a.eval_every) tj["eval_every"] = *a.eval_every;
  if (a.lr) tj["lr"] = *a.lr;
  if (a.grad_clip) tj["grad_clip"] = *a.grad_clip;
  if (a.seed || !tj.contains("seed")) tj["seed"] = resolve_seed(a.seed);
  if (a.velocity_mode) mj["velocity_mode"] = *a.velocity_mode;
  if (a.splat_mode) mj["splat_mode"] = *a.splat_mode;
  if (a.no_mask) mj["use_mask"] = false;
  auto tc = pipeline::TrainConfig::from_json(tj);
  tc.workers = a.workers;
  if (!mj.contains("lookback")) mj["lookback"] = tc.input_len - 1;
  return {model::ModelConfig::from_json(mj), tc};
}

fs::path dataset_of_run(const fs::path& run) {
  const auto cfg = read_json_file(run / "config.json");
  return cfg.at("dataset").at("root").get<std::string>();
}

fs::path checkpoint_dir(const fs::path& run, const fs::path& checkpoint) {
  if (!checkpoint.empty()) return checkpoint;
  if (run.empty()) throw UsageError("one of --run or --checkpoint is required");
  return run / "checkpoint";
}

void write_pgm(const fs::path& path, const std::vector<double>& v, int h, int w, double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P5\n" << w << " " << h << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (double x : v) {
    const double t = std::clamp((x - lo) / span, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
  }
}

void write_csv(const fs::path& path, const std::vector<double>& v, int h, int w) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  char buf[32];
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", v[static_cast<std::size_t>(r * w + c)]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HelmFluid: Helmholtz-dynamics fluid prediction toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "helmfluid 0.1.0");

  // gen-ns
  GenArgs ns_args;
  std::string ns_profile = "desk";
  std::optional<int> ns_res, ns_frames;
  std::optional<double> ns_nu, ns_dt, ns_record;
  bool ns_no_forcing = false;
  auto* gen_ns = app.add_subcommand("gen-ns", "Generate a periodic Navier-Stokes vorticity dataset");
  ns_args.add(gen_ns);
  gen_ns->add_option("--profile", ns_profile, "desk (nu 1e-4) or paper (nu 1e-5)")
      ->check(CLI::IsMember({"desk", "paper"}));
  gen_ns->add_option("--resolution", ns_res, "Grid size N (N x N on the unit torus)")->check(CLI::PositiveNumber);
  gen_ns->add_option("--frames", ns_frames, "Recorded frames per sequence")->check(CLI::PositiveNumber);
  gen_ns->add_option("--nu", ns_nu, "Viscosity");
  gen_ns->add_option("--dt-solver", ns_dt, "Solver time step");
  gen_ns->add_option("--record-every", ns_record, "Time between recorded frames");
  gen_ns->add_flag("--no-forcing", ns_no_forcing, "Disable the fixed forcing");

  // gen-bounded
  GenArgs bd_args;
  datagen::BoundedDyeConfig bd;
  int bd_size = bd.grid.height;
  auto* gen_bd = app.add_subcommand("gen-bounded", "Generate dye advected past circular obstacles");
  bd_args.add(gen_bd);
  gen_bd->add_option("--size", bd_size, "Grid size N (N x N cells)")->check(CLI::PositiveNumber);
  gen_bd->add_option("--frames", bd.frames, "Frames per sequence")->check(CLI::PositiveNumber);
  gen_bd->add_option("--obstacles", bd.n_obstacles, "Obstacles per sequence")->check(CLI::NonNegativeNumber);
  gen_bd->add_option("--radius-min", bd.radius_min, "Smallest obstacle radius (cells)");
  gen_bd->add_option("--radius-max", bd.radius_max, "Largest obstacle radius (cells)");
  gen_bd->add_option("--speed", bd.flow_speed, "Free-stream speed (cells/frame)");
  gen_bd->add_option("--substeps", bd.substeps, "Advection substeps per frame")->check(CLI::PositiveNumber);

  // gen-translate
  GenArgs tr_args;
  datagen::TranslateConfig tr;
  int tr_size = tr.grid.height;
  std::string tr_pattern = datagen::to_string(tr.pattern);
  auto* gen_tr = app.add_subcommand("gen-translate", "Generate textures translating at known constant velocities");
  tr_args.add(gen_tr);
  gen_tr->add_option("--size", tr_size, "Grid size N (N x N periodic cells)")->check(CLI::PositiveNumber);
  gen_tr->add_option("--frames", tr.frames, "Frames per sequence")->check(CLI::PositiveNumber);
  gen_tr->add_option("--pattern", tr_pattern, "gaussian_blobs or grf")->check(CLI::IsMember({"gaussian_blobs", "grf"}));
  gen_tr->add_option("--blobs", tr.n_blobs, "Gaussian blobs per texture")->check(CLI::PositiveNumber);
  gen_tr->add_option("--sigma", tr.blob_sigma, "Blob width (cells)");
  gen_tr->add_option("--speed-min", tr.speed_min, "Smallest speed (cells/frame)");
  gen_tr->add_option("--speed-max", tr.speed_max, "Largest speed (cells/frame)");

  // train
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a HelmFluid model");
  train->add_option("--data", ta.data, "Dataset directory or manifest")->required();
  train->add_option("--run", ta.run, "Run directory")->required();
  train->add_option("--config", ta.config, "JSON file with optional \"model\" and \"train\" sections");
  train->add_option("--epochs", ta.epochs, "Epochs");
  train->add_option("--batch-size", ta.batch_size, "Sequences per optimizer step");
  train->add_option("--lr", ta.lr, "Adam learning rate");
  train->add_option("--grad-clip", ta.grad_clip, "Global gradient norm clip (0 = off)");
  train->add_option("--input-len", ta.input_len, "Observed frames");
  train->add_option("--pred-len", ta.pred_len, "Predicted frames");
  train->add_option("--eval-every", ta.eval_every, "Validate every N epochs");
  train->add_option("--seed", ta.seed, "Seed (falls back to HELMFLUID_SEED, then 0)");
  train->add_option("--velocity-mode", ta.velocity_mode, "helmholtz or direct")
      ->check(CLI::IsMember({"helmholtz", "direct"}));
  train->add_option("--splat-mode", ta.splat_mode, "forward_splat or backward_warp")
      ->check(CLI::IsMember({"forward_splat", "backward_warp"}));
  train->add_flag("--no-mask", ta.no_mask, "Ignore boundary masks (ablation)");
  train->add_flag("--resume", ta.resume, "Continue from <run>/last (reuses <run>/config.json without --config)");
  train->add_option("--workers", ta.workers, "Worker threads")->check(CLI::PositiveNumber);

  // eval
  fs::path ev_run, ev_ckpt, ev_data;
  std::string ev_split = "test";
  std::optional<bool> ev_masked;
  int ev_workers = default_workers();
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints metrics JSON");
  eval->add_option("--run", ev_run, "Run directory (uses <run>/checkpoint)");
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint directory");
  eval->add_option("--data", ev_data, "Dataset (defaults to the run's dataset)");
  eval->add_option("--split", ev_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_flag("--masked,!--unmasked", ev_masked, "Restrict metrics to fluid cells (default: when masks exist)");
  eval->add_option("--workers", ev_workers, "Worker threads")->check(CLI::PositiveNumber);

  // predict
  fs::path pr_run, pr_ckpt, pr_data, pr_input, pr_mask, pr_out, pr_diag;
  std::optional<std::size_t> pr_index;
  std::optional<int> pr_steps;
  auto* predict = app.add_subcommand("predict", "Roll out a checkpoint from observed frames");
  predict->add_option("--run", pr_run, "Run directory (uses <run>/checkpoint)");
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint directory");
  predict->add_option("--data", pr_data, "Dataset to take the history from (with --index)");
  predict->add_option("--index", pr_index, "Sequence index in the dataset");
  predict->add_option("--input", pr_input, "History frames NPY (T, H, W) instead of --data");
  predict->add_option("--mask", pr_mask, "Boundary mask NPY (H, W) for --input");
  predict->add_option("--steps", pr_steps, "Frames to predict (default: the trained horizon)");
  predict->add_option("--out", pr_out, "Output NPY (steps, H, W)")->required();
  predict->add_option("--diagnostics", pr_diag, "Directory for per-step phi/a/vel dumps");

  // decompose
  fs::path dc_in, dc_out;
  auto* decompose = app.add_subcommand("decompose", "Helmholtz-Hodge split of a periodic vector field");
  decompose->add_option("--in", dc_in, "Vector field NPY (2, H, W)")->required();
  decompose->add_option("--out", dc_out, "Output directory")->required();

  // gradcheck
  double gc_tol = 1e-4;
  std::size_t gc_samples = 16;
  std::optional<std::uint64_t> gc_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every autodiff op and the micro model");
  gradcheck->add_option("--tol", gc_tol, "Relative tolerance");
  gradcheck->add_option("--samples", gc_samples, "Components checked per model parameter (0 = all)");
  gradcheck->add_option("--seed", gc_seed, "Seed (falls back to HELMFLUID_SEED, then 0)");

  // export
  fs::path ex_in, ex_out;
  int ex_frame = 0;
  std::optional<double> ex_vmin, ex_vmax;
  auto* exportc = app.add_subcommand("export", "Write one field as a PGM image and a CSV table");
  exportc->add_option("--in", ex_in, "NPY field (H, W) or stack (K, H, W)")->required();
  exportc->add_option("--out", ex_out, "Output prefix (writes <out>.pgm and <out>.csv)")->required();
  exportc->add_option("--frame", ex_frame, "Index into a (K, H, W) stack")->check(CLI::NonNegativeNumber);
  exportc->add_option("--vmin", ex_vmin, "Value mapped to black (default: field min)");
  exportc->add_option("--vmax", ex_vmax, "Value mapped to white (default: field max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_ns->parsed()) {
      auto cfg = ns_profile == "paper" ? spectral_sim::NSConfig::paper_profile() : spectral_sim::NSConfig::desk_profile();
      if (ns_res) cfg.grid = GridSpec(*ns_res, *ns_res, 1.0 / *ns_res, BoundaryMode::periodic);
      if (ns_frames) cfg.frames = *ns_frames;
      if (ns_nu) cfg.nu = *ns_nu;
      if (ns_dt) cfg.dt_solver = *ns_dt;
      if (ns_record) cfg.record_every = *ns_record;
      if (ns_no_forcing) cfg.forcing = spectral_sim::Forcing::none;
      const auto seed = resolve_seed(ns_args.seed);
      const auto m = spectral_sim::generate_ns_dataset(cfg, spectral_sim::GRFSpec{}, ns_args.n, ns_args.out, seed,
                                                       split_counts(ns_args.train, ns_args.val, ns_args.test),
                                                       ns_args.workers);
      print_json(manifest_summary(m, ns_args.out));
    } else if (gen_bd->parsed()) {
      bd.grid = GridSpec(bd_size, bd_size, 1.0, BoundaryMode::replicate);
      const auto m = datagen::generate_bounded_dye_dataset(bd, bd_args.n, bd_args.out, resolve_seed(bd_args.seed),
                                                           split_counts(bd_args.train, bd_args.val, bd_args.test),
                                                           bd_args.workers);
      print_json(manifest_summary(m, bd_args.out));
    } else if (gen_tr->parsed()) {
      tr.grid = GridSpec(tr_size, tr_size, 1.0, BoundaryMode::periodic);
      tr.pattern = datagen::texture_pattern_from_string(tr_pattern);
      const auto m = datagen::generate_translate_dataset(tr, tr_args.n, tr_args.out, resolve_seed(tr_args.seed),
                                                         split_counts(tr_args.train, tr_args.val, tr_args.test),
                                                         tr_args.workers);
      print_json(manifest_summary(m, tr_args.out));
    } else if (train->parsed()) {
      const auto [mc, tc] = load_configs(ta);
      const auto data = pipeline::SequenceDataset::open(ta.data);
      const auto result = pipeline::train(mc, tc, data, ta.run, ta.resume, [](const pipeline::EpochRecord& r) {
        std::cerr << "epoch " << r.epoch << " step " << r.step << " train_loss " << r.train_loss;
        if (r.val_rel_l2) std::cerr << " val_rel_l2 " << *r.val_rel_l2;
        std::cerr << std::endl;
      });
      print_json({{"run", ta.run.string()},
                  {"epochs", result.epochs.size()},
                  {"best_epoch", result.best_epoch},
                  {"best_val_rel_l2", result.best_val_rel_l2}});
    } else if (eval->parsed()) {
      const auto ckpt = checkpoint_dir(ev_run, ev_ckpt);
      pipeline::Checkpoint meta;
      const auto model = pipeline::load_checkpoint(ckpt, &meta);
      const auto data_path = !ev_data.empty() ? ev_data : dataset_of_run(ev_run.empty() ? ckpt.parent_path() : ev_run);
      const auto data = pipeline::SequenceDataset::open(data_path);
      const bool masked = ev_masked.value_or(data.has_masks());
      const auto split = split_from_string(ev_split);
      const auto& tc = meta.train_config;
      const auto m = pipeline::evaluate(model, meta.norm, data, split, tc.input_len, tc.pred_len, masked, ev_workers);
      const auto p = pipeline::persistence_baseline(data, split, tc.input_len, tc.pred_len, masked);
      print_json({{"split", ev_split},
                  {"masked", masked},
                  {"input_len", tc.input_len},
                  {"pred_len", tc.pred_len},
                  {"model", m.to_json()},
                  {"persistence", p.to_json()}});
    } else if (predict->parsed()) {
      const auto ckpt = checkpoint_dir(pr_run, pr_ckpt);
      pipeline::Checkpoint meta;
      const auto model = pipeline::load_checkpoint(ckpt, &meta);
      const int steps = pr_steps.value_or(meta.train_config.pred_len);
      if (steps < 1) throw UsageError("--steps must be >= 1");
      pipeline::Sequence seq;
      if (!pr_input.empty()) {
        const auto a = read_npy(pr_input);
        if (a.rank() != 3) throw ShapeError("--input must be (T, H, W)");
        seq.grid = GridSpec(static_cast<int>(a.shape[1]), static_cast<int>(a.shape[2]));
        seq.frames = static_cast<int>(a.shape[0]);
        seq.values = a.to_f64();
        if (!pr_mask.empty()) {
          const auto mv = read_npy(pr_mask).to_f64();
          if (mv.size() != seq.grid.size()) throw ShapeError("--mask does not match the input grid");
          std::vector<std::uint8_t> in(mv.size());
          for (std::size_t i = 0; i < in.size(); ++i) in[i] = mv[i] > 0.5;
          seq.mask = BoundaryMask(seq.grid, std::move(in));
        }
      } else if (!pr_data.empty() && pr_index) {
        seq = pipeline::SequenceDataset::open(pr_data).sequence(*pr_index);
      } else {
        throw UsageError("predict needs --input or --data with --index");
      }
      const int input_len = std::min(seq.frames, meta.train_config.input_len);
      seq.frames = input_len;
      seq.values.resize(static_cast<std::size_t>(input_len) * seq.grid.size());
      const auto p = pipeline::predict_sequence(model, meta.norm, seq, input_len, steps, true, !pr_diag.empty());
      std::vector<float> flat;
      for (const auto& f : p.frames) flat.insert(flat.end(), f.begin(), f.end());
      if (pr_out.has_parent_path()) fs::create_directories(pr_out.parent_path());
      write_npy(pr_out, NpyArray::from_f32({static_cast<std::size_t>(steps), static_cast<std::size_t>(seq.grid.height),
                                           static_cast<std::size_t>(seq.grid.width)},
                                          std::move(flat)));
      if (!pr_diag.empty()) {
        for (std::size_t s = 0; s < p.diagnostics.size(); ++s) {
          char name[32];
          std::snprintf(name, sizeof name, "step_%03zu", s + 1);
          model::dump_diagnostics(p.diagnostics[s], pr_diag / name);
        }
      }
      print_json({{"out", pr_out.string()}, {"steps", steps}, {"input_len", input_len}});
    } else if (decompose->parsed()) {
      const auto f = read_npy_vector(dc_in, BoundaryMode::periodic);
      const auto parts = helmholtz::hodge_decompose_spectral(f);
      const auto& g = f.grid();
      fs::create_directories(dc_out);
      write_npy_vector(dc_out / "curl_free.npy", parts.curl_free);
      write_npy_vector(dc_out / "div_free.npy", parts.div_free);
      write_npy_vector(dc_out / "harmonic.npy",
                       VectorField2D(g, std::vector<double>(g.size(), parts.mean_u),
                                     std::vector<double>(g.size(), parts.mean_v)));
      const auto rec = parts.reconstruct();
      double err = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        err = std::max({err, std::abs(rec.u()[i] - f.u()[i]), std::abs(rec.v()[i] - f.v()[i])});
      }
      print_json({{"out", dc_out.string()},
                  {"harmonic", {parts.mean_u, parts.mean_v}},
                  {"max_reconstruction_error", err}});
    } else if (gradcheck->parsed()) {
      const auto entries = run_gradcheck_suite(gc_tol, resolve_seed(gc_seed), gc_samples);
      bool ok = true;
      json rows = json::array();
      for (const auto& e : entries) {
        ok = ok && e.report.passed;
        std::cerr << (e.report.passed ? "PASS " : "FAIL ") << e.name << " max_rel_error " << e.report.max_rel_error
                  << " checked " << e.report.checked << std::endl;
        rows.push_back({{"name", e.name},
                        {"passed", e.report.passed},
                        {"max_rel_error", e.report.max_rel_error},
                        {"checked", e.report.checked}});
      }
      print_json({{"tol", gc_tol}, {"passed", ok}, {"checks", rows}});
      return ok ? 0 : 1;
    } else if (exportc->parsed()) {
      const auto a = read_npy(ex_in);
      std::size_t h = 0, w = 0, offset = 0;
      if (a.rank() == 2) {
        h = a.shape[0];
        w = a.shape[1];
      } else if (a.rank() == 3) {
        if (static_cast<std::size_t>(ex_frame) >= a.shape[0]) {
          throw InputError("--frame " + std::to_string(ex_frame) + " out of range for " + std::to_string(a.shape[0]) + " frames");
        }
        h = a.shape[1];
        w = a.shape[2];
        offset = static_cast<std::size_t>(ex_frame) * h * w;
      } else {
        throw ShapeError("export expects a (H, W) or (K, H, W) array");
      }
      const auto all = a.to_f64();
      std::vector<double> v(all.begin() + static_cast<long>(offset), all.begin() + static_cast<long>(offset + h * w));
      const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      const double lo = ex_vmin.value_or(*mn), hi = ex_vmax.value_or(*mx);
      if (ex_out.has_parent_path()) fs::create_directories(ex_out.parent_path());
      const fs::path pgm = ex_out.string() + ".pgm", csv = ex_out.string() + ".csv";
      write_pgm(pgm, v, static_cast<int>(h), static_cast<int>(w), lo, hi);
      write_csv(csv, v, static_cast<int>(h), static_cast<int>(w));
      print_json({{"pgm", pgm.string()}, {"csv", csv.string()}, {"vmin", lo}, {"vmax", hi}});
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
