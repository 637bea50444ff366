// vnca: train and probe a variational neural cellular automaton.
//
// Subcommands: train, eval, sample, recon, grow, damage, interp,
// export-latents. Every command prints its effective configuration, writes
// it to <out>/run-config.txt, and emits images as binary PGM/PPM.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "vnca/checkpoint.hpp"
#include "vnca/dataset.hpp"
#include "vnca/experiments.hpp"
#include "vnca/model.hpp"
#include "vnca/pnm.hpp"
#include "vnca/synth.hpp"
#include "vnca/tensor.hpp"
#include "vnca/training.hpp"

namespace fs = std::filesystem;
using namespace vnca;

namespace {

// Data file the user pointed at does not exist; mapped to exit code 2.
struct MissingDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KvList = std::vector<std::pair<std::string, std::string>>;

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void emit_config(const std::string& out_dir, const KvList& kv) {
  fs::create_directories(out_dir);
  std::string path = out_dir + "/run-config.txt";
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  for (const auto& [k, v] : kv) {
    f << k << "=" << v << "\n";
    std::printf("%s=%s\n", k.c_str(), v.c_str());
  }
}

// Flags shared by every command that instantiates a model from scratch.
struct ModelFlags {
  std::string variant = "doubling";
  std::string likelihood = "bernoulli";
  int latent = 256;
  int width = 0;
  int k = 4;
  int m = 8;
  int t_min = 32;
  int t_max = 64;
  int n_mix = 1;
  int img = 32;
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--variant", mf.variant, "doubling | nondoubling")
      ->capture_default_str();
  cmd->add_option("--likelihood", mf.likelihood,
                  "bernoulli | logistic_mixture")
      ->capture_default_str();
  cmd->add_option("--latent", mf.latent, "cell state channels |Z|")
      ->capture_default_str();
  cmd->add_option("--width", mf.width, "update net hidden width (0: latent)")
      ->capture_default_str();
  cmd->add_option("--k", mf.k, "doublings (doubling variant)")
      ->capture_default_str();
  cmd->add_option("--m", mf.m, "NCA steps per growth phase")
      ->capture_default_str();
  cmd->add_option("--t-min", mf.t_min, "min NCA steps (nondoubling)")
      ->capture_default_str();
  cmd->add_option("--t-max", mf.t_max, "max NCA steps (nondoubling)")
      ->capture_default_str();
  cmd->add_option("--n-mix", mf.n_mix, "logistic mixture components")
      ->capture_default_str();
  cmd->add_option("--img", mf.img, "model image side length")
      ->capture_default_str();
}

ModelConfig to_config(const ModelFlags& mf) {
  ModelConfig mc;
  mc.variant = variant_from_string(mf.variant);
  mc.likelihood = likelihood_from_string(mf.likelihood);
  mc.latent = mf.latent;
  mc.width = mf.width;
  mc.k_doublings = mf.k;
  mc.steps_per_phase = mf.m;
  mc.t_min = mf.t_min;
  mc.t_max = mf.t_max;
  mc.n_mix = mf.n_mix;
  mc.img_h = mc.img_w = mf.img;
  mc.img_c = mc.likelihood == Likelihood::bernoulli ? 1 : 3;
  mc.validate();
  return mc;
}

void config_kv(KvList& kv, const ModelConfig& mc) {
  kv.emplace_back("variant", to_string(mc.variant));
  kv.emplace_back("likelihood", to_string(mc.likelihood));
  kv.emplace_back("latent", std::to_string(mc.latent));
  kv.emplace_back("width", std::to_string(mc.width));
  kv.emplace_back("k", std::to_string(mc.k_doublings));
  kv.emplace_back("m", std::to_string(mc.steps_per_phase));
  kv.emplace_back("t_min", std::to_string(mc.t_min));
  kv.emplace_back("t_max", std::to_string(mc.t_max));
  kv.emplace_back("n_mix", std::to_string(mc.n_mix));
  kv.emplace_back("img_h", std::to_string(mc.img_h));
  kv.emplace_back("img_w", std::to_string(mc.img_w));
  kv.emplace_back("img_c", std::to_string(mc.img_c));
}

// --data accepts an IDX file, a Larochelle-style .amat file, a directory of
// model-sized PGM/PPM images, or "synth:<n>[:<seed>]" for the built-in
// glyph corpus. Grayscale sources are binarized for Bernoulli models and
// padded up to the model canvas when smaller.
Dataset load_data(const std::string& spec, const std::string& labels,
                  const ModelConfig& mc) {
  Dataset ds;
  if (spec.rfind("synth:", 0) == 0) {
    if (mc.likelihood != Likelihood::bernoulli)
      throw ContractError("synthetic digits are binary grayscale");
    std::string rest = spec.substr(6);
    std::uint64_t dseed = 0;
    auto colon = rest.find(':');
    if (colon != std::string::npos) {
      dseed = std::stoull(rest.substr(colon + 1));
      rest.resize(colon);
    }
    ds = synth_digits(std::stoll(rest), dseed);
  } else if (!fs::exists(spec)) {
    throw MissingDataError("no such data file: " + spec);
  } else if (fs::is_directory(spec)) {
    ds = load_image_dir(spec, mc.img_h, mc.img_w, mc.img_c);
  } else if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".amat") {
    ds = load_amat(spec);
  } else {
    if (!labels.empty() && !fs::exists(labels))
      throw MissingDataError("no such data file: " + labels);
    ds = load_idx(spec, labels);
    if (mc.likelihood == Likelihood::bernoulli)
      ds = binarize_threshold(ds, 0.5f);
  }
  if (ds.c == mc.img_c && (ds.h < mc.img_h || ds.w < mc.img_w))
    ds = pad_center(ds, mc.img_h, mc.img_w);
  if (ds.c != mc.img_c || ds.h != mc.img_h || ds.w != mc.img_w)
    throw FormatError("data is " + std::to_string(ds.c) + "x" +
                      std::to_string(ds.h) + "x" + std::to_string(ds.w) +
                      ", model wants " + std::to_string(mc.img_c) + "x" +
                      std::to_string(mc.img_h) + "x" +
                      std::to_string(mc.img_w));
  return ds;
}

std::string image_path(const std::string& dir, const std::string& stem,
                       int index, int c) {
  return dir + "/" + stem + "-" + std::to_string(index) +
         (c == 1 ? ".pgm" : ".ppm");
}

// Tiles a planar [n,C,H,W] buffer into one image file.
void write_grid(const std::string& path, const std::vector<float>& planar,
                int n, int c, int h, int w, int cols) {
  std::vector<const float*> tiles;
  tiles.reserve(size_t(n));
  for (int i = 0; i < n; ++i)
    tiles.push_back(planar.data() + std::int64_t(i) * c * h * w);
  Montage m = make_montage(tiles, c, h, w, cols);
  write_pnm(path, m.c, m.h, m.w, m.data.data());
}

std::vector<float> upscale_nearest(const std::vector<float>& src, int c,
                                   int h, int w, int f) {
  int H = h * f, W = w * f;
  std::vector<float> out(size_t(c) * H * W);
  for (int cc = 0; cc < c; ++cc)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        out[size_t((cc * H + y) * W + x)] =
            src[size_t((cc * h + y / f) * w + x / f)];
  return out;
}

// Mean image of the likelihood read from a recorded growth frame (batch 1).
std::vector<float> frame_image(const VncaModel& model, const GrowthFrame& fr) {
  int cp = model.cfg.likelihood_channels();
  int h = fr.shape[2], w = fr.shape[3];
  std::vector<float> params(fr.state.begin(),
                            fr.state.begin() + std::int64_t(cp) * h * w);
  Tensor t = Tensor::from_data({1, cp, h, w}, std::move(params));
  return likelihood_mean(t, model.cfg.likelihood, model.cfg.n_mix).data();
}

Tensor image_tensor(const Dataset& ds, std::int64_t i) {
  return Tensor::from_data(
      {1, ds.c, ds.h, ds.w},
      std::vector<float>(ds.image(i), ds.image(i) + ds.image_size()));
}

// n distinct indices drawn without replacement.
std::vector<std::int64_t> pick_indices(std::int64_t n_total, int n, Rng& rng) {
  if (n_total < n) throw ContractError("dataset smaller than requested n");
  std::vector<std::int64_t> all(static_cast<size_t>(n_total));
  for (std::int64_t i = 0; i < n_total; ++i) all[size_t(i)] = i;
  for (int i = 0; i < n; ++i) {
    std::int64_t j = rng.uniform_int(i, n_total - 1);
    std::swap(all[size_t(i)], all[size_t(j)]);
  }
  all.resize(size_t(n));
  return all;
}

struct TrainArgs {
  ModelFlags mf;
  std::string data, labels, out = "vnca-out", resume;
  std::int64_t steps = 100000;
  int batch = 32;
  double beta = 1.0, lr = 1e-4, clip = 10.0;
  std::uint64_t seed = 0;
  bool pool = false;
  std::int64_t pool_size = 1024;
  std::int64_t ckpt_every = 1000;
  std::int64_t eval_every = 0;
};

int cmd_train(const TrainArgs& a) {
  ModelConfig mc = to_config(a.mf);
  TrainConfig tc;
  tc.batch = a.batch;
  tc.beta = float(a.beta);
  tc.clip = float(a.clip);
  tc.adam.lr = float(a.lr);
  tc.pool_capacity = a.pool_size;

  std::uint64_t seed = a.seed;
  std::unique_ptr<LoadedCheckpoint> resumed;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume))
      throw MissingDataError("no such checkpoint: " + a.resume);
    resumed = std::make_unique<LoadedCheckpoint>(load_checkpoint(a.resume));
    if (!resumed->has_opt)
      throw FormatError(a.resume + " has no optimizer state, cannot resume");
  }
  VncaModel model =
      resumed ? std::move(resumed->model) : VncaModel::create(mc, seed);
  if (resumed) {
    mc = model.cfg;
    seed = resumed->seed;  // streams must continue under the original seed
  }

  Dataset ds = load_data(a.data, a.labels, mc);

  KvList kv;
  kv.emplace_back("command", "train");
  kv.emplace_back("data", a.data);
  if (!a.labels.empty()) kv.emplace_back("labels", a.labels);
  config_kv(kv, mc);
  kv.emplace_back("steps", std::to_string(a.steps));
  kv.emplace_back("batch", std::to_string(tc.batch));
  kv.emplace_back("beta", fmt_num(tc.beta));
  kv.emplace_back("lr", fmt_num(tc.adam.lr));
  kv.emplace_back("clip", fmt_num(tc.clip));
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("pool", a.pool ? "1" : "0");
  kv.emplace_back("pool_size", std::to_string(tc.pool_capacity));
  kv.emplace_back("ckpt_every", std::to_string(a.ckpt_every));
  if (!a.resume.empty()) kv.emplace_back("resume", a.resume);
  kv.emplace_back("params", std::to_string(model.param_count()));
  kv.emplace_back("train_images", std::to_string(ds.count()));
  emit_config(a.out, kv);

  Trainer trainer(model, ds, tc, seed, a.pool);
  if (resumed) {
    restore_adam(trainer.opt(), *resumed, model.parameters());
    trainer.restore(std::int64_t(resumed->global_step),
                    resumed->rng_counter);
  }

  std::string metrics_path = a.out + "/metrics.txt";
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw FormatError("cannot write " + metrics_path);

  auto save = [&](std::int64_t step) {
    std::string path = a.out + "/ckpt-" + std::to_string(step) + ".vnca";
    save_checkpoint(path, model, &trainer.opt(), std::uint64_t(step),
                    trainer.rng_counter(), seed);
    Rng srng(seed, "sample/" + std::to_string(step));
    std::vector<float> grid = sample_prior(model, 16, srng, SampleMode::mean);
    write_grid(image_path(a.out, "samples", int(step), mc.img_c), grid, 16,
               mc.img_c, mc.img_h, mc.img_w, 4);
  };

  std::int64_t last_saved = -1;
  for (std::int64_t step = trainer.global_step() + 1; step <= a.steps;
       ++step) {
    StepMetrics m = trainer.step();
    std::string line = format_metrics(m);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    metrics << line << "\n";
    metrics.flush();
    if (a.ckpt_every > 0 && step % a.ckpt_every == 0) {
      save(step);
      last_saved = step;
    }
    if (a.eval_every > 0 && step % a.eval_every == 0) {
      Rng erng(seed, "eval/" + std::to_string(step));
      EvalReport rep =
          evaluate(model, ds, 8, erng, 8, std::min<std::int64_t>(64, ds.count()));
      std::printf("eval_step=%lld iwae_nats=%.6f iwae_bpd=%.6f\n",
                  static_cast<long long>(step), rep.nats, rep.bpd);
    }
  }
  if (last_saved != a.steps) save(a.steps);
  return 0;
}

struct CkptArgs {
  std::string ckpt, data, labels, out = "vnca-out";
  std::uint64_t seed = 0;
};

VncaModel load_model(const std::string& path) {
  if (!fs::exists(path)) throw MissingDataError("no such checkpoint: " + path);
  return load_checkpoint(path).model;
}

void ckpt_kv(KvList& kv, const char* command, const CkptArgs& a,
             const ModelConfig& mc) {
  kv.emplace_back("command", command);
  kv.emplace_back("ckpt", a.ckpt);
  if (!a.data.empty()) kv.emplace_back("data", a.data);
  if (!a.labels.empty()) kv.emplace_back("labels", a.labels);
  config_kv(kv, mc);
  kv.emplace_back("seed", std::to_string(a.seed));
}

int cmd_eval(const CkptArgs& a, int iw, std::int64_t limit, int chunk) {
  VncaModel model = load_model(a.ckpt);
  Dataset ds = load_data(a.data, a.labels, model.cfg);
  KvList kv;
  ckpt_kv(kv, "eval", a, model.cfg);
  kv.emplace_back("iw", std::to_string(iw));
  kv.emplace_back("limit", std::to_string(limit));
  emit_config(a.out, kv);

  Rng rng(a.seed, "eval");
  EvalReport rep = evaluate(model, ds, iw, rng, chunk, limit);
  std::printf("iwae_nats=%.6f iwae_bpd=%.6f n=%lld K=%d\n", rep.nats, rep.bpd,
              static_cast<long long>(rep.n), rep.k);

  std::string csv_path = a.out + "/eval.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw FormatError("cannot write " + csv_path);
  csv << "index,nats,bpd\n";
  char buf[64];
  for (size_t i = 0; i < rep.per_image_nats.size(); ++i) {
    double nats = rep.per_image_nats[i];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f", i, nats,
                  nats_to_bpd(nats, model.cfg.img_h, model.cfg.img_w,
                              model.cfg.img_c));
    csv << buf << "\n";
  }
  return 0;
}

int cmd_sample(const CkptArgs& a, int n, const std::string& mode, int cols) {
  VncaModel model = load_model(a.ckpt);
  KvList kv;
  ckpt_kv(kv, "sample", a, model.cfg);
  kv.emplace_back("n", std::to_string(n));
  kv.emplace_back("mode", mode);
  emit_config(a.out, kv);

  SampleMode sm;
  if (mode == "mean") {
    sm = SampleMode::mean;
  } else if (mode == "draw") {
    sm = SampleMode::draw;
  } else {
    throw ContractError("unknown sample mode '" + mode + "'");
  }
  Rng rng(a.seed, "sample");
  std::vector<float> grid = sample_prior(model, n, rng, sm);
  if (cols <= 0) cols = int(std::ceil(std::sqrt(double(n))));
  const auto& mc = model.cfg;
  write_grid(image_path(a.out, "sample", 0, mc.img_c), grid, n, mc.img_c,
             mc.img_h, mc.img_w, cols);
  return 0;
}

int cmd_recon(const CkptArgs& a, int n) {
  VncaModel model = load_model(a.ckpt);
  Dataset ds = load_data(a.data, a.labels, model.cfg);
  KvList kv;
  ckpt_kv(kv, "recon", a, model.cfg);
  kv.emplace_back("n", std::to_string(n));
  emit_config(a.out, kv);

  const auto& mc = model.cfg;
  NoGradGuard ng;
  Rng rng(a.seed, "sample");
  std::vector<std::int64_t> idx = pick_indices(ds.count(), n, rng);
  std::vector<float> tiles;
  for (std::int64_t i : idx) {
    const float* p = ds.image(i);
    tiles.insert(tiles.end(), p, p + ds.image_size());
  }
  for (std::int64_t i : idx) {
    auto rec = model.reconstruct(image_tensor(ds, i), rng);
    Tensor img = likelihood_mean(rec.params, mc.likelihood, mc.n_mix);
    tiles.insert(tiles.end(), img.data().begin(), img.data().end());
  }
  write_grid(image_path(a.out, "recon", 0, mc.img_c), tiles, 2 * n, mc.img_c,
             mc.img_h, mc.img_w, n);
  return 0;
}

int cmd_grow(const CkptArgs& a, int n, int steps, int cols) {
  VncaModel model = load_model(a.ckpt);
  KvList kv;
  ckpt_kv(kv, "grow", a, model.cfg);
  kv.emplace_back("n", std::to_string(n));
  kv.emplace_back("steps", std::to_string(steps));
  emit_config(a.out, kv);

  const auto& mc = model.cfg;
  Rng rng(a.seed, "sample");
  Tensor z = randn({n, mc.latent}, rng);
  if (cols <= 0)
    cols = mc.variant == Variant::doubling ? mc.steps_per_phase + 1 : 10;
  for (int i = 0; i < n; ++i) {
    Tensor zi = Tensor::from_data(
        {1, mc.latent},
        std::vector<float>(z.data().begin() + std::int64_t(i) * mc.latent,
                           z.data().begin() + std::int64_t(i + 1) * mc.latent));
    GrowthTrace trace = grow(model, zi, steps);
    std::vector<float> tiles;
    for (const GrowthFrame& fr : trace.frames) {
      std::vector<float> img = frame_image(model, fr);
      int f = mc.img_h / fr.shape[2];
      if (f > 1) img = upscale_nearest(img, mc.img_c, fr.shape[2],
                                       fr.shape[3], f);
      tiles.insert(tiles.end(), img.begin(), img.end());
    }
    write_grid(image_path(a.out, "grow", i, mc.img_c), tiles,
               int(trace.frames.size()), mc.img_c, mc.img_h, mc.img_w, cols);
  }
  return 0;
}

int cmd_damage(const CkptArgs& a, int n, bool during_growth, bool recovery,
               std::vector<int> t_list) {
  if (during_growth == recovery)
    throw ContractError("damage needs exactly one of --during-growth or "
                        "--recovery");
  VncaModel model = load_model(a.ckpt);
  const auto& mc = model.cfg;
  KvList kv;
  ckpt_kv(kv, "damage", a, mc);
  kv.emplace_back("n", std::to_string(n));
  kv.emplace_back("protocol", during_growth ? "during-growth" : "recovery");
  emit_config(a.out, kv);

  Rng rng(a.seed, "sample");
  if (during_growth) {
    Tensor z = randn({n, mc.latent}, rng);
    for (int i = 0; i < n; ++i) {
      Tensor zi = Tensor::from_data(
          {1, mc.latent},
          std::vector<float>(
              z.data().begin() + std::int64_t(i) * mc.latent,
              z.data().begin() + std::int64_t(i + 1) * mc.latent));
      DamageSweep sweep = damage_during_growth(model, zi, t_list);
      int count = int(sweep.t_list.size()) + 1;
      write_grid(image_path(a.out, "damage", i, mc.img_c), sweep.images,
                 count, mc.img_c, mc.img_h, mc.img_w, count);
    }
    return 0;
  }
  DamageRecoveryReport rep = damage_recovery(model, n, rng);
  std::vector<float> tiles = rep.original;
  tiles.insert(tiles.end(), rep.damaged.begin(), rep.damaged.end());
  tiles.insert(tiles.end(), rep.recovered.begin(), rep.recovered.end());
  write_grid(image_path(a.out, "damage", 0, mc.img_c), tiles, 3 * n, mc.img_c,
             mc.img_h, mc.img_w, n);
  double md = 0.0, mr = 0.0;
  for (int i = 0; i < n; ++i) {
    md += rep.mse_damaged[size_t(i)];
    mr += rep.mse_recovered[size_t(i)];
  }
  std::printf("recovered_better=%.4f mse_damaged=%.6f mse_recovered=%.6f\n",
              rep.fraction_recovered, md / n, mr / n);
  return 0;
}

int cmd_interp(const CkptArgs& a, int n, int steps) {
  VncaModel model = load_model(a.ckpt);
  Dataset ds = load_data(a.data, a.labels, model.cfg);
  KvList kv;
  ckpt_kv(kv, "interp", a, model.cfg);
  kv.emplace_back("n", std::to_string(n));
  kv.emplace_back("steps", std::to_string(steps));
  emit_config(a.out, kv);

  const auto& mc = model.cfg;
  Rng rng(a.seed, "sample");
  for (int i = 0; i < n; ++i) {
    std::int64_t ia = rng.uniform_int(0, ds.count() - 1);
    std::int64_t ib = rng.uniform_int(0, ds.count() - 1);
    std::vector<float> frames =
        interpolate(model, image_tensor(ds, ia), image_tensor(ds, ib), steps);
    write_grid(image_path(a.out, "interp", i, mc.img_c), frames, steps,
               mc.img_c, mc.img_h, mc.img_w, steps);
  }
  return 0;
}

int cmd_export_latents(const CkptArgs& a, std::int64_t rows) {
  VncaModel model = load_model(a.ckpt);
  Dataset ds = load_data(a.data, a.labels, model.cfg);
  KvList kv;
  ckpt_kv(kv, "export-latents", a, model.cfg);
  kv.emplace_back("rows", std::to_string(rows));
  emit_config(a.out, kv);

  std::string path = a.out + "/latents.csv";
  export_latents(model, ds, path, rows, a.seed);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational neural cellular automaton"};
  app.require_subcommand(1);
  int rc = 0;

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "fit a model");
  train->add_option("--data", ta.data, "IDX/.amat file, image dir, synth:<n>")
      ->required();
  train->add_option("--labels", ta.labels, "IDX label file");
  train->add_option("--out", ta.out, "output directory")
      ->capture_default_str();
  add_model_flags(train, ta.mf);
  train->add_option("--steps", ta.steps, "total training steps")
      ->capture_default_str();
  train->add_option("--batch", ta.batch, "batch size")->capture_default_str();
  train->add_option("--beta", ta.beta, "KL weight")->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")
      ->capture_default_str();
  train->add_option("--clip", ta.clip, "gradient norm ceiling")
      ->capture_default_str();
  train->add_option("--seed", ta.seed, "run seed")->capture_default_str();
  train->add_flag("--pool", ta.pool, "pool + damage training (nondoubling)");
  train->add_option("--pool-size", ta.pool_size, "replay pool capacity")
      ->capture_default_str();
  train->add_option("--ckpt-every", ta.ckpt_every,
                    "checkpoint cadence in steps (0: final only)")
      ->capture_default_str();
  train->add_option("--eval-every", ta.eval_every,
                    "quick bound estimate cadence (0: off)")
      ->capture_default_str();
  train->add_option("--resume", ta.resume, "checkpoint to continue from");
  train->callback([&] { rc = cmd_train(ta); });

  CkptArgs ea;
  int eval_iw = 128, eval_chunk = 16;
  std::int64_t eval_limit = -1;
  CLI::App* eval = app.add_subcommand("eval", "importance weighted bound");
  eval->add_option("--ckpt", ea.ckpt, "checkpoint path")->required();
  eval->add_option("--data", ea.data, "evaluation data")->required();
  eval->add_option("--labels", ea.labels, "IDX label file");
  eval->add_option("--out", ea.out, "output directory")->capture_default_str();
  eval->add_option("--iw", eval_iw, "importance samples per image")
      ->capture_default_str();
  eval->add_option("--limit", eval_limit, "evaluate first n images (-1: all)")
      ->capture_default_str();
  eval->add_option("--chunk", eval_chunk, "decode batch per image")
      ->capture_default_str();
  eval->add_option("--seed", ea.seed, "run seed")->capture_default_str();
  eval->callback([&] { rc = cmd_eval(ea, eval_iw, eval_limit, eval_chunk); });

  CkptArgs sa;
  int sample_n = 16, sample_cols = 0;
  std::string sample_mode = "mean";
  CLI::App* sample = app.add_subcommand("sample", "decode prior draws");
  sample->add_option("--ckpt", sa.ckpt, "checkpoint path")->required();
  sample->add_option("--out", sa.out, "output directory")
      ->capture_default_str();
  sample->add_option("--n", sample_n, "samples")->capture_default_str();
  sample->add_option("--mode", sample_mode, "mean | draw")
      ->capture_default_str();
  sample->add_option("--cols", sample_cols, "grid columns (0: square)")
      ->capture_default_str();
  sample->add_option("--seed", sa.seed, "run seed")->capture_default_str();
  sample->callback([&] { rc = cmd_sample(sa, sample_n, sample_mode,
                                         sample_cols); });

  CkptArgs ra;
  int recon_n = 8;
  CLI::App* recon = app.add_subcommand("recon", "reconstruct data images");
  recon->add_option("--ckpt", ra.ckpt, "checkpoint path")->required();
  recon->add_option("--data", ra.data, "data to reconstruct")->required();
  recon->add_option("--labels", ra.labels, "IDX label file");
  recon->add_option("--out", ra.out, "output directory")
      ->capture_default_str();
  recon->add_option("--n", recon_n, "images")->capture_default_str();
  recon->add_option("--seed", ra.seed, "run seed")->capture_default_str();
  recon->callback([&] { rc = cmd_recon(ra, recon_n); });

  CkptArgs ga;
  int grow_n = 1, grow_steps = -1, grow_cols = 0;
  CLI::App* grw = app.add_subcommand("grow", "growth sequence montage");
  grw->add_option("--ckpt", ga.ckpt, "checkpoint path")->required();
  grw->add_option("--out", ga.out, "output directory")->capture_default_str();
  grw->add_option("--n", grow_n, "traces")->capture_default_str();
  grw->add_option("--steps", grow_steps, "NCA steps (nondoubling, -1: t_max)")
      ->capture_default_str();
  grw->add_option("--cols", grow_cols, "grid columns (0: auto)")
      ->capture_default_str();
  grw->add_option("--seed", ga.seed, "run seed")->capture_default_str();
  grw->callback([&] { rc = cmd_grow(ga, grow_n, grow_steps, grow_cols); });

  CkptArgs da;
  int damage_n = 8;
  bool during_growth = false, recovery = false;
  std::vector<int> damage_t;
  CLI::App* damage = app.add_subcommand("damage", "damage protocols");
  damage->add_option("--ckpt", da.ckpt, "checkpoint path")->required();
  damage->add_option("--out", da.out, "output directory")
      ->capture_default_str();
  damage->add_option("--n", damage_n, "samples")->capture_default_str();
  damage->add_flag("--during-growth", during_growth,
                   "zero right half at each damage time (doubling)");
  damage->add_flag("--recovery", recovery,
                   "square damage on grown state (nondoubling)");
  damage->add_option("--t", damage_t,
                     "damage times (during-growth; default phase bounds)");
  damage->add_option("--seed", da.seed, "run seed")->capture_default_str();
  damage->callback([&] {
    rc = cmd_damage(da, damage_n, during_growth, recovery, damage_t);
  });

  CkptArgs ia;
  int interp_n = 4, interp_steps = 8;
  CLI::App* interp = app.add_subcommand("interp", "latent interpolation");
  interp->add_option("--ckpt", ia.ckpt, "checkpoint path")->required();
  interp->add_option("--data", ia.data, "endpoint images")->required();
  interp->add_option("--labels", ia.labels, "IDX label file");
  interp->add_option("--out", ia.out, "output directory")
      ->capture_default_str();
  interp->add_option("--n", interp_n, "pairs")->capture_default_str();
  interp->add_option("--steps", interp_steps, "frames per pair")
      ->capture_default_str();
  interp->add_option("--seed", ia.seed, "run seed")->capture_default_str();
  interp->callback([&] { rc = cmd_interp(ia, interp_n, interp_steps); });

  CkptArgs xa;
  std::int64_t export_rows = 5000;
  CLI::App* exp = app.add_subcommand("export-latents",
                                     "posterior means as CSV");
  exp->add_option("--ckpt", xa.ckpt, "checkpoint path")->required();
  exp->add_option("--data", xa.data, "images to encode")->required();
  exp->add_option("--labels", xa.labels, "IDX label file");
  exp->add_option("--out", xa.out, "output directory")->capture_default_str();
  exp->add_option("--rows", export_rows, "max rows")->capture_default_str();
  exp->add_option("--seed", xa.seed, "run seed")->capture_default_str();
  exp->callback([&] { rc = cmd_export_latents(xa, export_rows); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const MissingDataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
