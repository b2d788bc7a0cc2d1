#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsgan/applications.hpp"
#include "rsgan/dataset.hpp"
#include "rsgan/evaluation.hpp"
#include "rsgan/service.hpp"
#include "rsgan/trainer.hpp"

namespace rsgan {

namespace cli_detail {

struct Io {
  std::ostream& out;
  std::ostream& err;
};

inline InferenceModel load_model(const std::string& ckpt) {
  if (ckpt.empty()) throw ConfigError("no checkpoint: pass --ckpt or set RSGAN_CKPT");
  return InferenceModel::load(ckpt);
}

inline Image load_image(const std::string& path, const InferenceModel& m, bool strict, Io io) {
  Image im = read_png(path);
  const int s = m.resolution();
  if (height(im) == s && width(im) == s) return im;
  if (strict)
    throw ResolutionError(path + " is " + std::to_string(width(im)) + "x" + std::to_string(height(im)) +
                          ", model resolution is " + std::to_string(s));
  io.err << "warning: resized " << path << " from " << width(im) << "x" << height(im) << " to " << s << "x" << s
         << '\n';
  return resize_bilinear(im, s, s);
}

inline void write_text(const std::string& path, const std::string& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << s;
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  Io io{out, err};
  CLI::App app{"Region-separative face swapping, editing and evaluation", "rsgan"};
  app.require_subcommand(1);
  std::function<void()> action;

  auto ckpt_opt = [](CLI::App* sub, std::string& ckpt) {
    sub->add_option("--ckpt", ckpt, "model checkpoint")->envname("RSGAN_CKPT");
  };

  // ---- synth-dataset ----
  struct {
    std::string out;
    std::size_t train = 1000, test = 200;
    int resolution = 32;
    std::uint64_t seed = 0;
  } sd;
  auto* synth = app.add_subcommand("synth-dataset", "render the synthetic two-factor dataset");
  synth->add_option("--out", sd.out, "output directory")->required();
  synth->add_option("--train", sd.train, "training samples");
  synth->add_option("--test", sd.test, "held-out samples");
  synth->add_option("--resolution", sd.resolution, "image size S")->check(CLI::Range(16, 1024));
  synth->add_option("--seed", sd.seed, "sampling seed");
  synth->callback([&] {
    action = [&] {
      const auto m = write_synth_dataset(sd.out, sd.train, sd.test, sd.resolution, sd.seed);
      out << "wrote " << m.records.size() << " records to " << sd.out << "/manifest.json\n";
    };
  });

  // ---- prepare-dataset ----
  struct {
    std::string raw, out, attrs, landmarks_csv, landmark_cmd, masks_dir, segment_cmd;
    int resolution = 32;
    std::size_t train = 0, test = 0;
    unsigned threads = 1;
  } pd;
  auto* prep = app.add_subcommand("prepare-dataset", "crop and mask raw portraits into a training manifest");
  prep->add_option("--raw", pd.raw, "directory of raw PNG portraits")->required()->check(CLI::ExistingDirectory);
  prep->add_option("--out", pd.out, "output directory")->required();
  prep->add_option("--attributes", pd.attrs, "attribute CSV (id, names...)")->required()->check(CLI::ExistingFile);
  auto* lm_csv = prep->add_option("--landmarks-csv", pd.landmarks_csv, "68-point landmark CSV");
  auto* lm_cmd = prep->add_option("--landmark-cmd", pd.landmark_cmd, "landmark tool: cmd <in.png> <out.csv>");
  auto* mk_dir = prep->add_option("--masks-dir", pd.masks_dir, "directory of <id>.png background masks");
  auto* mk_cmd = prep->add_option("--segment-cmd", pd.segment_cmd, "segmentation tool: cmd <in.png> <out.png>");
  lm_csv->excludes(lm_cmd);
  mk_dir->excludes(mk_cmd);
  prep->add_option("--resolution", pd.resolution, "image size S")->check(CLI::Range(8, 1024));
  prep->add_option("--train", pd.train, "train split size (with --test)");
  prep->add_option("--test", pd.test, "test split size (with --train)");
  prep->add_option("--threads", pd.threads, "worker threads")->check(CLI::Range(1u, 256u));
  prep->callback([&] {
    if (pd.landmarks_csv.empty() == pd.landmark_cmd.empty())
      throw CLI::ValidationError("prepare-dataset", "give one of --landmarks-csv or --landmark-cmd");
    if (pd.masks_dir.empty() == pd.segment_cmd.empty())
      throw CLI::ValidationError("prepare-dataset", "give one of --masks-dir or --segment-cmd");
    action = [&] {
      std::unique_ptr<LandmarkProvider> lm;
      std::unique_ptr<SegmentationProvider> seg;
      if (!pd.landmarks_csv.empty()) lm = std::make_unique<FixtureLandmarkProvider>(pd.landmarks_csv);
      else lm = std::make_unique<ExternalLandmarkProvider>(pd.landmark_cmd);
      if (!pd.masks_dir.empty()) seg = std::make_unique<FixtureMaskProvider>(pd.masks_dir);
      else seg = std::make_unique<ExternalMaskProvider>(pd.segment_cmd);
      BuildOptions opt;
      opt.resolution = pd.resolution;
      if (pd.train || pd.test) opt.split = SplitCounts{pd.train, pd.test};
      opt.threads = pd.threads;
      opt.log = [&](const std::string& s) { err << "skip: " << s << '\n'; };
      const auto m = build_dataset(pd.raw, *lm, *seg, load_attribute_table(pd.attrs), pd.out, opt);
      out << "wrote " << m.records.size() << " records (" << m.skip_count << " skipped) to " << pd.out
          << "/manifest.json\n";
    };
  });

  // ---- train ----
  struct {
    std::string config, manifest, out, resume;
    std::int64_t steps = -1;
    bool dry_run = false;
  } tr;
  auto* train_cmd = app.add_subcommand("train", "train a model from a TOML config");
  train_cmd->add_option("--config", tr.config, "training config (TOML)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--manifest", tr.manifest, "override [data] manifest");
  train_cmd->add_option("--out", tr.out, "override [output] dir");
  train_cmd->add_option("--steps", tr.steps, "override max_steps")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--resume", tr.resume, "continue from a checkpoint");
  train_cmd->add_flag("--dry-run", tr.dry_run, "print the resolved config as TOML and exit");
  train_cmd->callback([&] {
    action = [&] {
      TrainConfig cfg = load_train_config(tr.config);
      if (!tr.manifest.empty()) cfg.manifest = tr.manifest;
      if (!tr.out.empty()) cfg.out_dir = tr.out;
      if (tr.steps >= 0) cfg.max_steps = tr.steps;
      cfg.validate();
      if (tr.dry_run) {
        out << to_toml(cfg);
        return;
      }
      if (cfg.manifest.empty()) throw ConfigError("no dataset: set [data] manifest or pass --manifest");
      const auto manifest = load_manifest(cfg.manifest);
      if (manifest.resolution != cfg.model.resolution)
        throw ConfigError("dataset resolution " + std::to_string(manifest.resolution) +
                          " does not match model resolution " + std::to_string(cfg.model.resolution));
      const auto data = load_samples(cfg.manifest, cfg.split);
      std::optional<TrainingState> st;
      if (!tr.resume.empty()) st.emplace(load_checkpoint(tr.resume));
      else st.emplace(cfg.model, manifest.attribute_names);
      TrainHooks hooks;
      hooks.progress = &err;
      const auto written = train(*st, data, cfg, cfg.out_dir, hooks);
      out << "trained to step " << st->step << "; last checkpoint " << written.back().string() << '\n';
    };
  });

  // ---- swap ----
  struct {
    std::string source, target, out, ckpt, mask;
    bool gd = false, strict = false;
  } sw;
  auto* swap_cmd = app.add_subcommand("swap", "put the source face into the target");
  swap_cmd->add_option("--source", sw.source, "face donor PNG")->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--target", sw.target, "hair/context PNG")->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--out", sw.out, "output PNG")->required();
  swap_cmd->add_flag("--gd", sw.gd, "gradient-domain compositing into the target");
  swap_cmd->add_option("--mask", sw.mask, "face mask PNG for --gd")->check(CLI::ExistingFile);
  swap_cmd->add_flag("--strict", sw.strict, "reject images not at model resolution");
  ckpt_opt(swap_cmd, sw.ckpt);
  swap_cmd->callback([&] {
    action = [&] {
      const auto m = load_model(sw.ckpt);
      const Image s = load_image(sw.source, m, sw.strict, io), t = load_image(sw.target, m, sw.strict, io);
      if (!sw.gd) return write_png(sw.out, swap(m, s, t));
      BinaryMask mask(m.resolution(), m.resolution());
      if (!sw.mask.empty()) mask = BinaryMask::threshold(luma01(load_image(sw.mask, m, sw.strict, io)));
      const auto r = swap_gd(m, s, t, mask);
      if (r.warning) err << "warning: " << *r.warning << '\n';
      write_png(sw.out, r.image);
    };
  });

  // ---- edit ----
  struct {
    std::string image, out, ckpt, region = "both";
    std::vector<std::string> sets;
    bool strict = false;
  } ed;
  auto* edit_cmd = app.add_subcommand("edit", "set attributes and re-render one region");
  edit_cmd->add_option("--image", ed.image, "input PNG")->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--set", ed.sets, "name=value, value in [0,1]; repeatable");
  edit_cmd->add_option("--region", ed.region, "face|hair|both")->check(CLI::IsMember({"face", "hair", "both"}));
  edit_cmd->add_option("--out", ed.out, "output PNG")->required();
  edit_cmd->add_flag("--strict", ed.strict, "reject images not at model resolution");
  ckpt_opt(edit_cmd, ed.ckpt);
  edit_cmd->callback([&] {
    AttributeDeltas deltas;
    for (const auto& s : ed.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected name=value, got " + s);
      try {
        std::size_t used = 0;
        const float v = std::stof(s.substr(eq + 1), &used);
        if (used != s.size() - eq - 1) throw std::invalid_argument(s);
        deltas[s.substr(0, eq)] = v;
      } catch (const std::logic_error&) {
        throw CLI::ValidationError("--set", "bad value in " + s);
      }
    }
    action = [&, deltas] {
      const auto m = load_model(ed.ckpt);
      const Image x = load_image(ed.image, m, ed.strict, io);
      write_png(ed.out, edit_attributes(m, x, deltas, parse_region(ed.region)).image);
    };
  });

  // ---- sample ----
  struct {
    std::string image, out, ckpt, region;
    std::uint64_t seed = 0;
    bool strict = false;
  } sa;
  auto* sample_cmd = app.add_subcommand("sample", "draw random latents for one region");
  sample_cmd->add_option("--image", sa.image, "input PNG")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--region", sa.region, "face|hair")->required()->check(CLI::IsMember({"face", "hair"}));
  sample_cmd->add_option("--seed", sa.seed, "sampling seed");
  sample_cmd->add_option("--out", sa.out, "output PNG")->required();
  sample_cmd->add_flag("--strict", sa.strict, "reject images not at model resolution");
  ckpt_opt(sample_cmd, sa.ckpt);
  sample_cmd->callback([&] {
    action = [&] {
      const auto m = load_model(sa.ckpt);
      write_png(sa.out, sample_parts(m, load_image(sa.image, m, sa.strict, io), parse_region(sa.region), sa.seed));
    };
  });

  // ---- interpolate ----
  struct {
    std::string image1, image2, out, ckpt, region = "both";
    double t = 0.5;
    bool strict = false;
  } ip;
  auto* interp_cmd = app.add_subcommand("interpolate", "blend the latents of two images");
  interp_cmd->add_option("--image1", ip.image1, "first PNG (t = 0)")->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--image2", ip.image2, "second PNG (t = 1)")->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--t", ip.t, "blend factor in [0,1]");
  interp_cmd->add_option("--region", ip.region, "face|hair|both")->check(CLI::IsMember({"face", "hair", "both"}));
  interp_cmd->add_option("--out", ip.out, "output PNG")->required();
  interp_cmd->add_flag("--strict", ip.strict, "reject images not at model resolution");
  ckpt_opt(interp_cmd, ip.ckpt);
  interp_cmd->callback([&] {
    action = [&] {
      const auto m = load_model(ip.ckpt);
      const Image a = load_image(ip.image1, m, ip.strict, io), b = load_image(ip.image2, m, ip.strict, io);
      write_png(ip.out, interpolate(m, a, b, ip.t, parse_region(ip.region)));
    };
  });

  // ---- evaluate ----
  struct {
    std::string manifest, split = "test", ckpt, json, csv, embed_cmd;
    std::int64_t pairs = 1000;
    std::uint64_t seed = 0;
    bool rgb = false;
  } ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "swap-twice consistency benchmark");
  eval_cmd->add_option("--manifest", ev.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", ev.split, "split to sample pairs from");
  eval_cmd->add_option("--pairs", ev.pairs, "number of random pairs");
  eval_cmd->add_option("--seed", ev.seed, "pair sampling seed");
  eval_cmd->add_option("--json", ev.json, "write the report as JSON");
  eval_cmd->add_option("--csv", ev.csv, "write the table as CSV");
  eval_cmd->add_option("--embed-cmd", ev.embed_cmd, "external identity embedder: cmd <in.png> <out.json>");
  eval_cmd->add_flag("--rgb", ev.rgb, "MS-SSIM on RGB channels instead of luma");
  ckpt_opt(eval_cmd, ev.ckpt);
  eval_cmd->callback([&] {
    action = [&] {
      if (ev.pairs <= 0) throw MetricError("--pairs must be positive");
      const auto m = load_model(ev.ckpt);
      std::vector<Image> images;
      for (auto& s : load_samples(ev.manifest, ev.split)) images.push_back(std::move(s.x));
      std::unique_ptr<IdentityEmbedder> emb;
      if (ev.embed_cmd.empty()) emb = std::make_unique<ToyColorEmbedder>();
      else emb = std::make_unique<ExternalEmbedder>(ev.embed_cmd);
      BenchmarkOptions opt;
      opt.n_pairs = ev.pairs;
      opt.seed = ev.seed;
      opt.msssim.luma = !ev.rgb;
      const auto rep = run_benchmark(images, {{"RSGAN", model_swapper(m), model_reconstructor(m)}}, *emb, opt);
      out << report_text(rep);
      if (!ev.json.empty()) write_text(ev.json, rep.to_json().dump(2) + "\n");
      if (!ev.csv.empty()) write_text(ev.csv, report_csv(rep));
    };
  });

  // ---- serve ----
  ServiceConfig sc;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  serve_cmd->add_option("--host", sc.host, "bind address");
  serve_cmd->add_option("--port", sc.port, "port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--max-image-bytes", sc.max_image_bytes, "per-image upload limit")
      ->check(CLI::PositiveNumber);
  serve_cmd->add_option("--timeout", sc.timeout_seconds, "read/write timeout in seconds")->check(CLI::PositiveNumber);
  ckpt_opt(serve_cmd, sc.checkpoint);
  serve_cmd->callback([&] {
    action = [&] {
      auto model = std::make_shared<const InferenceModel>(load_model(sc.checkpoint));
      Service svc(model, sc);
      const int port = svc.bind();
      err << "serving on " << sc.host << ':' << port << " (S=" << model->resolution() << ")" << std::endl;
      if (!svc.listen()) throw std::runtime_error("server stopped unexpectedly");
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    if (action) action();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace rsgan
