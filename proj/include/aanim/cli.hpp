#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aanim/csvio.hpp"
#include "aanim/data.hpp"
#include "aanim/decoder.hpp"
#include "aanim/gradcheck.hpp"
#include "aanim/metrics.hpp"
#include "aanim/model.hpp"
#include "aanim/sampler.hpp"
#include "aanim/synth.hpp"

namespace aanim::cli {

struct SynthArgs {
  std::string out;
  int clips = 2;
  double duration = 60.0;
  double fps = 25.0;
  std::uint64_t seed = 0;
  double blink_rate = 0.35;
  double pose_sigma = 0.02;
};

struct IngestArgs {
  std::string audio;
  std::string anim;
  std::string out;       // optional normalized CSV re-export
  std::string dump_mel;  // optional mel record dump
  double fps = 25.0;
  int audio_window = 9;
};

struct FitCodecArgs {
  std::string data;
  std::string out;
  int d = 500;
  double margin = 0.05;
  double fps = 25.0;
};

struct TrainArgs {
  std::string data;
  std::string checkpoint;
  std::string mask = "tbm";
  int tau = 50;
  int d = 500;
  int steps = 2000;
  std::uint64_t seed = 0;
  int width = 128;
  int heads = 4;
  int head_dim = 32;
  int layers = 4;
  double lr = 3e-4;
  int stride = 0;
  std::string slope_scheme = "geometric";
  std::string pos_enc = "auto";
  bool bias_after_scale = false;
  double margin = 0.05;
  int audio_window = 9;
  double fps = 25.0;
  double clip_norm = 1.0;
  int log_every = 100;
};

struct GenerateArgs {
  std::string checkpoint;
  std::string audio;
  std::string out;
  int k = 10;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int length = 0;
  double fps = 25.0;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;  // optional CSV row
  int seeds = 5;
  int k = 10;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  double fps = 25.0;
};

struct DSweepArgs {
  std::string data;
  std::string out;
  std::string d_values = "10,100,250,500,750";
  double margin = 0.05;
  double fps = 25.0;
  int train_steps = 0;  // > 0: also train a small model per D and report perplexity
};

struct GradCheckArgs {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  double h = 1e-5;
};

struct CliArgs {
  SynthArgs synth;
  IngestArgs ingest;
  FitCodecArgs fit_codec;
  TrainArgs train;
  GenerateArgs generate;
  EvalArgs eval;
  DSweepArgs d_sweep;
  GradCheckArgs grad_check;
  std::string config;  // flat key=value file, expanded before parsing
};

// ---------------------------------------------------------------------------
// App construction (separate from execution so tests can parse in-process).
// Every subcommand accepts --config FILE with flat key=value lines mirroring
// the flag names; explicit flags win over config values, config values win
// over built-in defaults. The expansion happens in expand_config() before
// parsing: a key from the file is appended as --key=value only when the flag
// was not given on the command line.
// ---------------------------------------------------------------------------

inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;
  std::ifstream is(config_path);
  if (!is) throw std::runtime_error("cannot open config file " + config_path);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty()) continue;
    const std::string flag = "--" + key;
    bool given = false;
    for (const std::string& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

inline std::unique_ptr<CLI::App> make_app(CliArgs& a) {
  auto app = std::make_unique<CLI::App>("audio-driven facial animation toolkit");
  app->require_subcommand(1);

  CLI::App* synth = app->add_subcommand("synth", "emit a synthetic audio+animation corpus");
  synth->add_option("--config", a.config, "flat key=value config file");
  synth->add_option("--out", a.synth.out, "output directory")->required();
  synth->add_option("--clips", a.synth.clips, "number of clips");
  synth->add_option("--duration", a.synth.duration, "seconds per clip");
  synth->add_option("--fps", a.synth.fps, "video frame rate");
  synth->add_option("--seed", a.synth.seed, "corpus seed");
  synth->add_option("--blink-rate", a.synth.blink_rate, "blinks per second");
  synth->add_option("--pose-sigma", a.synth.pose_sigma, "head-pose random-walk sigma");

  CLI::App* ingest = app->add_subcommand("ingest", "validate/convert an external clip");
  ingest->add_option("--config", a.config, "flat key=value config file");
  ingest->add_option("--audio", a.ingest.audio, "input WAV (16-bit PCM mono)")->required();
  ingest->add_option("--anim", a.ingest.anim, "animation CSV")->required();
  ingest->add_option("--out", a.ingest.out, "re-export normalized CSV here");
  ingest->add_option("--dump-mel", a.ingest.dump_mel, "write line-delimited mel records here");
  ingest->add_option("--fps", a.ingest.fps, "video frame rate");
  ingest->add_option("--audio-window", a.ingest.audio_window, "mel steps per frame (odd)");

  CLI::App* fitc = app->add_subcommand("fit-codec", "fit the quantizer on a corpus");
  fitc->add_option("--config", a.config, "flat key=value config file");
  fitc->add_option("--data", a.fit_codec.data, "directory of animation CSVs")->required();
  fitc->add_option("--out", a.fit_codec.out, "codec record file")->required();
  fitc->add_option("--d", a.fit_codec.d, "categories per attribute");
  fitc->add_option("--margin", a.fit_codec.margin, "range margin fraction");
  fitc->add_option("--fps", a.fit_codec.fps, "video frame rate");

  CLI::App* train = app->add_subcommand("train", "train the mapping network");
  train->add_option("--config", a.config, "flat key=value config file");
  train->add_option("--data", a.train.data, "corpus directory (wav+csv pairs)")->required();
  train->add_option("--checkpoint", a.train.checkpoint, "checkpoint output path")->required();
  train->add_option("--mask", a.train.mask, "tbm|vanilla")
      ->check(CLI::IsMember({"tbm", "vanilla"}));
  train->add_option("--tau", a.train.tau, "context window length");
  train->add_option("--d", a.train.d, "categories per attribute");
  train->add_option("--steps", a.train.steps, "Adam steps");
  train->add_option("--seed", a.train.seed, "init/shuffle seed");
  train->add_option("--width", a.train.width, "model width");
  train->add_option("--heads", a.train.heads, "attention heads");
  train->add_option("--head-dim", a.train.head_dim, "per-head width");
  train->add_option("--layers", a.train.layers, "transformer layers");
  train->add_option("--lr", a.train.lr, "Adam learning rate");
  train->add_option("--stride", a.train.stride, "window stride (0 = tau/2)");
  train->add_option("--slope-scheme", a.train.slope_scheme, "geometric|fixed:<v>");
  train->add_option("--pos-enc", a.train.pos_enc, "auto|none|sinusoidal")
      ->check(CLI::IsMember({"auto", "none", "sinusoidal"}));
  train->add_flag("--bias-after-scale", a.train.bias_after_scale,
                  "add the mask after dividing by sqrt(head_dim)");
  train->add_option("--margin", a.train.margin, "codec range margin");
  train->add_option("--audio-window", a.train.audio_window, "mel steps per frame (odd)");
  train->add_option("--fps", a.train.fps, "video frame rate");
  train->add_option("--clip-norm", a.train.clip_norm, "global gradient-norm clip (0 = off)");
  train->add_option("--log-every", a.train.log_every, "loss log interval");

  CLI::App* gen = app->add_subcommand("generate", "sample an animation sequence from audio");
  gen->add_option("--config", a.config, "flat key=value config file");
  gen->add_option("--checkpoint", a.generate.checkpoint, "trained checkpoint")->required();
  gen->add_option("--audio", a.generate.audio, "driving WAV")->required();
  gen->add_option("--out", a.generate.out, "output CSV")->required();
  gen->add_option("--k", a.generate.k, "top-k cutoff");
  gen->add_option("--temperature", a.generate.temperature, "sampling temperature");
  gen->add_option("--seed", a.generate.seed, "sampling seed");
  gen->add_option("--length", a.generate.length, "frames to generate (0 = audio length)");
  gen->add_option("--fps", a.generate.fps, "video frame rate");

  CLI::App* ev = app->add_subcommand("eval", "evaluate a checkpoint on held-out data");
  ev->add_option("--config", a.config, "flat key=value config file");
  ev->add_option("--checkpoint", a.eval.checkpoint, "trained checkpoint")->required();
  ev->add_option("--data", a.eval.data, "held-out corpus directory")->required();
  ev->add_option("--out", a.eval.out, "append a CSV metric row here");
  ev->add_option("--seeds", a.eval.seeds, "samples for diversity metrics");
  ev->add_option("--k", a.eval.k, "top-k cutoff");
  ev->add_option("--temperature", a.eval.temperature, "sampling temperature");
  ev->add_option("--seed", a.eval.seed, "base sampling seed");
  ev->add_option("--fps", a.eval.fps, "video frame rate");

  CLI::App* sweep = app->add_subcommand("d-sweep", "codec reconstruction error across D values");
  sweep->add_option("--config", a.config, "flat key=value config file");
  sweep->add_option("--data", a.d_sweep.data, "directory of animation CSVs")->required();
  sweep->add_option("--out", a.d_sweep.out, "output CSV (default stdout)");
  sweep->add_option("--d-values", a.d_sweep.d_values, "comma-separated category counts");
  sweep->add_option("--margin", a.d_sweep.margin, "codec range margin");
  sweep->add_option("--fps", a.d_sweep.fps, "video frame rate");
  sweep->add_option("--train-steps", a.d_sweep.train_steps,
                    "also train a small model per D and report held-out perplexity (0 = off)");

  CLI::App* gc = app->add_subcommand("grad-check", "finite-difference gradient audit");
  gc->add_option("--config", a.config, "flat key=value config file");
  gc->add_option("--seed", a.grad_check.seed, "probe seed");
  gc->add_option("--tol", a.grad_check.tol, "relative tolerance");
  gc->add_option("--fd-h", a.grad_check.h, "finite-difference step");

  return app;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

inline std::vector<AnimVector> load_csv_corpus(const std::string& dir, double fps) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no animation CSVs in " + dir);
  std::vector<AnimVector> corpus;
  for (const std::string& f : files) {
    const LoadedAnim a = load_animation_csv(f, fps);
    corpus.insert(corpus.end(), a.seq.frames.begin(), a.seq.frames.end());
  }
  return corpus;
}

inline int run_synth(const SynthArgs& a, std::ostream& out) {
  std::filesystem::create_directories(a.out);
  for (int i = 0; i < a.clips; ++i) {
    SyntheticSpec spec;
    spec.seed = CounterRng(a.seed).split(static_cast<std::uint64_t>(i)).next_u64();
    spec.duration = a.duration;
    spec.fps = a.fps;
    spec.blink_rate = a.blink_rate;
    spec.pose_sigma = a.pose_sigma;
    const SyntheticClip clip = generate_synthetic(spec);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "clip_%03d", i);
    const std::string base = (std::filesystem::path(a.out) / stem).string();
    write_wav(base + ".wav", clip.audio);
    write_animation_csv(base + ".csv", clip.anim);
    out << stem << " frames=" << clip.anim.size() << " samples=" << clip.audio.samples.size()
        << "\n";
  }
  return 0;
}

inline int run_ingest(const IngestArgs& a, std::ostream& out) {
  const LoadedWav wav = read_wav(a.audio);
  if (wav.resampled)
    out << "warning: resampled " << wav.original_rate << " Hz -> " << kSampleRate
        << " Hz by linear interpolation\n";
  const LoadedAnim anim = load_animation_csv(a.anim, a.fps);
  if (anim.dropped_rows > 0)
    out << "warning: dropped " << anim.dropped_rows << " non-finite rows\n";
  const DatasetClip clip = make_clip("ingest", wav.clip, anim.seq, a.audio_window);
  out << "ok frames=" << clip.anim.size() << " duration=" << format_double(clip.audio.duration())
      << "s\n";
  if (!a.out.empty()) write_animation_csv(a.out, clip.anim);
  if (!a.dump_mel.empty()) {
    std::ofstream os(a.dump_mel);
    write_mel_records(os, mel_spectrogram(clip.audio));
  }
  return 0;
}

inline int run_fit_codec(const FitCodecArgs& a, std::ostream& out) {
  const auto corpus = load_csv_corpus(a.data, a.fps);
  const CodecSpec spec = fit_codec(corpus, a.d, a.margin);
  std::ofstream os(a.out);
  write_codec(os, spec);
  out << "fitted codec d=" << a.d << " frames=" << corpus.size()
      << " rmse=" << format_double(mean_reconstruction_rmse(corpus, spec)) << "\n";
  return 0;
}

inline std::vector<double> resolve_slopes(const std::string& scheme, int heads) {
  if (scheme == "geometric") return {};
  if (scheme.rfind("fixed:", 0) == 0) {
    const double v = std::stod(scheme.substr(6));
    require(v >= 0.0, "fixed slope must be non-negative");
    return std::vector<double>(static_cast<std::size_t>(heads), v);
  }
  throw std::runtime_error("unknown slope scheme '" + scheme + "'");
}

inline ModelConfig config_from_train_args(const TrainArgs& a) {
  ModelConfig cfg;
  cfg.d = a.d;
  cfg.tau = a.tau;
  cfg.width = a.width;
  cfg.heads = a.heads;
  cfg.head_dim = a.head_dim;
  cfg.layers = a.layers;
  cfg.mask = mask_kind_from_string(a.mask);
  cfg.slopes = resolve_slopes(a.slope_scheme, a.heads);
  // Fixed slopes are given post-scaling-effective, like the geometric
  // schedule; convert to the stored value under the literal convention.
  if (!cfg.slopes.empty() && !a.bias_after_scale)
    for (double& s : cfg.slopes) s *= std::sqrt(static_cast<double>(a.head_dim));
  if (a.pos_enc == "auto")
    cfg.pos_enc = cfg.mask == MaskKind::kTemporallyBiased ? PosEnc::kNone : PosEnc::kSinusoidal;
  else
    cfg.pos_enc = pos_enc_from_string(a.pos_enc);
  cfg.bias_after_scale = a.bias_after_scale;
  cfg.audio_window = a.audio_window;
  cfg.init_seed = a.seed;
  return cfg;
}

inline int run_train(const TrainArgs& a, std::ostream& out) {
  const auto clips = load_dataset(a.data, a.fps, a.audio_window);
  const CodecSpec codec = fit_codec(corpus_vectors(clips), a.d, a.margin);
  MappingModel model(config_from_train_args(a), codec);
  const auto windows = windows_for_clips(clips, codec, a.tau, a.stride);
  TrainOptions opt;
  opt.steps = a.steps;
  opt.stride = a.stride;
  opt.lr = a.lr;
  opt.clip_norm = a.clip_norm;
  opt.shuffle_seed = a.seed;
  opt.log_every = a.log_every;
  out << "step,loss\n";
  train_model(model, windows, opt,
              [&](int step, double loss) { out << step << "," << format_double(loss) << "\n"; });
  save_checkpoint(model, a.checkpoint);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(model.parameter_hash()));
  out << "saved " << a.checkpoint << " hash=" << hash << "\n";
  return 0;
}

inline int run_generate(const GenerateArgs& a, std::ostream& out) {
  const MappingModel model = load_checkpoint(a.checkpoint);
  const LoadedWav wav = read_wav(a.audio);
  if (wav.resampled)
    out << "warning: resampled " << wav.original_rate << " Hz -> " << kSampleRate << " Hz\n";
  const auto audio = features_for_clip(wav.clip, a.fps, model.config().audio_window);
  SamplerConfig sc;
  sc.k = a.k;
  sc.temperature = a.temperature;
  sc.seed = a.seed;
  sc.length = a.length;
  const GenerationResult gen = generate_sequence(model, audio, sc, a.fps);
  write_generation_csv(a.out, gen, sc, model.parameter_hash());
  out << "generated frames=" << gen.anim.size() << " -> " << a.out << "\n";
  return 0;
}

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  const MappingModel model = load_checkpoint(a.checkpoint);
  const auto clips = load_dataset(a.data, a.fps, model.config().audio_window);
  // Non-overlapping windows for the held-out likelihood.
  const auto windows = windows_for_clips(clips, model.codec(), model.config().tau,
                                         model.config().tau);
  MetricReport report;
  report.perplexity = heldout_perplexity(model, windows);

  std::vector<AnimSequence> samples;
  std::vector<std::vector<AnimCode>> sample_codes;
  double smooth_acc = 0.0, ebr_acc = 0.0;
  int ebr_live = 0;
  bool any_static = false;
  for (int s = 0; s < a.seeds; ++s) {
    SamplerConfig sc;
    sc.k = a.k;
    sc.temperature = a.temperature;
    sc.seed = a.seed + static_cast<std::uint64_t>(s);
    GenerationResult g = generate_sequence(model, clips[0].features, sc, a.fps);
    smooth_acc += mean_smoothness(g.anim);
    const BlinkStats bs = blink_stats(g.anim.attribute_track(kBlinkAttr), a.fps);
    if (bs.static_track) {
      any_static = true;
    } else {
      ebr_acc += bs.rate;
      ++ebr_live;
    }
    samples.push_back(std::move(g.anim));
    sample_codes.push_back(std::move(g.codes));
  }
  report.smoothness = smooth_acc / a.seeds;
  report.ebr = ebr_live > 0 ? ebr_acc / ebr_live : 0.0;
  report.ebr_static = any_static && ebr_live == 0;
  report.diversity = a.seeds >= 2 ? diversity(samples) : 0.0;
  report.write_text(out);
  out << "code_disagreement " << format_double(a.seeds >= 2 ? code_disagreement(sample_codes) : 0.0)
      << "\n";
  if (!a.out.empty()) {
    const bool fresh = !std::filesystem::exists(a.out);
    std::ofstream os(a.out, std::ios::app);
    if (fresh) MetricReport::write_csv_header(os);
    report.write_csv_row(os);
  }
  return 0;
}

inline int run_d_sweep(const DSweepArgs& a, std::ostream& out) {
  std::vector<int> ds;
  std::stringstream ss(a.d_values);
  std::string tok;
  while (std::getline(ss, tok, ',')) ds.push_back(std::stoi(tok));

  std::vector<DSweepRow> rows;
  if (a.train_steps > 0) {
    // Perplexity needs audio: load full clips and hold the last one out.
    const auto clips = load_dataset(a.data, a.fps, 9);
    require(clips.size() >= 2, "d-sweep --train-steps needs at least two clips");
    const std::vector<DatasetClip> train(clips.begin(), clips.end() - 1);
    const std::vector<DatasetClip> held(clips.end() - 1, clips.end());
    rows = run_d_sweep(corpus_vectors(train), ds, a.margin);
    for (DSweepRow& r : rows) {
      const CodecSpec codec = fit_codec(corpus_vectors(train), r.d, a.margin);
      ModelConfig cfg;
      cfg.d = r.d;
      cfg.tau = 25;
      cfg.width = 32;
      cfg.heads = 2;
      cfg.head_dim = 16;
      cfg.layers = 1;
      cfg.audio_window = 9;
      MappingModel model(cfg, codec);
      TrainOptions opt;
      opt.steps = a.train_steps;
      opt.log_every = 0;
      train_model(model, windows_for_clips(train, codec, cfg.tau), opt);
      r.perplexity = heldout_perplexity(model, windows_for_clips(held, codec, cfg.tau, cfg.tau));
    }
  } else {
    rows = run_d_sweep(load_csv_corpus(a.data, a.fps), ds, a.margin);
  }
  if (a.out.empty()) {
    write_d_sweep_csv(out, rows, a.train_steps > 0);
  } else {
    std::ofstream os(a.out);
    write_d_sweep_csv(os, rows, a.train_steps > 0);
    out << "wrote " << a.out << "\n";
  }
  return 0;
}

inline int run_grad_check(const GradCheckArgs& a, std::ostream& out) {
  const auto reports = grad_check_suite(a.seed, a.h, a.tol);
  bool all_pass = true;
  for (const auto& r : reports) {
    out << (r.report.pass ? "pass" : "FAIL") << " " << r.name
        << " max_rel_err=" << format_double(r.report.max_rel_err)
        << " coords=" << r.report.coords_checked << "\n";
    all_pass = all_pass && r.report.pass;
  }
  out << (all_pass ? "all gradients verified" : "gradient check FAILED") << "\n";
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int dispatch(const CLI::App& app, const CliArgs& a, std::ostream& out) {
  if (app.got_subcommand("synth")) return run_synth(a.synth, out);
  if (app.got_subcommand("ingest")) return run_ingest(a.ingest, out);
  if (app.got_subcommand("fit-codec")) return run_fit_codec(a.fit_codec, out);
  if (app.got_subcommand("train")) return run_train(a.train, out);
  if (app.got_subcommand("generate")) return run_generate(a.generate, out);
  if (app.got_subcommand("eval")) return run_eval(a.eval, out);
  if (app.got_subcommand("d-sweep")) return run_d_sweep(a.d_sweep, out);
  if (app.got_subcommand("grad-check")) return run_grad_check(a.grad_check, out);
  return 1;
}

inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CliArgs cli_args;
  auto app = make_app(cli_args);
  try {
    args = expand_config(std::move(args));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<const char*> argv;
  argv.push_back("aanim");
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app->exit(e, out, err);
  }
  try {
    return dispatch(*app, cli_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aanim::cli
