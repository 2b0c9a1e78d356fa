#include <cmath>
#include <filesystem>
#include <fstream>

#include "aanim/csvio.hpp"
#include "aanim/data.hpp"
#include "aanim/synth.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace aanim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("generate_synthetic: blink count follows the Poisson rate") {
  SyntheticSpec spec;
  spec.seed = 5;
  spec.duration = 60.0;
  spec.blink_rate = 0.35;
  const SyntheticClip clip = generate_synthetic(spec);
  const auto track = clip.anim.attribute_track(kBlinkAttr);
  const BlinkStats st = blink_stats(track, spec.fps);
  const double expect = 0.35 * 60.0;  // 21
  CHECK(std::fabs(st.count - expect) <= 3.0 * std::sqrt(expect));
}

TEST_CASE("generate_synthetic: zero sigma freezes the head pose") {
  SyntheticSpec spec;
  spec.seed = 6;
  spec.duration = 5.0;
  spec.pose_sigma = 0.0;
  const SyntheticClip clip = generate_synthetic(spec);
  for (const AnimVector& f : clip.anim.frames)
    for (int p = 0; p < kPoseCount; ++p) CHECK(f.pose(p) == clip.anim.frames[0].pose(p));
}

TEST_CASE("generate_synthetic: identical seeds give identical corpora") {
  SyntheticSpec spec;
  spec.seed = 7;
  spec.duration = 3.0;
  const SyntheticClip a = generate_synthetic(spec);
  const SyntheticClip b = generate_synthetic(spec);
  REQUIRE(a.audio.samples.size() == b.audio.samples.size());
  for (std::size_t i = 0; i < a.audio.samples.size(); ++i)
    CHECK(a.audio.samples[i] == b.audio.samples[i]);
  REQUIRE(a.anim.size() == b.anim.size());
  for (std::size_t t = 0; t < a.anim.size(); ++t)
    for (int at = 0; at < kAnimDims; ++at) CHECK(a.anim.frames[t][at] == b.anim.frames[t][at]);
}

TEST_CASE("generate_synthetic: mouth follows the audio envelope") {
  SyntheticSpec spec;
  spec.seed = 8;
  spec.duration = 30.0;
  const SyntheticClip clip = generate_synthetic(spec);
  // Correlate per-frame audio energy with the jaw attribute (index 8).
  const int frames = static_cast<int>(clip.anim.size());
  const int spf = kSampleRate / 25;
  std::vector<double> energy(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    double e = 0.0;
    for (int i = 0; i < spf; ++i) {
      const double s = clip.audio.samples[static_cast<std::size_t>(t * spf + i)];
      e += s * s;
    }
    energy[static_cast<std::size_t>(t)] = std::sqrt(e / spf);
  }
  const auto mouth = clip.anim.attribute_track(8);
  double me = 0, mm = 0;
  for (int t = 0; t < frames; ++t) {
    me += energy[static_cast<std::size_t>(t)];
    mm += mouth[static_cast<std::size_t>(t)];
  }
  me /= frames;
  mm /= frames;
  double cov = 0, ve = 0, vm = 0;
  for (int t = 0; t < frames; ++t) {
    const double de = energy[static_cast<std::size_t>(t)] - me;
    const double dm = mouth[static_cast<std::size_t>(t)] - mm;
    cov += de * dm;
    ve += de * de;
    vm += dm * dm;
  }
  CHECK(cov / std::sqrt(ve * vm) > 0.8);
}

TEST_CASE("animation csv: write-then-read is bit-identical") {
  SyntheticSpec spec;
  spec.seed = 9;
  spec.duration = 2.0;
  const SyntheticClip clip = generate_synthetic(spec);
  const fs::path dir = temp_dir("aanim_csv_test");
  const std::string path = (dir / "clip.csv").string();
  write_animation_csv(path, clip.anim);
  const LoadedAnim back = load_animation_csv(path, spec.fps);
  CHECK(back.dropped_rows == 0);
  REQUIRE(back.seq.size() == clip.anim.size());
  for (std::size_t t = 0; t < clip.anim.size(); ++t)
    for (int a = 0; a < kAnimDims; ++a) CHECK(back.seq.frames[t][a] == clip.anim.frames[t][a]);
  fs::remove_all(dir);
}

TEST_CASE("animation csv: well-formed two-row file loads two frames") {
  const fs::path dir = temp_dir("aanim_csv_2row");
  const std::string path = (dir / "two.csv").string();
  {
    std::ofstream os(path);
    os << "frame";
    for (const auto& c : anim_columns()) os << "," << c;
    os << "\n0";
    for (int a = 0; a < kAnimDims; ++a) os << "," << 0.1 * a;
    os << "\n1";
    for (int a = 0; a < kAnimDims; ++a) os << "," << 0.2 * a;
    os << "\n";
  }
  const LoadedAnim got = load_animation_csv(path);
  CHECK(got.seq.size() == 2);
  CHECK(got.dropped_rows == 0);
  CHECK(got.seq.frames[1][2] == doctest::Approx(0.4));
  fs::remove_all(dir);
}

TEST_CASE("animation csv: NaN rows are dropped and counted") {
  const fs::path dir = temp_dir("aanim_csv_nan");
  const std::string path = (dir / "nan.csv").string();
  {
    std::ofstream os(path);
    os << "frame";
    for (const auto& c : anim_columns()) os << "," << c;
    os << "\n0";
    for (int a = 0; a < kAnimDims; ++a) os << ",0.5";
    os << "\n1";
    for (int a = 0; a < kAnimDims; ++a) os << (a == 5 ? ",nan" : ",0.5");
    os << "\n";
  }
  const LoadedAnim got = load_animation_csv(path);
  CHECK(got.seq.size() == 1);
  CHECK(got.dropped_rows == 1);
  fs::remove_all(dir);
}

TEST_CASE("animation csv: missing columns are named in the error") {
  const fs::path dir = temp_dir("aanim_csv_missing");
  const std::string path = (dir / "missing.csv").string();
  {
    std::ofstream os(path);
    os << "frame,AU01_r,pose_Rx\n0,0.1,0.2\n";
  }
  try {
    load_animation_csv(path);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("AU02_r") != std::string::npos);
    CHECK(msg.find("pose_Tz") != std::string::npos);
    CHECK(msg.find("AU01_r") == std::string::npos);
  }
  CHECK_THROWS(load_animation_csv((dir / "absent.csv").string()));
  fs::remove_all(dir);
}

TEST_CASE("dataset: clip loading checks frame alignment") {
  SyntheticSpec spec;
  spec.seed = 10;
  spec.duration = 2.0;
  const SyntheticClip clip = generate_synthetic(spec);
  const DatasetClip ok = make_clip("c0", clip.audio, clip.anim, 9);
  CHECK(ok.features.size() == clip.anim.size());

  AnimSequence truncated = clip.anim;
  truncated.frames.pop_back();
  CHECK_THROWS(make_clip("c1", clip.audio, truncated, 9));
}

TEST_CASE("dataset: directory round trip") {
  const fs::path dir = temp_dir("aanim_dataset");
  SyntheticSpec spec;
  spec.duration = 2.0;
  for (int i = 0; i < 2; ++i) {
    spec.seed = 100 + static_cast<std::uint64_t>(i);
    const SyntheticClip clip = generate_synthetic(spec);
    const std::string stem = (dir / ("clip_" + std::to_string(i))).string();
    write_wav(stem + ".wav", clip.audio);
    write_animation_csv(stem + ".csv", clip.anim);
  }
  const auto clips = load_dataset(dir.string(), 25.0, 9);
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].id == "clip_0");
  CHECK(clips[0].anim.size() == 50);
  CHECK(clips[0].features.size() == 50);
  fs::remove_all(dir);
}

TEST_CASE("run_d_sweep: strict decrease and the uniform quantization-noise law") {
  CounterRng rng(11);
  std::vector<AnimVector> corpus;
  for (int i = 0; i < 4000; ++i) {
    AnimVector v;
    for (int a = 0; a < kAnimDims; ++a) v[a] = rng.next_double();  // uniform [0,1)
    corpus.push_back(v);
  }
  const auto rows = run_d_sweep(corpus, {10, 100, 250, 500, 750}, 0.0);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rmse_mean < rows[i - 1].rmse_mean);
  for (const auto& r : rows) CHECK(r.is_default == (r.d == 500));
  // Uniform data: RMSE per attribute ~ width / (D * sqrt(12)).
  for (const auto& r : rows) {
    const double expect = 1.0 / (r.d * std::sqrt(12.0));
    CHECK(r.rmse_mean == doctest::Approx(expect).epsilon(0.08));
  }
  std::ostringstream os;
  write_d_sweep_csv(os, rows);
  CHECK(os.str().find("500") != std::string::npos);
}

TEST_CASE("train_model: logs and reduces loss on a tiny corpus") {
  SyntheticSpec spec;
  spec.seed = 12;
  spec.duration = 4.0;
  const SyntheticClip clip = generate_synthetic(spec);
  const DatasetClip dc = make_clip("c", clip.audio, clip.anim, 3);
  const auto corpus = corpus_vectors({dc});
  const CodecSpec codec = fit_codec(corpus, 16, 0.05);
  ModelConfig cfg;
  cfg.d = 16;
  cfg.tau = 10;
  cfg.width = 32;
  cfg.heads = 2;
  cfg.head_dim = 16;
  cfg.layers = 1;
  cfg.audio_window = 3;
  MappingModel model(cfg, codec);
  const auto windows = windows_for_clips({dc}, codec, cfg.tau);
  TrainOptions opt;
  opt.steps = 60;
  opt.log_every = 20;
  int logged = 0;
  double first = -1.0;
  const double last = train_model(model, windows, opt, [&](int, double loss) {
    if (first < 0) first = loss;
    ++logged;
  });
  CHECK(logged >= 3);
  CHECK(last < first);
}
