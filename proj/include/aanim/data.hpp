#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aanim/audio.hpp"
#include "aanim/codec.hpp"
#include "aanim/csvio.hpp"
#include "aanim/metrics.hpp"
#include "aanim/model.hpp"
#include "aanim/synth.hpp"

namespace aanim {

// One ingested clip: audio, animation and the per-video-frame audio features.
struct DatasetClip {
  std::string id;
  AudioClip audio;
  AnimSequence anim;
  std::vector<AudioFeatureFrame> features;
};

// Align features to the animation track. Frame-count mismatches are an
// error, never a silent truncation.
inline DatasetClip make_clip(std::string id, AudioClip audio, AnimSequence anim,
                             int audio_window) {
  DatasetClip c;
  c.id = std::move(id);
  c.audio = std::move(audio);
  c.anim = std::move(anim);
  c.features = features_for_clip(c.audio, c.anim.fps, audio_window);
  if (c.features.size() != c.anim.size())
    throw std::runtime_error("clip '" + c.id + "': audio yields " +
                             std::to_string(c.features.size()) + " frames but animation has " +
                             std::to_string(c.anim.size()));
  return c;
}

// Loads every <stem>.wav + <stem>.csv pair under `dir`, sorted by stem.
inline std::vector<DatasetClip> load_dataset(const std::string& dir, double fps,
                                             int audio_window) {
  namespace fs = std::filesystem;
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".wav") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw std::runtime_error("load_dataset: no .wav clips in " + dir);
  std::vector<DatasetClip> clips;
  for (const std::string& stem : stems) {
    const std::string wav = (fs::path(dir) / (stem + ".wav")).string();
    const std::string csv = (fs::path(dir) / (stem + ".csv")).string();
    if (!fs::exists(csv)) throw std::runtime_error("load_dataset: missing " + csv);
    LoadedWav w = read_wav(wav);
    LoadedAnim a = load_animation_csv(csv, fps);
    clips.push_back(make_clip(stem, std::move(w.clip), std::move(a.seq), audio_window));
  }
  return clips;
}

inline std::vector<AnimVector> corpus_vectors(const std::vector<DatasetClip>& clips) {
  std::vector<AnimVector> out;
  for (const DatasetClip& c : clips)
    out.insert(out.end(), c.anim.frames.begin(), c.anim.frames.end());
  return out;
}

inline std::vector<TrainingBatch> windows_for_clips(const std::vector<DatasetClip>& clips,
                                                    const CodecSpec& codec, int tau,
                                                    int stride = 0) {
  std::vector<TrainingBatch> out;
  for (const DatasetClip& c : clips) {
    auto w = make_training_windows(c.anim, c.features, codec, tau, stride);
    for (auto& b : w) out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training driver: cycles deterministically shuffled windows for a fixed
// number of Adam steps.
// ---------------------------------------------------------------------------

struct TrainOptions {
  int steps = 2000;
  int stride = 0;  // 0 -> tau/2
  // Sequential per-window Adam at the op-level default (1e-3) lets each step
  // overwrite what the previous windows memorized when windows overlap; the
  // driver default backs off to 3e-4, which trains the same corpora without
  // the interference.
  double lr = 3e-4;
  double clip_norm = 1.0;
  std::uint64_t shuffle_seed = 0;
  int log_every = 100;
};

using TrainLogger = std::function<void(int step, double loss)>;

inline double train_model(MappingModel& model, const std::vector<TrainingBatch>& windows,
                          const TrainOptions& opt, const TrainLogger& log = nullptr) {
  require(!windows.empty(), "train_model: no training windows");
  AdamParams adam;
  adam.lr = opt.lr;
  CounterRng rng(opt.shuffle_seed);
  std::vector<int> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  double loss = 0.0;
  std::size_t cursor = order.size();
  for (int step = 0; step < opt.steps; ++step) {
    if (cursor == order.size()) {
      // Fisher-Yates with the deterministic counter stream.
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_below(i))]);
      cursor = 0;
    }
    loss = model.train_step(windows[static_cast<std::size_t>(order[cursor++])], adam,
                            opt.clip_norm);
    if (log && opt.log_every > 0 && (step % opt.log_every == 0 || step == opt.steps - 1))
      log(step, loss);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Category-count sweep: reconstruction error of the codec at each D.
// ---------------------------------------------------------------------------

struct DSweepRow {
  int d = 0;
  double rmse_mean = 0.0;
  double rmse_max = 0.0;
  bool is_default = false;  // D = 500
  double perplexity = 0.0;  // optional, 0 when not measured
};

inline std::vector<DSweepRow> run_d_sweep(const std::vector<AnimVector>& corpus,
                                          const std::vector<int>& d_values,
                                          double margin = 0.05) {
  require(!corpus.empty(), "run_d_sweep: empty corpus");
  std::vector<DSweepRow> rows;
  for (int d : d_values) {
    const CodecSpec spec = fit_codec(corpus, d, margin);
    const auto per = reconstruction_rmse(corpus, spec);
    DSweepRow r;
    r.d = d;
    r.is_default = d == 500;
    for (double v : per) {
      r.rmse_mean += v;
      r.rmse_max = std::max(r.rmse_max, v);
    }
    r.rmse_mean /= kAnimDims;
    rows.push_back(r);
  }
  return rows;
}

inline void write_d_sweep_csv(std::ostream& os, const std::vector<DSweepRow>& rows,
                              bool with_perplexity = false) {
  os << "d,rmse_mean,rmse_max,is_default";
  if (with_perplexity) os << ",perplexity";
  os << "\n";
  for (const DSweepRow& r : rows) {
    os << r.d << "," << format_double(r.rmse_mean) << "," << format_double(r.rmse_max) << ","
       << (r.is_default ? 1 : 0);
    if (with_perplexity) os << "," << format_double(r.perplexity);
    os << "\n";
  }
}

}  // namespace aanim
