#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aanim/attention.hpp"
#include "aanim/audio.hpp"
#include "aanim/autodiff.hpp"
#include "aanim/codec.hpp"
#include "aanim/rng.hpp"

namespace aanim {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

enum class PosEnc { kNone, kSinusoidal };

inline std::string to_string(PosEnc p) { return p == PosEnc::kNone ? "none" : "sinusoidal"; }

inline PosEnc pos_enc_from_string(const std::string& s) {
  if (s == "none") return PosEnc::kNone;
  if (s == "sinusoidal") return PosEnc::kSinusoidal;
  throw std::invalid_argument("unknown positional encoding '" + s + "'");
}

struct ModelConfig {
  int d = 500;        // categories per attribute
  int tau = 50;       // maximum context window (frames)
  int width = 128;    // transformer width
  int heads = 4;
  int head_dim = 32;  // width == heads * head_dim
  int layers = 4;
  MaskKind mask = MaskKind::kTemporallyBiased;
  std::vector<double> slopes;  // per-head; empty -> geometric schedule
  PosEnc pos_enc = PosEnc::kNone;
  bool bias_after_scale = false;  // default adds the mask before / sqrt(head_dim)
  int audio_window = 9;           // mel steps per frame (odd)
  int mel_bands = kMelBands;
  std::uint64_t init_seed = 0;

  void validate() const {
    require(d >= 1 && tau >= 1 && width >= 1 && heads >= 1 && layers >= 1, "config: bad sizes");
    require(width == heads * head_dim, "config: width must equal heads * head_dim");
    require(audio_window >= 1 && audio_window % 2 == 1, "config: audio window must be odd");
  }
};

// One teacher-forcing window: codes[i] is the input token (previous frame's
// code, or the start-of-sequence code), audio[i] and targets[i] belong to the
// frame being predicted at position i.
struct TrainingBatch {
  std::vector<AudioFeatureFrame> audio;
  std::vector<AnimCode> codes;
  std::vector<AnimCode> targets;
  bool sos_first = false;  // position 0 uses the reserved start code
};

// ---------------------------------------------------------------------------
// MappingModel: audio + previous-code embeddings into a stack of masked
// attention blocks, ending in 23 independent D-way classification heads
// (stored as one [width x 23*D] projection).
// ---------------------------------------------------------------------------

class MappingModel {
 public:
  MappingModel(ModelConfig cfg, CodecSpec codec) : cfg_(std::move(cfg)), codec_(std::move(codec)) {
    cfg_.validate();
    require(cfg_.d == codec_.d(), "model: config D must match codec D");
    if (cfg_.mask == MaskKind::kTemporallyBiased && cfg_.slopes.empty()) {
      // Slopes are specified post-scaling-effective: under the literal
      // convention the whole mask gets divided by sqrt(head_dim), so the
      // stored slope carries that factor to keep the effective per-distance
      // penalty at the geometric schedule.
      cfg_.slopes = geometric_slopes(cfg_.heads);
      if (!cfg_.bias_after_scale)
        for (double& s : cfg_.slopes) s *= std::sqrt(static_cast<double>(cfg_.head_dim));
    }
    if (cfg_.mask == MaskKind::kTemporallyBiased)
      require(static_cast<int>(cfg_.slopes.size()) == cfg_.heads,
              "model: need one slope per head");
    allocate();
    init_weights();
    build_refs();
  }

  // refs_ points into member storage and must be rebuilt whenever the object
  // moves.
  MappingModel(const MappingModel& o)
      : cfg_(o.cfg_), codec_(o.codec_), audio_w_(o.audio_w_), audio_b_(o.audio_b_),
        audio_ln_g_(o.audio_ln_g_), audio_ln_b_(o.audio_ln_b_), anim_embed_(o.anim_embed_),
        layers_(o.layers_), head_w_(o.head_w_), head_b_(o.head_b_), adam_(o.adam_) {
    build_refs();
  }
  MappingModel(MappingModel&& o) noexcept
      : cfg_(std::move(o.cfg_)), codec_(std::move(o.codec_)), audio_w_(std::move(o.audio_w_)),
        audio_b_(std::move(o.audio_b_)), audio_ln_g_(std::move(o.audio_ln_g_)),
        audio_ln_b_(std::move(o.audio_ln_b_)), anim_embed_(std::move(o.anim_embed_)),
        layers_(std::move(o.layers_)), head_w_(std::move(o.head_w_)),
        head_b_(std::move(o.head_b_)), adam_(std::move(o.adam_)) {
    build_refs();
  }
  MappingModel& operator=(const MappingModel& o) {
    if (this != &o) *this = MappingModel(o);
    return *this;
  }
  MappingModel& operator=(MappingModel&& o) noexcept {
    cfg_ = std::move(o.cfg_);
    codec_ = std::move(o.codec_);
    audio_w_ = std::move(o.audio_w_);
    audio_b_ = std::move(o.audio_b_);
    audio_ln_g_ = std::move(o.audio_ln_g_);
    audio_ln_b_ = std::move(o.audio_ln_b_);
    anim_embed_ = std::move(o.anim_embed_);
    layers_ = std::move(o.layers_);
    head_w_ = std::move(o.head_w_);
    head_b_ = std::move(o.head_b_);
    adam_ = std::move(o.adam_);
    build_refs();
    return *this;
  }

  const ModelConfig& config() const { return cfg_; }
  const CodecSpec& codec() const { return codec_; }
  int attr_count() const { return kAnimDims; }

  struct ParamRef {
    std::string name;
    Tensor* tensor;
    AdamState* adam;
  };
  const std::vector<ParamRef>& params() const { return refs_; }
  std::vector<ParamRef>& params() { return refs_; }

  // --- tape-bound views ----------------------------------------------------

  struct Bound {
    std::vector<Value> flat;  // aligned with params()
    Value audio_w, audio_b, audio_ln_g, audio_ln_b;
    std::vector<Value> anim_embed;
    std::vector<AttentionBlockValues> layers;
    Value head_w, head_b;
  };

  Bound bind(Tape& tape) const {
    Bound b;
    b.audio_w = tape.param(audio_w_);
    b.audio_b = tape.param(audio_b_);
    b.audio_ln_g = tape.param(audio_ln_g_);
    b.audio_ln_b = tape.param(audio_ln_b_);
    b.flat.push_back(b.audio_w);
    b.flat.push_back(b.audio_b);
    b.flat.push_back(b.audio_ln_g);
    b.flat.push_back(b.audio_ln_b);
    for (const Tensor& t : anim_embed_) {
      b.anim_embed.push_back(tape.param(t));
      b.flat.push_back(b.anim_embed.back());
    }
    for (const AttentionBlockParams& l : layers_) {
      AttentionBlockValues v = bind_block(tape, l);
      for (int h = 0; h < l.heads; ++h) {
        b.flat.push_back(v.wq[static_cast<std::size_t>(h)]);
        b.flat.push_back(v.wk[static_cast<std::size_t>(h)]);
        b.flat.push_back(v.wv[static_cast<std::size_t>(h)]);
      }
      b.flat.push_back(v.wo);
      b.flat.push_back(v.wo_b);
      b.flat.push_back(v.ln1_g);
      b.flat.push_back(v.ln1_b);
      b.flat.push_back(v.ff_w1);
      b.flat.push_back(v.ff_b1);
      b.flat.push_back(v.ff_w2);
      b.flat.push_back(v.ff_b2);
      b.flat.push_back(v.ln2_g);
      b.flat.push_back(v.ln2_b);
      b.layers.push_back(std::move(v));
    }
    b.head_w = tape.param(head_w_);
    b.head_b = tape.param(head_b_);
    b.flat.push_back(b.head_w);
    b.flat.push_back(b.head_b);
    return b;
  }

  // Forward pass over a window. codes[i] is the input token at position i
  // (the reserved start-of-sequence row when sos_first); audio[i] is the feature frame of the
  // step being predicted at position i. Returns logits [T x 23*D]. Position
  // t only sees inputs at positions <= t.
  Value forward_on_tape(Tape& tape, const Bound& b, const std::vector<AudioFeatureFrame>& audio,
                        const std::vector<int>* codes_by_attr) const {
    const int t = static_cast<int>(audio.size());
    require(t >= 1, "forward: empty window");
    require(t <= cfg_.tau, "forward: window longer than tau");
    Tensor am({t, cfg_.audio_window * cfg_.mel_bands});
    for (int i = 0; i < t; ++i) {
      const Tensor& mel = audio[static_cast<std::size_t>(i)].mel;
      require(mel.numel() == am.cols(), "forward: audio frame shape mismatch");
      std::copy(mel.data.begin(), mel.data.end(), am.row_ptr(i));
    }
    Value x = layer_norm(add_bias_row(matmul(tape.constant(std::move(am)), b.audio_w), b.audio_b),
                         b.audio_ln_g, b.audio_ln_b);
    for (int a = 0; a < kAnimDims; ++a)
      x = add(x, embedding_lookup(b.anim_embed[static_cast<std::size_t>(a)], codes_by_attr[a]));
    if (cfg_.pos_enc == PosEnc::kSinusoidal)
      x = add(x, tape.constant(sinusoidal_encoding(t, cfg_.width)));
    AttentionMask mask = build_mask(t, cfg_.mask, cfg_.slopes);
    for (std::size_t l = 0; l < b.layers.size(); ++l)
      x = attention_block(tape, x, b.layers[l], mask, cfg_.bias_after_scale);
    return add_bias_row(matmul(x, b.head_w), b.head_b);
  }

  // Convenience forward for inspection; returns the logits tensor.
  Tensor forward_logits(const std::vector<AudioFeatureFrame>& audio,
                        const std::vector<AnimCode>& codes, bool sos_first = false) const {
    require(audio.size() == codes.size() || (sos_first && audio.size() == codes.size() + 1),
            "forward: audio/codes misaligned");
    Tape tape;
    Bound b = bind(tape);
    auto by_attr = codes_by_attribute(codes, sos_first, static_cast<int>(audio.size()));
    Value logits = forward_on_tape(tape, b, audio, by_attr.data());
    return tape.val(logits);
  }

  // One teacher-forcing step: cross-entropy over all positions and attributes,
  // Adam update with optional global-norm gradient clipping. Returns the
  // pre-update loss in nats per attribute per step.
  double train_step(const TrainingBatch& batch, const AdamParams& opt, double clip_norm = 1.0) {
    const int t = static_cast<int>(batch.targets.size());
    require(t >= 1 && batch.audio.size() == batch.targets.size() &&
                batch.codes.size() + (batch.sos_first ? 1 : 0) == batch.targets.size(),
            "train_step: malformed batch");
    Tape tape;
    Bound b = bind(tape);
    auto by_attr = codes_by_attribute(batch.codes, batch.sos_first, t);
    Value logits = forward_on_tape(tape, b, batch.audio, by_attr.data());
    Value flat = reshape(logits, {t * kAnimDims, cfg_.d});
    std::vector<int> targets_flat(static_cast<std::size_t>(t) * kAnimDims);
    for (int i = 0; i < t; ++i)
      for (int a = 0; a < kAnimDims; ++a)
        targets_flat[static_cast<std::size_t>(i) * kAnimDims + a] = batch.targets[static_cast<std::size_t>(i)][a];
    Value loss = cross_entropy(flat, targets_flat);
    const double loss_value = tape.val(loss).data[0];
    tape.backward(loss);

    double scale = 1.0;
    if (clip_norm > 0.0) {
      double sq = 0.0;
      for (std::size_t i = 0; i < refs_.size(); ++i) {
        const Tensor& g = tape.grad(b.flat[i]);
        for (double v : g.data) sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm > clip_norm) scale = clip_norm / norm;
    }
    for (std::size_t i = 0; i < refs_.size(); ++i)
      adam_step(*refs_[i].tensor, tape.grad(b.flat[i]), *refs_[i].adam, opt, scale);
    return loss_value;
  }

  // Teacher-forcing loss without any update.
  double eval_loss(const TrainingBatch& batch) const {
    const int t = static_cast<int>(batch.targets.size());
    Tape tape;
    Bound b = bind(tape);
    auto by_attr = codes_by_attribute(batch.codes, batch.sos_first, t);
    Value logits = forward_on_tape(tape, b, batch.audio, by_attr.data());
    Value flat = reshape(logits, {t * kAnimDims, cfg_.d});
    std::vector<int> targets_flat(static_cast<std::size_t>(t) * kAnimDims);
    for (int i = 0; i < t; ++i)
      for (int a = 0; a < kAnimDims; ++a)
        targets_flat[static_cast<std::size_t>(i) * kAnimDims + a] = batch.targets[static_cast<std::size_t>(i)][a];
    return tape.val(cross_entropy(flat, targets_flat)).data[0];
  }

  std::uint64_t parameter_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const ParamRef& r : refs_)
      h = fnv1a64(r.tensor->data.data(), r.tensor->data.size() * sizeof(double), h);
    return h;
  }

  // Per-attribute index columns for the embedding lookups; the start token
  // maps to the reserved row D.
  std::vector<std::vector<int>> codes_by_attribute(const std::vector<AnimCode>& codes,
                                                   bool sos_first, int t) const {
    require(static_cast<int>(codes.size()) + (sos_first ? 1 : 0) == t,
            "codes_by_attribute: length mismatch");
    std::vector<std::vector<int>> cols(kAnimDims, std::vector<int>(static_cast<std::size_t>(t)));
    for (int i = 0; i < t; ++i) {
      for (int a = 0; a < kAnimDims; ++a) {
        int c;
        if (sos_first && i == 0) {
          c = cfg_.d;
        } else {
          c = codes[static_cast<std::size_t>(i - (sos_first ? 1 : 0))][a];
          require(c >= 0 && c < cfg_.d, "codes_by_attribute: code out of range");
        }
        cols[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] = c;
      }
    }
    return cols;
  }

  // Raw parameter access for the decoder.
  const Tensor& audio_w() const { return audio_w_; }
  const Tensor& audio_b() const { return audio_b_; }
  const Tensor& audio_ln_g() const { return audio_ln_g_; }
  const Tensor& audio_ln_b() const { return audio_ln_b_; }
  const Tensor& anim_embed(int a) const { return anim_embed_[static_cast<std::size_t>(a)]; }
  const std::vector<AttentionBlockParams>& layers() const { return layers_; }
  const Tensor& head_w() const { return head_w_; }
  const Tensor& head_b() const { return head_b_; }

 private:
  void allocate() {
    audio_w_ = Tensor({cfg_.audio_window * cfg_.mel_bands, cfg_.width});
    audio_b_ = Tensor({cfg_.width});
    audio_ln_g_ = Tensor({cfg_.width});
    audio_ln_b_ = Tensor({cfg_.width});
    anim_embed_.assign(kAnimDims, Tensor({cfg_.d + 1, cfg_.width}));
    layers_.clear();
    for (int l = 0; l < cfg_.layers; ++l) {
      AttentionBlockParams p;
      p.heads = cfg_.heads;
      p.width = cfg_.width;
      p.head_dim = cfg_.head_dim;
      for (int h = 0; h < cfg_.heads; ++h) {
        p.wq.push_back(Tensor({cfg_.width, cfg_.head_dim}));
        p.wk.push_back(Tensor({cfg_.width, cfg_.head_dim}));
        p.wv.push_back(Tensor({cfg_.width, cfg_.head_dim}));
      }
      p.wo = Tensor({cfg_.width, cfg_.width});
      p.wo_b = Tensor({cfg_.width});
      p.ln1_g = Tensor({cfg_.width});
      p.ln1_b = Tensor({cfg_.width});
      p.ff_w1 = Tensor({cfg_.width, 4 * cfg_.width});
      p.ff_b1 = Tensor({4 * cfg_.width});
      p.ff_w2 = Tensor({4 * cfg_.width, cfg_.width});
      p.ff_b2 = Tensor({cfg_.width});
      p.ln2_g = Tensor({cfg_.width});
      p.ln2_b = Tensor({cfg_.width});
      layers_.push_back(std::move(p));
    }
    head_w_ = Tensor({cfg_.width, kAnimDims * cfg_.d});
    head_b_ = Tensor({kAnimDims * cfg_.d});
  }

  void fill_gaussian(Tensor& t, double stddev, std::uint64_t stream) {
    CounterRng rng = CounterRng(cfg_.init_seed).split(stream);
    for (double& v : t.data) v = stddev * rng.next_gaussian();
  }

  void init_weights() {
    std::uint64_t stream = 1;
    fill_gaussian(audio_w_, 1.0 / std::sqrt(static_cast<double>(audio_w_.rows())), stream++);
    audio_b_.fill(0.0);
    audio_ln_g_.fill(1.0);
    audio_ln_b_.fill(0.0);
    // Raw log-mel inputs carry the log floor (~ -13.8), so the normalized
    // audio path is O(1) per dim; code embeddings start at a matching scale
    // so the autoregressive inputs are visible from the first step.
    for (Tensor& t : anim_embed_) fill_gaussian(t, 0.25, stream++);
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(cfg_.width));
    for (AttentionBlockParams& p : layers_) {
      for (int h = 0; h < cfg_.heads; ++h) {
        fill_gaussian(p.wq[static_cast<std::size_t>(h)], proj_std, stream++);
        fill_gaussian(p.wk[static_cast<std::size_t>(h)], proj_std, stream++);
        fill_gaussian(p.wv[static_cast<std::size_t>(h)], proj_std, stream++);
      }
      fill_gaussian(p.wo, proj_std, stream++);
      p.wo_b.fill(0.0);
      p.ln1_g.fill(1.0);
      p.ln1_b.fill(0.0);
      fill_gaussian(p.ff_w1, proj_std, stream++);
      p.ff_b1.fill(0.0);
      fill_gaussian(p.ff_w2, 1.0 / std::sqrt(4.0 * cfg_.width), stream++);
      p.ff_b2.fill(0.0);
      p.ln2_g.fill(1.0);
      p.ln2_b.fill(0.0);
    }
    // Small head weights put the initial logits near zero, so an untrained
    // model predicts near-uniform distributions.
    fill_gaussian(head_w_, 0.01, stream++);
    head_b_.fill(0.0);
  }

  void build_refs() {
    refs_.clear();
    auto add = [this](const std::string& name, Tensor& t) {
      refs_.push_back(ParamRef{name, &t, nullptr});
    };
    add("audio_embed.w", audio_w_);
    add("audio_embed.b", audio_b_);
    add("audio_embed.ln.g", audio_ln_g_);
    add("audio_embed.ln.b", audio_ln_b_);
    for (int a = 0; a < kAnimDims; ++a)
      add("anim_embed." + std::to_string(a), anim_embed_[static_cast<std::size_t>(a)]);
    for (int l = 0; l < cfg_.layers; ++l) {
      AttentionBlockParams& p = layers_[static_cast<std::size_t>(l)];
      const std::string pre = "layer" + std::to_string(l) + ".";
      for (int h = 0; h < cfg_.heads; ++h) {
        const std::string hp = pre + "h" + std::to_string(h) + ".";
        add(hp + "wq", p.wq[static_cast<std::size_t>(h)]);
        add(hp + "wk", p.wk[static_cast<std::size_t>(h)]);
        add(hp + "wv", p.wv[static_cast<std::size_t>(h)]);
      }
      add(pre + "wo", p.wo);
      add(pre + "wo_b", p.wo_b);
      add(pre + "ln1.g", p.ln1_g);
      add(pre + "ln1.b", p.ln1_b);
      add(pre + "ff.w1", p.ff_w1);
      add(pre + "ff.b1", p.ff_b1);
      add(pre + "ff.w2", p.ff_w2);
      add(pre + "ff.b2", p.ff_b2);
      add(pre + "ln2.g", p.ln2_g);
      add(pre + "ln2.b", p.ln2_b);
    }
    add("head.w", head_w_);
    add("head.b", head_b_);
    if (adam_.size() != refs_.size()) adam_.assign(refs_.size(), AdamState{});
    for (std::size_t i = 0; i < refs_.size(); ++i) refs_[i].adam = &adam_[i];
  }

  ModelConfig cfg_;
  CodecSpec codec_;
  Tensor audio_w_, audio_b_, audio_ln_g_, audio_ln_b_;
  std::vector<Tensor> anim_embed_;
  std::vector<AttentionBlockParams> layers_;
  Tensor head_w_, head_b_;
  std::vector<AdamState> adam_;
  std::vector<ParamRef> refs_;
};

// ---------------------------------------------------------------------------
// Teacher-forcing windows under the bounded-context factorization: sliding
// windows of length min(tau, len-1); the first window is prefixed with the
// start-of-sequence code so frame 0 is also a prediction target. A tail
// window is added if the stride does not land on len - L, so every frame
// appears as a target at least once.
// ---------------------------------------------------------------------------

inline std::vector<TrainingBatch> make_training_windows(
    const AnimSequence& anim, const std::vector<AudioFeatureFrame>& audio, const CodecSpec& codec,
    int tau, int stride = 0) {
  const int len = static_cast<int>(anim.size());
  require(len >= 2, "make_training_windows: sequence too short");
  require(static_cast<int>(audio.size()) == len, "make_training_windows: audio/frame mismatch");
  require(tau >= 1, "make_training_windows: tau must be >= 1");
  if (stride <= 0) stride = std::max(1, tau / 2);

  std::vector<AnimCode> codes(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) codes[static_cast<std::size_t>(i)] = quantize(anim.frames[static_cast<std::size_t>(i)], codec);

  const int window_len = std::min(tau, len - 1);
  std::vector<int> starts;
  for (int s = 0; s <= len - window_len; s += stride) starts.push_back(s);
  if (starts.back() != len - window_len) starts.push_back(len - window_len);

  std::vector<TrainingBatch> out;
  out.reserve(starts.size());
  for (int s : starts) {
    TrainingBatch b;
    b.sos_first = (s == 0);
    for (int i = 0; i < window_len; ++i) {
      const int target = s + i;
      b.audio.push_back(audio[static_cast<std::size_t>(target)]);
      b.targets.push_back(codes[static_cast<std::size_t>(target)]);
      if (target > 0) b.codes.push_back(codes[static_cast<std::size_t>(target) - 1]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container: text header (version, hyperparameters, codec record)
// followed by named tensors as raw little-endian float64, so a reload is
// bit-exact.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const MappingModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const ModelConfig& c = model.config();
  os << "aanim-ckpt 1\n";
  os << "hyper d " << c.d << "\n";
  os << "hyper tau " << c.tau << "\n";
  os << "hyper width " << c.width << "\n";
  os << "hyper heads " << c.heads << "\n";
  os << "hyper head_dim " << c.head_dim << "\n";
  os << "hyper layers " << c.layers << "\n";
  os << "hyper mask " << to_string(c.mask) << "\n";
  os << "hyper pos_enc " << to_string(c.pos_enc) << "\n";
  os << "hyper bias_after_scale " << (c.bias_after_scale ? 1 : 0) << "\n";
  os << "hyper audio_window " << c.audio_window << "\n";
  os << "hyper mel_bands " << c.mel_bands << "\n";
  os << "slopes";
  for (double s : c.slopes) os << " " << hexfloat(s);
  os << "\n";
  write_codec(os, model.codec());
  os << "tensors " << model.params().size() << "\n";
  for (const auto& r : model.params()) {
    os << "tensor " << r.name << " " << r.tensor->rank();
    for (int d : r.tensor->shape) os << " " << d;
    os << "\n";
    os.write(reinterpret_cast<const char*>(r.tensor->data.data()),
             static_cast<std::streamsize>(r.tensor->data.size() * sizeof(double)));
    os << "\n";
  }
  os << "end\n";
}

inline MappingModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string tok, sval;
  int iver = 0;
  is >> tok >> iver;
  if (tok != "aanim-ckpt" || iver != 1) throw std::runtime_error("load_checkpoint: bad magic");
  ModelConfig cfg;
  auto read_hyper = [&](const std::string& key) {
    is >> tok >> sval;
    if (tok != "hyper" || sval != key)
      throw std::runtime_error("load_checkpoint: expected hyper " + key);
  };
  read_hyper("d");
  is >> cfg.d;
  read_hyper("tau");
  is >> cfg.tau;
  read_hyper("width");
  is >> cfg.width;
  read_hyper("heads");
  is >> cfg.heads;
  read_hyper("head_dim");
  is >> cfg.head_dim;
  read_hyper("layers");
  is >> cfg.layers;
  read_hyper("mask");
  is >> sval;
  cfg.mask = mask_kind_from_string(sval);
  read_hyper("pos_enc");
  is >> sval;
  cfg.pos_enc = pos_enc_from_string(sval);
  read_hyper("bias_after_scale");
  int flag = 0;
  is >> flag;
  cfg.bias_after_scale = flag != 0;
  read_hyper("audio_window");
  is >> cfg.audio_window;
  read_hyper("mel_bands");
  is >> cfg.mel_bands;
  {
    is >> tok;
    if (tok != "slopes") throw std::runtime_error("load_checkpoint: expected slopes");
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    std::string s;
    cfg.slopes.clear();
    while (ls >> s) cfg.slopes.push_back(parse_hexfloat(s));
  }
  CodecSpec codec = read_codec(is);
  MappingModel model(cfg, codec);
  std::size_t count = 0;
  is >> tok >> count;
  if (tok != "tensors" || count != model.params().size())
    throw std::runtime_error("load_checkpoint: tensor count mismatch");
  for (auto& r : model.params()) {
    int rank = 0;
    is >> tok >> sval >> rank;
    if (tok != "tensor" || sval != r.name)
      throw std::runtime_error("load_checkpoint: expected tensor " + r.name + ", got " + sval);
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int& d : shape) is >> d;
    if (shape != r.tensor->shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + r.name);
    is.ignore(1);  // newline before the binary block
    is.read(reinterpret_cast<char*>(r.tensor->data.data()),
            static_cast<std::streamsize>(r.tensor->data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_checkpoint: truncated tensor " + r.name);
    is.ignore(1);  // trailing newline
  }
  is >> tok;
  if (tok != "end") throw std::runtime_error("load_checkpoint: missing terminator");
  return model;
}

}  // namespace aanim
