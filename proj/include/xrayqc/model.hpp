#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xrayqc/augment.hpp"
#include "xrayqc/convert.hpp"
#include "xrayqc/errors.hpp"
#include "xrayqc/image.hpp"
#include "xrayqc/pnm.hpp"
#include "xrayqc/rng.hpp"
#include "xrayqc/synth.hpp"

// Classifier: a frozen, seed-generated convolutional feature extractor in
// front of a trainable fully-connected head (512 -> 256 -> softmax over 2).
// Only the head receives gradients; the extractor is forward-only.

namespace xrayqc {

inline constexpr int kFeatureDim = 32;

using FeatureVector = std::vector<double>;

// ---- frozen feature extractor -------------------------------------------

// Three 3x3 stride-2 conv stages (3 -> 8 -> 16 -> 32 channels, zero padding
// 1, ReLU) followed by global average pooling. Weights sigma = 1/sqrt(9*in),
// biases sigma = 0.1, all drawn once from the seed; training never touches
// them.
struct BackboneSpec {
  std::uint64_t seed = 0;
  std::array<std::vector<float>, 3> weights;  // (out, in, 3, 3) row-major
  std::array<std::vector<float>, 3> biases;   // (out)

  bool operator==(const BackboneSpec&) const = default;
};

inline constexpr int kBackboneChannels[4] = {3, 8, 16, 32};

inline BackboneSpec make_backbone(std::uint64_t seed) {
  BackboneSpec spec;
  spec.seed = seed;
  Rng rng(derive_seed(seed, stream::backbone));
  for (int s = 0; s < 3; ++s) {
    const int in_ch = kBackboneChannels[s];
    const int out_ch = kBackboneChannels[s + 1];
    const double sigma = 1.0 / std::sqrt(9.0 * in_ch);
    spec.weights[s].resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
    for (float& w : spec.weights[s]) w = static_cast<float>(rng.normal(0.0, sigma));
    spec.biases[s].resize(out_ch);
    for (float& b : spec.biases[s]) b = static_cast<float>(rng.normal(0.0, 0.1));
  }
  return spec;
}

namespace detail {

// im2col for 3x3 stride-2 pad-1 kernels: output (in_ch*9) x (out_h*out_w).
inline Eigen::MatrixXf im2col_3x3_s2(const Eigen::MatrixXf& input, int in_ch, int h, int w,
                                     int out_h, int out_w) {
  Eigen::MatrixXf cols(in_ch * 9, out_h * out_w);
  cols.setZero();
  for (int c = 0; c < in_ch; ++c) {
    const float* plane = input.data() + static_cast<std::ptrdiff_t>(c) * h * w;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int row = (c * 3 + ky) * 3 + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst = cols.data() + static_cast<std::ptrdiff_t>(oy) * out_w * cols.rows();
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= w) continue;
            // cols is column-major: entry (row, oy*out_w + ox)
            dst[static_cast<std::ptrdiff_t>(ox) * cols.rows() + row] =
                plane[static_cast<std::ptrdiff_t>(iy) * w + ix];
          }
        }
      }
  }
  return cols;
}

}  // namespace detail

// Input channels are scaled to [0,1] by dividing by 255 before convolution.
inline FeatureVector backbone_forward(const Image8x3& image, const BackboneSpec& spec) {
  check_valid(image);
  if (image.width < 8 || image.height < 8)
    throw ArgumentError("feature extractor needs at least an 8x8 image");

  int h = image.height;
  int w = image.width;
  Eigen::MatrixXf act(static_cast<std::ptrdiff_t>(h) * w, 3);
  for (int c = 0; c < 3; ++c) {
    float* dst = act.data() + static_cast<std::ptrdiff_t>(c) * h * w;
    const std::uint8_t* src = image.planes[c].data();
    for (std::size_t i = 0; i < image.planes[c].size(); ++i)
      dst[i] = static_cast<float>(src[i]) * (1.0f / 255.0f);
  }

  for (int s = 0; s < 3; ++s) {
    const int in_ch = kBackboneChannels[s];
    const int out_ch = kBackboneChannels[s + 1];
    const int out_h = (h - 1) / 2 + 1;
    const int out_w = (w - 1) / 2 + 1;

    const Eigen::MatrixXf cols = detail::im2col_3x3_s2(
        Eigen::Map<const Eigen::MatrixXf>(act.data(), static_cast<std::ptrdiff_t>(h) * w,
                                          in_ch),
        in_ch, h, w, out_h, out_w);
    const Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>
        wmat(spec.weights[s].data(), out_ch, in_ch * 9);

    Eigen::MatrixXf out = wmat * cols;  // out_ch x (out_h*out_w)
    for (int c = 0; c < out_ch; ++c) out.row(c).array() += spec.biases[s][c];
    out = out.cwiseMax(0.0f);

    // back to planar layout, one column per channel
    act = out.transpose().eval();
    h = out_h;
    w = out_w;
  }

  FeatureVector f(kFeatureDim);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int c = 0; c < kFeatureDim; ++c)
    f[c] = act.col(c).cast<double>().sum() * inv;
  return f;
}

// ---- trainable head ------------------------------------------------------

// Shapes are input-dim x output-dim; a feature row vector multiplies from
// the left.
struct HeadParams {
  Eigen::MatrixXd W_p;  // F x 512
  Eigen::VectorXd b_p;  // 512
  Eigen::MatrixXd W_1;  // 512 x 256
  Eigen::VectorXd b_1;  // 256
  Eigen::MatrixXd W_2;  // 256 x 2
  Eigen::VectorXd b_2;  // 2
};

inline constexpr int kHidden1 = 512;
inline constexpr int kHidden2 = 256;

// The frozen extractor emits small-magnitude features, so the first
// trainable layer gets a larger init gain to bring activations to a scale
// the fixed learning rate can work with.
inline constexpr double kProjectionGain = 8.0;

// Scaled He init for weights, zero biases, all drawn from the seed in a
// fixed order (W_p, W_1, W_2, each row-major).
inline HeadParams init_head(std::uint64_t seed) {
  Rng rng(derive_seed(seed, stream::head_init));
  HeadParams p;
  const auto fill = [&rng](Eigen::MatrixXd& m, int in, int out, double gain) {
    m.resize(in, out);
    const double sigma = gain * std::sqrt(2.0 / in);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) m(i, j) = rng.normal(0.0, sigma);
  };
  fill(p.W_p, kFeatureDim, kHidden1, kProjectionGain);
  p.b_p = Eigen::VectorXd::Zero(kHidden1);
  fill(p.W_1, kHidden1, kHidden2, 1.0);
  p.b_1 = Eigen::VectorXd::Zero(kHidden2);
  fill(p.W_2, kHidden2, 2, 1.0);
  p.b_2 = Eigen::VectorXd::Zero(2);
  return p;
}

inline void check_valid(const HeadParams& p) {
  if (p.W_p.rows() != kFeatureDim || p.W_p.cols() != kHidden1 || p.b_p.size() != kHidden1 ||
      p.W_1.rows() != kHidden1 || p.W_1.cols() != kHidden2 || p.b_1.size() != kHidden2 ||
      p.W_2.rows() != kHidden2 || p.W_2.cols() != 2 || p.b_2.size() != 2)
    throw ArgumentError("head parameter shapes are wrong");
}

struct Prediction {
  std::array<double, 2> probs{};  // [normal, abnormal]
  Label predicted_label = Label::normal;
};

namespace detail {

struct HeadActivations {
  Eigen::VectorXd h1;      // post-ReLU, 512
  Eigen::VectorXd h2;      // post-ReLU, 256
  Eigen::Vector2d logits;
  Eigen::Vector2d log_probs;  // stabilized log-softmax
};

inline HeadActivations head_activations(const FeatureVector& f, const HeadParams& p) {
  const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<std::ptrdiff_t>(f.size()));
  HeadActivations a;
  a.h1 = (p.W_p.transpose() * fv + p.b_p).cwiseMax(0.0);
  a.h2 = (p.W_1.transpose() * a.h1 + p.b_1).cwiseMax(0.0);
  a.logits = p.W_2.transpose() * a.h2 + p.b_2;
  const double m = a.logits.maxCoeff();
  const double lse = m + std::log(std::exp(a.logits(0) - m) + std::exp(a.logits(1) - m));
  a.log_probs = a.logits.array() - lse;
  return a;
}

}  // namespace detail

// probs = softmax(logits) with max subtraction; ties predict abnormal.
inline Prediction head_forward(const FeatureVector& f, const HeadParams& p) {
  check_valid(p);
  if (f.size() != static_cast<std::size_t>(p.W_p.rows()))
    throw ArgumentError("feature length does not match head input");
  for (double v : f)
    if (!std::isfinite(v)) throw ArgumentError("non-finite feature value");

  const detail::HeadActivations a = detail::head_activations(f, p);
  Prediction pred;
  pred.probs[0] = std::exp(a.log_probs(0));
  pred.probs[1] = std::exp(a.log_probs(1));
  pred.predicted_label = pred.probs[1] >= pred.probs[0] ? Label::abnormal : Label::normal;
  return pred;
}

// Plain -log p of the labeled class. Training computes losses from the
// stabilized log-softmax directly, not from these rounded probabilities.
inline double cross_entropy(const std::array<double, 2>& probs, Label label) {
  return -std::log(probs[label == Label::abnormal ? 1 : 0]);
}

struct HeadGradients {
  Eigen::MatrixXd W_p;
  Eigen::VectorXd b_p;
  Eigen::MatrixXd W_1;
  Eigen::VectorXd b_1;
  Eigen::MatrixXd W_2;
  Eigen::VectorXd b_2;
};

// Analytic gradients of cross_entropy(head_forward(f)) w.r.t. every head
// parameter. Nothing flows into the feature extractor.
inline HeadGradients head_gradients(const FeatureVector& f, const HeadParams& p, Label label) {
  check_valid(p);
  if (f.size() != static_cast<std::size_t>(p.W_p.rows()))
    throw ArgumentError("feature length does not match head input");
  const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<std::ptrdiff_t>(f.size()));
  const detail::HeadActivations a = detail::head_activations(f, p);

  Eigen::Vector2d dz(std::exp(a.log_probs(0)), std::exp(a.log_probs(1)));
  dz(label == Label::abnormal ? 1 : 0) -= 1.0;

  HeadGradients g;
  g.W_2 = a.h2 * dz.transpose();
  g.b_2 = dz;
  Eigen::VectorXd dh2 = p.W_2 * dz;
  dh2 = (a.h2.array() > 0.0).select(dh2, 0.0);
  g.W_1 = a.h1 * dh2.transpose();
  g.b_1 = dh2;
  Eigen::VectorXd dh1 = p.W_1 * dh2;
  dh1 = (a.h1.array() > 0.0).select(dh1, 0.0);
  g.W_p = fv * dh1.transpose();
  g.b_p = dh1;
  return g;
}

// ---- training ------------------------------------------------------------

struct TrainConfig {
  int epochs = 50;
  double lr0 = 0.001;
  int decay_period = 10;
  double decay_factor = 0.1;
  int minibatch_size = 8;
  std::uint64_t seed = 0;
};

inline void check_valid(const TrainConfig& c) {
  if (c.epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (!(c.lr0 > 0.0)) throw ArgumentError("lr0 must be positive");
  if (c.decay_period < 1) throw ArgumentError("decay_period must be at least 1");
  if (!(c.decay_factor > 0.0 && c.decay_factor <= 1.0))
    throw ArgumentError("decay_factor must lie in (0, 1]");
  if (c.minibatch_size < 1) throw ArgumentError("minibatch_size must be at least 1");
}

// lr0 * decay_factor^floor(epoch / decay_period), epochs counted from 0.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ArgumentError("epoch must be nonnegative");
  return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_period);
}

struct EpochStat {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  HeadParams params;
  std::vector<EpochStat> history;
  std::optional<GlobalBounds> bounds;  // bounds actually used (methods 2 and 4)
};

namespace detail {

// Per-sample flip-variant feature cache; variant index = do_h + 2*do_v.
struct TrainSample {
  std::array<Eigen::VectorXd, 4> features;
  Label label = Label::normal;
};

inline Eigen::VectorXd to_eigen(const FeatureVector& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<std::ptrdiff_t>(f.size()));
}

// Forward pass over a stacked minibatch (rows = samples); returns mean loss
// and fills the softmax matrix P.
struct BatchForward {
  Eigen::MatrixXd H1, H2, P;
  double loss_sum = 0.0;
};

inline BatchForward batch_forward(const Eigen::MatrixXd& X, const HeadParams& p,
                                  const std::vector<int>& labels) {
  BatchForward r;
  r.H1 = ((X * p.W_p).rowwise() + p.b_p.transpose()).cwiseMax(0.0);
  r.H2 = ((r.H1 * p.W_1).rowwise() + p.b_1.transpose()).cwiseMax(0.0);
  Eigen::MatrixXd Z = (r.H2 * p.W_2).rowwise() + p.b_2.transpose();
  r.P.resize(Z.rows(), 2);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double m = std::max(Z(i, 0), Z(i, 1));
    const double lse = m + std::log(std::exp(Z(i, 0) - m) + std::exp(Z(i, 1) - m));
    r.P(i, 0) = std::exp(Z(i, 0) - lse);
    r.P(i, 1) = std::exp(Z(i, 1) - lse);
    r.loss_sum += lse - Z(i, labels[static_cast<std::size_t>(i)]);
  }
  return r;
}

}  // namespace detail

// Loads and converts every training image, caches features for the four
// flip variants, then runs mini-batch SGD over the head. The per-epoch
// shuffle and the per-position flip draws come from seeds derived off
// cfg.seed, so a fixed seed reproduces the trajectory bit for bit.
inline TrainResult train(const DatasetIndex& index, const std::set<int>& train_batches,
                         ConversionMethod method, const BackboneSpec& backbone,
                         const TrainConfig& cfg, const AugmentParams& aug) {
  check_valid(cfg);
  check_valid(aug);

  std::vector<const SampleRecord*> records;
  for (const SampleRecord& r : index.records)
    if (train_batches.count(r.batch_id)) records.push_back(&r);
  if (records.empty()) throw ConfigError("training split is empty");
  bool has_normal = false, has_abnormal = false;
  for (const SampleRecord* r : records)
    (r->label == Label::normal ? has_normal : has_abnormal) = true;
  if (!has_normal || !has_abnormal)
    throw ConfigError("training split has a single class; need both");

  TrainResult result;

  if (method_needs_global_bounds(method.kind) && !method.bounds) {
    BoundsAccumulator acc;
    for (const SampleRecord* r : records) acc.add(load_pgm16(image_path(index, *r)));
    method.bounds = acc.finish();
  }
  result.bounds = method.bounds;

  std::vector<detail::TrainSample> samples(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawImage16 raw = load_pgm16(image_path(index, *records[i]));
    const Image8x3 conv = convert(raw, method);
    samples[i].label = records[i]->label;
    for (int v = 0; v < 4; ++v) {
      const Image8x3 variant = resize_bilinear(apply_flips(conv, v & 1, (v >> 1) & 1),
                                               aug.target_width, aug.target_height);
      samples[i].features[v] = detail::to_eigen(backbone_forward(variant, backbone));
    }
  }

  HeadParams p = init_head(cfg.seed);
  const int n = static_cast<int>(samples.size());
  std::vector<int> order(samples.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);

    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, stream::shuffle, static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle_rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.minibatch_size) {
      const int bsz = std::min(cfg.minibatch_size, n - start);
      Eigen::MatrixXd X(bsz, kFeatureDim);
      std::vector<int> labels(static_cast<std::size_t>(bsz));
      for (int k = 0; k < bsz; ++k) {
        const int pos = start + k;
        const detail::TrainSample& s = samples[static_cast<std::size_t>(order[pos])];
        // same draw order as apply_augment: u_h first, then u_v
        Rng aug_rng(derive_seed(cfg.seed, stream::augment, static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(pos)));
        const int v = (aug_rng.uniform() < aug.flip_h_prob ? 1 : 0) +
                      (aug_rng.uniform() < aug.flip_v_prob ? 2 : 0);
        X.row(k) = s.features[static_cast<std::size_t>(v)].transpose();
        labels[static_cast<std::size_t>(k)] = s.label == Label::abnormal ? 1 : 0;
      }

      detail::BatchForward fwd = detail::batch_forward(X, p, labels);
      loss_sum += fwd.loss_sum;

      Eigen::MatrixXd dZ = fwd.P;
      for (int k = 0; k < bsz; ++k) dZ(k, labels[static_cast<std::size_t>(k)]) -= 1.0;
      dZ /= static_cast<double>(bsz);

      const Eigen::MatrixXd gW2 = fwd.H2.transpose() * dZ;
      const Eigen::VectorXd gb2 = dZ.colwise().sum().transpose();
      Eigen::MatrixXd dH2 = dZ * p.W_2.transpose();
      dH2 = (fwd.H2.array() > 0.0).select(dH2, 0.0);
      const Eigen::MatrixXd gW1 = fwd.H1.transpose() * dH2;
      const Eigen::VectorXd gb1 = dH2.colwise().sum().transpose();
      Eigen::MatrixXd dH1 = dH2 * p.W_1.transpose();
      dH1 = (fwd.H1.array() > 0.0).select(dH1, 0.0);
      const Eigen::MatrixXd gWp = X.transpose() * dH1;
      const Eigen::VectorXd gbp = dH1.colwise().sum().transpose();

      p.W_2 -= lr * gW2;
      p.b_2 -= lr * gb2;
      p.W_1 -= lr * gW1;
      p.b_1 -= lr * gb1;
      p.W_p -= lr * gWp;
      p.b_p -= lr * gbp;
    }

    result.history.push_back({epoch, lr, loss_sum / n});
  }

  result.params = std::move(p);
  return result;
}

// Inference pipeline: convert, resize only (no flips), extract, classify.
inline Prediction predict(const RawImage16& image, const ConversionMethod& method,
                          const BackboneSpec& backbone, const HeadParams& p,
                          const AugmentParams& aug) {
  check_valid(aug);
  const Image8x3 conv = convert(image, method);
  const Image8x3 sized = resize_bilinear(conv, aug.target_width, aug.target_height);
  return head_forward(backbone_forward(sized, backbone), p);
}

// ---- checkpoint and feature I/O ------------------------------------------

namespace detail {

inline void append_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, " %.17g", v);
  out += buf;
}

struct TokenReader {
  const std::string& text;
  std::size_t pos = 0;

  explicit TokenReader(const std::string& t) : text(t) {}

  std::string next() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n' || text[pos] == '\r' ||
                                 text[pos] == '\t'))
      ++pos;
    if (pos >= text.size()) throw FormatError("checkpoint ends early");
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\n' && text[pos] != '\r' &&
           text[pos] != '\t')
      ++pos;
    return text.substr(start, pos - start);
  }

  double next_double() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw FormatError("bad number \"" + tok + "\" in checkpoint");
    }
  }

  long next_long() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw FormatError("bad integer \"" + tok + "\" in checkpoint");
    }
  }
};

}  // namespace detail

// Text checkpoint: header line "xrayqc-head v1 F=<F>", then one line per
// tensor ("name rows cols values…" / "name size values…"), row-major, %.17g
// so doubles round-trip exactly.
inline void save_params(const HeadParams& p, const std::filesystem::path& path) {
  check_valid(p);
  std::string out = "xrayqc-head v1 F=" + std::to_string(kFeatureDim) + "\n";
  const auto matrix_line = [&out](const char* name, const Eigen::MatrixXd& m) {
    out += name;
    out += ' ';
    out += std::to_string(m.rows());
    out += ' ';
    out += std::to_string(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) detail::append_value(out, m(i, j));
    out += '\n';
  };
  const auto vector_line = [&out](const char* name, const Eigen::VectorXd& v) {
    out += name;
    out += ' ';
    out += std::to_string(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) detail::append_value(out, v(i));
    out += '\n';
  };
  matrix_line("W_p", p.W_p);
  vector_line("b_p", p.b_p);
  matrix_line("W_1", p.W_1);
  vector_line("b_1", p.b_1);
  matrix_line("W_2", p.W_2);
  vector_line("b_2", p.b_2);
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

inline HeadParams load_params(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  const std::string text(bytes.begin(), bytes.end());
  detail::TokenReader rd(text);

  if (rd.next() != "xrayqc-head") throw FormatError("not a head checkpoint");
  if (rd.next() != "v1") throw FormatError("unsupported checkpoint version");
  const std::string ftok = rd.next();
  if (ftok.rfind("F=", 0) != 0) throw FormatError("missing F= in checkpoint header");
  long f = 0;
  try {
    std::size_t used = 0;
    f = std::stol(ftok.substr(2), &used);
    if (used != ftok.size() - 2) throw std::invalid_argument(ftok);
  } catch (const std::exception&) {
    throw FormatError("bad F value \"" + ftok + "\"");
  }
  if (f != kFeatureDim)
    throw FormatError("checkpoint F=" + std::to_string(f) + " but this build has F=" +
                      std::to_string(kFeatureDim));

  HeadParams p;
  const auto read_matrix = [&rd](const char* name, Eigen::MatrixXd& m, long rows, long cols) {
    if (rd.next() != name) throw FormatError(std::string("expected tensor ") + name);
    const long r = rd.next_long();
    const long c = rd.next_long();
    if (r != rows || c != cols)
      throw FormatError(std::string(name) + " has shape " + std::to_string(r) + "x" +
                        std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    m.resize(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) m(i, j) = rd.next_double();
  };
  const auto read_vector = [&rd](const char* name, Eigen::VectorXd& v, long size) {
    if (rd.next() != name) throw FormatError(std::string("expected tensor ") + name);
    const long s = rd.next_long();
    if (s != size)
      throw FormatError(std::string(name) + " has size " + std::to_string(s) + ", expected " +
                        std::to_string(size));
    v.resize(size);
    for (long i = 0; i < size; ++i) v(i) = rd.next_double();
  };
  read_matrix("W_p", p.W_p, kFeatureDim, kHidden1);
  read_vector("b_p", p.b_p, kHidden1);
  read_matrix("W_1", p.W_1, kHidden1, kHidden2);
  read_vector("b_1", p.b_1, kHidden2);
  read_matrix("W_2", p.W_2, kHidden2, 2);
  read_vector("b_2", p.b_2, 2);
  return p;
}

// Feature CSV: header sample_id,f0..f<F-1>, one row per sample.
inline void save_features(const std::vector<std::pair<std::string, FeatureVector>>& rows,
                          const std::filesystem::path& path) {
  std::string out = "sample_id";
  for (int i = 0; i < kFeatureDim; ++i) out += ",f" + std::to_string(i);
  out += '\n';
  char buf[40];
  for (const auto& [id, f] : rows) {
    if (f.size() != static_cast<std::size_t>(kFeatureDim))
      throw ArgumentError("feature vector for \"" + id + "\" has wrong length");
    out += id;
    for (double v : f) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

inline std::map<std::string, FeatureVector> load_features(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  const std::string text(bytes.begin(), bytes.end());

  std::string expect = "sample_id";
  for (int i = 0; i < kFeatureDim; ++i) expect += ",f" + std::to_string(i);

  std::map<std::string, FeatureVector> out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    if (line.empty()) continue;
    if (first) {
      if (line != expect) throw FormatError("bad feature CSV header");
      first = false;
      continue;
    }
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != static_cast<std::size_t>(kFeatureDim) + 1)
      throw FormatError("feature row needs " + std::to_string(kFeatureDim + 1) +
                        " fields, got " + std::to_string(f.size()));
    FeatureVector fv(kFeatureDim);
    for (int i = 0; i < kFeatureDim; ++i) {
      try {
        std::size_t used = 0;
        fv[static_cast<std::size_t>(i)] = std::stod(f[static_cast<std::size_t>(i) + 1], &used);
        if (used != f[static_cast<std::size_t>(i) + 1].size())
          throw std::invalid_argument(f[static_cast<std::size_t>(i) + 1]);
      } catch (const std::exception&) {
        throw FormatError("bad feature value \"" + f[static_cast<std::size_t>(i) + 1] + "\"");
      }
    }
    if (!out.emplace(f[0], std::move(fv)).second)
      throw FormatError("duplicate sample_id \"" + f[0] + "\" in feature CSV");
  }
  if (first) throw FormatError("feature CSV is empty");
  return out;
}

// Training history CSV: epoch,lr,mean_loss.
inline void save_history(const std::vector<EpochStat>& history,
                         const std::filesystem::path& path) {
  std::string out = "epoch,lr,mean_loss\n";
  char buf[96];
  for (const EpochStat& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.lr, e.mean_loss);
    out += buf;
  }
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

}  // namespace xrayqc
