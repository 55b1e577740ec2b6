#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "xrayqc/errors.hpp"
#include "xrayqc/image.hpp"
#include "xrayqc/pnm.hpp"
#include "xrayqc/rng.hpp"

// Synthetic 16-bit electrode radiographs. A dark coated strip (detector
// counts around 2250) fills nearly the whole frame, with thin open-beam
// strips (around 28000) at the top and bottom edges. Anomalies are injected
// geometric defects whose footprint and intensity delta both scale with a
// severity in (0,1]; a sample is labeled abnormal iff some injected severity
// reaches the configured threshold.

namespace xrayqc {

enum class AnomalyKind : int {
  scratch = 0,
  line = 1,
  edge_cut = 2,
  smudge = 3,
  bubble = 4,
  missing_ink = 5,
};

inline constexpr int kAnomalyKindCount = 6;

inline const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::scratch: return "scratch";
    case AnomalyKind::line: return "line";
    case AnomalyKind::edge_cut: return "edge_cut";
    case AnomalyKind::smudge: return "smudge";
    case AnomalyKind::bubble: return "bubble";
    case AnomalyKind::missing_ink: return "missing_ink";
  }
  throw ArgumentError("bad anomaly kind");
}

inline AnomalyKind anomaly_kind_from_string(const std::string& s) {
  for (int i = 0; i < kAnomalyKindCount; ++i) {
    const auto k = static_cast<AnomalyKind>(i);
    if (s == to_string(k)) return k;
  }
  throw ParseError("unknown anomaly kind \"" + s + "\"");
}

enum class Label : int { normal = 0, abnormal = 1 };

inline const char* to_string(Label l) { return l == Label::normal ? "normal" : "abnormal"; }

inline Label label_from_string(const std::string& s) {
  if (s == "normal") return Label::normal;
  if (s == "abnormal") return Label::abnormal;
  throw ParseError("unknown label \"" + s + "\"");
}

struct Injected {
  AnomalyKind kind = AnomalyKind::scratch;
  double severity = 1.0;

  bool operator==(const Injected&) const = default;
};

struct SampleRecord {
  std::string sample_id;
  int batch_id = 0;
  Label label = Label::normal;
  std::string path;  // relative to the index root
  std::vector<Injected> injected;

  bool operator==(const SampleRecord&) const = default;
};

struct DatasetIndex {
  std::vector<SampleRecord> records;
  std::filesystem::path root;
};

inline std::filesystem::path image_path(const DatasetIndex& index, const SampleRecord& rec) {
  return index.root / rec.path;
}

// ---- configuration ------------------------------------------------------

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<int> batch_sizes;
  // One fraction applied to every batch, or one per batch. Abnormal count
  // per batch is floor(fraction * size).
  std::vector<double> abnormal_fractions{0.2};
  int image_width = 128;
  int image_height = 256;
  double coating_base = 2250.0;
  // Explicit per-batch coating means; empty means derive them from the seed
  // as coating_base + uniform(-coating_spread, coating_spread).
  std::vector<double> coating_means;
  double coating_spread = 80.0;
  double noise_sigma = 100.0;
  double background_mean = 28000.0;
  double severity_threshold = 0.5;
  std::vector<double> anomaly_mix = std::vector<double>(kAnomalyKindCount, 1.0);
  double abn_sev_min = 0.7;
  double abn_sev_max = 1.0;
  double normal_sev_min = 0.05;
  double normal_sev_max = 0.25;
  double normal_minor_prob = 0.35;
};

// Default dataset shape: 12 batches, 714 images, 562 normal / 152 abnormal,
// with batch 3 largest (152, all normal) and batch 1 smallest (17).
inline SynthConfig default_synth_config(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.batch_sizes = {17, 40, 152, 74, 33, 80, 89, 38, 54, 44, 68, 25};
  const std::vector<int> abnormal = {16, 9, 0, 16, 7, 18, 20, 1, 12, 10, 30, 13};
  c.abnormal_fractions.clear();
  for (std::size_t i = 0; i < c.batch_sizes.size(); ++i)
    c.abnormal_fractions.push_back(static_cast<double>(abnormal[i]) / c.batch_sizes[i]);
  return c;
}

inline void check_valid(const SynthConfig& c) {
  if (c.batch_sizes.empty()) throw ArgumentError("batch_sizes must be nonempty");
  for (int n : c.batch_sizes)
    if (n < 1) throw ArgumentError("every batch size must be at least 1");
  if (c.abnormal_fractions.size() != 1 && c.abnormal_fractions.size() != c.batch_sizes.size())
    throw ArgumentError("abnormal_fractions must have one entry or one per batch");
  for (double f : c.abnormal_fractions)
    if (f < 0.0 || f > 1.0) throw ArgumentError("abnormal fractions must lie in [0, 1]");
  if (!c.coating_means.empty() && c.coating_means.size() != c.batch_sizes.size())
    throw ArgumentError("coating_means must be empty or have one entry per batch");
  if (c.image_width < 4 || c.image_height < 4)
    throw ArgumentError("synthetic images must be at least 4x4");
  if (c.severity_threshold <= 0.0 || c.severity_threshold > 1.0)
    throw ArgumentError("severity_threshold must lie in (0, 1]");
  if (c.anomaly_mix.size() != static_cast<std::size_t>(kAnomalyKindCount))
    throw ArgumentError("anomaly_mix needs one weight per anomaly kind");
  double mix_sum = 0.0;
  for (double w : c.anomaly_mix) {
    if (w < 0.0) throw ArgumentError("anomaly_mix weights must be nonnegative");
    mix_sum += w;
  }
  if (mix_sum <= 0.0) throw ArgumentError("anomaly_mix weights must not all be zero");
  if (!(c.normal_sev_min > 0.0 && c.normal_sev_min <= c.normal_sev_max &&
        c.normal_sev_max < c.severity_threshold))
    throw ArgumentError("normal severities must satisfy 0 < min <= max < threshold");
  if (!(c.abn_sev_min >= c.severity_threshold && c.abn_sev_min <= c.abn_sev_max &&
        c.abn_sev_max <= 1.0))
    throw ArgumentError("abnormal severities must satisfy threshold <= min <= max <= 1");
  if (c.normal_minor_prob < 0.0 || c.normal_minor_prob > 1.0)
    throw ArgumentError("normal_minor_prob must lie in [0, 1]");
  if (c.noise_sigma < 0.0 || c.coating_spread < 0.0)
    throw ArgumentError("noise_sigma and coating_spread must be nonnegative");
  if (c.background_mean <= 0.0 || c.background_mean > 65535.0)
    throw ArgumentError("background_mean must lie in (0, 65535]");
}

// ---- plate and injectors ------------------------------------------------

namespace detail {

// Open-beam strip height at top and bottom. Under 1% of the frame so the
// coating dominates the pixel distribution.
inline int strip_height(int image_height) { return std::max(1, image_height / 250); }

inline std::uint16_t to_count(double v) {
  const double r = std::floor(v + 0.5);
  if (r < 0.0) return 0;
  if (r > 65535.0) return 65535;
  return static_cast<std::uint16_t>(r);
}

inline void add_delta(RawImage16& img, int x, int y, double delta) {
  if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
  img.at(x, y) = to_count(static_cast<double>(img.at(x, y)) + delta);
}

inline void set_value(RawImage16& img, int x, int y, double v) {
  if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
  img.at(x, y) = to_count(v);
}

// The open-beam strips dominate the top 0.1% of the distribution, so a high
// percentile recovers the background level without access to the config.
inline double estimate_open_beam(const RawImage16& img) {
  return static_cast<double>(percentile(img, 99.9));
}

inline int pick_weighted(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace detail

// Anomaly-free plate around a given coating mean: smooth low-frequency mean
// variation plus white noise, with open-beam strips at the top and bottom.
inline RawImage16 clean_plate(const SynthConfig& c, double coating_mean, Rng& rng) {
  const int w = c.image_width;
  const int h = c.image_height;
  const int strip = detail::strip_height(h);
  const double jitter = rng.uniform(-25.0, 25.0);

  struct Wave {
    double amp, fx, fy, phase;
  };
  Wave waves[3];
  for (auto& wv : waves) {
    wv.amp = rng.uniform(10.0, 20.0);
    wv.fx = rng.uniform(0.0, 2.0);
    wv.fy = rng.uniform(0.0, 2.0);
    wv.phase = rng.uniform(0.0, 6.283185307179586);
  }

  RawImage16 img(w, h);
  for (int y = 0; y < h; ++y) {
    const bool open_beam = y < strip || y >= h - strip;
    for (int x = 0; x < w; ++x) {
      double mean;
      if (open_beam) {
        mean = c.background_mean;
      } else {
        mean = coating_mean + jitter;
        for (const auto& wv : waves)
          mean += wv.amp * std::cos(6.283185307179586 *
                                        (wv.fx * x / w + wv.fy * y / h) +
                                    wv.phase);
      }
      img.at(x, y) = detail::to_count(mean + rng.normal(0.0, c.noise_sigma));
    }
  }
  return img;
}

namespace detail {

// Thin dark polyline. The full-scale path is drawn first; severity selects a
// prefix of it, so a higher severity on the same stream strictly grows the
// modified set.
inline void inject_scratch(RawImage16& img, double sev, Rng& rng) {
  const int w = img.width;
  const int h = img.height;
  const double seg = 0.18 * std::min(w, h);
  double x = rng.uniform(0.1 * w, 0.9 * w);
  double y = rng.uniform(0.1 * h, 0.9 * h);

  std::vector<std::pair<int, int>> pts;
  for (int s = 0; s < 4; ++s) {
    const double ang = rng.uniform(0.0, 6.283185307179586);
    const double len = rng.uniform(0.6, 1.4) * seg;
    const double nx = std::clamp(x + len * std::cos(ang), 0.0, w - 1.0);
    const double ny = std::clamp(y + len * std::sin(ang), 0.0, h - 1.0);
    const int steps = std::max(1, static_cast<int>(std::ceil(
                                      std::max(std::abs(nx - x), std::abs(ny - y)))));
    for (int i = 1; i <= steps; ++i) {
      const int px = static_cast<int>(std::floor(x + (nx - x) * i / steps + 0.5));
      const int py = static_cast<int>(std::floor(y + (ny - y) * i / steps + 0.5));
      if (pts.empty() || pts.back() != std::make_pair(px, py)) pts.emplace_back(px, py);
    }
    x = nx;
    y = ny;
  }
  if (pts.empty()) pts.emplace_back(static_cast<int>(x), static_cast<int>(y));

  const std::size_t used =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(sev * pts.size())));
  const int thick = 1 + static_cast<int>(sev * 1.5);
  const double delta = -sev * 1600.0;

  std::vector<char> painted(img.npixels(), 0);
  for (std::size_t i = 0; i < used && i < pts.size(); ++i)
    for (int dy = 0; dy < thick; ++dy)
      for (int dx = 0; dx < thick; ++dx) {
        const int px = pts[i].first + dx;
        const int py = pts[i].second + dy;
        if (px < 0 || px >= w || py < 0 || py >= h) continue;
        char& seen = painted[static_cast<std::size_t>(py) * w + px];
        if (seen) continue;
        seen = 1;
        add_delta(img, px, py, delta);
      }
}

// Bright straight streak across the coating, horizontal or vertical.
inline void inject_line(RawImage16& img, double sev, Rng& rng) {
  const int strip = strip_height(img.height);
  const bool horizontal = rng.uniform() < 0.5;
  const int span_lo = horizontal ? strip : 0;
  const int span_hi = horizontal ? img.height - strip : img.width;
  const int center =
      span_lo + static_cast<int>(rng.uniform(0.1, 0.9) * (span_hi - span_lo));
  const int thick = std::max(1, static_cast<int>(std::llround(sev * 4.0)));
  const double delta = sev * 20000.0;

  const int lo = center - (thick - 1) / 2;
  for (int t = 0; t < thick; ++t) {
    const int c0 = lo + t;
    if (horizontal) {
      if (c0 < strip || c0 >= img.height - strip) continue;
      for (int x0 = 0; x0 < img.width; ++x0) add_delta(img, x0, c0, delta);
    } else {
      if (c0 < 0 || c0 >= img.width) continue;
      for (int y0 = strip; y0 < img.height - strip; ++y0) add_delta(img, c0, y0, delta);
    }
  }
}

// Border notch pushed to the open-beam intensity.
inline void inject_edge_cut(RawImage16& img, double sev, Rng& rng) {
  const int w = img.width;
  const int h = img.height;
  const int edge = static_cast<int>(rng.uniform_int(4));  // 0 top 1 bottom 2 left 3 right
  const double along = rng.uniform(0.1, 0.9);
  const int depth = std::max(1, static_cast<int>(std::llround(sev * 0.15 * std::min(w, h))));
  const int half = std::max(1, static_cast<int>(std::llround(sev * 0.12 * std::max(w, h))));
  const double bg = estimate_open_beam(img);

  int x0, x1, y0, y1;
  if (edge <= 1) {
    const int cx = static_cast<int>(along * w);
    x0 = cx - half;
    x1 = cx + half;
    y0 = edge == 0 ? 0 : h - depth;
    y1 = edge == 0 ? depth : h;
  } else {
    const int cy = static_cast<int>(along * h);
    y0 = cy - half;
    y1 = cy + half;
    x0 = edge == 2 ? 0 : w - depth;
    x1 = edge == 2 ? depth : w;
  }
  for (int py = y0; py < y1; ++py)
    for (int px = x0; px < x1; ++px) set_value(img, px, py, bg);
}

// Soft dark blotch with a Gaussian profile.
inline void inject_smudge(RawImage16& img, double sev, Rng& rng) {
  const int w = img.width;
  const int h = img.height;
  const double cx = rng.uniform(0.15 * w, 0.85 * w);
  const double cy = rng.uniform(0.15 * h, 0.85 * h);
  const double sigma_full = rng.uniform(0.08, 0.14) * std::min(w, h);
  const double sigma = (0.25 + 0.75 * sev) * sigma_full;
  const double peak = -sev * 700.0;

  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  for (int py = static_cast<int>(cy) - r; py <= static_cast<int>(cy) + r; ++py)
    for (int px = static_cast<int>(cx) - r; px <= static_cast<int>(cx) + r; ++px) {
      const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
      add_delta(img, px, py, peak * std::exp(-d2 / (2.0 * sigma * sigma)));
    }
}

// Bright disc with a darker rim.
inline void inject_bubble(RawImage16& img, double sev, Rng& rng) {
  const int w = img.width;
  const int h = img.height;
  const double cx = rng.uniform(0.15 * w, 0.85 * w);
  const double cy = rng.uniform(0.15 * h, 0.85 * h);
  const double r_full = rng.uniform(0.04, 0.08) * std::min(w, h);
  const double r = std::max(1.0, sev * r_full);
  const double rim = r + 1.0 + sev * 2.0;

  const int box = static_cast<int>(std::ceil(rim)) + 1;
  for (int py = static_cast<int>(cy) - box; py <= static_cast<int>(cy) + box; ++py)
    for (int px = static_cast<int>(cx) - box; px <= static_cast<int>(cx) + box; ++px) {
      const double d = std::sqrt((px - cx) * (px - cx) + (py - cy) * (py - cy));
      if (d <= r)
        add_delta(img, px, py, sev * 12000.0);
      else if (d <= rim)
        add_delta(img, px, py, -sev * 600.0);
    }
}

// Coating fades toward the open-beam intensity over a rectangle.
inline void inject_missing_ink(RawImage16& img, double sev, Rng& rng) {
  const int w = img.width;
  const int h = img.height;
  const double cx = rng.uniform(0.2 * w, 0.8 * w);
  const double cy = rng.uniform(0.2 * h, 0.8 * h);
  const double w_full = rng.uniform(0.25, 0.35) * w;
  const double h_full = rng.uniform(0.15, 0.25) * h;
  const int rw = std::max(1, static_cast<int>(std::llround(sev * w_full)));
  const int rh = std::max(1, static_cast<int>(std::llround(sev * h_full)));
  const double bg = estimate_open_beam(img);

  const int x0 = static_cast<int>(cx) - rw / 2;
  const int y0 = static_cast<int>(cy) - rh / 2;
  for (int py = y0; py < y0 + rh; ++py)
    for (int px = x0; px < x0 + rw; ++px) {
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      const double v = img.at(px, py);
      set_value(img, px, py, v + sev * (bg - v));
    }
}

}  // namespace detail

inline RawImage16 inject_anomaly(const RawImage16& image, AnomalyKind kind, double severity,
                                 Rng& rng) {
  check_valid(image);
  if (!(severity > 0.0 && severity <= 1.0))
    throw ArgumentError("severity must lie in (0, 1]");
  RawImage16 out = image;
  switch (kind) {
    case AnomalyKind::scratch: detail::inject_scratch(out, severity, rng); break;
    case AnomalyKind::line: detail::inject_line(out, severity, rng); break;
    case AnomalyKind::edge_cut: detail::inject_edge_cut(out, severity, rng); break;
    case AnomalyKind::smudge: detail::inject_smudge(out, severity, rng); break;
    case AnomalyKind::bubble: detail::inject_bubble(out, severity, rng); break;
    case AnomalyKind::missing_ink: detail::inject_missing_ink(out, severity, rng); break;
  }
  return out;
}

// ---- dataset generation -------------------------------------------------

namespace detail {

inline std::vector<Injected> draw_anomaly_plan(const SynthConfig& c, bool abnormal, Rng& rng) {
  std::vector<Injected> plan;
  const auto minor = [&] {
    Injected m;
    m.kind = static_cast<AnomalyKind>(pick_weighted(c.anomaly_mix, rng));
    m.severity = rng.uniform(c.normal_sev_min, c.normal_sev_max);
    return m;
  };
  if (abnormal) {
    Injected major;
    major.kind = static_cast<AnomalyKind>(pick_weighted(c.anomaly_mix, rng));
    major.severity = rng.uniform(c.abn_sev_min, c.abn_sev_max);
    plan.push_back(major);
  }
  if (rng.uniform() < c.normal_minor_prob) plan.push_back(minor());
  return plan;
}

}  // namespace detail

// One fully determined sample: the per-sample stream drives the anomaly
// plan, the plate, and the injections, in that order.
inline std::pair<RawImage16, std::vector<Injected>> generate_sample(const SynthConfig& c,
                                                                    int batch_id,
                                                                    int sample_idx,
                                                                    double coating_mean,
                                                                    bool abnormal) {
  Rng rng(derive_seed(c.seed, stream::synth_sample, static_cast<std::uint64_t>(batch_id),
                      static_cast<std::uint64_t>(sample_idx)));
  const std::vector<Injected> plan = detail::draw_anomaly_plan(c, abnormal, rng);
  RawImage16 img = clean_plate(c, coating_mean, rng);
  for (const Injected& inj : plan) img = inject_anomaly(img, inj.kind, inj.severity, rng);
  return {std::move(img), plan};
}

// ---- index CSV ----------------------------------------------------------

namespace detail {

inline std::string format_injected(const std::vector<Injected>& injected) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < injected.size(); ++i) {
    if (i) out += ';';
    std::snprintf(buf, sizeof buf, "%s:%.17g", to_string(injected[i].kind),
                  injected[i].severity);
    out += buf;
  }
  return out;
}

inline std::vector<Injected> parse_injected(const std::string& field) {
  std::vector<Injected> out;
  std::size_t pos = 0;
  while (pos < field.size()) {
    std::size_t end = field.find(';', pos);
    if (end == std::string::npos) end = field.size();
    const std::string item = field.substr(pos, end - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ParseError("bad anomaly annotation \"" + item + "\"");
    Injected inj;
    inj.kind = anomaly_kind_from_string(item.substr(0, colon));
    const std::string sev = item.substr(colon + 1);
    std::size_t used = 0;
    try {
      inj.severity = std::stod(sev, &used);
    } catch (const std::exception&) {
      throw ParseError("bad severity \"" + sev + "\"");
    }
    if (used != sev.size()) throw ParseError("bad severity \"" + sev + "\"");
    out.push_back(inj);
    pos = end + 1;
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

}  // namespace detail

inline constexpr const char* kIndexHeader = "sample_id,batch_id,label,path,anomalies";

inline void save_index(const DatasetIndex& index, const std::filesystem::path& path) {
  std::string out = kIndexHeader;
  out += '\n';
  for (const SampleRecord& r : index.records) {
    out += r.sample_id;
    out += ',';
    out += std::to_string(r.batch_id);
    out += ',';
    out += to_string(r.label);
    out += ',';
    out += r.path;
    out += ',';
    out += detail::format_injected(r.injected);
    out += '\n';
  }
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

inline DatasetIndex load_index(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  std::string text(bytes.begin(), bytes.end());

  DatasetIndex index;
  index.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::set<std::string> seen;
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
      if (line != kIndexHeader)
        throw ParseError("bad index header \"" + line + "\"");
      first = false;
      continue;
    }
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 5) throw ParseError("index row needs 5 fields, got " +
                                        std::to_string(f.size()));
    SampleRecord rec;
    rec.sample_id = f[0];
    if (rec.sample_id.empty()) throw ParseError("empty sample_id");
    if (!seen.insert(rec.sample_id).second)
      throw ParseError("duplicate sample_id \"" + rec.sample_id + "\"");
    try {
      std::size_t used = 0;
      rec.batch_id = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
    } catch (const std::exception&) {
      throw ParseError("bad batch_id \"" + f[1] + "\"");
    }
    if (rec.batch_id < 1) throw ParseError("batch_id must be at least 1");
    rec.label = label_from_string(f[2]);
    rec.path = f[3];
    if (rec.path.empty()) throw ParseError("empty path for \"" + rec.sample_id + "\"");
    rec.injected = detail::parse_injected(f[4]);
    index.records.push_back(std::move(rec));
  }
  if (first) throw ParseError("index file is empty");
  return index;
}

// ---- full dataset -------------------------------------------------------

// Writes one PGM per sample under root/images plus root/index.csv. Per-batch
// coating means keep same-batch images more alike than cross-batch ones.
// Identical config (seed included) produces identical bytes.
inline DatasetIndex generate_dataset(const SynthConfig& c, const std::filesystem::path& root) {
  check_valid(c);
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  if (ec) throw IoError("cannot create " + (root / "images").string() + ": " + ec.message());

  DatasetIndex index;
  index.root = root;

  const int nbatches = static_cast<int>(c.batch_sizes.size());
  char buf[64];
  for (int b = 0; b < nbatches; ++b) {
    const int batch_id = b + 1;
    const int n = c.batch_sizes[b];
    Rng batch_rng(derive_seed(c.seed, stream::synth_batch, static_cast<std::uint64_t>(batch_id)));

    const double mean = c.coating_means.empty()
                            ? c.coating_base + batch_rng.uniform(-c.coating_spread,
                                                                 c.coating_spread)
                            : c.coating_means[b];

    const double frac = c.abnormal_fractions.size() == 1 ? c.abnormal_fractions[0]
                                                         : c.abnormal_fractions[b];
    const int abn_count = static_cast<int>(frac * n + 1e-9);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[batch_rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
    std::vector<char> abnormal(n, 0);
    for (int i = 0; i < abn_count; ++i) abnormal[order[i]] = 1;

    for (int i = 0; i < n; ++i) {
      auto [img, plan] = generate_sample(c, batch_id, i, mean, abnormal[i] != 0);

      SampleRecord rec;
      std::snprintf(buf, sizeof buf, "b%02d_s%03d", batch_id, i);
      rec.sample_id = buf;
      rec.batch_id = batch_id;
      rec.injected = std::move(plan);
      double max_sev = 0.0;
      for (const Injected& inj : rec.injected) max_sev = std::max(max_sev, inj.severity);
      rec.label = max_sev >= c.severity_threshold ? Label::abnormal : Label::normal;
      rec.path = std::string("images/") + rec.sample_id + ".pgm";

      save_pgm16(root / rec.path, img);
      index.records.push_back(std::move(rec));
    }
  }
  save_index(index, root / "index.csv");
  return index;
}

}  // namespace xrayqc
