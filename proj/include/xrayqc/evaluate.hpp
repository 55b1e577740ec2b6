#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "xrayqc/convert.hpp"
#include "xrayqc/errors.hpp"
#include "xrayqc/model.hpp"
#include "xrayqc/synth.hpp"

// Confusion-matrix metrics (abnormal is the positive class) and
// leave-one-batch-out cross-validation. The combined score comes from the
// summed counts, not from averaging fold scores.

namespace xrayqc {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(const std::vector<Label>& predictions,
                                 const std::vector<Label>& labels) {
  if (predictions.empty()) throw ArgumentError("need at least one prediction");
  if (predictions.size() != labels.size())
    throw ArgumentError("predictions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::abnormal)
      ++(predictions[i] == Label::abnormal ? c.tp : c.fn);
    else
      ++(predictions[i] == Label::normal ? c.tn : c.fp);
  }
  return c;
}

// A rate whose denominator is zero is defined as 0; rate_degenerate reports
// when that rule fired so reports can flag it.
inline double tpr(const ConfusionCounts& c) {
  const std::int64_t d = c.tp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

inline double tnr(const ConfusionCounts& c) {
  const std::int64_t d = c.tn + c.fp;
  return d == 0 ? 0.0 : static_cast<double>(c.tn) / static_cast<double>(d);
}

inline bool rate_degenerate(const ConfusionCounts& c) {
  return c.tp + c.fn == 0 || c.tn + c.fp == 0;
}

inline double balanced_accuracy(const ConfusionCounts& c) { return (tpr(c) + tnr(c)) / 2.0; }

inline double accuracy(const ConfusionCounts& c) {
  const std::int64_t t = c.total();
  return t == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(t);
}

// ---- leave-one-batch-out cross-validation --------------------------------

struct FoldResult {
  int held_out_batch = 0;
  ConfusionCounts counts;
  double balanced_accuracy = 0.0;
  bool rate_degenerate = false;    // some test rate had a zero denominator
  bool train_degenerate = false;   // training split had one class; constant fallback
  std::optional<GlobalBounds> bounds;  // training-only bounds (methods 2 and 4)
};

struct CvReport {
  std::vector<FoldResult> folds;
  ConfusionCounts combined_counts;
  double combined_balanced_accuracy = 0.0;
};

namespace detail {

inline FoldResult run_fold(const DatasetIndex& index, int held_out,
                           const std::set<int>& all_batches, const ConversionMethod& method,
                           const BackboneSpec& backbone, const TrainConfig& cfg,
                           const AugmentParams& aug) {
  std::set<int> train_batches = all_batches;
  train_batches.erase(held_out);

  FoldResult fold;
  fold.held_out_batch = held_out;

  std::vector<const SampleRecord*> test;
  for (const SampleRecord& r : index.records)
    if (r.batch_id == held_out) test.push_back(&r);

  bool has_normal = false, has_abnormal = false;
  for (const SampleRecord& r : index.records)
    if (train_batches.count(r.batch_id))
      (r.label == Label::normal ? has_normal : has_abnormal) = true;

  std::vector<Label> predictions;
  std::vector<Label> labels;
  predictions.reserve(test.size());
  labels.reserve(test.size());

  if (has_normal && has_abnormal) {
    const TrainResult trained = train(index, train_batches, method, backbone, cfg, aug);
    fold.bounds = trained.bounds;
    ConversionMethod resolved = method;
    resolved.bounds = trained.bounds;
    for (const SampleRecord* r : test) {
      const RawImage16 img = load_pgm16(image_path(index, *r));
      predictions.push_back(
          predict(img, resolved, backbone, trained.params, aug).predicted_label);
      labels.push_back(r->label);
    }
  } else {
    // Single-class training split: fall back to the constant classifier
    // that always answers the only class seen.
    fold.train_degenerate = true;
    const Label constant = has_abnormal ? Label::abnormal : Label::normal;
    if (method_needs_global_bounds(method.kind)) {
      if (method.bounds) {
        fold.bounds = method.bounds;
      } else {
        BoundsAccumulator acc;
        for (const SampleRecord& r : index.records)
          if (train_batches.count(r.batch_id)) acc.add(load_pgm16(image_path(index, r)));
        fold.bounds = acc.finish();
      }
    }
    for (const SampleRecord* r : test) {
      predictions.push_back(constant);
      labels.push_back(r->label);
    }
  }

  fold.counts = confusion(predictions, labels);
  fold.balanced_accuracy = balanced_accuracy(fold.counts);
  fold.rate_degenerate = rate_degenerate(fold.counts);
  return fold;
}

}  // namespace detail

// One fold per batch id, each trained on the remaining batches. Global
// bounds for methods 2 and 4 are recomputed per fold from the training
// batches only, never from the held-out batch. `jobs` folds run
// concurrently; the result is identical to the sequential one.
inline CvReport crossval_lobo(const DatasetIndex& index, const ConversionMethod& method,
                              const TrainConfig& cfg, const AugmentParams& aug, int jobs = 1) {
  if (jobs < 1) throw ArgumentError("jobs must be at least 1");
  std::set<int> batches;
  for (const SampleRecord& r : index.records) batches.insert(r.batch_id);
  if (batches.size() < 2)
    throw ConfigError("leave-one-batch-out needs at least 2 batches, got " +
                      std::to_string(batches.size()));

  const BackboneSpec backbone = make_backbone(cfg.seed);

  const std::vector<int> batch_list(batches.begin(), batches.end());
  std::vector<FoldResult> folds(batch_list.size());
  std::vector<std::exception_ptr> errors(batch_list.size());

  const auto worker = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < batch_list.size(); i += step) {
      try {
        folds[i] = detail::run_fold(index, batch_list[i], batches, method, backbone, cfg, aug);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), batch_list.size());
  if (nthreads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker, t, nthreads);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  CvReport report;
  report.folds = std::move(folds);
  for (const FoldResult& f : report.folds) report.combined_counts += f.counts;
  report.combined_balanced_accuracy = balanced_accuracy(report.combined_counts);
  return report;
}

// ---- report CSV ----------------------------------------------------------

// One row per fold plus an overall row; balanced accuracy as a percentage
// with 2 decimals. The trailing degenerate column marks folds where a rate
// denominator was zero or training fell back to the constant classifier.
inline void save_report(const CvReport& cv, const std::filesystem::path& path) {
  std::string out = "batch,tp,fp,tn,fn,balanced_accuracy,degenerate\n";
  char buf[160];
  for (const FoldResult& f : cv.folds) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%lld,%lld,%lld,%.2f,%d\n", f.held_out_batch,
                  static_cast<long long>(f.counts.tp), static_cast<long long>(f.counts.fp),
                  static_cast<long long>(f.counts.tn), static_cast<long long>(f.counts.fn),
                  100.0 * f.balanced_accuracy, f.rate_degenerate || f.train_degenerate ? 1 : 0);
    out += buf;
  }
  const ConfusionCounts& c = cv.combined_counts;
  std::snprintf(buf, sizeof buf, "overall,%lld,%lld,%lld,%lld,%.2f,%d\n",
                static_cast<long long>(c.tp), static_cast<long long>(c.fp),
                static_cast<long long>(c.tn), static_cast<long long>(c.fn),
                100.0 * cv.combined_balanced_accuracy, rate_degenerate(c) ? 1 : 0);
  out += buf;
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

// Per-fold training bounds (methods 2 and 4): batch,g_min,g_max.
inline void save_fold_bounds(const CvReport& cv, const std::filesystem::path& path) {
  std::string out = "batch,g_min,g_max\n";
  for (const FoldResult& f : cv.folds) {
    if (!f.bounds) continue;
    out += std::to_string(f.held_out_batch);
    out += ',';
    out += std::to_string(f.bounds->g_min);
    out += ',';
    out += std::to_string(f.bounds->g_max);
    out += '\n';
  }
  detail::write_file_bytes(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

}  // namespace xrayqc
