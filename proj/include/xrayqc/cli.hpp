#pragma once

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "xrayqc/config.hpp"
#include "xrayqc/evaluate.hpp"

// Command implementations behind the CLI. Each writes its artifacts under
// cfg.out; run_command() adds the replayable manifest once the command
// succeeds. Inputs are never modified.

namespace xrayqc {

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline ConversionMethod method_from_config(const RunConfig& c, int method_id,
                                           bool allow_compute) {
  ConversionMethod m;
  m.kind = method_kind_from_int(method_id);
  if (method_needs_global_bounds(m.kind)) {
    if (c.g_min) {
      m.bounds = bounds_from_config(c);
    } else if (!allow_compute) {
      throw ConfigError("method " + std::to_string(method_id) +
                        " needs g_min/g_max (the bounds used in training)");
    }
  }
  return m;
}

inline std::string bounds_csv(const GlobalBounds& b) {
  return "g_min,g_max\n" + std::to_string(b.g_min) + "," + std::to_string(b.g_max) + "\n";
}

}  // namespace detail

inline int cmd_synth(const RunConfig& c) {
  generate_dataset(c.synth, c.out);
  return 0;
}

inline int cmd_stats(const RunConfig& c) {
  std::string out = "min,max,mean,std";
  const int nbins = c.full_hist ? 65536 : 256;
  for (int k = 0; k < nbins; ++k) out += ",bin_" + std::to_string(k);
  out += '\n';

  char buf[64];
  for (const std::filesystem::path& p : c.inputs) {
    const RawImage16 img = load_pgm16(p);
    const ImageStats st = image_stats(img);
    std::snprintf(buf, sizeof buf, "%u,%u,%.17g,%.17g", st.min, st.max, st.mean, st.stddev);
    out += buf;
    if (c.full_hist) {
      const std::vector<std::uint64_t> full = full_histogram(img);
      for (std::uint64_t n : full) out += "," + std::to_string(n);
    } else {
      for (std::uint64_t n : st.histogram) out += "," + std::to_string(n);
    }
    out += '\n';
  }
  detail::write_text(c.out / "stats.csv", out);
  return 0;
}

inline int cmd_bounds(const RunConfig& c) {
  BoundsAccumulator acc;
  if (!c.inputs.empty()) {
    for (const std::filesystem::path& p : c.inputs) acc.add(load_pgm16(p));
  } else {
    const DatasetIndex index = load_index(c.index);
    for (const SampleRecord& r : index.records) acc.add(load_pgm16(image_path(index, r)));
  }
  detail::write_text(c.out / "bounds.csv", detail::bounds_csv(acc.finish()));
  return 0;
}

inline int cmd_convert(const RunConfig& c) {
  ConversionMethod m = detail::method_from_config(c, c.method, true);
  if (method_needs_global_bounds(m.kind) && !m.bounds) {
    BoundsAccumulator acc;
    for (const std::filesystem::path& p : c.inputs) acc.add(load_pgm16(p));
    m.bounds = acc.finish();
  }
  if (m.bounds) detail::write_text(c.out / "bounds.csv", detail::bounds_csv(*m.bounds));

  for (const std::filesystem::path& p : c.inputs) {
    const RawImage16 img = load_pgm16(p);
    save_ppm8(convert(img, m), c.out / (p.stem().string() + ".ppm"));
  }
  return 0;
}

inline int cmd_train(const RunConfig& c) {
  const DatasetIndex index = load_index(c.index);
  std::set<int> batches;
  if (c.train_batches.empty())
    for (const SampleRecord& r : index.records) batches.insert(r.batch_id);
  else
    batches.insert(c.train_batches.begin(), c.train_batches.end());

  const ConversionMethod m = detail::method_from_config(c, c.method, true);
  const BackboneSpec backbone = make_backbone(c.seed);
  const TrainResult result = train(index, batches, m, backbone, c.train, c.aug);

  save_params(result.params, c.out / "head.txt");
  save_history(result.history, c.out / "history.csv");
  if (result.bounds) detail::write_text(c.out / "bounds.csv", detail::bounds_csv(*result.bounds));
  return 0;
}

inline int cmd_predict(const RunConfig& c) {
  const ConversionMethod m = detail::method_from_config(c, c.method, false);
  const BackboneSpec backbone = make_backbone(c.seed);
  const HeadParams params = load_params(c.params);

  std::string out = "sample_id,prob_normal,prob_abnormal,predicted\n";
  char buf[96];
  const auto row = [&](const std::string& id, const RawImage16& img) {
    const Prediction pred = predict(img, m, backbone, params, c.aug);
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%s\n", id.c_str(), pred.probs[0],
                  pred.probs[1], to_string(pred.predicted_label));
    out += buf;
  };

  if (!c.inputs.empty()) {
    for (const std::filesystem::path& p : c.inputs) row(p.stem().string(), load_pgm16(p));
  } else {
    const DatasetIndex index = load_index(c.index);
    for (const SampleRecord& r : index.records)
      row(r.sample_id, load_pgm16(image_path(index, r)));
  }
  detail::write_text(c.out / "predictions.csv", out);
  return 0;
}

inline int cmd_crossval(const RunConfig& c) {
  const DatasetIndex index = load_index(c.index);

  const auto run_one = [&](int method_id, const std::string& report_name,
                           const std::string& bounds_name) {
    const ConversionMethod m = detail::method_from_config(c, method_id, true);
    const CvReport report = crossval_lobo(index, m, c.train, c.aug, c.jobs);
    save_report(report, c.out / report_name);
    bool any_bounds = false;
    for (const FoldResult& f : report.folds) any_bounds = any_bounds || f.bounds.has_value();
    if (any_bounds) save_fold_bounds(report, c.out / bounds_name);
    return report;
  };

  if (c.all_methods) {
    std::string cmp = "method,combined_balanced_accuracy\n";
    char buf[48];
    for (int m = 1; m <= 4; ++m) {
      const CvReport report =
          run_one(m, "report_method" + std::to_string(m) + ".csv",
                  "fold_bounds_method" + std::to_string(m) + ".csv");
      std::snprintf(buf, sizeof buf, "%d,%.2f\n", m, 100.0 * report.combined_balanced_accuracy);
      cmp += buf;
    }
    detail::write_text(c.out / "comparison.csv", cmp);
  } else {
    run_one(c.method, "report.csv", "fold_bounds.csv");
  }
  return 0;
}

// Validates, creates the output directory, dispatches, then records the
// manifest. Usage problems surface as ConfigError before anything is
// written.
inline int run_command(RunConfig& c) {
  validate_run_config(c);
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create " + c.out.string() + ": " + ec.message());

  int rc = 0;
  if (c.command == "synth")
    rc = cmd_synth(c);
  else if (c.command == "stats")
    rc = cmd_stats(c);
  else if (c.command == "bounds")
    rc = cmd_bounds(c);
  else if (c.command == "convert")
    rc = cmd_convert(c);
  else if (c.command == "train")
    rc = cmd_train(c);
  else if (c.command == "predict")
    rc = cmd_predict(c);
  else
    rc = cmd_crossval(c);

  if (rc == 0) write_manifest(c, c.out / "run-manifest.txt");
  return rc;
}

}  // namespace xrayqc
