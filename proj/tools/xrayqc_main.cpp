#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "xrayqc/cli.hpp"

// Flag values are collected as raw (key, value) strings and run through the
// same apply_kv() path as config-file lines, so precedence is simply
// defaults, then XRAYQC_SEED, then the file, then flags.

namespace {

struct KvCollector {
  std::vector<std::pair<std::string, std::string>> kvs;

  void opt(CLI::App* sub, const std::string& flag, const std::string& key,
           const std::string& desc) {
    sub->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { kvs.emplace_back(key, v); }, desc);
  }

  void flag(CLI::App* sub, const std::string& name, const std::string& key,
            const std::string& desc) {
    sub->add_flag_callback(
        name, [this, key] { kvs.emplace_back(key, "1"); }, desc);
  }
};

void add_common(KvCollector& kv, CLI::App* sub) {
  kv.opt(sub, "--seed", "seed", "root PRNG seed");
  kv.opt(sub, "--out", "out", "output directory");
  kv.opt(sub, "--jobs", "jobs", "worker threads for fold-parallel commands");
}

void add_train_keys(KvCollector& kv, CLI::App* sub) {
  kv.opt(sub, "--index", "index", "dataset index CSV");
  kv.opt(sub, "--method", "method", "conversion method 1..4");
  kv.opt(sub, "--g-min", "g_min", "global lower bound override");
  kv.opt(sub, "--g-max", "g_max", "global upper bound override");
  kv.opt(sub, "--epochs", "epochs", "training epochs");
  kv.opt(sub, "--lr0", "lr0", "initial learning rate");
  kv.opt(sub, "--decay-period", "decay_period", "epochs per learning-rate decay");
  kv.opt(sub, "--decay-factor", "decay_factor", "learning-rate decay factor");
  kv.opt(sub, "--minibatch", "minibatch", "mini-batch size");
  kv.opt(sub, "--flip-h-prob", "flip_h_prob", "horizontal flip probability");
  kv.opt(sub, "--flip-v-prob", "flip_v_prob", "vertical flip probability");
  kv.opt(sub, "--target-width", "target_width", "network input width");
  kv.opt(sub, "--target-height", "target_height", "network input height");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"X-ray electrode QC pipeline: synthesis, conversion, training, evaluation"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value config file (flags override it)");

  KvCollector kv;
  std::vector<std::string> ins;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(kv, synth);
  kv.opt(synth, "--batches", "batch_sizes", "comma-separated per-batch image counts");
  kv.opt(synth, "--abnormal-fractions", "abnormal_fractions",
         "abnormal fraction, one value or one per batch");
  kv.opt(synth, "--image-width", "image_width", "image width in pixels");
  kv.opt(synth, "--image-height", "image_height", "image height in pixels");
  kv.opt(synth, "--coating-base", "coating_base", "base coating intensity");
  kv.opt(synth, "--coating-means", "coating_means", "explicit per-batch coating means");
  kv.opt(synth, "--coating-spread", "coating_spread", "per-batch coating mean spread");
  kv.opt(synth, "--noise-sigma", "noise_sigma", "pixel noise sigma");
  kv.opt(synth, "--background-mean", "background_mean", "open-beam intensity");
  kv.opt(synth, "--severity-threshold", "severity_threshold",
         "severity at which a sample counts as abnormal");
  kv.opt(synth, "--anomaly-mix", "anomaly_mix", "six weights over anomaly kinds");
  kv.opt(synth, "--abn-sev-min", "abn_sev_min", "abnormal severity lower bound");
  kv.opt(synth, "--abn-sev-max", "abn_sev_max", "abnormal severity upper bound");
  kv.opt(synth, "--normal-sev-min", "normal_sev_min", "minor severity lower bound");
  kv.opt(synth, "--normal-sev-max", "normal_sev_max", "minor severity upper bound");
  kv.opt(synth, "--normal-minor-prob", "normal_minor_prob",
         "chance a sample carries a minor sub-threshold anomaly");

  CLI::App* stats = app.add_subcommand("stats", "per-image statistics CSV");
  add_common(kv, stats);
  stats->add_option("--in", ins, "input PGM image(s)");
  kv.flag(stats, "--full-hist", "full_hist", "emit all 65536 histogram bins");

  CLI::App* bounds = app.add_subcommand("bounds", "global conversion bounds from images");
  add_common(kv, bounds);
  bounds->add_option("--in", ins, "input PGM image(s)");
  kv.opt(bounds, "--index", "index", "dataset index CSV (alternative to --in)");

  CLI::App* convert = app.add_subcommand("convert", "16-bit to 8-bit conversion to PPM");
  add_common(kv, convert);
  convert->add_option("--in", ins, "input PGM image(s)");
  kv.opt(convert, "--method", "method", "conversion method 1..4");
  kv.opt(convert, "--g-min", "g_min", "global lower bound override");
  kv.opt(convert, "--g-max", "g_max", "global upper bound override");

  CLI::App* train = app.add_subcommand("train", "train the classifier head");
  add_common(kv, train);
  add_train_keys(kv, train);
  kv.opt(train, "--train-batches", "train_batches", "batch ids to train on (default: all)");

  CLI::App* predict = app.add_subcommand("predict", "classify images with a trained head");
  add_common(kv, predict);
  predict->add_option("--in", ins, "input PGM image(s)");
  kv.opt(predict, "--index", "index", "dataset index CSV (alternative to --in)");
  kv.opt(predict, "--params", "params", "head checkpoint from train");
  kv.opt(predict, "--method", "method", "conversion method 1..4");
  kv.opt(predict, "--g-min", "g_min", "global lower bound (as used in training)");
  kv.opt(predict, "--g-max", "g_max", "global upper bound (as used in training)");
  kv.opt(predict, "--target-width", "target_width", "network input width");
  kv.opt(predict, "--target-height", "target_height", "network input height");

  CLI::App* crossval = app.add_subcommand("crossval", "leave-one-batch-out cross-validation");
  add_common(kv, crossval);
  add_train_keys(kv, crossval);
  kv.flag(crossval, "--all-methods", "all_methods", "run all four conversion methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  xrayqc::RunConfig cfg;
  try {
    if (const char* env = std::getenv("XRAYQC_SEED")) xrayqc::apply_kv(cfg, "seed", env);

    std::string file_command;
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path))
        throw xrayqc::ConfigError("config file \"" + config_path + "\" does not exist");
      for (const auto& [k, v] : xrayqc::parse_config_file(config_path)) {
        if (k == "command") file_command = v;
        xrayqc::apply_kv(cfg, k, v);
      }
    }

    if (!app.get_subcommands().empty()) {
      const std::string sub = app.get_subcommands()[0]->get_name();
      if (!file_command.empty() && file_command != sub)
        throw xrayqc::ConfigError("config file says command=" + file_command + " but \"" +
                                  sub + "\" was invoked");
      cfg.command = sub;
    }

    for (const auto& [k, v] : kv.kvs) xrayqc::apply_kv(cfg, k, v);
    if (!ins.empty()) {
      std::string joined;
      for (std::size_t i = 0; i < ins.size(); ++i) {
        if (i) joined += ',';
        joined += ins[i];
      }
      xrayqc::apply_kv(cfg, "in", joined);
    }

    return xrayqc::run_command(cfg);
  } catch (const xrayqc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const xrayqc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
