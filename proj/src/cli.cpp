#include "volrob/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "volrob/harness.hpp"
#include "volrob/nifti.hpp"
#include "volrob/rng.hpp"

namespace volrob {

namespace {

struct Flags {
  std::string config_path;
  std::string eps = "8/255";
  std::string alpha;
  int steps = 20;
  std::string qmax = "30";
  int patch = 8;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string bands = "0:8,0:16,0:32,16:48,16:96";

  std::vector<std::string> model_args;  // "id=path" or "path"
  int phantoms = 0;
  int shape = 32;
  int classes = 3;
  std::uint64_t data_seed = 0;
  double noise = 0.05;
};

void add_attack_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--eps", f.eps, "L-inf budget, fraction (8/255) or decimal");
  cmd->add_option("--alpha", f.alpha, "Step size for iterative pixel attacks");
  cmd->add_option("--steps", f.steps, "Iterations for iterative attacks");
  cmd->add_option("--qmax", f.qmax, "Quantization bound for the frequency attack");
  cmd->add_option("--patch", f.patch, "Patch size for the frequency attack");
}

void add_dataset_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--phantoms", f.phantoms, "Generate this many phantom samples");
  cmd->add_option("--shape", f.shape, "Phantom cube side");
  cmd->add_option("--classes", f.classes, "Phantom class count");
  cmd->add_option("--data-seed", f.data_seed, "Phantom dataset seed");
  cmd->add_option("--noise", f.noise, "Phantom noise amplitude");
}

void add_io_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.seed, "Global seed");
  cmd->add_option("--out", f.out_dir, "Output directory");
}

std::vector<AttackConfig> default_attacks(const Flags& f) {
  const double eps = parse_rational(f.eps);
  const double alpha = f.alpha.empty() ? 0.0 : parse_rational(f.alpha);
  const double qmax = parse_rational(f.qmax);
  std::vector<AttackConfig> attacks;
  for (const char* name : {"gn", "fgsm", "pgd", "cospgd", "vafa"}) {
    AttackConfig a;
    a.kind = attack_kind_from_name(name);
    a.pixel.epsilon = eps;
    a.pixel.alpha = alpha;
    a.pixel.steps = a.kind == AttackKind::Fgsm ? 1 : f.steps;
    a.vafa.q_max = qmax;
    a.vafa.patch = f.patch;
    a.vafa.steps = f.steps;
    attacks.push_back(a);
  }
  return attacks;
}

ExperimentConfig resolve_config(const Flags& f, bool with_bands, bool seed_set) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_experiment_config(f.config_path);
    if (seed_set) cfg.seed = f.seed;
    if (cfg.out_dir.empty() || f.out_dir != "out") cfg.out_dir = f.out_dir;
  } else {
    require(!f.model_args.empty(), ErrKind::ConfigError,
            "either --config or at least one --model is required");
    require(f.phantoms > 0, ErrKind::ConfigError,
            "without --config, provide --phantoms to generate a dataset");
    PhantomSpec spec;
    spec.seed = f.data_seed;
    spec.shape = {f.shape, f.shape, f.shape};
    spec.num_classes = f.classes;
    spec.noise_amplitude = f.noise;
    cfg.dataset.phantom = spec;
    cfg.dataset.phantom_count = f.phantoms;
    cfg.window = spec.shape;
    for (const auto& arg : f.model_args) {
      ModelRef ref;
      const auto eq = arg.find('=');
      if (eq == std::string::npos) {
        ref.path = arg;
        ref.id = std::filesystem::path(arg).stem().string();
      } else {
        ref.id = arg.substr(0, eq);
        ref.path = arg.substr(eq + 1);
      }
      cfg.models.push_back(std::move(ref));
    }
    cfg.attacks = default_attacks(f);
    cfg.seed = f.seed;
    cfg.out_dir = f.out_dir;
  }
  if (cfg.attacks.empty()) cfg.attacks = default_attacks(f);
  if (with_bands && cfg.bands.empty()) cfg.bands = parse_bands(f.bands);
  return cfg;
}

int run_report(const RobustnessReport& report, const std::string& dir) {
  const auto written = emit_report(report, dir);
  for (const auto& p : written) std::cout << "wrote " << p << "\n";
  if (report.partial_failures > 0) {
    std::cerr << report.partial_failures << " sample(s) failed and were skipped\n";
    return 1;
  }
  return 0;
}

int cmd_phantom(const Flags& f, int count, const std::string& format) {
  require(count > 0, ErrKind::ConfigError, "--count must be >= 1");
  require(format == "nifti" || format == "raw", ErrKind::ConfigError,
          "--format must be nifti or raw");
  std::filesystem::create_directories(f.out_dir);
  nlohmann::json files = nlohmann::json::array();
  for (int k = 0; k < count; ++k) {
    PhantomSpec spec;
    spec.seed = derive_seed(f.seed, "dataset/phantoms/" + std::to_string(k));
    spec.shape = {f.shape, f.shape, f.shape};
    spec.num_classes = f.classes;
    spec.noise_amplitude = f.noise;
    const auto [image, labels] = generate_phantom(spec);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04d", k);
    const std::string ext = format == "nifti" ? ".nii" : ".raw";
    const std::string img_path = f.out_dir + "/img_" + stem + ext;
    const std::string lab_path = f.out_dir + "/lab_" + stem + ext;
    if (format == "nifti") {
      write_nifti(image, img_path);
      write_nifti(labels, lab_path);
    } else {
      write_raw(image, img_path, "phantom/" + std::to_string(spec.seed));
      write_raw(labels, lab_path, "phantom/" + std::to_string(spec.seed));
    }
    files.push_back({{"image", img_path}, {"label", lab_path}});
  }
  nlohmann::json manifest;
  manifest["name"] = "phantoms";
  manifest["normalization"] = "none";
  manifest["files"] = files;
  std::ofstream out(f.out_dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
  std::cout << "wrote " << count << " phantom pairs to " << f.out_dir << "\n";
  return 0;
}

std::vector<std::pair<Volume, LabelVolume>> dataset_from_flags(const Flags& f,
                                                               const std::string& manifest_path) {
  std::vector<std::pair<Volume, LabelVolume>> data;
  if (!manifest_path.empty()) {
    std::ifstream in(manifest_path);
    require(in.good(), ErrKind::MissingFile, "cannot open manifest '" + manifest_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrKind::ConfigError, "bad manifest: " + std::string(e.what()));
    }
    const std::string norm = j.value("normalization", "minmax");
    const NormalizationRule rule =
        norm == "none" ? NormalizationRule::None : NormalizationRule::MinMax;
    for (const auto& fj : j.at("files")) {
      Volume x = read_nifti_volume(fj.at("image").get<std::string>(), rule);
      LabelVolume y = read_nifti_labels(fj.at("label").get<std::string>());
      require_same_shape(x.shape, y.shape, "manifest image vs label");
      data.emplace_back(std::move(x), std::move(y));
    }
  } else {
    require(f.phantoms > 0, ErrKind::ConfigError, "provide --data <manifest> or --phantoms N");
    for (int k = 0; k < f.phantoms; ++k) {
      PhantomSpec spec;
      spec.seed = derive_seed(f.data_seed, "dataset/phantoms/" + std::to_string(k));
      spec.shape = {f.shape, f.shape, f.shape};
      spec.num_classes = f.classes;
      spec.noise_amplitude = f.noise;
      data.push_back(generate_phantom(spec));
    }
  }
  require(!data.empty(), ErrKind::ConfigError, "dataset is empty");
  return data;
}

int cmd_train(const Flags& f, const std::string& arch, const std::string& manifest_path,
              int epochs, double lr, const std::string& out_path) {
  const auto data = dataset_from_flags(f, manifest_path);
  const Shape3 window = data.front().first.shape;
  const int classes = data.front().second.num_classes;
  SegModel model = build_model(arch, classes, window, f.seed);
  const TrainResult result = train_model(model, data, epochs, lr, f.seed);
  save_model(result.model, out_path);
  std::cout << "wrote " << out_path << "\n";
  if (!result.epoch_loss.empty()) {
    std::cout << "loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back()
              << " over " << result.epoch_loss.size() << " epochs\n";
  }
  return 0;
}

int cmd_attack(const Flags& f, const std::string& model_path, const std::string& image_path,
               const std::string& label_path, const std::string& attack_arg,
               const std::string& normalize) {
  const SegModel model = load_model(model_path);
  const NormalizationRule rule =
      normalize == "minmax" ? NormalizationRule::MinMax : NormalizationRule::None;
  const Volume x = read_nifti_volume(image_path, rule);
  LabelVolume y = read_nifti_labels(label_path);
  y.num_classes = model.num_classes;
  y.validate();

  AttackConfig cfg;
  cfg.kind = attack_kind_from_name(attack_arg);
  cfg.pixel.epsilon = parse_rational(f.eps);
  cfg.pixel.alpha = f.alpha.empty() ? 0.0 : parse_rational(f.alpha);
  cfg.pixel.steps = cfg.kind == AttackKind::Fgsm ? 1 : f.steps;
  cfg.pixel.seed = f.seed;
  cfg.vafa.q_max = parse_rational(f.qmax);
  cfg.vafa.patch = f.patch;
  cfg.vafa.steps = f.steps;
  cfg.vafa.seed = f.seed;

  const AttackOutcome outcome = run_attack(model, x, y, cfg);
  std::filesystem::create_directories(f.out_dir);
  const std::string adv_path = f.out_dir + "/x_adv.nii";
  write_nifti(outcome.x_adv, adv_path);

  nlohmann::json stats;
  stats["attack"] = attack_config_to_json(cfg);
  stats["seed"] = f.seed;
  stats["linf"] = outcome.stats.linf;
  stats["l2"] = outcome.stats.l2;
  stats["mean_abs"] = outcome.stats.mean_abs;
  stats["trace"] = outcome.trace;
  const std::string stats_path = f.out_dir + "/stats.json";
  std::ofstream out(stats_path);
  out << stats.dump(2) << "\n";
  std::cout << "wrote " << adv_path << "\nwrote " << stats_path << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Adversarial robustness toolkit for volumetric segmentation"};
  app.require_subcommand(1);

  Flags f;

  auto* phantom_cmd = app.add_subcommand("phantom", "Generate phantom image/label pairs");
  int phantom_count = 4;
  std::string phantom_format = "nifti";
  phantom_cmd->add_option("--count", phantom_count, "Number of pairs");
  phantom_cmd->add_option("--format", phantom_format, "nifti or raw");
  phantom_cmd->add_option("--shape", f.shape, "Phantom cube side");
  phantom_cmd->add_option("--classes", f.classes, "Phantom class count");
  phantom_cmd->add_option("--noise", f.noise, "Phantom noise amplitude");
  add_io_flags(phantom_cmd, f);

  auto* train_cmd = app.add_subcommand("train", "Fit a toy segmentation model");
  std::string train_arch = "conv-seg";
  std::string train_manifest;
  int train_epochs = 10;
  double train_lr = 0.05;
  std::string train_out = "model.vrm";
  train_cmd->add_option("--arch", train_arch, "conv-seg | mix-seg | scan-seg");
  train_cmd->add_option("--data", train_manifest, "Dataset manifest JSON");
  train_cmd->add_option("--epochs", train_epochs, "Training epochs");
  train_cmd->add_option("--lr", train_lr, "Learning rate");
  train_cmd->add_option("--out-model", train_out, "Checkpoint path (.vrm)");
  add_dataset_flags(train_cmd, f);
  add_io_flags(train_cmd, f);

  auto* attack_cmd = app.add_subcommand("attack", "Craft one adversarial volume");
  std::string attack_model, attack_image, attack_label, attack_arg = "pgd";
  std::string attack_normalize = "none";
  attack_cmd->add_option("--model", attack_model, "Model checkpoint")->required();
  attack_cmd->add_option("--image", attack_image, "Input NIfTI image")->required();
  attack_cmd->add_option("--label", attack_label, "Ground-truth NIfTI labels")->required();
  attack_cmd->add_option("--attack", attack_arg, "gn | fgsm | pgd | cospgd | vafa");
  attack_cmd->add_option("--normalize", attack_normalize, "none | minmax");
  add_attack_flags(attack_cmd, f);
  add_io_flags(attack_cmd, f);

  auto add_experiment_flags = [&f](CLI::App* cmd, bool with_bands) {
    cmd->add_option("--config", f.config_path, "Experiment config JSON");
    cmd->add_option("--model", f.model_args, "Model checkpoint (repeatable), 'id=path' or path");
    if (with_bands) cmd->add_option("--bands", f.bands, "Frequency bands, e.g. 0:8,16:48");
    add_attack_flags(cmd, f);
    add_dataset_flags(cmd, f);
    add_io_flags(cmd, f);
  };

  auto* eval_cmd = app.add_subcommand("eval", "White-box robustness report");
  add_experiment_flags(eval_cmd, false);

  auto* transfer_cmd = app.add_subcommand("transfer", "Surrogate/target transfer matrix");
  add_experiment_flags(transfer_cmd, false);

  auto* freq_cmd = app.add_subcommand("freq", "Frequency-band analysis");
  add_experiment_flags(freq_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  const bool seed_set = [&]() {
    for (auto* cmd : {eval_cmd, transfer_cmd, freq_cmd}) {
      if (cmd->parsed() && cmd->count("--seed") > 0) return true;
    }
    return false;
  }();

  try {
    if (phantom_cmd->parsed()) return cmd_phantom(f, phantom_count, phantom_format);
    if (train_cmd->parsed())
      return cmd_train(f, train_arch, train_manifest, train_epochs, train_lr, train_out);
    if (attack_cmd->parsed())
      return cmd_attack(f, attack_model, attack_image, attack_label, attack_arg,
                        attack_normalize);
    if (eval_cmd->parsed())
      return run_report(whitebox_eval(resolve_config(f, false, seed_set)), f.out_dir);
    if (transfer_cmd->parsed())
      return run_report(transfer_eval(resolve_config(f, false, seed_set)), f.out_dir);
    if (freq_cmd->parsed())
      return run_report(frequency_analysis(resolve_config(f, true, seed_set)), f.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace volrob
