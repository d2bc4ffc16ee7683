// smgaa: dataset generation, training, attacks, evaluation, defense, sweeps
// and rendering from one config-driven entry point.
//
// Settings come from `--config FILE` (key = value), then `--set key=value`,
// then the dedicated flags; later sources win. Every run writes the merged
// settings to <out>/config.txt and a provenance record to <out>/provenance.txt.

#include <fftw3.h>
#include <png.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smgaa/smgaa.hpp"

namespace fs = std::filesystem;
using namespace smgaa;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutputRootEnv = "SMGAA_OUTPUT_ROOT";

enum ExitCode : int {
  kFailure = 1,
  kBadConfig = 3,
  kMissingCheckpoint = 4,
  kMissingInput = 5,
};

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  std::string command_line;

  // subcommand flags; unset ones leave the config alone
  std::string data, checkpoint, net, theta, image, attacks, mode, key, values, param, deltas;
  std::vector<std::string> transfer;
  std::optional<int> scatterers, population, iterations, epochs, samples, repeats, sample, classes;
  std::optional<double> epsilon, fraction, cap_db;
};

// ---------------------------------------------------------------------------
// Settings and artifacts

Config load_settings(const Options& o) {
  Config c;
  if (!o.config_file.empty()) {
    std::ifstream probe(o.config_file);
    if (!probe) throw CliError(kBadConfig, "cannot read config file: " + o.config_file);
    try {
      c = Config::parse(probe, o.config_file);
    } catch (const ConfigError& e) {
      throw CliError(kBadConfig, std::string("invalid config file: ") + e.what());
    }
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw CliError(kBadConfig, "--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto put = [&](const char* key, const auto& v) {
    if (v) c.set(key, *v);
  };
  auto put_str = [&](const char* key, const std::string& v) {
    if (!v.empty()) c.set(key, v);
  };
  put("seed", o.seed);
  put_str("paths.out", o.out);
  put_str("paths.data", o.data);
  put_str("paths.checkpoint", o.checkpoint);
  put_str("paths.theta", o.theta);
  put_str("paths.image", o.image);
  put_str("net.name", o.net);
  put_str("eval.attacks", o.attacks);
  put_str("sweep.mode", o.mode);
  put_str("sweep.key", o.key);
  put_str("sweep.values", o.values);
  put_str("sweep.param", o.param);
  put_str("sweep.deltas", o.deltas);
  put("attack.scatterers", o.scatterers);
  put("attack.population", o.population);
  put("attack.max_iterations", o.iterations);
  put("attack.amplitude_cap_db", o.cap_db);
  put("train.epochs", o.epochs);
  put("eval.samples", o.samples);
  put("sweep.repeats", o.repeats);
  put("sweep.sample", o.sample);
  put("dataset.classes", o.classes);
  put("linf.epsilon", o.epsilon);
  put("defense.fraction", o.fraction);
  // the global seed feeds every module seed that was not set explicitly
  const auto seed = c.get<std::uint64_t>("seed", 1);
  c.set("seed", seed);
  for (const char* k : {"dataset.seed", "train.seed", "net.seed", "attack.seed", "linf.seed"}) {
    if (!c.has(k)) c.set(k, seed);
  }
  return c;
}

template <typename F>
auto config_step(const char* what, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw CliError(kBadConfig, std::string(what) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(kBadConfig, std::string(what) + ": " + e.what());
  }
}

fs::path output_dir(const Config& c, const std::string& sub) {
  if (c.has("paths.out")) return c.require<std::string>("paths.out");
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "smgaa-runs") / sub;
}

fs::path prepare_output(const Config& c, const std::string& sub) {
  const auto dir = output_dir(c, sub);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(kFailure, "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CliError(kFailure, "cannot write " + path.string());
  os << text;
  if (!os) throw CliError(kFailure, "write failed: " + path.string());
}

std::string library_versions() {
  std::ostringstream os;
  os << "compiler = " << __VERSION__ << '\n';
  os << "eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
  os << "fftw = " << fftw_version << '\n';
  os << "libpng = " << PNG_LIBPNG_VER_STRING << '\n';
  return os.str();
}

/// config.txt (exactly the settings used) and provenance.txt next to the outputs.
void record_run(const fs::path& dir, const std::string& sub, const Config& used, const Options& o) {
  used.save(dir / "config.txt");
  std::ostringstream os;
  os << "tool = smgaa " << kVersion << '\n';
  os << "subcommand = " << sub << '\n';
  os << "seed = " << used.require<std::uint64_t>("seed") << '\n';
  os << "workers = " << (o.workers ? o.workers : default_workers()) << '\n';
  os << "command = " << o.command_line << '\n';
  os << library_versions();
  write_text(dir / "provenance.txt", os.str());
}

fs::path require_path(const Config& c, const char* key, const char* flag) {
  if (!c.has(key)) throw CliError(kMissingInput, std::string("missing required ") + flag + " (config key " + key + ")");
  return c.require<std::string>(key);
}

LoadedDataset open_dataset(const Config& c) {
  const auto dir = require_path(c, "paths.data", "--data");
  if (!fs::exists(dir / "manifest.txt")) throw CliError(kMissingInput, "dataset not found: " + dir.string());
  return load_dataset(dir);
}

fs::path checkpoint_path(const Config& c) {
  const auto p = require_path(c, "paths.checkpoint", "--checkpoint");
  if (!fs::is_regular_file(p)) throw CliError(kMissingCheckpoint, "checkpoint not found: " + p.string());
  return p;
}

Classifier open_checkpoint(const fs::path& p) {
  try {
    return load_checkpoint(p);
  } catch (const std::runtime_error& e) {
    throw CliError(kMissingCheckpoint, "unusable checkpoint " + p.string() + ": " + e.what());
  }
}

std::span<const Sample> eval_subset(const Config& c, const std::vector<Sample>& test) {
  const auto n = c.get<std::size_t>("eval.samples", 0);
  return {test.data(), n == 0 ? test.size() : std::min(n, test.size())};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

AttackSpec attack_spec(const Config& c, const std::string& name) {
  return config_step("attack settings", [&] {
    if (name.rfind("smgaa-", 0) == 0) {
      Config with_n = c;
      with_n.set("attack.scatterers", name.substr(6));
      return AttackSpec::with_config(name, AttackConfig::from_config(with_n));
    }
    return AttackSpec::baseline(LinfConfig::from_config(c, linf_method_from_string(name)));
  });
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_data(const Options& o) {
  Config c = load_settings(o);
  const auto cfg = config_step("dataset settings", [&] { return DatasetConfig::from_config(c); });
  c.merge(cfg.to_config());
  const auto dir = prepare_output(c, "dataset");
  const auto ds = generate_dataset(cfg, dir);
  record_run(dir, "gen-data", c, o);
  std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size() << " test samples to " << dir << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  Config c = load_settings(o);
  const auto data = open_dataset(c);
  const auto tcfg = config_step("training settings", [&] { return TrainConfig::from_config(c); });
  const auto name = c.get<std::string>("net.name", "aconv-a");
  auto ncfg = config_step("network settings", [&] {
    return NetworkConfig::by_name(name, data.config.classes, data.config.image_size);
  });
  c.merge(tcfg.to_config());
  c.set("net.name", name);
  const auto dir = prepare_output(c, "train");

  const auto t0 = std::chrono::steady_clock::now();
  Classifier net(ncfg, c.require<std::uint64_t>("net.seed"));
  const auto rep = train(net, std::span<const Sample>(data.train), tcfg);
  const double train_acc = accuracy(net, std::span<const Sample>(data.train));
  const double test_acc = accuracy(net, std::span<const Sample>(data.test));
  const auto ckpt = c.has("paths.checkpoint") ? fs::path(c.require<std::string>("paths.checkpoint")) : dir / "model.bin";
  save_checkpoint(ckpt, net);

  std::ostringstream m;
  m << "net = " << name << '\n';
  m << "train_accuracy = " << format_double(train_acc) << '\n';
  m << "test_accuracy = " << format_double(test_acc) << '\n';
  for (const auto& e : rep.epochs) {
    m << "epoch." << e.epoch << ".loss = " << format_double(e.mean_loss) << '\n';
    m << "epoch." << e.epoch << ".train_accuracy = " << format_double(e.train_accuracy) << '\n';
  }
  write_text(dir / "metrics.txt", m.str());
  record_run(dir, "train", c, o);
  std::cout << "test accuracy " << test_acc << " after " << tcfg.epochs << " epochs (" << seconds_since(t0)
            << " s); checkpoint " << ckpt << '\n';
  return 0;
}

int cmd_attack(const Options& o) {
  Config c = load_settings(o);
  const auto ckpt = checkpoint_path(c);
  const auto data = open_dataset(c);
  const auto net = open_checkpoint(ckpt);
  const auto n = c.get<int>("attack.scatterers", 1);
  const auto spec = attack_spec(c, "smgaa-" + std::to_string(n));
  c.merge(spec.smgaa.to_config());
  const auto dir = prepare_output(c, "attack");
  const Imager imager(data.config.imaging);
  const auto samples = eval_subset(c, data.test);

  const auto t0 = std::chrono::steady_clock::now();
  const auto records = attack_set(net, samples, spec, imager, o.workers);
  fs::create_directories(dir / "records");
  for (const auto& r : records) {
    if (r.skipped) continue;
    AttackResult res;
    res.status = r.success() ? AttackStatus::Success : AttackStatus::Failure;
    res.theta = r.theta;
    res.adversarial = r.adversarial;
    res.ground_truth = r.label;
    res.predicted = r.predicted;
    res.confidence = r.label_confidence;
    res.iterations = r.iterations;
    char stem[16];
    std::snprintf(stem, sizeof stem, "%06zu", r.index);
    write_attack_result(dir / "records" / stem, res);
  }
  auto report = make_report(spec.name, net.classes(), records);
  const auto suite = default_interference_suite();
  if (report.attacked > 0) add_interference(report, net, records, suite, o.workers);
  write_text(dir / "report.txt", report.to_text());
  record_run(dir, "attack", c, o);
  std::cout << spec.name << ": fooled " << report.fooled << " / " << report.attacked << " (" << report.fooling_rate
            << ") in " << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_eval(const Options& o) {
  Config c = load_settings(o);
  const auto ckpt = checkpoint_path(c);
  std::vector<fs::path> others;
  for (const auto& p : o.transfer) {
    if (!fs::is_regular_file(p)) throw CliError(kMissingCheckpoint, "checkpoint not found: " + p);
    others.emplace_back(p);
  }
  const auto data = open_dataset(c);
  const auto net = open_checkpoint(ckpt);
  const auto names = split(c.get<std::string>("eval.attacks", "smgaa-1,smgaa-2,smgaa-3,pgd"), ',');
  std::vector<AttackSpec> specs;
  for (const auto& n : names) specs.push_back(attack_spec(c, n));
  c.set("eval.attacks", c.get<std::string>("eval.attacks", "smgaa-1,smgaa-2,smgaa-3,pgd"));
  c.merge(AttackConfig::from_config(c).to_config());
  c.merge(LinfConfig::from_config(c, LinfMethod::Pgd).to_config());
  const auto dir = prepare_output(c, "eval");
  const Imager imager(data.config.imaging);
  const auto samples = eval_subset(c, data.test);
  const auto suite = default_interference_suite();

  std::ostringstream summary;
  summary << "clean_accuracy = " << format_double(accuracy(net, samples)) << '\n';
  for (const auto& spec : specs) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto records = attack_set(net, samples, spec, imager, o.workers);
    auto report = make_report(spec.name, net.classes(), records);
    if (report.attacked > 0) add_interference(report, net, records, suite, o.workers);
    write_text(dir / ("report." + spec.name + ".txt"), report.to_text());
    summary << spec.name << ".fooling_rate = " << format_double(report.fooling_rate) << '\n';
    std::cout << spec.name << ": " << report.fooling_rate << " (" << seconds_since(t0) << " s)\n";
  }
  write_text(dir / "summary.txt", summary.str());

  if (!others.empty()) {
    std::vector<Classifier> nets{net};
    for (const auto& p : others) nets.push_back(open_checkpoint(p));
    std::vector<const Classifier*> ptrs;
    for (const auto& n : nets) ptrs.push_back(&n);
    const auto spec = attack_spec(c, "smgaa-3");
    const auto m = transfer_matrix<float>(ptrs, ptrs, spec, samples, imager, o.workers);
    std::ostringstream t;
    t << "nets = " << ckpt.string();
    for (const auto& p : others) t << ',' << p.string();
    t << '\n';
    for (std::size_t i = 0; i < m.rate.size(); ++i) {
      t << "transfer." << i << " =";
      for (std::size_t j = 0; j < m.rate[i].size(); ++j) t << (j ? "," : " ") << format_double(m.rate[i][j]);
      t << '\n';
    }
    write_text(dir / "transfer.txt", t.str());
  }
  record_run(dir, "eval", c, o);
  return 0;
}

int cmd_defend(const Options& o) {
  Config c = load_settings(o);
  std::optional<fs::path> normal_ckpt;
  if (c.has("paths.checkpoint")) normal_ckpt = checkpoint_path(c);
  const auto data = open_dataset(c);
  const auto tcfg = config_step("training settings", [&] { return TrainConfig::from_config(c); });
  const auto name = c.get<std::string>("net.name", "aconv-a");
  const auto ncfg = config_step("network settings", [&] {
    return NetworkConfig::by_name(name, data.config.classes, data.config.image_size);
  });

  DefenseConfig dcfg;
  dcfg.training = tcfg;
  dcfg.workers = o.workers;
  dcfg.fraction = c.get("defense.fraction", dcfg.fraction);
  dcfg.include_clean = c.get("defense.include_clean", dcfg.include_clean);
  const auto generator = c.get<std::string>("defense.generator", "smgaa");
  if (generator == "smgaa") {
    dcfg.generator = AttackSpec::scatterers(c.get("defense.scatterers", 3), c.get("defense.population", 1),
                                            c.get("defense.iterations", 20), c.require<std::uint64_t>("attack.seed"));
  } else {
    dcfg.generator = attack_spec(c, generator);
  }
  config_step("defense settings", [&] {
    dcfg.validate();
    return 0;
  });
  c.merge(tcfg.to_config());
  c.set("net.name", name);
  c.set("defense.generator", generator);
  c.set("defense.fraction", dcfg.fraction);
  c.set("defense.include_clean", dcfg.include_clean);
  const auto dir = prepare_output(c, "defend");
  const Imager imager(data.config.imaging);
  const auto seed = c.require<std::uint64_t>("net.seed");

  Classifier normal;
  if (normal_ckpt) {
    normal = open_checkpoint(*normal_ckpt);
  } else {
    normal = Classifier(ncfg, seed);
    train(normal, std::span<const Sample>(data.train), tcfg);
    save_checkpoint(dir / "normal.bin", normal);
  }
  const auto t0 = std::chrono::steady_clock::now();
  Classifier defended(ncfg, seed);
  const auto rep = adversarial_train(defended, std::span<const Sample>(data.train), dcfg, imager);
  save_checkpoint(dir / "defended.bin", defended);
  std::cout << "defended training: " << seconds_since(t0) << " s\n";

  std::ostringstream log;
  for (const auto& e : rep.epochs) {
    log << "epoch." << e.epoch << ".selected = " << e.selected << '\n';
    log << "epoch." << e.epoch << ".perturbed = " << e.perturbed << '\n';
    log << "epoch." << e.epoch << ".failed = " << e.failed << '\n';
    log << "epoch." << e.epoch << ".skipped = " << e.skipped << '\n';
    log << "epoch." << e.epoch << ".loss = " << format_double(rep.training.epochs[std::size_t(e.epoch)].mean_loss)
        << '\n';
  }
  write_text(dir / "defense_log.txt", log.str());

  const auto pgd_cfg = config_step("linf settings", [&] { return LinfConfig::from_config(c, LinfMethod::Pgd); });
  const auto attacks = defense_attack_suite(c.get("eval.population", 20), c.get("eval.iterations", 90), pgd_cfg,
                                            c.require<std::uint64_t>("attack.seed"));
  const auto cmp = evaluate_defense(normal, defended, attacks, eval_subset(c, data.test), imager, o.workers);
  write_text(dir / "comparison.txt", cmp.to_text());
  record_run(dir, "defend", c, o);
  std::cout << cmp.to_text();
  return 0;
}

int cmd_sweep(const Options& o) {
  Config c = load_settings(o);
  const auto ckpt = checkpoint_path(c);
  const auto data = open_dataset(c);
  const auto net = open_checkpoint(ckpt);
  const auto mode = c.get<std::string>("sweep.mode", "config");
  c.set("sweep.mode", mode);
  const Imager imager(data.config.imaging);
  const auto samples = eval_subset(c, data.test);
  const auto base = config_step("attack settings", [&] { return AttackConfig::from_config(c); });
  std::ostringstream out;

  if (mode == "config") {
    // one attack run per value of an arbitrary key, e.g. attack.amplitude_cap_db
    const auto key = c.get<std::string>("sweep.key", "attack.amplitude_cap_db");
    const auto values = split(c.get<std::string>("sweep.values", "0;0.5;1;1.5"), ';');
    if (values.empty()) throw CliError(kBadConfig, "sweep.values is empty");
    c.set("sweep.key", key);
    for (const auto& v : values) {
      Config variant = c;
      variant.set(key, v);
      const auto spec = AttackSpec::with_config("smgaa-" + std::to_string(base.scatterers),
                                                config_step("attack settings", [&] {
                                                  return AttackConfig::from_config(variant);
                                                }));
      const auto records = attack_set(net, samples, spec, imager, o.workers);
      out << key << '[' << v << "].fooling_rate = " << format_double(fooling_rate(records)) << '\n';
    }
  } else if (mode == "sensitivity") {
    const auto pname = c.get<std::string>("sweep.param", "alpha");
    std::size_t param = kParamCount;
    for (std::size_t k = 0; k < kParamCount; ++k)
      if (kParamNames[k] == pname) param = k;
    if (param == kParamCount) throw CliError(kBadConfig, "unknown sweep.param: " + pname);
    const auto deltas = config_step("sweep.deltas", [&] {
      return parse_double_list("sweep.deltas", c.get<std::string>("sweep.deltas", "-1,-0.5,0,0.5,1"));
    });
    const bool absolute = c.get("sweep.absolute", false);
    const auto spec = AttackSpec::with_config("smgaa-" + std::to_string(base.scatterers), base);
    const auto records = attack_set(net, samples, spec, imager, o.workers);
    std::vector<std::size_t> kept(deltas.size(), 0), valid(deltas.size(), 0);
    std::size_t successes = 0;
    for (const auto& r : records) {
      if (!r.success()) continue;
      ++successes;
      const auto& s = samples[r.index];
      AttackResult res;
      res.status = AttackStatus::Success;
      res.theta = r.theta;
      const auto pts = sensitivity_sweep(net, AttackTarget{s.image, s.label, s.mask}, res, imager, param, deltas,
                                         base.bounds, absolute ? SweepMode::Value : SweepMode::Offset);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        valid[i] += pts[i].in_bounds;
        kept[i] += pts[i].success;
      }
    }
    out << "param = " << pname << '\n' << "successful_attacks = " << successes << '\n';
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const double rate = valid[i] ? double(kept[i]) / double(valid[i]) : 0.0;
      out << "delta[" << format_double(deltas[i]) << "].in_bounds = " << valid[i] << '\n';
      out << "delta[" << format_double(deltas[i]) << "].retention = " << format_double(rate) << '\n';
    }
  } else if (mode == "heatmap") {
    const auto idx = c.get<std::size_t>("sweep.sample", 0);
    if (idx >= data.test.size()) throw CliError(kBadConfig, "sweep.sample out of range");
    const auto repeats = c.get<int>("sweep.repeats", 100);
    const auto& s = data.test[idx];
    const auto map = vulnerability_heatmap(net, AttackTarget{s.image, s.label, s.mask}, imager, base, repeats,
                                           base.confidence_threshold, o.workers);
    double mass = 0.0;
    for (double v : map) mass += v;
    out << "sample = " << idx << '\n' << "repeats = " << repeats << '\n' << "successful_runs = " << mass << '\n';
    const auto dir = prepare_output(c, "sweep");
    write_float_image(dir / "heatmap.img", map);
    write_png16(dir / "heatmap.png", map);
  } else {
    throw CliError(kBadConfig, "unknown sweep.mode: " + mode + " (config, sensitivity, heatmap)");
  }
  c.merge(base.to_config());
  const auto dir = prepare_output(c, "sweep");
  write_text(dir / "sweep.txt", out.str());
  record_run(dir, "sweep", c, o);
  std::cout << out.str();
  return 0;
}

int cmd_render(const Options& o) {
  Config c = load_settings(o);
  const auto theta_path = require_path(c, "paths.theta", "--theta");
  if (!fs::is_regular_file(theta_path)) throw CliError(kMissingInput, "theta file not found: " + theta_path.string());
  const auto theta = config_step("theta file", [&] { return read_theta(theta_path); });
  auto icfg = config_step("imaging settings", [&] { return DatasetConfig::from_config(c).imaging; });
  c.merge(DatasetConfig::from_config(c).to_config());
  const auto dir = prepare_output(c, "render");
  const Imager imager(icfg);
  const auto formed = imager.form_image(theta);
  Grid<double> out = formed;
  if (c.has("paths.image")) {
    const fs::path base = c.require<std::string>("paths.image");
    if (!fs::is_regular_file(base)) throw CliError(kMissingInput, "image not found: " + base.string());
    out = grid_cast<double>(fuse_perturbation(read_float_image(base), formed));
  }
  write_float_image(dir / "render.img", out);
  write_png16(dir / "render.png", out, max_value(out) > 0.0 ? 0.0 : 1.0);
  record_run(dir, "render", c, o);
  std::cout << "rendered " << theta.size() << " scatterer(s) to " << (dir / "render.png") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  Options o;
  for (int i = 0; i < argc; ++i) o.command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Scatterer-based adversarial attacks on a synthetic SAR benchmark"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("-c,--config", o.config_file, "Settings file (key = value lines)");
  app.add_option("-s,--set", o.sets, "Override one setting: key=value (repeatable)");
  app.add_option("-o,--out", o.out, std::string("Output directory (default: $") + kOutputRootEnv + "/<subcommand>)");
  app.add_option("--seed", o.seed, "Global seed for every module that has no explicit seed");
  app.add_option("-j,--workers", o.workers, "Worker threads (0 = all cores)");

  auto* gen = app.add_subcommand("gen-data", "Render the synthetic dataset");
  gen->add_option("--classes", o.classes, "Number of target classes");

  auto* tr = app.add_subcommand("train", "Train a classifier");
  tr->add_option("--data", o.data, "Dataset directory");
  tr->add_option("--net", o.net, "Architecture: aconv-a or aconv-b");
  tr->add_option("--epochs", o.epochs, "Training epochs");
  tr->add_option("--checkpoint", o.checkpoint, "Checkpoint to write (default <out>/model.bin)");

  auto* at = app.add_subcommand("attack", "Run the scatterer attack on the test split");
  auto* ev = app.add_subcommand("eval", "Fooling rates, interference suite and transfer matrix");
  auto* df = app.add_subcommand("defend", "Adversarial training and normal-vs-defended comparison");
  auto* sw = app.add_subcommand("sweep", "Config sweeps, parameter sensitivity and location heatmaps");
  for (auto* sub : {at, ev, df, sw}) {
    sub->add_option("--data", o.data, "Dataset directory");
    sub->add_option("--checkpoint", o.checkpoint, "Trained classifier");
    sub->add_option("--samples", o.samples, "Use the first K test samples (0 = all)");
    sub->add_option("--n", o.scatterers, "Scatterers per attack");
    sub->add_option("--population", o.population, "Population size");
    sub->add_option("--iterations", o.iterations, "Iteration budget");
    sub->add_option("--cap-db", o.cap_db, "Per-scatterer peak cap in dB above the target peak");
    sub->add_option("--epsilon", o.epsilon, "l-inf budget for the baselines");
  }
  ev->add_option("--attacks", o.attacks, "Comma list: smgaa-1,smgaa-2,smgaa-3,pgd,fgsm,bim");
  ev->add_option("--transfer", o.transfer, "Further checkpoints for the transfer matrix");
  df->add_option("--epochs", o.epochs, "Training epochs for both nets");
  df->add_option("--fraction", o.fraction, "Share of images replaced per epoch");
  sw->add_option("--mode", o.mode, "config, sensitivity or heatmap");
  sw->add_option("--key", o.key, "Setting varied in config mode");
  sw->add_option("--values", o.values, "Semicolon-separated values in config mode");
  sw->add_option("--param", o.param, "Attribute for sensitivity mode: A,x_p,y_p,alpha,gamma_p,L_p,phi_p");
  sw->add_option("--deltas", o.deltas, "Comma-separated offsets (or values with sweep.absolute=true)");
  sw->add_option("--sample", o.sample, "Test sample index for heatmap mode");
  sw->add_option("--repeats", o.repeats, "Runs accumulated into the heatmap");

  auto* rd = app.add_subcommand("render", "Form the image of a scatterer set");
  rd->add_option("--theta", o.theta, "File with theta.i / type.i lines");
  rd->add_option("--image", o.image, "Optional float image to fuse onto");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (tr->parsed()) return cmd_train(o);
    if (at->parsed()) return cmd_attack(o);
    if (ev->parsed()) return cmd_eval(o);
    if (df->parsed()) return cmd_defend(o);
    if (sw->parsed()) return cmd_sweep(o);
    if (rd->parsed()) return cmd_render(o);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid setting: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
