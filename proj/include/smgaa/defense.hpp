#pragma once

// Adversarial training with an attack as the per-epoch worst-case generator,
// and side-by-side robustness rows for several trained nets.

#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/config.hpp"
#include "smgaa/evaluation.hpp"
#include "smgaa/parallel.hpp"
#include "smgaa/rng.hpp"
#include "smgaa/training.hpp"

namespace smgaa {

struct DefenseConfig {
  /// Surrogate run for every selected image in every epoch. The default is the
  /// three-scatterer attack with a single member and 20 iterations.
  AttackSpec generator = AttackSpec::scatterers(3, 1, 20);
  /// Probability that an image is replaced by its adversarial version in an epoch.
  double fraction = 1.0;
  /// Mixing knob: also keep every clean image in the training set.
  bool include_clean = false;
  TrainConfig training;
  unsigned workers = 1;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("DefenseConfig: fraction in [0, 1]");
    if (generator.family == AttackSpec::Family::Smgaa) {
      generator.smgaa.validate();
    } else if (!(generator.linf.epsilon >= 0.0) || generator.linf.steps < 1) {
      throw std::invalid_argument("DefenseConfig: invalid l-inf generator");
    }
    training.validate();
  }

  Config to_config() const {
    Config c;
    if (generator.family == AttackSpec::Family::Smgaa) {
      c.merge(generator.smgaa.to_config());
    } else {
      c.set("defense.epsilon", generator.linf.epsilon);
      c.set("defense.linf_steps", generator.linf.steps);
    }
    c.set("defense.generator", generator.name);
    c.set("defense.fraction", fraction);
    c.set("defense.include_clean", include_clean);
    c.merge(training.to_config());
    return c;
  }
};

/// What the surrogate did in one epoch. Failed and skipped images train clean.
struct DefenseEpochLog {
  int epoch = 0;
  std::size_t selected = 0;
  std::size_t perturbed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t surrogate_iterations = 0;  // summed over the epoch's attacks
};

struct DefenseReport {
  TrainReport training;
  std::vector<DefenseEpochLog> epochs;
};

/// Trains `net` in place on `data` with adversarially replaced images. Pass a
/// freshly initialized net to train from scratch. Deterministic under the
/// training and generator seeds, independent of the worker count.
template <typename T>
DefenseReport adversarial_train(Network<T>& net, std::span<const Sample> data, const DefenseConfig& cfg,
                                const Imager& imager) {
  cfg.validate();
  std::vector<Sample> mixed;
  if (cfg.include_clean) {
    mixed.assign(data.begin(), data.end());
    mixed.insert(mixed.end(), data.begin(), data.end());
    data = mixed;
  }
  // with include_clean, the first half of the index space stays clean
  const std::size_t first_attackable = cfg.include_clean ? data.size() / 2 : 0;

  DefenseReport report;
  auto transform = [&](int epoch, std::span<const std::size_t> batch, std::vector<Image>& images) {
    if (report.epochs.empty() || report.epochs.back().epoch != epoch) report.epochs.push_back({epoch});
    auto& log = report.epochs.back();
    std::vector<char> selected(batch.size(), 0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (batch[b] < first_attackable || cfg.fraction <= 0.0) continue;
      std::mt19937_64 rng(derive_seed(cfg.training.seed, {0xdef, std::uint64_t(epoch), batch[b]}));
      selected[b] = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.fraction;
    }
    std::vector<AttackRecord> records(batch.size());
    AttackSpec spec = cfg.generator;
    if (spec.family == AttackSpec::Family::Smgaa)
      spec.smgaa.seed = derive_seed(cfg.generator.smgaa.seed, {0xdef, std::uint64_t(epoch)});
    else
      spec.linf.seed = derive_seed(cfg.generator.linf.seed, {0xdef, std::uint64_t(epoch)});
    parallel_for(batch.size(), cfg.workers, [&](std::size_t b) {
      if (!selected[b]) return;
      const Sample& s = data[batch[b]];
      const Sample shown{images[b], s.label, s.mask};
      records[b] = attack_sample(net, shown, batch[b], spec, imager);
    });
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!selected[b]) continue;
      ++log.selected;
      const auto& r = records[b];
      log.surrogate_iterations += std::size_t(r.iterations);
      if (r.skipped) {
        ++log.skipped;
      } else if (spec.family == AttackSpec::Family::Smgaa && !r.success()) {
        ++log.failed;
      } else {
        images[b] = r.adversarial;
        ++log.perturbed;
      }
    }
  };
  report.training = train(net, data, cfg.training, transform);
  return report;
}

struct NamedNet {
  std::string name;
  const Classifier* net = nullptr;
};

struct RobustnessEntry {
  std::string attack;
  double robust_accuracy = 0.0;
  double mean_adversarial_confidence = 0.0;  // predicted-class confidence over successes
  std::size_t fooled = 0;
};

struct RobustnessRow {
  std::string net;
  std::size_t samples = 0;
  double clean_accuracy = 0.0;
  std::vector<RobustnessEntry> attacks;
};

struct DefenseComparison {
  std::vector<RobustnessRow> rows;

  const RobustnessRow& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.net == name) return r;
    throw std::out_of_range("no comparison row for " + name);
  }

  std::string to_text() const {
    std::ostringstream os;
    for (const auto& r : rows) {
      os << r.net << ".samples = " << r.samples << '\n';
      os << r.net << ".clean_accuracy = " << format_double(r.clean_accuracy) << '\n';
      for (const auto& a : r.attacks) {
        os << r.net << '.' << a.attack << ".robust_accuracy = " << format_double(a.robust_accuracy) << '\n';
        os << r.net << '.' << a.attack << ".mean_adversarial_confidence = "
           << format_double(a.mean_adversarial_confidence) << '\n';
      }
    }
    return os.str();
  }
};

/// Clean accuracy and, per attack, the share of all test samples still
/// classified correctly after the attack (a clean miss counts as a miss).
inline RobustnessRow robustness_row(const NamedNet& n, std::span<const AttackSpec> attacks,
                                    std::span<const Sample> test, const Imager& imager, unsigned workers = 1) {
  if (test.empty()) throw std::invalid_argument("robustness_row: empty test set");
  RobustnessRow row;
  row.net = n.name;
  row.samples = test.size();
  row.clean_accuracy = accuracy(*n.net, test);
  for (const auto& spec : attacks) {
    const auto records = attack_set(*n.net, test, spec, imager, workers);
    RobustnessEntry e;
    e.attack = spec.name;
    std::size_t correct = 0;
    double conf = 0.0;
    for (const auto& r : records) {
      if (r.skipped) continue;
      if (r.success()) {
        ++e.fooled;
        conf += r.predicted_confidence;
      } else {
        ++correct;
      }
    }
    e.robust_accuracy = double(correct) / double(test.size());
    if (e.fooled > 0) e.mean_adversarial_confidence = conf / double(e.fooled);
    row.attacks.push_back(e);
  }
  return row;
}

inline DefenseComparison evaluate_defense(std::span<const NamedNet> nets, std::span<const AttackSpec> attacks,
                                          std::span<const Sample> test, const Imager& imager, unsigned workers = 1) {
  DefenseComparison cmp;
  for (const auto& n : nets) cmp.rows.push_back(robustness_row(n, attacks, test, imager, workers));
  return cmp;
}

inline DefenseComparison evaluate_defense(const Classifier& normal, const Classifier& defended,
                                          std::span<const AttackSpec> attacks, std::span<const Sample> test,
                                          const Imager& imager, unsigned workers = 1) {
  const std::vector<NamedNet> nets{{"normal", &normal}, {"defended", &defended}};
  return evaluate_defense(nets, attacks, test, imager, workers);
}

/// SMGAA-1/2/3 at the given budget plus PGD.
inline std::vector<AttackSpec> defense_attack_suite(int population, int iterations, const LinfConfig& pgd_cfg,
                                                    std::uint64_t seed = 1) {
  return {AttackSpec::scatterers(1, population, iterations, seed), AttackSpec::scatterers(2, population, iterations, seed),
          AttackSpec::scatterers(3, population, iterations, seed), AttackSpec::baseline(pgd_cfg)};
}

}  // namespace smgaa
