#pragma once

// l∞ baselines, fooling rates, the interference suite, parameter sweeps,
// transfer matrices, location heatmaps and plain-text metric reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/attack.hpp"
#include "smgaa/config.hpp"
#include "smgaa/dataset.hpp"
#include "smgaa/network.hpp"
#include "smgaa/parallel.hpp"
#include "smgaa/rng.hpp"

namespace smgaa {

// ---------------------------------------------------------------------------
// l∞ baselines

namespace detail {

// Clamp to the ε-ball around x0 intersected with [0, 1]. The float result is
// nudged inward when rounding would leave the ball, so the bound holds exactly.
inline float project_linf(double v, float x0, double eps) {
  const double lo = std::max(0.0, double(x0) - eps);
  const double hi = std::min(1.0, double(x0) + eps);
  float out = static_cast<float>(std::clamp(v, lo, hi));
  if (double(out) > hi) out = std::nextafter(out, -std::numeric_limits<float>::infinity());
  if (double(out) < lo) out = std::nextafter(out, std::numeric_limits<float>::infinity());
  return out;
}

template <typename T>
Image linf_ascent(const Network<T>& net, const Image& x, int label, double eps, int steps, double alpha,
                  Image adv) {
  for (int s = 0; s < steps; ++s) {
    const auto g = net.input_gradient(adv, label);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double dir = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
      adv[i] = project_linf(double(adv[i]) + alpha * dir, x[i], eps);
    }
  }
  return adv;
}

inline void check_linf_args(double eps, int steps, double alpha) {
  if (!(eps >= 0.0)) throw std::invalid_argument("l-inf attack: epsilon must be >= 0");
  if (steps < 1) throw std::invalid_argument("l-inf attack: steps must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("l-inf attack: step size must be >= 0");
}

}  // namespace detail

template <typename T>
Image bim(const Network<T>& net, const Image& x, int label, double eps, int steps, double alpha) {
  detail::check_linf_args(eps, steps, alpha);
  return detail::linf_ascent(net, x, label, eps, steps, alpha, x);
}

template <typename T>
Image fgsm(const Network<T>& net, const Image& x, int label, double eps) {
  return bim(net, x, label, eps, 1, eps);
}

template <typename T>
Image pgd(const Network<T>& net, const Image& x, int label, double eps, int steps, double alpha,
          bool random_start, std::uint64_t seed) {
  detail::check_linf_args(eps, steps, alpha);
  Image start = x;
  if (random_start && eps > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-eps, eps);
    for (std::size_t i = 0; i < start.size(); ++i) start[i] = detail::project_linf(double(x[i]) + u(rng), x[i], eps);
  }
  return detail::linf_ascent(net, x, label, eps, steps, alpha, std::move(start));
}

enum class LinfMethod { Fgsm, Bim, Pgd };

inline std::string to_string(LinfMethod m) {
  switch (m) {
    case LinfMethod::Fgsm: return "fgsm";
    case LinfMethod::Bim: return "bim";
    case LinfMethod::Pgd: return "pgd";
  }
  return "pgd";
}

struct LinfConfig {
  LinfMethod method = LinfMethod::Pgd;
  double epsilon = 8.0 / 255.0;
  int steps = 20;
  double step_size = 0.0;  // 0 -> epsilon / 10
  bool random_start = true;
  std::uint64_t seed = 1;

  double alpha() const noexcept { return step_size > 0.0 ? step_size : epsilon / 10.0; }

  Config to_config() const {
    Config c;
    c.set("linf.epsilon", epsilon);
    c.set("linf.steps", steps);
    c.set("linf.step_size", step_size);
    c.set("linf.random_start", random_start);
    c.set("linf.seed", seed);
    return c;
  }

  static LinfConfig from_config(const Config& c, LinfMethod method) {
    LinfConfig l;
    l.method = method;
    l.epsilon = c.get("linf.epsilon", l.epsilon);
    l.steps = c.get("linf.steps", l.steps);
    l.step_size = c.get("linf.step_size", l.step_size);
    l.random_start = c.get("linf.random_start", l.random_start);
    l.seed = c.get("linf.seed", l.seed);
    if (!(l.epsilon >= 0.0) || l.steps < 1 || !(l.step_size >= 0.0)) throw ConfigError("invalid linf.* settings");
    return l;
  }
};

inline LinfMethod linf_method_from_string(const std::string& s) {
  if (s == "fgsm") return LinfMethod::Fgsm;
  if (s == "bim") return LinfMethod::Bim;
  if (s == "pgd") return LinfMethod::Pgd;
  throw std::invalid_argument("unknown l-inf attack: " + s);
}

template <typename T>
Image run_linf(const Network<T>& net, const Image& x, int label, const LinfConfig& cfg, std::uint64_t stream = 0) {
  switch (cfg.method) {
    case LinfMethod::Fgsm: return fgsm(net, x, label, cfg.epsilon);
    case LinfMethod::Bim: return bim(net, x, label, cfg.epsilon, cfg.steps, cfg.alpha());
    case LinfMethod::Pgd:
      return pgd(net, x, label, cfg.epsilon, cfg.steps, cfg.alpha(), cfg.random_start,
                 derive_seed(cfg.seed, {0x96d, stream}));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Fooling rate

struct AdversarialExample {
  Image image;
  int label = 0;
};

/// Fraction of examples whose prediction differs from the ground truth.
template <typename T>
double fooling_rate(const Network<T>& net, std::span<const AdversarialExample> set) {
  if (set.empty()) throw std::invalid_argument("fooling_rate: empty set");
  std::size_t fooled = 0;
  for (const auto& e : set) fooled += std::size_t(net.predict(e.image) != e.label);
  return double(fooled) / double(set.size());
}

// ---------------------------------------------------------------------------
// Interference suite

enum class InterferenceKind { Noise, GaussianFilter, MedianFilter, Resize };

struct InterferenceSpec {
  InterferenceKind kind = InterferenceKind::Noise;
  double sigma = 1e-2;   // noise std or Gaussian-filter width
  int kernel = 3;        // odd filter size
  double factor = 0.75;  // resize: intermediate size relative to the input
  std::uint64_t seed = 1;

  static InterferenceSpec noise(double sigma, std::uint64_t seed = 1) {
    return {InterferenceKind::Noise, sigma, 3, 0.75, seed};
  }
  static InterferenceSpec gaussian(double sigma = 1.0, int kernel = 3) {
    return {InterferenceKind::GaussianFilter, sigma, kernel, 0.75, 1};
  }
  static InterferenceSpec median(int kernel = 3) { return {InterferenceKind::MedianFilter, 0.0, kernel, 0.75, 1}; }
  static InterferenceSpec resize(double factor = 0.75) { return {InterferenceKind::Resize, 0.0, 3, factor, 1}; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("InterferenceSpec: " + m); };
    switch (kind) {
      case InterferenceKind::Noise:
        if (!(sigma >= 0.0)) fail("noise sigma must be >= 0");
        break;
      case InterferenceKind::GaussianFilter:
        if (!(sigma > 0.0)) fail("filter sigma must be > 0");
        [[fallthrough]];
      case InterferenceKind::MedianFilter:
        if (kernel < 1 || kernel % 2 == 0) fail("kernel must be odd and positive");
        break;
      case InterferenceKind::Resize:
        if (!(factor > 0.0 && factor <= 1.0)) fail("resize factor must be in (0, 1]");
        break;
    }
  }

  /// Stable key used in reports.
  std::string name() const {
    switch (kind) {
      case InterferenceKind::Noise: return "noise-" + format_double(sigma);
      case InterferenceKind::GaussianFilter: return "gaussian-" + std::to_string(kernel) + "-" + format_double(sigma);
      case InterferenceKind::MedianFilter: return "median-" + std::to_string(kernel);
      case InterferenceKind::Resize: return "resize-" + format_double(factor);
    }
    return "unknown";
  }
};

/// Additive noise 1e-2, Gaussian 3x3 (sigma 1), median 3x3, 0.75x down-up resize.
inline std::vector<InterferenceSpec> default_interference_suite() {
  return {InterferenceSpec::noise(1e-2), InterferenceSpec::gaussian(1.0, 3), InterferenceSpec::median(3),
          InterferenceSpec::resize(0.75)};
}

namespace detail {

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

inline std::size_t clamp_index(long i, std::size_t n) {
  return std::size_t(std::clamp<long>(i, 0, long(n) - 1));
}

// Bilinear resampling with pixel-center alignment; borders replicate.
inline Grid<double> bilinear(const Grid<double>& in, std::size_t rows, std::size_t cols) {
  Grid<double> out(rows, cols);
  const double sr = double(in.rows()) / double(rows), sc = double(in.cols()) / double(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double fr = std::max(0.0, (double(r) + 0.5) * sr - 0.5);
    const long r0 = long(fr);
    const double wr = fr - double(r0);
    const std::size_t a = clamp_index(r0, in.rows()), b = clamp_index(r0 + 1, in.rows());
    for (std::size_t c = 0; c < cols; ++c) {
      const double fc = std::max(0.0, (double(c) + 0.5) * sc - 0.5);
      const long c0 = long(fc);
      const double wc = fc - double(c0);
      const std::size_t p = clamp_index(c0, in.cols()), q = clamp_index(c0 + 1, in.cols());
      out(r, c) = (1 - wr) * ((1 - wc) * in(a, p) + wc * in(a, q)) + wr * ((1 - wc) * in(b, p) + wc * in(b, q));
    }
  }
  return out;
}

}  // namespace detail

/// Deterministic interference; `stream` selects the noise realization for a
/// given seed (e.g. the sample index). The result is re-clipped to [0, 1].
inline Image apply_interference(const Image& x, const InterferenceSpec& spec, std::uint64_t stream = 0) {
  spec.validate();
  const std::size_t rows = x.rows(), cols = x.cols();
  Image out(rows, cols);
  switch (spec.kind) {
    case InterferenceKind::Noise: {
      if (spec.sigma == 0.0) return x;
      std::mt19937_64 rng(derive_seed(spec.seed, {0x9015e, stream}));
      std::normal_distribution<double> n(0.0, spec.sigma);
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = detail::clamp01(double(x[i]) + n(rng));
      return out;
    }
    case InterferenceKind::GaussianFilter: {
      const int h = spec.kernel / 2;
      std::vector<double> w(std::size_t(spec.kernel * spec.kernel));
      double total = 0.0;
      for (int dr = -h; dr <= h; ++dr)
        for (int dc = -h; dc <= h; ++dc)
          total += w[std::size_t((dr + h) * spec.kernel + dc + h)] =
              std::exp(-(dr * dr + dc * dc) / (2.0 * spec.sigma * spec.sigma));
      for (auto& v : w) v /= total;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          double acc = 0.0;
          for (int dr = -h; dr <= h; ++dr)
            for (int dc = -h; dc <= h; ++dc)
              acc += w[std::size_t((dr + h) * spec.kernel + dc + h)] *
                     x(detail::clamp_index(long(r) + dr, rows), detail::clamp_index(long(c) + dc, cols));
          out(r, c) = detail::clamp01(acc);
        }
      }
      return out;
    }
    case InterferenceKind::MedianFilter: {
      const int h = spec.kernel / 2;
      std::vector<float> window(std::size_t(spec.kernel * spec.kernel));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t k = 0;
          for (int dr = -h; dr <= h; ++dr)
            for (int dc = -h; dc <= h; ++dc)
              window[k++] = x(detail::clamp_index(long(r) + dr, rows), detail::clamp_index(long(c) + dc, cols));
          auto mid = window.begin() + long(window.size() / 2);
          std::nth_element(window.begin(), mid, window.end());
          out(r, c) = *mid;
        }
      }
      return out;
    }
    case InterferenceKind::Resize: {
      const auto dr = std::size_t(std::lround(double(rows) * spec.factor));
      const auto dc = std::size_t(std::lround(double(cols) * spec.factor));
      if (dr < 2 || dc < 2) throw std::invalid_argument("apply_interference: resized image below 2x2");
      if (dr == rows && dc == cols) return x;
      const auto up = detail::bilinear(detail::bilinear(grid_cast<double>(x), dr, dc), rows, cols);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::clamp01(up[i]);
      return out;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Attacking a sample set

/// Any attack the evaluation harness can run: SMGAA or an l∞ baseline.
struct AttackSpec {
  enum class Family { Smgaa, Linf };
  std::string name = "smgaa-1";
  Family family = Family::Smgaa;
  AttackConfig smgaa = AttackConfig::reference(1);
  LinfConfig linf;

  static AttackSpec scatterers(int n, int population = 100, int iterations = 90, std::uint64_t seed = 1) {
    AttackSpec s;
    s.name = "smgaa-" + std::to_string(n);
    s.smgaa = AttackConfig::reference(n);
    s.smgaa.population = population;
    s.smgaa.max_iterations = iterations;
    s.smgaa.seed = seed;
    return s;
  }
  static AttackSpec with_config(std::string name, const AttackConfig& cfg) {
    AttackSpec s;
    s.name = std::move(name);
    s.smgaa = cfg;
    return s;
  }
  static AttackSpec baseline(const LinfConfig& cfg) {
    AttackSpec s;
    s.name = to_string(cfg.method);
    s.family = Family::Linf;
    s.linf = cfg;
    return s;
  }
};

/// Outcome of one attacked sample. Samples the net misclassifies before the
/// attack are kept as skipped records and excluded from every rate.
struct AttackRecord {
  std::size_t index = 0;
  int label = 0;
  bool skipped = false;
  int predicted = -1;
  double predicted_confidence = 0.0;
  double label_confidence = 0.0;
  int iterations = 0;
  Image adversarial;
  std::vector<ScattererParams> theta;

  bool success() const noexcept { return !skipped && predicted != label; }
};

template <typename T>
AttackRecord attack_sample(const Network<T>& net, const Sample& s, std::size_t index, const AttackSpec& spec,
                           const Imager& imager) {
  AttackRecord rec;
  rec.index = index;
  rec.label = s.label;
  if (net.predict(s.image) != s.label) {
    rec.skipped = true;
    rec.adversarial = s.image;
    return rec;
  }
  if (spec.family == AttackSpec::Family::Smgaa) {
    AttackConfig cfg = spec.smgaa;
    cfg.seed = derive_seed(spec.smgaa.seed, {0x5a7, index});
    cfg.workers = 1;
    auto r = run_smgaa(net, s, imager, cfg);
    rec.iterations = r.iterations;
    rec.theta = std::move(r.theta);
    rec.adversarial = std::move(r.adversarial);
  } else {
    rec.adversarial = run_linf(net, s.image, s.label, spec.linf, index);
  }
  const auto p = net.forward(rec.adversarial);
  rec.predicted = p.label;
  rec.predicted_confidence = p.confidences[std::size_t(p.label)];
  rec.label_confidence = p.confidences[std::size_t(s.label)];
  return rec;
}

/// Attacks every sample (parallel over samples; results are order-independent).
template <typename T>
std::vector<AttackRecord> attack_set(const Network<T>& net, std::span<const Sample> samples, const AttackSpec& spec,
                                     const Imager& imager, unsigned workers = 1) {
  std::vector<AttackRecord> out(samples.size());
  parallel_for(samples.size(), workers,
               [&](std::size_t i) { out[i] = attack_sample(net, samples[i], i, spec, imager); });
  return out;
}

/// Fooling rate over the records that were actually attacked.
inline double fooling_rate(std::span<const AttackRecord> records) {
  std::size_t attacked = 0, fooled = 0;
  for (const auto& r : records) {
    attacked += !r.skipped;
    fooled += r.success();
  }
  if (attacked == 0) throw std::invalid_argument("fooling_rate: no attacked samples");
  return double(fooled) / double(attacked);
}

/// Fooling rate of the attacked records after passing their adversarial
/// images through `spec` (noise stream = sample index).
template <typename T>
double interfered_fooling_rate(const Network<T>& net, std::span<const AttackRecord> records,
                               const InterferenceSpec& spec, unsigned workers = 1) {
  std::vector<char> fooled(records.size(), 0);
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const auto& r = records[i];
    if (!r.skipped) fooled[i] = net.predict(apply_interference(r.adversarial, spec, r.index)) != r.label;
  });
  std::size_t attacked = 0, count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    attacked += !records[i].skipped;
    count += std::size_t(fooled[i]);
  }
  if (attacked == 0) throw std::invalid_argument("interfered_fooling_rate: no attacked samples");
  return double(count) / double(attacked);
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::string attack;
  int classes = 0;
  std::size_t samples = 0;
  std::size_t attacked = 0;
  std::size_t fooled = 0;
  double fooling_rate = 0.0;
  double mean_adversarial_confidence = 0.0;  // predicted-class confidence over successes
  double mean_iterations = 0.0;
  /// categories[truth][predicted]: successful attacks only, so the diagonal is zero.
  std::vector<std::vector<std::size_t>> categories;
  std::vector<std::pair<std::string, double>> interference;

  /// One metric per line, `key = value`, in a fixed order.
  std::string to_text() const {
    std::ostringstream os;
    os << "attack = " << attack << '\n';
    os << "classes = " << classes << '\n';
    os << "samples = " << samples << '\n';
    os << "attacked = " << attacked << '\n';
    os << "fooled = " << fooled << '\n';
    os << "fooling_rate = " << format_double(fooling_rate) << '\n';
    os << "mean_adversarial_confidence = " << format_double(mean_adversarial_confidence) << '\n';
    os << "mean_iterations = " << format_double(mean_iterations) << '\n';
    for (std::size_t j = 0; j < categories.size(); ++j) {
      os << "category." << j << " =";
      for (std::size_t k = 0; k < categories[j].size(); ++k) os << (k ? "," : " ") << categories[j][k];
      os << '\n';
    }
    for (const auto& [name, rate] : interference) os << "interference." << name << " = " << format_double(rate) << '\n';
    return os.str();
  }
};

inline EvalReport make_report(const std::string& attack, int classes, std::span<const AttackRecord> records) {
  EvalReport rep;
  rep.attack = attack;
  rep.classes = classes;
  rep.samples = records.size();
  rep.categories.assign(std::size_t(classes), std::vector<std::size_t>(std::size_t(classes), 0));
  double conf = 0.0, iters = 0.0;
  for (const auto& r : records) {
    if (r.skipped) continue;
    ++rep.attacked;
    iters += r.iterations;
    if (!r.success()) continue;
    ++rep.fooled;
    conf += r.predicted_confidence;
    ++rep.categories.at(std::size_t(r.label)).at(std::size_t(r.predicted));
  }
  if (rep.attacked > 0) {
    rep.fooling_rate = double(rep.fooled) / double(rep.attacked);
    rep.mean_iterations = iters / double(rep.attacked);
  }
  if (rep.fooled > 0) rep.mean_adversarial_confidence = conf / double(rep.fooled);
  return rep;
}

template <typename T>
void add_interference(EvalReport& rep, const Network<T>& net, std::span<const AttackRecord> records,
                      std::span<const InterferenceSpec> specs, unsigned workers = 1) {
  for (const auto& s : specs) rep.interference.emplace_back(s.name(), interfered_fooling_rate(net, records, s, workers));
}

// ---------------------------------------------------------------------------
// Parameter sensitivity

enum class SweepMode { Offset, Value };

struct SweepPoint {
  double delta = 0.0;
  bool in_bounds = true;
  bool success = false;
  int predicted = -1;
  double label_confidence = 0.0;
};

/// Moves one attribute of every scatterer of a successful result by each delta
/// (or sets it, in Value mode), re-forms the image and re-classifies it. Type
/// templates are not re-applied, so frozen attributes such as alpha can be
/// probed too. Offsets that leave the bounds are reported and skipped.
template <typename T>
std::vector<SweepPoint> sensitivity_sweep(const Network<T>& net, const AttackTarget& x, const AttackResult& result,
                                          const Imager& imager, std::size_t param, std::span<const double> deltas,
                                          const ParamBounds& bounds, SweepMode mode = SweepMode::Offset) {
  if (!result.success()) throw std::invalid_argument("sensitivity_sweep: attack result is not successful");
  if (param >= kParamCount) throw std::out_of_range("sensitivity_sweep: parameter index");
  std::vector<SweepPoint> out;
  for (double d : deltas) {
    SweepPoint pt;
    pt.delta = d;
    auto theta = result.theta;
    for (auto& p : theta) {
      auto v = p.to_vector();
      v[param] = mode == SweepMode::Offset ? v[param] + d : d;
      if (!(v[param] >= bounds.lo[param] && v[param] <= bounds.hi[param])) pt.in_bounds = false;
      p = ScattererParams::from_vector(v, p.type);
    }
    if (pt.in_bounds) {
      const auto pred = net.forward(fuse(x.image, theta, imager));
      pt.predicted = pred.label;
      pt.success = pred.label != x.label;
      pt.label_confidence = pred.confidences[std::size_t(x.label)];
    }
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transfer matrix

struct TransferMatrix {
  std::vector<std::vector<double>> rate;          // [surrogate][target]
  std::vector<std::vector<std::size_t>> counted;  // samples behind each entry
};

/// Entry (i, j): fraction of samples, correctly classified by both nets, whose
/// SMGAA example crafted on surrogate i fools target j. With the same net on
/// both sides this is the white-box fooling rate.
template <typename T>
TransferMatrix transfer_matrix(std::span<const Network<T>* const> surrogates, std::span<const Network<T>* const> targets,
                               const AttackSpec& spec, std::span<const Sample> samples, const Imager& imager,
                               unsigned workers = 1) {
  if (surrogates.empty() || targets.empty() || surrogates.size() + targets.size() < 2)
    throw std::invalid_argument("transfer_matrix: needs at least two trained nets");
  TransferMatrix m;
  m.rate.assign(surrogates.size(), std::vector<double>(targets.size(), 0.0));
  m.counted.assign(surrogates.size(), std::vector<std::size_t>(targets.size(), 0));
  for (std::size_t i = 0; i < surrogates.size(); ++i) {
    const auto records = attack_set(*surrogates[i], samples, spec, imager, workers);
    for (std::size_t j = 0; j < targets.size(); ++j) {
      std::size_t fooled = 0;
      for (const auto& r : records) {
        if (r.skipped || targets[j]->predict(samples[r.index].image) != r.label) continue;
        ++m.counted[i][j];
        fooled += targets[j]->predict(r.adversarial) != r.label;
      }
      if (m.counted[i][j] > 0) m.rate[i][j] = double(fooled) / double(m.counted[i][j]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Vulnerable-region heatmap

/// Winning scatterer locations of `repeats` single-scatterer runs with distinct
/// seeds, accumulated per pixel. Only successful runs contribute.
template <typename T>
Grid<double> vulnerability_heatmap(const Network<T>& net, const AttackTarget& x, const Imager& imager,
                                   const AttackConfig& base, int repeats, double v_th, unsigned workers = 1) {
  if (repeats < 0) throw std::invalid_argument("vulnerability_heatmap: repeats must be >= 0");
  Grid<double> map(x.image.rows(), x.image.cols(), 0.0);
  std::vector<AttackResult> runs(static_cast<std::size_t>(repeats));
  parallel_for(runs.size(), workers, [&](std::size_t r) {
    AttackConfig cfg = base;
    cfg.scatterers = 1;
    cfg.confidence_threshold = v_th;
    cfg.workers = 1;
    cfg.seed = derive_seed(base.seed, {0x4ea7, r});
    runs[r] = run_smgaa(net, x, imager, cfg);
  });
  for (const auto& run : runs) {
    if (!run.success()) continue;
    const auto& p = run.theta.front();
    const auto r = detail::clamp_index(std::lround(centered_to_pixel(p.x, map.rows())), map.rows());
    const auto c = detail::clamp_index(std::lround(centered_to_pixel(p.y, map.cols())), map.cols());
    map(r, c) += 1.0;
  }
  return map;
}

}  // namespace smgaa
