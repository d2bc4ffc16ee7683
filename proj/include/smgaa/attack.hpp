#pragma once

// Population search for adversarial scatterers: sign-of-gradient steps with
// Gaussian step sizes, softened greedy acceptance, step-mean adaption,
// amplitude projection, clipping, early stopping and argmin selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/ascm.hpp"
#include "smgaa/config.hpp"
#include "smgaa/dataset.hpp"
#include "smgaa/image_io.hpp"
#include "smgaa/imaging.hpp"
#include "smgaa/network.hpp"
#include "smgaa/parallel.hpp"
#include "smgaa/rng.hpp"

namespace smgaa {

enum class InitRegion { Mask, Background, Whole };

inline std::string to_string(InitRegion r) {
  switch (r) {
    case InitRegion::Mask: return "mask";
    case InitRegion::Background: return "background";
    case InitRegion::Whole: return "whole";
  }
  return "mask";
}

inline InitRegion init_region_from_string(const std::string& s) {
  if (s == "mask") return InitRegion::Mask;
  if (s == "background") return InitRegion::Background;
  if (s == "whole") return InitRegion::Whole;
  throw std::invalid_argument("unknown initialization region: " + s);
}

/// Reference bounds with locations re-expressed relative to the image center:
/// corner-origin [0, size-1] becomes [-size/2, size-1-size/2].
inline ParamBounds reference_bounds(int image_size = 88) {
  const double lo = pixel_to_centered(0.0, std::size_t(image_size));
  const double hi = pixel_to_centered(double(image_size - 1), std::size_t(image_size));
  return {{0.0, lo, lo, -1.0, 0.0, 0.0, -1.0}, {10.0, hi, hi, 1.0, 2.0, 5.0, 1.0}};
}

struct AttackConfig {
  int scatterers = 1;
  int max_iterations = 90;
  int population = 100;
  ParamBounds bounds = reference_bounds();
  ParamVector initial_step = {0.05, 0.5, 0.5, 0.0, 0.01, 0.025, 0.01};
  ParamVector step_std = default_step_std(reference_bounds());
  double adaption = 0.5;
  double confidence_threshold = 0.1;
  /// Probability of adopting a candidate that does not increase the loss.
  double accept_probability = 0.5;
  /// Peak allowed for any single scatterer, in dB relative to the target peak.
  double amplitude_cap_db = 0.0;
  bool amplitude_projection = true;
  int projection_retries = 20;
  /// Carry the loss of the kept parameters instead of the candidate's loss.
  bool synchronized_loss = false;
  bool clamp_negative_steps = false;
  InitRegion init_region = InitRegion::Mask;
  std::vector<ScatteringType> types{kAllScatteringTypes.begin(), kAllScatteringTypes.end()};
  ParamVector fd_steps = kDefaultFdSteps;
  std::uint64_t seed = 1;
  unsigned workers = 1;

  static ParamVector default_step_std(const ParamBounds& b) {
    ParamVector s{};
    for (std::size_t k = 0; k < kParamCount; ++k) s[k] = (b.hi[k] - b.lo[k]) / 200.0;
    return s;
  }

  static AttackConfig reference(int scatterers, int image_size = 88) {
    AttackConfig c;
    c.scatterers = scatterers;
    c.bounds = reference_bounds(image_size);
    c.step_std = default_step_std(c.bounds);
    return c;
  }

  double amplitude_cap(double target_peak) const { return std::pow(10.0, amplitude_cap_db / 20.0) * target_peak; }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("AttackConfig: " + what); };
    if (scatterers < 1) fail("scatterer count must be >= 1");
    if (population < 1) fail("population must be >= 1");
    if (max_iterations < 1) fail("max_iterations must be >= 1");
    for (std::size_t k = 0; k < kParamCount; ++k) {
      if (!(bounds.lo[k] <= bounds.hi[k])) fail("lower bound above upper bound for " + std::string(kParamNames[k]));
      if (step_std[k] < 0.0 || initial_step[k] < 0.0) fail("step parameters must be nonnegative");
      if (!(fd_steps[k] > 0.0)) fail("finite-difference steps must be positive");
    }
    if (!(confidence_threshold > 0.0 && confidence_threshold <= 1.0)) fail("confidence threshold in (0, 1]");
    if (adaption < 0.0 || adaption > 1.0) fail("adaption factor in [0, 1]");
    if (accept_probability < 0.0 || accept_probability > 1.0) fail("acceptance probability in [0, 1]");
    if (projection_retries < 1) fail("projection retries must be >= 1");
    if (types.empty()) fail("no scattering types allowed");
  }

  Config to_config() const {
    Config c;
    c.set("attack.scatterers", scatterers);
    c.set("attack.max_iterations", max_iterations);
    c.set("attack.population", population);
    c.set("attack.theta_min", format_double_list(bounds.lo));
    c.set("attack.theta_max", format_double_list(bounds.hi));
    c.set("attack.initial_step", format_double_list(initial_step));
    c.set("attack.step_std", format_double_list(step_std));
    c.set("attack.adaption", adaption);
    c.set("attack.confidence_threshold", confidence_threshold);
    c.set("attack.accept_probability", accept_probability);
    c.set("attack.amplitude_cap_db", amplitude_cap_db);
    c.set("attack.amplitude_projection", amplitude_projection);
    c.set("attack.projection_retries", projection_retries);
    c.set("attack.synchronized_loss", synchronized_loss);
    c.set("attack.clamp_negative_steps", clamp_negative_steps);
    c.set("attack.init_region", to_string(init_region));
    std::string names;
    for (auto t : types) names += (names.empty() ? "" : ",") + std::string(to_string(t));
    c.set("attack.types", names);
    c.set("attack.fd_steps", format_double_list(fd_steps));
    c.set("attack.seed", seed);
    return c;
  }

  static AttackConfig from_config(const Config& c, int image_size = 88) {
    AttackConfig a = reference(c.get("attack.scatterers", 1), image_size);
    auto vec = [&](const std::string& key, ParamVector& dst) {
      if (!c.has(key)) return;
      const auto v = parse_double_list(key, c.require<std::string>(key));
      if (v.size() != kParamCount) throw ConfigError("config key '" + key + "': expected 7 values");
      std::copy(v.begin(), v.end(), dst.begin());
    };
    a.max_iterations = c.get("attack.max_iterations", a.max_iterations);
    a.population = c.get("attack.population", a.population);
    vec("attack.theta_min", a.bounds.lo);
    vec("attack.theta_max", a.bounds.hi);
    a.step_std = default_step_std(a.bounds);
    vec("attack.initial_step", a.initial_step);
    vec("attack.step_std", a.step_std);
    vec("attack.fd_steps", a.fd_steps);
    a.adaption = c.get("attack.adaption", a.adaption);
    a.confidence_threshold = c.get("attack.confidence_threshold", a.confidence_threshold);
    a.accept_probability = c.get("attack.accept_probability", a.accept_probability);
    a.amplitude_cap_db = c.get("attack.amplitude_cap_db", a.amplitude_cap_db);
    a.amplitude_projection = c.get("attack.amplitude_projection", a.amplitude_projection);
    a.projection_retries = c.get("attack.projection_retries", a.projection_retries);
    a.synchronized_loss = c.get("attack.synchronized_loss", a.synchronized_loss);
    a.clamp_negative_steps = c.get("attack.clamp_negative_steps", a.clamp_negative_steps);
    a.init_region = init_region_from_string(c.get<std::string>("attack.init_region", "mask"));
    if (c.has("attack.types")) {
      a.types.clear();
      std::stringstream ss(c.require<std::string>("attack.types"));
      std::string name;
      while (std::getline(ss, name, ',')) a.types.push_back(scattering_type_from_string(name));
    }
    a.seed = c.get("attack.seed", a.seed);
    a.validate();
    return a;
  }
};

struct PopulationMember {
  std::vector<ScattererParams> theta;
  std::vector<ParamMask> frozen;          // complement of the adjustable mask
  std::vector<ParamVector> step_mean;     // S
  std::vector<ComplexGrid> parts;         // complex image of each scatterer at theta
  double loss = 0.0;
  double confidence = 1.0;                // ground-truth confidence at theta
  bool projection_exhausted = false;
  std::mt19937_64 rng;

  std::size_t size() const noexcept { return theta.size(); }
};

/// Everything the attack needs about one input.
struct AttackTarget {
  const Image& image;
  int label;
  const Mask& mask;
};

namespace detail {

inline std::vector<std::pair<int, int>> init_pixels(const Mask& mask, InitRegion region) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      const bool in = mask(r, c) != 0;
      if (region == InitRegion::Whole || (region == InitRegion::Mask) == in) out.emplace_back(int(r), int(c));
    }
  }
  return out;
}

inline MagnitudeImage total_magnitude(const std::vector<ComplexGrid>& parts, std::size_t rows, std::size_t cols) {
  ComplexGrid total(parts.front().rows(), parts.front().cols());
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += p[j];
  }
  return center_crop(Imager::magnitude(total), rows, cols);
}

inline double peak_magnitude(const ComplexGrid& g) {
  double best = 0.0;
  for (const auto& v : g) best = std::max(best, std::norm(v));
  return std::sqrt(best);
}

}  // namespace detail

/// Formed scatterer peaks above `cap` shrink A <- A / (A + u), u ~ U(0, 1],
/// re-checked up to the retry limit. Parts are rescaled exactly (the image is
/// linear in A). Returns false when the limit was exhausted.
inline bool amplitude_projection(ScattererParams& p, ComplexGrid& part, double cap, std::mt19937_64& rng,
                                 int retries = 20) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double peak = detail::peak_magnitude(part);
  for (int attempt = 0; attempt < retries; ++attempt) {
    if (!(peak > cap) || p.amplitude == 0.0) return true;
    double u = 0.0;
    while (u == 0.0) u = unif(rng);
    const double next = p.amplitude / (p.amplitude + u);
    const double ratio = next / p.amplitude;
    for (auto& v : part) v *= ratio;
    peak *= ratio;
    p.amplitude = next;
  }
  return !(peak > cap);
}

/// Confidence and loss of the clipped fused image for one member's parts.
struct Evaluation {
  double loss = 0.0;
  double confidence = 0.0;
};

template <typename T>
Evaluation evaluate_parts(const Network<T>& net, const AttackTarget& x, const std::vector<ComplexGrid>& parts) {
  const auto pert = detail::total_magnitude(parts, x.image.rows(), x.image.cols());
  const auto adv = fuse_perturbation(x.image, pert);
  const auto conf = net.forward(adv).confidences;
  return {cross_entropy(conf, x.label), conf[std::size_t(x.label)]};
}

template <typename T>
std::vector<PopulationMember> initialize_population(const Network<T>& net, const AttackTarget& x,
                                                    const Imager& imager, const AttackConfig& cfg) {
  cfg.validate();
  const auto pool = detail::init_pixels(x.mask, cfg.init_region);
  if (pool.empty()) throw std::invalid_argument("initialize_population: empty initialization region");
  const double cap = cfg.amplitude_cap(double(max_value(x.image)));
  std::vector<PopulationMember> members(std::size_t(cfg.population));
  for (std::size_t j = 0; j < members.size(); ++j) {
    auto& m = members[j];
    m.rng.seed(derive_seed(cfg.seed, {0xa77ac, j}));
    std::uniform_int_distribution<std::size_t> pick_type(0, cfg.types.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_pixel(0, pool.size() - 1);
    for (int i = 0; i < cfg.scatterers; ++i) {
      ScattererParams p;
      p.type = cfg.types[pick_type(m.rng)];
      const auto [r, c] = pool[pick_pixel(m.rng)];
      ParamVector v{};
      for (std::size_t k = 0; k < kParamCount; ++k) {
        v[k] = std::uniform_real_distribution<double>(cfg.bounds.lo[k], cfg.bounds.hi[k])(m.rng);
      }
      v[kRange] = pixel_to_centered(r, x.image.rows());
      v[kCrossRange] = pixel_to_centered(c, x.image.cols());
      p = apply_type_template(ScattererParams::from_vector(v, p.type));
      m.theta.push_back(p);
      m.frozen.push_back(scattering_type_template(p.type).frozen);
      m.step_mean.push_back(cfg.initial_step);
      m.parts.push_back(imager.scatterer_image(p));
    }
    if (cfg.amplitude_projection) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (!amplitude_projection(m.theta[i], m.parts[i], cap, m.rng, cfg.projection_retries))
          m.projection_exhausted = true;
      }
    }
    const auto e = evaluate_parts(net, x, m.parts);
    m.loss = e.loss;
    m.confidence = e.confidence;
  }
  return members;
}

/// dL/dtheta through the fused image: exact network input gradient at the
/// unclipped fused image contracted with finite-difference image sensitivities.
/// Frozen entries are exactly zero.
template <typename T>
std::vector<ParamVector> param_gradient(const Network<T>& net, const AttackTarget& x, const Imager& imager,
                                        const PopulationMember& m, const AttackConfig& cfg) {
  const std::size_t rows = x.image.rows(), cols = x.image.cols();
  ComplexGrid total(imager.image_rows(), imager.image_cols());
  for (const auto& p : m.parts) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += p[j];
  }
  const auto pert = center_crop(Imager::magnitude(total), rows, cols);
  Grid<double> fused(rows, cols);
  for (std::size_t j = 0; j < fused.size(); ++j) fused[j] = double(x.image[j]) + pert[j];
  const auto g = net.input_gradient(fused, x.label);

  auto contracted = [&](std::size_t i, const ScattererParams& replacement) {
    ComplexGrid img = total;
    const ComplexGrid part = imager.scatterer_image(replacement);
    for (std::size_t j = 0; j < img.size(); ++j) img[j] += part[j] - m.parts[i][j];
    const auto mag = center_crop(Imager::magnitude(img), rows, cols);
    double acc = 0.0;
    for (std::size_t j = 0; j < mag.size(); ++j) acc += double(g[j]) * mag[j];
    return acc;
  };

  std::vector<ParamVector> grad(m.size(), ParamVector{});
  for (std::size_t i = 0; i < m.size(); ++i) {
    const ParamVector base = m.theta[i].to_vector();
    for (std::size_t k = 0; k < kParamCount; ++k) {
      if (m.frozen[i][k]) continue;
      const double hi = std::min(base[k] + cfg.fd_steps[k], cfg.bounds.hi[k]);
      const double lo = std::max(base[k] - cfg.fd_steps[k], cfg.bounds.lo[k]);
      if (!(hi > lo)) {
        throw std::domain_error("param_gradient: step for " + std::string(kParamNames[k]) + " collapses at the bounds");
      }
      ParamVector up = base, down = base;
      up[k] = hi;
      down[k] = lo;
      grad[i][k] = (contracted(i, ScattererParams::from_vector(up, m.theta[i].type)) -
                    contracted(i, ScattererParams::from_vector(down, m.theta[i].type))) /
                   (hi - lo);
    }
  }
  return grad;
}

inline double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

template <typename T>
std::vector<ParamVector> param_gradient_sign(const Network<T>& net, const AttackTarget& x, const Imager& imager,
                                             const PopulationMember& m, const AttackConfig& cfg) {
  auto g = param_gradient(net, x, imager, m, cfg);
  for (auto& row : g)
    for (auto& v : row) v = sign_of(v);
  return g;
}

struct StepOutcome {
  bool improved = false;
  bool accepted = false;
  double candidate_loss = 0.0;
};

/// One softened-greedy update of a single member.
template <typename T>
StepOutcome attack_step(const Network<T>& net, const AttackTarget& x, const Imager& imager, PopulationMember& m,
                        const AttackConfig& cfg, double cap) {
  const auto sign = param_gradient_sign(net, x, imager, m, cfg);
  std::vector<ParamVector> delta(m.size());
  std::vector<ScattererParams> cand(m.size());
  std::vector<ComplexGrid> cand_parts(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    ParamVector v = m.theta[i].to_vector();
    for (std::size_t k = 0; k < kParamCount; ++k) {
      double s = std::normal_distribution<double>(m.step_mean[i][k], cfg.step_std[k])(m.rng);
      if (cfg.clamp_negative_steps) s = std::max(s, 0.0);
      delta[i][k] = s * sign[i][k];
      if (!m.frozen[i][k]) v[k] = std::clamp(v[k] + delta[i][k], cfg.bounds.lo[k], cfg.bounds.hi[k]);
    }
    cand[i] = ScattererParams::from_vector(v, m.theta[i].type);
    cand_parts[i] = imager.scatterer_image(cand[i]);
  }
  bool exhausted = false;
  if (cfg.amplitude_projection) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!amplitude_projection(cand[i], cand_parts[i], cap, m.rng, cfg.projection_retries)) exhausted = true;
    }
  }
  const auto e = evaluate_parts(net, x, cand_parts);
  StepOutcome out;
  out.candidate_loss = e.loss;
  out.improved = e.loss > m.loss;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(m.rng);
  out.accepted = out.improved || u > 1.0 - cfg.accept_probability;
  if (out.accepted) {
    m.theta = std::move(cand);
    m.parts = std::move(cand_parts);
    m.confidence = e.confidence;
    m.projection_exhausted = m.projection_exhausted || exhausted;
    if (out.improved) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t k = 0; k < kParamCount; ++k) {
          m.step_mean[i][k] = cfg.adaption * m.step_mean[i][k] + (1.0 - cfg.adaption) * std::abs(delta[i][k]);
        }
      }
    }
  }
  if (!cfg.synchronized_loss || out.accepted) m.loss = e.loss;
  return out;
}

enum class AttackStatus { Success, Failure, SkippedMisclassified };

inline std::string to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::Success: return "success";
    case AttackStatus::Failure: return "failure";
    case AttackStatus::SkippedMisclassified: return "skipped-misclassified";
  }
  return "failure";
}

struct AttackResult {
  AttackStatus status = AttackStatus::Failure;
  std::vector<ScattererParams> theta;
  MagnitudeImage perturbation;
  Image adversarial;
  int ground_truth = 0;
  int predicted = -1;
  double confidence = 1.0;             // ground-truth confidence of the returned member
  double predicted_confidence = 0.0;   // confidence of the predicted class
  std::vector<double> trace;           // min ground-truth confidence after init and each iteration
  int iterations = 0;                  // value of the iteration counter at exit (starts at 1)
  bool early_stopped = false;
  bool projection_exhausted = false;
  std::size_t best_member = 0;
  std::vector<double> final_confidences;  // per member, at exit

  bool success() const noexcept { return status == AttackStatus::Success; }
};

/// Runs the full population search on one correctly classified input.
template <typename T>
AttackResult run_smgaa(const Network<T>& net, const AttackTarget& x, const Imager& imager, const AttackConfig& cfg) {
  cfg.validate();
  AttackResult res;
  res.ground_truth = x.label;
  const auto clean = net.forward(x.image);
  if (clean.label != x.label) {
    res.status = AttackStatus::SkippedMisclassified;
    res.predicted = clean.label;
    res.confidence = clean.confidences[std::size_t(x.label)];
    res.adversarial = x.image;
    res.perturbation = MagnitudeImage(x.image.rows(), x.image.cols());
    return res;
  }
  const double cap = cfg.amplitude_cap(double(max_value(x.image)));
  auto members = initialize_population(net, x, imager, cfg);
  auto min_conf = [&] {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& m : members) v = std::min(v, m.confidence);
    return v;
  };
  int n = 1;
  res.trace.push_back(min_conf());
  while (n < cfg.max_iterations && min_conf() >= cfg.confidence_threshold) {
    ++n;
    parallel_for(members.size(), cfg.workers, [&](std::size_t j) { attack_step(net, x, imager, members[j], cfg, cap); });
    res.trace.push_back(min_conf());
  }
  res.iterations = n;
  res.early_stopped = min_conf() < cfg.confidence_threshold;

  std::size_t idx = 0;
  for (std::size_t j = 0; j < members.size(); ++j) {
    res.final_confidences.push_back(members[j].confidence);
    if (members[j].confidence < members[idx].confidence) idx = j;
  }
  const auto& best = members[idx];
  res.best_member = idx;
  res.theta = best.theta;
  res.projection_exhausted = best.projection_exhausted;
  res.perturbation = detail::total_magnitude(best.parts, x.image.rows(), x.image.cols());
  res.adversarial = fuse_perturbation(x.image, res.perturbation);
  const auto pred = net.forward(res.adversarial);
  res.predicted = pred.label;
  res.confidence = pred.confidences[std::size_t(x.label)];
  res.predicted_confidence = pred.confidences[std::size_t(pred.label)];
  res.status = pred.label != x.label ? AttackStatus::Success : AttackStatus::Failure;
  return res;
}

template <typename T>
AttackResult run_smgaa(const Network<T>& net, const Sample& s, const Imager& imager, const AttackConfig& cfg) {
  return run_smgaa(net, AttackTarget{s.image, s.label, s.mask}, imager, cfg);
}

/// Plain-text record: status, labels, Θ (7 values and a type name per scatterer)
/// and the confidence trace; images go next to it in the float-binary format.
inline void write_attack_result(const fs::path& stem, const AttackResult& r) {
  std::ofstream os(fs::path(stem.string() + ".txt"));
  if (!os) throw IoError("cannot write attack record " + stem.string() + ".txt");
  os << "status = " << to_string(r.status) << '\n';
  os << "ground_truth = " << r.ground_truth << '\n';
  os << "predicted = " << r.predicted << '\n';
  os << "confidence = " << format_double(r.confidence) << '\n';
  os << "iterations = " << r.iterations << '\n';
  os << "early_stopped = " << (r.early_stopped ? "true" : "false") << '\n';
  os << "scatterers = " << r.theta.size() << '\n';
  for (std::size_t i = 0; i < r.theta.size(); ++i) {
    os << "theta." << i << " = " << format_double_list(r.theta[i].to_vector()) << '\n';
    os << "type." << i << " = " << to_string(r.theta[i].type) << '\n';
  }
  os << "trace = " << format_double_list(r.trace) << '\n';
  if (!os) throw IoError("write failed: " + stem.string() + ".txt");
  if (!r.perturbation.empty()) write_float_image(fs::path(stem.string() + ".perturbation"), r.perturbation);
  if (!r.adversarial.empty()) write_float_image(fs::path(stem.string() + ".adversarial"), r.adversarial);
}

/// Reads the parameter part of a record (or any file with theta.i / type.i keys).
inline std::vector<ScattererParams> read_theta(const fs::path& path) {
  const Config c = Config::load(path);
  std::vector<ScattererParams> out;
  for (std::size_t i = 0;; ++i) {
    const auto key = "theta." + std::to_string(i);
    if (!c.has(key)) break;
    const auto v = parse_double_list(key, c.require<std::string>(key));
    if (v.size() != kParamCount) throw ConfigError(path.string() + ": " + key + " needs 7 values");
    ParamVector pv{};
    std::copy(v.begin(), v.end(), pv.begin());
    const auto type = scattering_type_from_string(c.get<std::string>("type." + std::to_string(i), "Trihedral"));
    out.push_back(apply_type_template(ScattererParams::from_vector(pv, type)));
  }
  return out;
}

}  // namespace smgaa
