// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero if
// any fails. Pass criterion numbers to run a subset, e.g. `acceptance 1 2 8`.
//
// Adversarially trained nets are cached under the cache directory (argument
// `--cache DIR`, default next to the binary) keyed by their full settings, so
// reruns skip the slowest step. The victim net is always retrained because
// its training time is itself a criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smgaa/smgaa.hpp"

namespace fs = std::filesystem;
using namespace smgaa;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }
double rel_err(std::complex<double> a, std::complex<double> b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string pct(double v) { return fmt(100.0 * v, 4) + "%"; }

ScattererParams random_scatterer(std::mt19937_64& rng, ScatteringType type, const ParamBounds& b) {
  ParamVector v{};
  for (std::size_t k = 0; k < kParamCount; ++k) v[k] = std::uniform_real_distribution<double>(b.lo[k], b.hi[k])(rng);
  return apply_type_template(ScattererParams::from_vector(v, type));
}

// ---------------------------------------------------------------------------
// Shared state, built on first use

class Bench {
 public:
  explicit Bench(fs::path cache) : cache_(std::move(cache)) {}

  const Dataset& data() {
    if (!data_) data_ = make_dataset(DatasetConfig{});
    return *data_;
  }

  const Imager& imager() {
    if (!imager_) imager_.emplace(DatasetConfig{}.imaging);
    return *imager_;
  }

  /// Default victim on the 10-class set; training seconds kept for criterion 6.
  const Classifier& victim() {
    if (!victim_) {
      const auto t0 = Clock::now();
      victim_.emplace(NetworkConfig::aconv_a(DatasetConfig{}.classes), kNetSeed);
      train(*victim_, std::span<const Sample>(data().train), TrainConfig{});
      victim_seconds_ = seconds_since(t0);
    }
    return *victim_;
  }
  double victim_seconds() {
    victim();
    return victim_seconds_;
  }

  /// First `count` test images the victim classifies correctly.
  std::vector<Sample> correct_test(std::size_t count) {
    std::vector<Sample> out;
    for (const auto& s : data().test) {
      if (out.size() == count) break;
      if (victim().predict(s.image) == s.label) out.push_back(s);
    }
    return out;
  }

  /// Attack records on the criterion-7 image set, shared with criterion 10.
  const std::vector<AttackRecord>& monotonicity_records(const AttackSpec& spec) {
    auto it = records_.find(spec.name);
    if (it == records_.end()) {
      const auto samples = correct_test(kMonotonicityImages);
      it = records_.emplace(spec.name, attack_set(victim(), std::span<const Sample>(samples), spec, imager(), workers()))
               .first;
    }
    return it->second;
  }

  /// Net trained from scratch with `cfg`, loaded from the cache when present.
  Classifier adversarially_trained(const std::string& tag, const DefenseConfig& cfg) {
    std::ostringstream key;
    key << cfg.to_config().to_string() << DatasetConfig{}.to_config().to_string();
    key << "net.seed = " << kNetSeed << '\n';
    const auto path = cache_ / (tag + "-" + std::to_string(std::hash<std::string>{}(key.str())) + ".bin");
    if (fs::exists(path)) return load_checkpoint(path);
    Classifier net(NetworkConfig::aconv_a(DatasetConfig{}.classes), kNetSeed);
    adversarial_train(net, std::span<const Sample>(data().train), cfg, imager());
    fs::create_directories(cache_);
    save_checkpoint(path, net);
    return net;
  }

  static unsigned workers() { return default_workers(); }

  static constexpr std::size_t kMonotonicityImages = 200;
  static constexpr std::uint64_t kNetSeed = 1;

 private:
  fs::path cache_;
  std::optional<Dataset> data_;
  std::optional<Imager> imager_;
  std::optional<Classifier> victim_;
  double victim_seconds_ = 0.0;
  std::map<std::string, std::vector<AttackRecord>> records_;
};

// Budgets shared by several criteria
AttackSpec smgaa_attack(int n, int population, int iterations) {
  return AttackSpec::scatterers(n, population, iterations, 1);
}
AttackSpec pgd_attack() { return AttackSpec::baseline(LinfConfig{}); }

// ---------------------------------------------------------------------------
// Criteria

// 1: Cartesian (normalized) response equals the polar physical model.
Verdict ascm_equivalence(Bench&) {
  const auto t0 = Clock::now();
  const ImagingConfig cfg;
  const auto bounds = reference_bounds();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> uf(cfg.center_frequency - cfg.bandwidth / 2,
                                            cfg.center_frequency + cfg.bandwidth / 2);
  std::uniform_real_distribution<double> uphi(-cfg.aperture / 2, cfg.aperture / 2);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_scatterer(rng, kAllScatteringTypes[std::size_t(t) % kAllScatteringTypes.size()], bounds);
    const double f = uf(rng), phi = uphi(rng);
    const auto cart = eval_normalized_response(f * std::cos(phi), f * std::sin(phi), p, cfg);
    const auto polar = eval_raw_response(f, phi, denormalize_params(p, cfg), cfg);
    worst = std::max(worst, rel_err(cart, polar));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          "1000 draws, worst relative error " + fmt(worst, 3) + " (<= 1e-9), " + fmt(secs, 3) + " s (< 10 s)"};
}

// 2: formed-image peak lands on the shift-theorem pixel; the complex image is linear.
Verdict imaging_localization(Bench&) {
  const auto t0 = Clock::now();
  const Imager imager{ImagingConfig{}};
  const auto bounds = reference_bounds();
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> loc(bounds.lo[kRange], bounds.hi[kRange]);
  int off = 0;
  double worst_px = 0.0;
  for (int t = 0; t < 100; ++t) {
    ScattererParams p;
    p.type = ScatteringType::Sphere;
    p.amplitude = 1.0;
    p.x = loc(rng);
    p.y = loc(rng);
    p = apply_type_template(p);
    const ScattererParams set[] = {p};
    const auto img = imager.form_image(set);
    const auto idx = std::size_t(std::max_element(img.begin(), img.end()) - img.begin());
    const auto [er, ec] = imager.predicted_peak(p.x, p.y);
    const double d = std::max(std::abs(double(idx / img.cols()) - std::round(er)),
                              std::abs(double(idx % img.cols()) - std::round(ec)));
    worst_px = std::max(worst_px, d);
    off += d > 1.0;
  }
  double worst_lin = 0.0;
  for (int t = 0; t < 20; ++t) {
    const ScattererParams a[] = {random_scatterer(rng, kAllScatteringTypes[std::size_t(t) % 8], bounds),
                                 random_scatterer(rng, kAllScatteringTypes[std::size_t(t + 3) % 8], bounds)};
    const ScattererParams b[] = {random_scatterer(rng, kAllScatteringTypes[std::size_t(t + 5) % 8], bounds)};
    const ScattererParams all[] = {a[0], a[1], b[0]};
    const auto ca = imager.complex_image(a), cb = imager.complex_image(b), c = imager.complex_image(all);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      num += std::norm(c[i] - (ca[i] + cb[i]));
      den += std::norm(c[i]);
    }
    worst_lin = std::max(worst_lin, std::sqrt(num / den));
  }
  const double secs = seconds_since(t0);
  return {off == 0 && worst_lin <= 1e-9 && secs < 30.0,
          "100 scatterers, " + std::to_string(off) + " off by > 1 px (worst " + fmt(worst_px) +
              " px); linearity error " + fmt(worst_lin, 3) + " (<= 1e-9); " + fmt(secs, 3) + " s (< 30 s)"};
}

// 3: physical -> normalized -> physical is the identity.
Verdict normalization_round_trip(Bench&) {
  const ImagingConfig cfg;
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    RawScattererParams r;
    r.amplitude = 5.0 * (u(rng) + 1.0);
    r.x = 8.0 * u(rng);
    r.y = 8.0 * u(rng);
    r.alpha = 0.5 * std::round(2.0 * u(rng) * 2.0) / 2.0;
    r.gamma = 3e-11 * (u(rng) + 1.0);
    r.length = u(rng) + 1.0;
    r.orientation = 0.5 * u(rng);
    const auto back = denormalize_params(normalize_params(r, cfg), cfg);
    for (auto [a, b] : {std::pair{back.amplitude, r.amplitude}, {back.x, r.x}, {back.y, r.y},
                        {back.alpha, r.alpha}, {back.gamma, r.gamma}, {back.length, r.length},
                        {back.orientation, r.orientation}})
      worst = std::max(worst, a == b ? 0.0 : rel_err(a, b));
  }
  return {worst <= 1e-12, "10^4 draws, worst relative error " + fmt(worst, 3) + " (<= 1e-12)"};
}

// 4: pixel spacings against values evaluated by hand in 30-digit arithmetic.
Verdict pixel_spacings(Bench&) {
  const auto sp = pixel_spacing(ImagingConfig::reference_128());
  const double ex = 0.168040614386760977, ey = 0.202521870976922738;
  const double ex_err = rel_err(sp.range, ex), ey_err = rel_err(sp.cross_range, ey);
  return {ex_err <= 1e-9 && ey_err <= 1e-9, "p_x = " + fmt(sp.range, 12) + " (err " + fmt(ex_err, 2) +
                                                "), p_y = " + fmt(sp.cross_range, 12) + " (err " + fmt(ey_err, 2) +
                                                "), tolerance 1e-9"};
}

// 5: input gradient against central differences in double precision.
Verdict gradient_check(Bench& b) {
  const WideClassifier net = Classifier(NetworkConfig::aconv_a(), 55).cast<double>();
  const auto& s = b.data().test[3];
  const auto img = grid_cast<double>(s.image);
  const int label = (s.label + 1) % 10;
  const auto grad = net.input_gradient(img, label);
  std::mt19937_64 rng(1005);
  std::uniform_int_distribution<std::size_t> pick(0, img.size() - 1);
  int checked = 0;
  double worst = 0.0;
  for (int t = 0; t < 10000 && checked < 20; ++t) {
    const std::size_t i = pick(rng);
    if (std::abs(grad[i]) < 1e-7) continue;  // dead ReLU region: no signal to compare
    const double h = 1e-6;
    auto plus = img, minus = img;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (net.loss(plus, label) - net.loss(minus, label)) / (2 * h);
    worst = std::max(worst, rel_err(fd, grad[i]));
    ++checked;
  }
  return {checked == 20 && worst < 1e-3,
          std::to_string(checked) + " coordinates, worst relative error " + fmt(worst, 3) + " (< 1e-3)"};
}

// 6: default victim accuracy and training time.
Verdict victim_quality(Bench& b) {
  const double secs = b.victim_seconds();
  const double acc = accuracy(b.victim(), std::span<const Sample>(b.data().test));
  return {acc >= 0.95 && secs < 900.0, "held-out accuracy " + pct(acc) + " (>= 95%) on " +
                                           std::to_string(b.data().test.size()) + " images; training " +
                                           fmt(secs, 4) + " s (< 900 s)"};
}

// 7: more scatterers fool more often.
Verdict attack_monotonicity(Bench& b) {
  const auto t0 = Clock::now();
  double fr[4] = {};
  for (int n = 1; n <= 3; ++n) fr[n] = fooling_rate(b.monotonicity_records(smgaa_attack(n, 20, 90)));
  const double secs = seconds_since(t0);
  const auto images = b.monotonicity_records(smgaa_attack(1, 20, 90)).size();
  return {images >= 200 && fr[1] <= fr[2] && fr[2] <= fr[3] && fr[3] >= 0.6 && secs < 7200.0,
          std::to_string(images) + " correctly classified images: SMGAA-1 " + pct(fr[1]) + " <= SMGAA-2 " +
              pct(fr[2]) + " <= SMGAA-3 " + pct(fr[3]) + " (>= 60%); " + fmt(secs, 4) + " s (< 7200 s)"};
}

// 8: per-run contracts of the population search and the acceptance coin.
Verdict search_contracts(Bench& b) {
  const auto samples = b.correct_test(50);
  std::size_t runs = 0, violations = 0;
  std::string first;
  auto violate = [&](const std::string& what) {
    if (violations++ == 0) first = what;
  };
  const auto& imager = b.imager();
  struct Variant {
    int n;
    InitRegion init;
    double cap_db;
    double v_th;
  };
  const Variant variants[] = {{1, InitRegion::Mask, 0.0, 0.1},
                              {2, InitRegion::Background, 0.5, 0.1},
                              {3, InitRegion::Mask, 1.5, 0.1},
                              {3, InitRegion::Whole, 0.0, 1e-4}};
  for (const auto& var : variants) {
    auto cfg = AttackConfig::reference(var.n);
    cfg.population = 8;
    cfg.max_iterations = 25;
    cfg.init_region = var.init;
    cfg.amplitude_cap_db = var.cap_db;
    cfg.confidence_threshold = var.v_th;
    std::vector<AttackResult> results(samples.size());
    parallel_for(samples.size(), Bench::workers(), [&](std::size_t i) {
      auto c = cfg;
      c.seed = derive_seed(1008, {std::uint64_t(var.n), i});
      results[i] = run_smgaa(b.victim(), samples[i], imager, c);
    });
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      ++runs;
      const std::string where = "run " + std::to_string(runs) + ": ";
      if (int(r.theta.size()) != var.n) violate(where + "scatterer count");
      for (const auto& p : r.theta) {
        if (!cfg.bounds.contains(p.to_vector())) violate(where + "parameter outside bounds");
        if (apply_type_template(p).to_vector() != p.to_vector()) violate(where + "frozen attribute changed");
      }
      for (float v : r.adversarial) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          violate(where + "pixel outside [0, 1]");
          break;
        }
      }
      const auto argmin = std::size_t(std::min_element(r.final_confidences.begin(), r.final_confidences.end()) -
                                      r.final_confidences.begin());
      if (r.final_confidences.size() != std::size_t(cfg.population) || r.best_member != argmin)
        violate(where + "returned member is not the argmin");
      if (r.early_stopped) {
        if (!(r.final_confidences[r.best_member] < cfg.confidence_threshold))
          violate(where + "early stop above threshold");
      } else if (r.iterations != cfg.max_iterations) {
        violate(where + "stopped early without reaching the threshold");
      }
      if (r.iterations > cfg.max_iterations) violate(where + "iteration budget exceeded");
    }
  }

  // acceptance coin: a carried loss no candidate can beat makes every candidate worse
  auto cfg = AttackConfig::reference(1);
  cfg.population = 1;
  cfg.seed = 1108;
  const auto& s = samples.front();
  const AttackTarget target{s.image, s.label, s.mask};
  auto start = initialize_population(b.victim(), target, imager, cfg)[0];
  start.loss = 1e9;
  const double cap = cfg.amplitude_cap(double(max_value(s.image)));
  int worse = 0, taken = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    auto m = start;
    m.rng.seed(derive_seed(1208, {trial}));
    const auto out = attack_step(b.victim(), target, imager, m, cfg, cap);
    worse += !out.improved;
    taken += !out.improved && out.accepted;
  }
  const double freq = double(taken) / double(worse);
  return {violations == 0 && worse == 1000 && std::abs(freq - 0.5) <= 0.05,
          std::to_string(runs) + " runs, " + std::to_string(violations) + " contract violations" +
              (first.empty() ? "" : " (first: " + first + ")") + "; worse candidates accepted " +
              std::to_string(taken) + "/" + std::to_string(worse) + " = " + fmt(freq) + " (0.5 +- 0.05)"};
}

// 9: initialization region, scattering type and amplitude cap ablations.
Verdict ablations(Bench& b) {
  const auto samples = b.correct_test(100);
  const std::span<const Sample> set(samples);
  auto rate = [&](const std::function<void(AttackConfig&)>& tweak) {
    auto cfg = AttackConfig::reference(1);
    cfg.population = 50;
    cfg.max_iterations = 50;
    tweak(cfg);
    return fooling_rate(attack_set(b.victim(), set, AttackSpec::with_config("ablation", cfg), b.imager(),
                                   Bench::workers()));
  };
  const double mask = rate([](AttackConfig&) {});
  const double background = rate([](AttackConfig& c) { c.init_region = InitRegion::Background; });

  double localized = 0.0, distributed = 0.0;
  std::string per_type;
  for (auto t : kAllScatteringTypes) {
    const double r = rate([t](AttackConfig& c) { c.types = {t}; });
    (is_localized(t) ? localized : distributed) += r / 4.0;
    per_type += std::string(per_type.empty() ? "" : " ") + std::string(to_string(t)) + "=" + pct(r);
  }

  std::vector<double> caps{mask};  // the 0 dB point is the default configuration
  for (double db : {0.5, 1.0, 1.5}) caps.push_back(rate([db](AttackConfig& c) { c.amplitude_cap_db = db; }));
  const bool monotone = std::is_sorted(caps.begin(), caps.end());

  std::cout << "    per type: " << per_type << '\n';
  return {mask > background && distributed > localized && monotone,
          "init mask " + pct(mask) + " > background " + pct(background) + "; distributed " + pct(distributed) +
              " > localized " + pct(localized) + "; cap 0/0.5/1/1.5 dB: " + pct(caps[0]) + " " + pct(caps[1]) +
              " " + pct(caps[2]) + " " + pct(caps[3]) + " (nondecreasing)"};
}

// 10: interference robustness relative to PGD.
Verdict robustness_ordering(Bench& b) {
  const auto& smgaa3 = b.monotonicity_records(smgaa_attack(3, 20, 90));
  const auto& pgd = b.monotonicity_records(pgd_attack());
  const auto median = InterferenceSpec::median(3);
  const auto noise = InterferenceSpec::noise(1e-2);
  const double s0 = fooling_rate(smgaa3), p0 = fooling_rate(pgd);
  const double s_med = interfered_fooling_rate(b.victim(), std::span<const AttackRecord>(smgaa3), median);
  const double p_med = interfered_fooling_rate(b.victim(), std::span<const AttackRecord>(pgd), median);
  const double s_noise = interfered_fooling_rate(b.victim(), std::span<const AttackRecord>(smgaa3), noise);
  const double s_drop = (s0 - s_med) / s0, p_drop = (p0 - p_med) / p0;
  const double noise_drop = s0 - s_noise;
  return {s_drop < p_drop && noise_drop < 0.02,
          "median 3x3: SMGAA-3 " + pct(s0) + " -> " + pct(s_med) + " (relative drop " + pct(s_drop) + ") vs PGD " +
              pct(p0) + " -> " + pct(p_med) + " (relative drop " + pct(p_drop) + "); noise 1e-2: SMGAA-3 drops " +
              fmt(100.0 * noise_drop) + " points (< 2)"};
}

// 11: scatterer adversarial training against PGD adversarial training.
Verdict defense(Bench& b) {
  const auto t0 = Clock::now();
  DefenseConfig scat;
  scat.training.epochs = 4;
  scat.workers = Bench::workers();
  DefenseConfig linf = scat;
  linf.generator = pgd_attack();

  const Classifier defended = b.adversarially_trained("defended", scat);
  const Classifier pgd_trained = b.adversarially_trained("pgd-trained", linf);
  const double train_secs = seconds_since(t0);

  const std::vector<NamedNet> nets{{"normal", &b.victim()}, {"defended", &defended}, {"pgd-trained", &pgd_trained}};
  const std::span<const Sample> eval(b.data().test.data(), 100);
  const AttackSpec attacks[] = {smgaa_attack(3, 20, 90)};
  const auto cmp = evaluate_defense(nets, attacks, eval, b.imager(), Bench::workers());
  const std::span<const Sample> test(b.data().test);
  auto clean = [&](const Classifier& n) { return accuracy(n, test); };
  auto robust = [&](const char* name) { return cmp.row(name).attacks.front().robust_accuracy; };

  const double gain = robust("defended") - robust("normal");
  const double pgd_gain = robust("pgd-trained") - robust("normal");
  const double clean_loss = clean(b.victim()) - clean(defended);
  return {gain >= 0.20 && clean_loss <= 0.03 && pgd_gain < 0.10,
          "robust accuracy vs SMGAA-3 on 100 images: normal " + pct(robust("normal")) + ", defended " +
              pct(robust("defended")) + " (gain " + fmt(100 * gain) + " >= 20 points), PGD-trained " +
              pct(robust("pgd-trained")) + " (gain " + fmt(100 * pgd_gain) + " < 10 points); clean loss " +
              fmt(100 * clean_loss) + " points (<= 3); adversarial training " + fmt(train_secs, 4) + " s"};
}

// 12: two identical end-to-end runs produce byte-identical reports.
std::string pipeline_report(unsigned workers) {
  DatasetConfig dc;
  dc.classes = 4;
  dc.train_per_class = 40;
  dc.test_per_class = 10;
  dc.seed = 12;
  const auto ds = make_dataset(dc);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 12;
  Classifier net(NetworkConfig::aconv_a(dc.classes), 12);
  const auto tr = train(net, std::span<const Sample>(ds.train), tc);
  const Imager imager(dc.imaging);
  std::ostringstream os;
  for (const auto& e : tr.epochs) os << "epoch." << e.epoch << ".loss = " << format_double(e.mean_loss) << '\n';
  os << "clean_accuracy = " << format_double(accuracy(net, std::span<const Sample>(ds.test))) << '\n';
  const auto suite = default_interference_suite();
  for (const auto& spec : {smgaa_attack(2, 6, 15), pgd_attack()}) {
    const auto records = attack_set(net, std::span<const Sample>(ds.test), spec, imager, workers);
    auto rep = make_report(spec.name, dc.classes, records);
    add_interference(rep, net, records, suite, workers);
    os << rep.to_text();
  }
  return os.str();
}

Verdict determinism(Bench&) {
  const auto a = pipeline_report(1);
  const auto b = pipeline_report(1);
  const auto c = pipeline_report(3);
  return {a == b && a == c, std::string("two runs ") + (a == b ? "identical" : "DIFFER") + ", 1 vs 3 workers " +
                                (a == c ? "identical" : "DIFFER") + " (" + std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  fs::path cache = fs::path(argv[0]).parent_path() / "acceptance_cache";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cache" && i + 1 < argc) {
      cache = argv[++i];
    } else {
      only.insert(std::stoi(a));
    }
  }

  using Check = Verdict (*)(Bench&);
  const std::pair<const char*, Check> criteria[] = {
      {"ASCM Cartesian/polar equivalence", ascm_equivalence},
      {"imaging localization and linearity", imaging_localization},
      {"normalization round trip", normalization_round_trip},
      {"pixel spacings", pixel_spacings},
      {"input gradient check", gradient_check},
      {"victim quality", victim_quality},
      {"attack monotonicity", attack_monotonicity},
      {"population search contracts", search_contracts},
      {"ablation directions", ablations},
      {"robustness ordering", robustness_ordering},
      {"adversarial training defense", defense},
      {"determinism", determinism},
  };

  Bench bench(cache);
  int failed = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second(bench);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << v.detail
              << "  [" << fmt(seconds_since(t0), 4) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
