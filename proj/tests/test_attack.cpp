#include <gtest/gtest.h>

#include <filesystem>

#include "smgaa/attack.hpp"
#include "victim.hpp"

using namespace smgaa;

namespace {

using testutil::imager;
using testutil::victim;

AttackTarget target_of(const Sample& s) { return {s.image, s.label, s.mask}; }

AttackConfig quick_config(int n) {
  auto cfg = AttackConfig::reference(n);
  cfg.population = 6;
  cfg.max_iterations = 5;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(AttackConfig, ReferenceValues) {
  const auto b = reference_bounds(88);
  const ParamVector lo{0, -44, -44, -1, 0, 0, -1}, hi{10, 43, 43, 1, 2, 5, 1};
  EXPECT_EQ(b.lo, lo);
  EXPECT_EQ(b.hi, hi);
  const auto cfg = AttackConfig::reference(3);
  EXPECT_EQ(cfg.population, 100);
  EXPECT_EQ(cfg.max_iterations, 90);
  EXPECT_DOUBLE_EQ(cfg.adaption, 0.5);
  EXPECT_DOUBLE_EQ(cfg.confidence_threshold, 0.1);
  for (std::size_t k = 0; k < kParamCount; ++k) EXPECT_DOUBLE_EQ(cfg.step_std[k], (hi[k] - lo[k]) / 200.0);
  EXPECT_DOUBLE_EQ(cfg.amplitude_cap(0.8), 0.8);
  auto loud = cfg;
  loud.amplitude_cap_db = 20.0;
  EXPECT_NEAR(loud.amplitude_cap(1.0), 10.0, 1e-12);
}

TEST(AttackConfig, RoundTripAndValidation) {
  auto cfg = AttackConfig::reference(2);
  cfg.init_region = InitRegion::Background;
  cfg.types = {ScatteringType::Dihedral, ScatteringType::Cylinder};
  cfg.amplitude_cap_db = 1.5;
  cfg.seed = 99;
  const auto back = AttackConfig::from_config(cfg.to_config());
  EXPECT_EQ(back.to_config(), cfg.to_config());

  auto bad = cfg;
  bad.confidence_threshold = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.types.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.bounds.lo[0] = 11.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(init_region_from_string("edge"), std::invalid_argument);
}

TEST(Initialization, InsideMaskBoundsAndTemplates) {
  const auto& v = victim();
  ASSERT_NE(v.target, nullptr);
  auto cfg = quick_config(3);
  cfg.population = 40;
  const auto members = initialize_population(v.net, target_of(*v.target), imager(), cfg);
  ASSERT_EQ(members.size(), 40u);
  for (const auto& m : members) {
    ASSERT_EQ(m.size(), 3u);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& p = m.theta[i];
      EXPECT_TRUE(cfg.bounds.contains(p.to_vector()));
      EXPECT_EQ(p, apply_type_template(p));
      EXPECT_EQ(m.frozen[i], scattering_type_template(p.type).frozen);
      EXPECT_EQ(m.step_mean[i], cfg.initial_step);
      const auto r = std::size_t(centered_to_pixel(p.x, 88)), c = std::size_t(centered_to_pixel(p.y, 88));
      EXPECT_EQ(double(r), centered_to_pixel(p.x, 88));
      EXPECT_TRUE(v.target->mask(r, c));
    }
    const auto e = evaluate_parts(v.net, target_of(*v.target), m.parts);
    EXPECT_EQ(e.loss, m.loss);
    EXPECT_EQ(e.confidence, m.confidence);
  }
  const auto again = initialize_population(v.net, target_of(*v.target), imager(), cfg);
  for (std::size_t j = 0; j < members.size(); ++j) EXPECT_EQ(members[j].theta, again[j].theta);
}

TEST(Initialization, RegionsAndTypeRestriction) {
  const auto& v = victim();
  auto cfg = quick_config(2);
  cfg.population = 20;
  cfg.init_region = InitRegion::Background;
  cfg.types = {ScatteringType::Trihedral};
  for (const auto& m : initialize_population(v.net, target_of(*v.target), imager(), cfg)) {
    for (const auto& p : m.theta) {
      EXPECT_EQ(p.type, ScatteringType::Trihedral);
      EXPECT_EQ(p.length, 0.0);
      EXPECT_FALSE(v.target->mask(std::size_t(centered_to_pixel(p.x, 88)), std::size_t(centered_to_pixel(p.y, 88))));
    }
  }
  Mask full(88, 88, 1);
  EXPECT_THROW(initialize_population(v.net, AttackTarget{v.target->image, v.target->label, full}, imager(), cfg),
               std::invalid_argument);
}

TEST(Projection, ContractsAndRespectsCap) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> amp(0.0, 10.0), loc(-30.0, 30.0), ori(-1.0, 1.0), len(0.0, 5.0);
  int within = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    ScattererParams p;
    p.type = kAllScatteringTypes[std::size_t(t % 8)];
    p.amplitude = amp(rng);
    p.x = loc(rng);
    p.y = loc(rng);
    p.length = len(rng);
    p.orientation = ori(rng);
    p.gamma = 1.0;
    p = apply_type_template(p);
    auto part = imager().scatterer_image(p);
    const double before = p.amplitude;
    const double peak_before = detail::peak_magnitude(part);
    amplitude_projection(p, part, 1.0, rng);
    EXPECT_LE(p.amplitude, before);
    if (peak_before <= 1.0) {
      EXPECT_EQ(p.amplitude, before);
    }
    // the rescaled part is the image of the new parameters
    const double fresh = detail::peak_magnitude(imager().scatterer_image(p));
    EXPECT_NEAR(fresh, detail::peak_magnitude(part), 1e-9 * std::max(1.0, fresh));
    within += fresh <= 1.0 + 1e-12;
  }
  EXPECT_GE(within, 990);
}

TEST(Projection, ZeroAmplitudeIsFixedPoint) {
  ScattererParams p;
  p.amplitude = 0.0;
  auto part = imager().scatterer_image(p);
  std::mt19937_64 rng(1);
  EXPECT_TRUE(amplitude_projection(p, part, 0.0, rng));
  EXPECT_EQ(p.amplitude, 0.0);
}

TEST(Gradient, LinearToySignMatchesSlope) {
  NetworkConfig nc;
  nc.name = "linear";
  nc.classes = 2;
  nc.layers = {LayerSpec::conv(88, 2)};
  for (double slope : {1e-3, -1e-3}) {
    WideClassifier net(nc, 1);
    net.conv_layers()[0].weight.setZero();
    net.conv_layers()[0].weight.row(0).setConstant(slope);
    net.conv_layers()[0].bias.setZero();
    // label 1: loss = log(1 + exp(slope * sum(x))), monotone in sum(x) with sign(slope)
    Image x(88, 88, 0.0f);
    Mask mask(88, 88, 1);
    const AttackTarget t{x, 1, mask};
    PopulationMember m;
    ScattererParams p;
    p.amplitude = 1.0;
    m.theta = {p};
    ParamMask frozen;
    frozen.fill(true);
    frozen[kAmplitude] = false;
    m.frozen = {frozen};
    m.step_mean = {ParamVector{}};
    m.parts = {imager().scatterer_image(p)};
    const auto s = param_gradient_sign(net, t, imager(), m, AttackConfig::reference(1));
    EXPECT_EQ(s[0][kAmplitude], slope > 0 ? 1.0 : -1.0);
    for (std::size_t k = 1; k < kParamCount; ++k) EXPECT_EQ(s[0][k], 0.0);
  }
}

TEST(Gradient, SignAgreesWithBruteForceLoss) {
  const auto& v = victim();
  const auto net = v.net.cast<double>();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(2);
  cfg.population = 25;
  cfg.seed = 8;
  const auto members = initialize_population(net, t, imager(), cfg);

  // oracle: loss of the unclipped fused image, differenced in theta directly
  auto loss_at = [&](const std::vector<ScattererParams>& theta) {
    const auto pert = center_crop(imager().form_image(theta), 88, 88);
    Grid<double> fused(88, 88);
    for (std::size_t j = 0; j < fused.size(); ++j) fused[j] = double(t.image[j]) + pert[j];
    return net.loss(fused, t.label);
  };
  int agree = 0, counted = 0;
  for (const auto& m : members) {
    const auto g = param_gradient(net, t, imager(), m, cfg);
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t k = 0; k < kParamCount; ++k) {
        if (m.frozen[i][k]) {
          EXPECT_EQ(g[i][k], 0.0);
          continue;
        }
        const double h = cfg.fd_steps[k];
        auto up = m.theta, down = m.theta;
        auto vu = up[i].to_vector(), vd = down[i].to_vector();
        vu[k] = std::min(vu[k] + h, cfg.bounds.hi[k]);
        vd[k] = std::max(vd[k] - h, cfg.bounds.lo[k]);
        up[i] = ScattererParams::from_vector(vu, up[i].type);
        down[i] = ScattererParams::from_vector(vd, down[i].type);
        const double fd = (loss_at(up) - loss_at(down)) / (vu[k] - vd[k]);
        if (std::abs(fd) < 1e-7) continue;  // too flat for a sign
        ++counted;
        agree += sign_of(fd) == sign_of(g[i][k]);
      }
    }
  }
  ASSERT_GT(counted, 100);
  EXPECT_GE(double(agree) / counted, 0.95) << agree << " / " << counted;
}

TEST(Step, KeepsBoundsAndFrozenEntries) {
  const auto& v = victim();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(3);
  cfg.population = 3;
  auto members = initialize_population(v.net, t, imager(), cfg);
  for (int it = 0; it < 15; ++it) {
    for (auto& m : members) {
      const auto before = m.theta;
      attack_step(v.net, t, imager(), m, cfg, 1.0);
      for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_TRUE(cfg.bounds.contains(m.theta[i].to_vector()));
        EXPECT_EQ(m.theta[i].type, before[i].type);
        const auto a = m.theta[i].to_vector(), b = before[i].to_vector();
        for (std::size_t k = 0; k < kParamCount; ++k)
          if (m.frozen[i][k]) {
            EXPECT_EQ(a[k], b[k]);
          }
        EXPECT_LE(detail::peak_magnitude(m.parts[i]), 1.0 + 1e-12);
      }
    }
  }
}

TEST(Step, FullAdaptionKeepsStepMean) {
  const auto& v = victim();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(2);
  cfg.population = 2;
  cfg.adaption = 1.0;
  auto members = initialize_population(v.net, t, imager(), cfg);
  int improved = 0;
  for (int it = 0; it < 10; ++it) {
    for (auto& m : members) {
      improved += attack_step(v.net, t, imager(), m, cfg, 1.0).improved;
      for (const auto& s : m.step_mean) EXPECT_EQ(s, cfg.initial_step);
    }
  }
  EXPECT_GT(improved, 0);
}

TEST(Step, StepMeanTracksImprovingSteps) {
  const auto& v = victim();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(1);
  cfg.population = 1;
  cfg.adaption = 0.0;
  auto m = initialize_population(v.net, t, imager(), cfg)[0];
  for (int it = 0; it < 20; ++it) {
    const auto before = m.theta;
    const auto out = attack_step(v.net, t, imager(), m, cfg, 1.0);
    if (!out.improved) continue;
    // with lambda = 0, S becomes |delta|; away from the clip the move equals delta
    const auto a = m.theta[0].to_vector(), b = before[0].to_vector();
    for (std::size_t k : {kRange, kCrossRange}) {
      if (a[k] > cfg.bounds.lo[k] && a[k] < cfg.bounds.hi[k]) {
        EXPECT_NEAR(m.step_mean[0][k], std::abs(a[k] - b[k]), 1e-9);
      }
    }
  }
}

TEST(Step, AcceptanceOfWorseCandidatesIsAFairCoin) {
  const auto& v = victim();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(1);
  cfg.population = 1;
  auto start = initialize_population(v.net, t, imager(), cfg)[0];
  // a carried loss no candidate can beat makes every step a worse candidate
  start.loss = 1e9;
  int worse = 0, taken = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    auto m = start;
    m.rng.seed(derive_seed(77, {trial}));
    const auto out = attack_step(v.net, t, imager(), m, cfg, 1.0);
    ASSERT_FALSE(out.improved);
    ++worse;
    taken += out.accepted;
    EXPECT_EQ(m.loss, out.candidate_loss);  // carried forward either way
    if (!out.accepted) {
      EXPECT_EQ(m.theta, start.theta);
    }
  }
  ASSERT_EQ(worse, 1000);
  EXPECT_NEAR(taken / 1000.0, 0.5, 0.05);
}

TEST(Step, GreedyAndSynchronizedVariants) {
  const auto& v = victim();
  const auto t = target_of(*v.target);
  auto cfg = quick_config(1);
  cfg.population = 1;
  cfg.accept_probability = 0.0;
  cfg.synchronized_loss = true;
  auto m = initialize_population(v.net, t, imager(), cfg)[0];
  double prev = m.loss;
  for (int it = 0; it < 25; ++it) {
    const auto out = attack_step(v.net, t, imager(), m, cfg, 1.0);
    EXPECT_EQ(out.accepted, out.improved);
    EXPECT_GE(m.loss, prev);
    EXPECT_EQ(m.loss, evaluate_parts(v.net, t, m.parts).loss);
    prev = m.loss;
  }
}

TEST(Run, ThresholdOneStopsImmediately) {
  const auto& v = victim();
  auto cfg = quick_config(1);
  cfg.confidence_threshold = 1.0;
  const auto r = run_smgaa(v.net, *v.target, imager(), cfg);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Run, ReturnsArgminMemberAndIsDeterministic) {
  const auto& v = victim();
  auto cfg = quick_config(2);
  const auto a = run_smgaa(v.net, *v.target, imager(), cfg);
  ASSERT_EQ(a.final_confidences.size(), 6u);
  const auto best = std::min_element(a.final_confidences.begin(), a.final_confidences.end());
  EXPECT_EQ(a.best_member, std::size_t(best - a.final_confidences.begin()));
  EXPECT_NEAR(a.confidence, *best, 1e-6);
  EXPECT_EQ(a.success(), a.predicted != a.ground_truth);
  EXPECT_EQ(int(a.trace.size()), a.iterations);
  EXPECT_LE(a.iterations, cfg.max_iterations);
  if (a.iterations < cfg.max_iterations) {
    EXPECT_LT(a.trace.back(), cfg.confidence_threshold);
  }
  for (std::size_t j = 1; j < a.trace.size(); ++j) EXPECT_GE(a.trace[j - 1], cfg.confidence_threshold);
  for (const auto& p : a.theta) EXPECT_TRUE(cfg.bounds.contains(p.to_vector()));
  EXPECT_EQ(a.adversarial, fuse(v.target->image, a.theta, imager()));

  auto threaded = cfg;
  threaded.workers = 3;
  const auto b = run_smgaa(v.net, *v.target, imager(), threaded);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.adversarial, b.adversarial);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Run, SkipsMisclassifiedInput) {
  const auto& v = victim();
  const int wrong = (v.target->label + 1) % 3;
  const auto r = run_smgaa(v.net, AttackTarget{v.target->image, wrong, v.target->mask}, imager(), quick_config(1));
  EXPECT_EQ(r.status, AttackStatus::SkippedMisclassified);
  EXPECT_TRUE(r.theta.empty());
  EXPECT_EQ(r.adversarial, v.target->image);
}

TEST(Run, RecordRoundTrip) {
  const auto& v = victim();
  const auto r = run_smgaa(v.net, *v.target, imager(), quick_config(3));
  const auto stem = std::filesystem::temp_directory_path() / "smgaa_attack_record";
  write_attack_result(stem, r);
  const auto theta = read_theta(stem.string() + ".txt");
  EXPECT_EQ(theta, r.theta);
  EXPECT_EQ(read_float_image(stem.string() + ".adversarial"), r.adversarial);
  std::filesystem::remove(stem.string() + ".txt");
  std::filesystem::remove(stem.string() + ".perturbation");
  std::filesystem::remove(stem.string() + ".adversarial");
}
