#pragma once

// Synthetic SAR-style target set: each class is a fixed layout of scatterers
// plus a shadow region; samples jitter the layout, add clutter and speckle,
// and carry a target-and-shadow mask.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/ascm.hpp"
#include "smgaa/config.hpp"
#include "smgaa/grid.hpp"
#include "smgaa/image_io.hpp"
#include "smgaa/imaging.hpp"
#include "smgaa/rng.hpp"
#include "smgaa/training.hpp"

namespace smgaa {

using Mask = Grid<std::uint8_t>;

/// Axis-aligned shadow rectangle in centered pixel coordinates, inclusive.
struct ShadowSpec {
  int row_lo = 0;
  int row_hi = -1;
  int col_lo = 0;
  int col_hi = -1;
  double attenuation = 0.6;  // multiplicative factor inside the region
};

struct TargetTemplate {
  int class_id = 0;
  std::vector<ScattererParams> scatterers;
  ShadowSpec shadow;
};

struct DatasetConfig {
  int classes = 10;
  int train_per_class = 200;
  int test_per_class = 100;
  std::uint64_t seed = 7;
  int image_size = 88;
  double position_jitter = 1.5;     // global shift, pixels (uniform +-)
  double scatterer_jitter = 0.3;    // per-scatterer shift, pixels
  double amplitude_jitter = 0.2;    // relative (uniform +-)
  double orientation_jitter = 0.05; // normalized units
  double speckle = 0.25;
  double clutter = 0.03;            // background floor relative to the target peak
  ImagingConfig imaging{};

  void validate() const {
    if (classes < 2) throw std::invalid_argument("DatasetConfig: need at least two classes");
    if (train_per_class < 1 || test_per_class < 1)
      throw std::invalid_argument("DatasetConfig: sample counts must be >= 1");
    if (image_size < 16) throw std::invalid_argument("DatasetConfig: image size too small");
    if (speckle < 0.0 || speckle > 1.0) throw std::invalid_argument("DatasetConfig: speckle in [0, 1]");
    if (position_jitter < 0 || scatterer_jitter < 0 || amplitude_jitter < 0 || amplitude_jitter >= 1 ||
        orientation_jitter < 0 || clutter < 0)
      throw std::invalid_argument("DatasetConfig: jitter magnitudes must be nonnegative");
    imaging.validate();
    if (imaging.m_star < image_size || imaging.n_star < image_size)
      throw std::invalid_argument("DatasetConfig: formed image smaller than the sample size");
  }

  Config to_config() const {
    Config c;
    c.set("dataset.classes", classes);
    c.set("dataset.train_per_class", train_per_class);
    c.set("dataset.test_per_class", test_per_class);
    c.set("dataset.seed", seed);
    c.set("dataset.image_size", image_size);
    c.set("dataset.position_jitter", position_jitter);
    c.set("dataset.scatterer_jitter", scatterer_jitter);
    c.set("dataset.amplitude_jitter", amplitude_jitter);
    c.set("dataset.orientation_jitter", orientation_jitter);
    c.set("dataset.speckle", speckle);
    c.set("dataset.clutter", clutter);
    c.set("imaging.center_frequency", imaging.center_frequency);
    c.set("imaging.bandwidth", imaging.bandwidth);
    c.set("imaging.aperture", imaging.aperture);
    c.set("imaging.m", imaging.m);
    c.set("imaging.n", imaging.n);
    c.set("imaging.m_star", imaging.m_star);
    c.set("imaging.n_star", imaging.n_star);
    c.set("imaging.window", imaging.window.family == WindowFamily::Taylor ? "taylor" : "rectangular");
    c.set("imaging.sidelobe_db", imaging.window.sidelobe_db);
    c.set("imaging.nbar", imaging.window.nbar);
    return c;
  }

  static DatasetConfig from_config(const Config& c) {
    DatasetConfig d;
    d.classes = c.get("dataset.classes", d.classes);
    d.train_per_class = c.get("dataset.train_per_class", d.train_per_class);
    d.test_per_class = c.get("dataset.test_per_class", d.test_per_class);
    d.seed = c.get("dataset.seed", d.seed);
    d.image_size = c.get("dataset.image_size", d.image_size);
    d.position_jitter = c.get("dataset.position_jitter", d.position_jitter);
    d.scatterer_jitter = c.get("dataset.scatterer_jitter", d.scatterer_jitter);
    d.amplitude_jitter = c.get("dataset.amplitude_jitter", d.amplitude_jitter);
    d.orientation_jitter = c.get("dataset.orientation_jitter", d.orientation_jitter);
    d.speckle = c.get("dataset.speckle", d.speckle);
    d.clutter = c.get("dataset.clutter", d.clutter);
    auto& im = d.imaging;
    im.center_frequency = c.get("imaging.center_frequency", im.center_frequency);
    im.bandwidth = c.get("imaging.bandwidth", im.bandwidth);
    im.aperture = c.get("imaging.aperture", im.aperture);
    im.m = c.get("imaging.m", im.m);
    im.n = c.get("imaging.n", im.n);
    im.m_star = c.get("imaging.m_star", im.m_star);
    im.n_star = c.get("imaging.n_star", im.n_star);
    const auto window = c.get<std::string>("imaging.window", "taylor");
    if (window == "taylor") {
      im.window.family = WindowFamily::Taylor;
    } else if (window == "rectangular") {
      im.window.family = WindowFamily::Rectangular;
    } else {
      throw ConfigError("config key 'imaging.window': unknown window '" + window + "'");
    }
    im.window.sidelobe_db = c.get("imaging.sidelobe_db", im.window.sidelobe_db);
    im.window.nbar = c.get("imaging.nbar", im.window.nbar);
    d.validate();
    return d;
  }
};

/// Number of scatterers of `a` with no scatterer of `b` within `min_px`.
inline int unmatched_positions(const TargetTemplate& a, const TargetTemplate& b, double min_px = 2.0) {
  int count = 0;
  for (const auto& p : a.scatterers) {
    bool matched = false;
    for (const auto& q : b.scatterers) {
      if (std::hypot(p.x - q.x, p.y - q.y) <= min_px) {
        matched = true;
        break;
      }
    }
    count += matched ? 0 : 1;
  }
  return count;
}

/// Distinct when each template has at least three scatterers farther than
/// 2 px from every scatterer of the other.
inline bool templates_distinct(const TargetTemplate& a, const TargetTemplate& b) {
  return std::min(unmatched_positions(a, b), unmatched_positions(b, a)) >= 3;
}

namespace detail {

inline TargetTemplate random_template(int class_id, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  TargetTemplate t;
  t.class_id = class_id;
  // body footprint: range extent is the longer side, as for a vehicle seen broadside-on
  const double half_len = uni(9.0, 16.0);
  const double half_wid = uni(4.0, 8.0);
  const double cx = uni(-4.0, 2.0);
  const double cy = uni(-3.0, 3.0);
  const int count = std::uniform_int_distribution<int>(8, 20)(rng);
  for (int i = 0; i < count; ++i) {
    ScattererParams p;
    p.type = kAllScatteringTypes[std::uniform_int_distribution<std::size_t>(0, 7)(rng)];
    p.amplitude = uni(0.3, 1.0);
    p.x = cx + uni(-half_len, half_len);
    p.y = cy + uni(-half_wid, half_wid);
    if (is_localized(p.type)) {
      p.gamma = uni(0.0, 1.0);
    } else {
      p.length = uni(1.0, 4.0);
      p.orientation = uni(-0.5, 0.5);
    }
    t.scatterers.push_back(apply_type_template(p));
  }
  // two dominant returns make each layout's brightest structure class-specific
  for (int k = 0; k < 2; ++k) t.scatterers[std::size_t(k)].amplitude = uni(1.5, 2.5);
  const int gap = 2;
  const int shadow_len = std::uniform_int_distribution<int>(8, 14)(rng);
  t.shadow.row_lo = static_cast<int>(std::lround(cx + half_len)) + gap;
  t.shadow.row_hi = std::min(t.shadow.row_lo + shadow_len, 40);
  t.shadow.col_lo = static_cast<int>(std::lround(cy - half_wid));
  t.shadow.col_hi = static_cast<int>(std::lround(cy + half_wid));
  return t;
}

}  // namespace detail

/// J deterministic, pairwise-distinct class templates.
inline std::vector<TargetTemplate> build_templates(int classes, std::uint64_t seed, int max_retries = 1000) {
  if (classes < 2) throw std::invalid_argument("build_templates: need at least two classes");
  std::mt19937_64 rng(derive_seed(seed, {0x7e4d, std::uint64_t(classes)}));
  std::vector<TargetTemplate> out;
  for (int j = 0; j < classes; ++j) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= max_retries) {
        throw std::runtime_error("build_templates: cannot find a distinct layout for class " + std::to_string(j) +
                                 " after " + std::to_string(max_retries) + " attempts");
      }
      auto t = detail::random_template(j, rng);
      const bool ok = std::all_of(out.begin(), out.end(), [&](const auto& o) { return templates_distinct(t, o); });
      if (ok) {
        out.push_back(std::move(t));
        break;
      }
    }
  }
  return out;
}

struct RenderOptions {
  double position_jitter = 0.0;
  double scatterer_jitter = 0.0;
  double amplitude_jitter = 0.0;
  double orientation_jitter = 0.0;
  double speckle = 0.0;
  double clutter = 0.03;
  int image_size = 88;

  static RenderOptions from(const DatasetConfig& c) {
    return {c.position_jitter, c.scatterer_jitter, c.amplitude_jitter, c.orientation_jitter,
            c.speckle,         c.clutter,          c.image_size};
  }
};

/// 3x3 binary dilation.
inline Mask dilate3x3(const Mask& m) {
  Mask out(m.rows(), m.cols(), 0);
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
  const auto cols = static_cast<std::ptrdiff_t>(m.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      if (!m(std::size_t(r), std::size_t(c))) continue;
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const auto rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) out(std::size_t(rr), std::size_t(cc)) = 1;
        }
      }
    }
  }
  return out;
}

/// One jittered, shadowed, speckled and max-normalized rendering of a template.
/// Every random draw comes from `jitter_seed`, so equal seeds give equal samples.
inline Sample render_sample(const TargetTemplate& tmpl, std::uint64_t jitter_seed, const Imager& imager,
                            const RenderOptions& opt) {
  std::mt19937_64 rng(jitter_seed);
  auto sym = [&](double mag) {
    return mag > 0.0 ? std::uniform_real_distribution<double>(-mag, mag)(rng) : 0.0;
  };
  const double shift_x = sym(opt.position_jitter);
  const double shift_y = sym(opt.position_jitter);
  std::vector<ScattererParams> set = tmpl.scatterers;
  for (auto& p : set) {
    p.x += shift_x + sym(opt.scatterer_jitter);
    p.y += shift_y + sym(opt.scatterer_jitter);
    p.amplitude *= 1.0 + sym(opt.amplitude_jitter);
    if (!is_localized(p.type)) p.orientation = std::clamp(p.orientation + sym(opt.orientation_jitter), -1.0, 1.0);
  }
  const std::size_t size = std::size_t(opt.image_size);
  const MagnitudeImage formed = center_crop(imager.form_image(set), size, size);
  const double peak = max_value(formed);

  const int off_r = static_cast<int>(std::lround(shift_x));
  const int off_c = static_cast<int>(std::lround(shift_y));
  Mask shadow(size, size, 0);
  for (int r = tmpl.shadow.row_lo + off_r; r <= tmpl.shadow.row_hi + off_r; ++r) {
    for (int c = tmpl.shadow.col_lo + off_c; c <= tmpl.shadow.col_hi + off_c; ++c) {
      const double pr = centered_to_pixel(r, size);
      const double pc = centered_to_pixel(c, size);
      if (pr >= 0 && pr < double(size) && pc >= 0 && pc < double(size)) shadow(std::size_t(pr), std::size_t(pc)) = 1;
    }
  }

  std::exponential_distribution<double> expo(1.0);
  std::vector<double> work(formed.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    double v = (peak > 0.0 ? formed[i] / peak : 0.0) + opt.clutter;
    if (shadow[i]) v *= tmpl.shadow.attenuation;
    if (opt.speckle > 0.0) v *= (1.0 - opt.speckle) + opt.speckle * expo(rng);
    work[i] = v;
  }
  const double top = *std::max_element(work.begin(), work.end());

  Sample s;
  s.label = tmpl.class_id;
  s.image = Image(size, size);
  Mask bright(size, size, 0);
  for (std::size_t i = 0; i < work.size(); ++i) {
    s.image[i] = static_cast<float>(work[i] / top);
    bright[i] = (s.image[i] > 0.2f || shadow[i]) ? 1 : 0;
  }
  s.mask = dilate3x3(bright);
  return s;
}

/// Stable per-sample jitter seed; split 0 is train, 1 is test.
inline std::uint64_t sample_seed(std::uint64_t seed, int split, int class_id, int index) {
  return derive_seed(seed, {0x5a3d, std::uint64_t(split), std::uint64_t(class_id), std::uint64_t(index)});
}

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> test_seeds;
};

/// Renders the full train/test split in memory. Order is class-major, stable.
inline Dataset make_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const auto templates = build_templates(cfg.classes, cfg.seed);
  const Imager imager(cfg.imaging);
  const auto opt = RenderOptions::from(cfg);
  Dataset ds;
  for (int split = 0; split < 2; ++split) {
    const int per_class = split == 0 ? cfg.train_per_class : cfg.test_per_class;
    auto& samples = split == 0 ? ds.train : ds.test;
    auto& seeds = split == 0 ? ds.train_seeds : ds.test_seeds;
    for (int j = 0; j < cfg.classes; ++j) {
      for (int i = 0; i < per_class; ++i) {
        seeds.push_back(sample_seed(cfg.seed, split, j, i));
        samples.push_back(render_sample(templates[std::size_t(j)], seeds.back(), imager, opt));
      }
    }
  }
  const std::set<std::uint64_t> train_set(ds.train_seeds.begin(), ds.train_seeds.end());
  for (auto s : ds.test_seeds) {
    if (train_set.count(s)) throw std::logic_error("dataset: train and test jitter seeds overlap");
  }
  if (train_set.size() != ds.train_seeds.size()) throw std::logic_error("dataset: duplicate train jitter seed");
  return ds;
}

namespace detail {

inline std::string sample_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

inline void write_split(const fs::path& dir, const std::vector<Sample>& samples,
                        const std::vector<std::uint64_t>& seeds) {
  fs::create_directories(dir);
  std::ofstream labels(dir / "labels.txt");
  if (!labels) throw IoError("cannot write " + (dir / "labels.txt").string());
  labels << "# index label jitter_seed\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto stem = sample_stem(i);
    write_float_image(dir / (stem + ".img"), samples[i].image);
    write_float_image(dir / (stem + ".mask"), grid_cast<float>(samples[i].mask));
    labels << i << ' ' << samples[i].label << ' ' << seeds[i] << '\n';
  }
  if (!labels) throw IoError("write failed: " + (dir / "labels.txt").string());
}

inline std::vector<Sample> read_split(const fs::path& dir) {
  std::ifstream labels(dir / "labels.txt");
  if (!labels) throw IoError("cannot open " + (dir / "labels.txt").string());
  std::vector<Sample> out;
  std::string line;
  while (std::getline(labels, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t index = 0;
    Sample s;
    std::uint64_t seed = 0;
    if (!(ls >> index >> s.label >> seed) || index != out.size()) {
      throw IoError("malformed label line in " + (dir / "labels.txt").string() + ": " + line);
    }
    const auto stem = sample_stem(index);
    s.image = read_float_image(dir / (stem + ".img"));
    const auto mask = read_float_image(dir / (stem + ".mask"));
    s.mask = Mask(mask.rows(), mask.cols());
    for (std::size_t k = 0; k < mask.size(); ++k) s.mask[k] = mask[k] > 0.5f ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Writes manifest.txt plus train/ and test/ splits (image, mask, labels.txt).
inline Dataset generate_dataset(const DatasetConfig& cfg, const fs::path& dir) {
  Dataset ds = make_dataset(cfg);
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create dataset directory " + dir.string() + ": " + e.what());
  }
  auto manifest = cfg.to_config();
  manifest.set("format", "smgaa-dataset-1");
  manifest.set("train_count", ds.train.size());
  manifest.set("test_count", ds.test.size());
  const auto sp = pixel_spacing(cfg.imaging);
  manifest.set("imaging.pixel_spacing_range", sp.range);
  manifest.set("imaging.pixel_spacing_cross_range", sp.cross_range);
  try {
    manifest.save(dir / "manifest.txt");
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  detail::write_split(dir / "train", ds.train, ds.train_seeds);
  detail::write_split(dir / "test", ds.test, ds.test_seeds);
  return ds;
}

struct LoadedDataset {
  DatasetConfig config;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

inline LoadedDataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) throw IoError("no dataset manifest at " + (dir / "manifest.txt").string());
  LoadedDataset out;
  out.config = DatasetConfig::from_config(Config::load(dir / "manifest.txt"));
  out.train = detail::read_split(dir / "train");
  out.test = detail::read_split(dir / "test");
  return out;
}

}  // namespace smgaa
