#pragma once

// Image formation for sets of ASCM scatterers: Cartesian frequency grid,
// Taylor taper, zero padding, centered 2D inverse DFT and magnitude.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/ascm.hpp"
#include "smgaa/fft.hpp"
#include "smgaa/grid.hpp"

namespace smgaa {

using ComplexGrid = Grid<Complex>;
using MagnitudeImage = Grid<double>;
using ScattererSet = std::vector<ScattererParams>;

/// Separable uniform Cartesian sampling of the spectral support.
struct FrequencyGrid {
  std::vector<double> fx;  // m range-frequency samples
  std::vector<double> fy;  // n cross-range-frequency samples

  std::size_t rows() const noexcept { return fx.size(); }
  std::size_t cols() const noexcept { return fy.size(); }
  std::pair<double, double> operator()(std::size_t i, std::size_t k) const { return {fx[i], fy[k]}; }
};

inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    v[i] = (i == count - 1) ? hi : lo + (hi - lo) * double(i) / double(count - 1);
  }
  // exact zero at the middle of a symmetric odd-length range
  if (count % 2 == 1 && lo == -hi) v[count / 2] = 0.0;
  return v;
}

inline FrequencyGrid cartesian_grid(const ImagingConfig& cfg) {
  cfg.validate();
  const double fc = cfg.center_frequency;
  const double fy_max = fc * std::sin(cfg.aperture / 2.0);
  return {linspace(fc - cfg.bandwidth / 2.0, fc + cfg.bandwidth / 2.0, cfg.m),
          linspace(-fy_max, fy_max, cfg.n)};
}

/// Taylor taper, peak-normalized to 1. Throws when nbar is too large for the
/// sidelobe level and the taper stops decreasing monotonically from its center.
inline std::vector<double> taylor_window(int length, double sidelobe_db, int nbar) {
  if (length < 2) throw std::invalid_argument("taylor_window: length must be >= 2");
  if (!(sidelobe_db < 0.0)) throw std::invalid_argument("taylor_window: sidelobe_db must be < 0");
  if (nbar < 1) throw std::invalid_argument("taylor_window: nbar must be >= 1");

  const double pi = std::numbers::pi;
  const double b = std::pow(10.0, -sidelobe_db / 20.0);
  const double a = std::acosh(b) / pi;
  const double s2 = double(nbar) * nbar / (a * a + (nbar - 0.5) * (nbar - 0.5));

  std::vector<double> fm(static_cast<std::size_t>(std::max(nbar - 1, 0)));
  for (int mi = 1; mi < nbar; ++mi) {
    double num = 1.0;
    double den = 1.0;
    for (int ni = 1; ni < nbar; ++ni) {
      num *= 1.0 - double(mi) * mi / s2 / (a * a + (ni - 0.5) * (ni - 0.5));
      if (ni != mi) den *= 1.0 - double(mi) * mi / (double(ni) * ni);
    }
    fm[mi - 1] = ((mi % 2 == 1) ? 1.0 : -1.0) * num / (2.0 * den);
  }

  auto weight = [&](double pos) {
    double w = 1.0;
    for (int mi = 1; mi < nbar; ++mi) {
      w += 2.0 * fm[mi - 1] * std::cos(2.0 * pi * mi * (pos - length / 2.0 + 0.5) / length);
    }
    return w;
  };

  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) w[i] = weight(i);
  // symmetrize exactly, then normalize by the continuous center value
  for (int i = 0; i < length / 2; ++i) w[length - 1 - i] = w[i];
  const double peak = weight((length - 1) / 2.0);
  for (auto& v : w) v /= peak;

  for (int i = 1; i <= (length - 1) / 2; ++i) {
    if (w[i] < w[i - 1] - 1e-12) {
      throw std::invalid_argument("taylor_window: nbar=" + std::to_string(nbar) +
                                  " gives a nonmonotonic taper at " +
                                  std::to_string(sidelobe_db) + " dB");
    }
  }
  for (auto& v : w) v = std::min(v, 1.0);
  return w;
}

inline std::vector<double> window_weights(const WindowSpec& spec, int length) {
  if (spec.family == WindowFamily::Rectangular) return std::vector<double>(length, 1.0);
  return taylor_window(length, spec.sidelobe_db, spec.nbar);
}

/// Inclusive lower/upper bounds per attribute, in normalized units.
struct ParamBounds {
  ParamVector lo{};
  ParamVector hi{};

  bool contains(const ParamVector& v) const noexcept {
    for (std::size_t k = 0; k < kParamCount; ++k) {
      if (!(v[k] >= lo[k] && v[k] <= hi[k])) return false;
    }
    return true;
  }
};

/// Corner-origin pixel index of a centered coordinate for an axis of `size` pixels.
inline double centered_to_pixel(double centered, std::size_t size) noexcept {
  return centered + double(size / 2);
}
inline double pixel_to_centered(double pixel, std::size_t size) noexcept {
  return pixel - double(size / 2);
}

/// Precomputed imaging chain for one ImagingConfig. Immutable after
/// construction, so a single instance can be shared between threads.
class Imager {
 public:
  explicit Imager(ImagingConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    grid_ = cartesian_grid(cfg_);
    spacing_ = pixel_spacing(cfg_);
    wx_ = window_weights(cfg_.window, cfg_.m);
    wy_ = window_weights(cfg_.window, cfg_.n);

    const std::size_t m = grid_.rows();
    const std::size_t n = grid_.cols();
    radial_ = Grid<double>(m, n);
    sin_psi_ = Grid<double>(m, n);
    cos_psi_ = Grid<double>(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double fx = grid_.fx[i];
        const double fy = grid_.fy[k];
        radial_(i, k) = std::sqrt(fx * fx + fy * fy);
        const double psi = std::atan(fy / fx);
        sin_psi_(i, k) = std::sin(psi);
        cos_psi_(i, k) = std::cos(psi);
      }
    }
    for (double alpha : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      freq_tables_.emplace(alpha, frequency_table(alpha));
    }
  }

  const ImagingConfig& config() const noexcept { return cfg_; }
  const FrequencyGrid& grid() const noexcept { return grid_; }
  const PixelSpacing& spacing() const noexcept { return spacing_; }
  std::size_t image_rows() const noexcept { return static_cast<std::size_t>(cfg_.m_star); }
  std::size_t image_cols() const noexcept { return static_cast<std::size_t>(cfg_.n_star); }
  std::span<const double> range_window() const noexcept { return wx_; }
  std::span<const double> cross_range_window() const noexcept { return wy_; }

  /// Unwindowed m x n frequency data of a single scatterer.
  ComplexGrid spectrum(const ScattererParams& p) const {
    ComplexGrid out(grid_.rows(), grid_.cols());
    accumulate_spectrum(p, out);
    return out;
  }

  /// Pointwise sum of single-scatterer spectra.
  ComplexGrid synthesize(std::span<const ScattererParams> set) const {
    ComplexGrid out(grid_.rows(), grid_.cols());
    for (const auto& p : set) accumulate_spectrum(p, out);
    return out;
  }

  /// Windowed, zero-padded, centered inverse DFT of frequency data.
  ComplexGrid image_from_spectrum(const ComplexGrid& spec) const {
    const std::size_t m = grid_.rows();
    const std::size_t n = grid_.cols();
    const std::size_t ms = image_rows();
    const std::size_t ns = image_cols();
    Complex* work = detail::fft_scratch(ms * ns);
    std::fill(work, work + ms * ns, Complex{});
    for (std::size_t i = 0; i < m; ++i) {
      const Complex* src = &spec(i, 0);
      Complex* dst = work + i * ns;
      const double wi = wx_[i];
      for (std::size_t k = 0; k < n; ++k) dst[k] = src[k] * (wi * wy_[k]);
    }
    detail::execute_inverse_2d(work, int(ms), int(ns));
    // quadrant swap: output row r reads transform row (r + ms - ms/2) % ms
    const double scale = 1.0 / (double(ms) * double(ns));
    ComplexGrid out(ms, ns);
    const std::size_t hr = ms / 2;
    const std::size_t hc = ns / 2;
    const std::size_t lead = ns - hc;  // columns [lead, ns) of the source go first
    for (std::size_t r = 0; r < ms; ++r) {
      const Complex* src = work + ((r + ms - hr) % ms) * ns;
      Complex* dst = &out(r, 0);
      for (std::size_t c = 0; c < hc; ++c) dst[c] = src[lead + c] * scale;
      for (std::size_t c = hc; c < ns; ++c) dst[c] = src[c - hc] * scale;
    }
    return out;
  }

  /// Complex (pre-magnitude) image of one scatterer.
  ComplexGrid scatterer_image(const ScattererParams& p) const {
    return image_from_spectrum(spectrum(p));
  }

  ComplexGrid complex_image(std::span<const ScattererParams> set) const {
    return image_from_spectrum(synthesize(set));
  }

  MagnitudeImage form_image(std::span<const ScattererParams> set) const {
    return magnitude(complex_image(set));
  }

  static MagnitudeImage magnitude(const ComplexGrid& g) {
    MagnitudeImage out(g.rows(), g.cols());
    // sqrt(re^2 + im^2): no overflow is possible at these magnitudes, and hypot is slow
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = std::sqrt(std::norm(g[i]));
    return out;
  }

  /// Pixel (row, col) where a point scatterer at centered (x_p, y_p) peaks.
  std::pair<double, double> predicted_peak(double x_p, double y_p) const noexcept {
    const double ms = image_rows();
    const double ns = image_cols();
    return {double(image_rows() / 2) + x_p * ms / (ms - 1.0),
            double(image_cols() / 2) + y_p * ns / (ns - 1.0)};
  }

 private:
  Grid<Complex> frequency_table(double alpha) const {
    Grid<Complex> t(grid_.rows(), grid_.cols());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = frequency_power(radial_[i] / cfg_.center_frequency, alpha);
    }
    return t;
  }

  void accumulate_spectrum(const ScattererParams& p, ComplexGrid& out) const {
    if (p.amplitude == 0.0) return;
    if (cfg_.polar_resampling) {
      accumulate_polar(p, out);
      return;
    }
    const double pi = std::numbers::pi;
    const std::size_t m = grid_.rows();
    const std::size_t n = grid_.cols();
    const double fc = cfg_.center_frequency;

    std::vector<Complex> row_phase(m);
    for (std::size_t i = 0; i < m; ++i) {
      row_phase[i] = std::polar(1.0, -4.0 * pi / cfg_.c * spacing_.range * p.x * grid_.fx[i]);
    }
    std::vector<Complex> col_factor(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double fy = grid_.fy[k];
      col_factor[k] = p.amplitude * std::exp(-(fy / fc) * p.gamma) *
                      std::polar(1.0, -4.0 * pi / cfg_.c * spacing_.cross_range * p.y * fy);
    }

    const Grid<Complex>* table = nullptr;
    std::optional<Grid<Complex>> custom;
    if (auto it = freq_tables_.find(p.alpha); it != freq_tables_.end()) {
      table = &it->second;
    } else {
      custom = frequency_table(p.alpha);
      table = &*custom;
    }

    const bool extended = p.length != 0.0;
    const double half = cfg_.aperture / 2.0;
    const double sin_o = std::sin(p.orientation * half);
    const double cos_o = std::cos(p.orientation * half);
    const double extent_scale = pi / (2.0 * std::sin(half) * fc) * p.length * cfg_.eta_y();

    for (std::size_t i = 0; i < m; ++i) {
      Complex* dst = &out(i, 0);
      const Complex* f = &(*table)(i, 0);
      for (std::size_t k = 0; k < n; ++k) {
        Complex v = f[k] * row_phase[i] * col_factor[k];
        if (extended) {
          const std::size_t idx = i * n + k;
          const double s = sin_psi_[idx] * cos_o - cos_psi_[idx] * sin_o;
          v *= sinc(extent_scale * radial_[idx] * s);
        }
        dst[k] += v;
      }
    }
  }

  // Physical-unit samples on the polar raster, bilinearly resampled to the Cartesian grid.
  void accumulate_polar(const ScattererParams& p, ComplexGrid& out) const {
    const auto raw = denormalize_params(p, cfg_);
    const int m = cfg_.m;
    const int n = cfg_.n;
    const double f0 = cfg_.center_frequency - cfg_.bandwidth / 2.0;
    const double df = cfg_.bandwidth / (m - 1);
    const double phi0 = -cfg_.aperture / 2.0;
    const double dphi = cfg_.aperture / (n - 1);
    ComplexGrid polar(m, n);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < n; ++k) polar(i, k) = eval_raw_response(f0 + i * df, phi0 + k * dphi, raw, cfg_);
    }
    for (std::size_t i = 0; i < grid_.rows(); ++i) {
      for (std::size_t k = 0; k < grid_.cols(); ++k) {
        const double u = std::clamp((radial_(i, k) - f0) / df, 0.0, double(m - 1));
        const double v = std::clamp((std::atan2(grid_.fy[k], grid_.fx[i]) - phi0) / dphi, 0.0,
                                    double(n - 1));
        const int i0 = std::min(static_cast<int>(u), m - 2);
        const int k0 = std::min(static_cast<int>(v), n - 2);
        const double tu = u - i0;
        const double tv = v - k0;
        out(i, k) += (1 - tu) * (1 - tv) * polar(i0, k0) + tu * (1 - tv) * polar(i0 + 1, k0) +
                     (1 - tu) * tv * polar(i0, k0 + 1) + tu * tv * polar(i0 + 1, k0 + 1);
      }
    }
  }

  ImagingConfig cfg_;
  FrequencyGrid grid_;
  PixelSpacing spacing_;
  std::vector<double> wx_;
  std::vector<double> wy_;
  Grid<double> radial_;
  Grid<double> sin_psi_;
  Grid<double> cos_psi_;
  std::map<double, Grid<Complex>> freq_tables_;
};

inline ComplexGrid synthesize_frequency_data(std::span<const ScattererParams> set,
                                             const ImagingConfig& cfg) {
  return Imager(cfg).synthesize(set);
}

inline MagnitudeImage form_image(std::span<const ScattererParams> set, const ImagingConfig& cfg) {
  return Imager(cfg).form_image(set);
}

struct FuseOptions {
  /// When set, a perturbation whose peak exceeds peak_cap * max(x) is scaled down to it.
  std::optional<double> peak_cap;
};

/// clip(x + perturbation, 0, 1); the perturbation is center-cropped to x's shape.
inline Image fuse_perturbation(const Image& x, const MagnitudeImage& perturbation,
                               const FuseOptions& opts = {}) {
  if (perturbation.rows() < x.rows() || perturbation.cols() < x.cols()) {
    throw std::invalid_argument("fuse: perturbation " + std::to_string(perturbation.rows()) + "x" +
                                std::to_string(perturbation.cols()) + " smaller than image " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  const MagnitudeImage p = center_crop(perturbation, x.rows(), x.cols());
  double scale = 1.0;
  if (opts.peak_cap) {
    const double limit = *opts.peak_cap * double(max_value(x));
    const double peak = max_value(p);
    if (peak > limit && peak > 0.0) scale = limit / peak;
  }
  Image out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(double(x[i]) + scale * p[i], 0.0, 1.0));
  }
  return out;
}

inline Image fuse(const Image& x, std::span<const ScattererParams> set, const Imager& imager,
                  const FuseOptions& opts = {}) {
  return fuse_perturbation(x, imager.form_image(set), opts);
}

/// Default central-difference steps per attribute, in normalized units.
inline constexpr ParamVector kDefaultFdSteps = {1e-3, 1e-2, 1e-2, 1e-3, 1e-3, 1e-2, 1e-3};

/// d|I| / d theta_{i,k} for every scatterer i and attribute k. Frozen entries
/// hold all-zero images.
struct ImageJacobian {
  std::size_t scatterers = 0;
  std::vector<MagnitudeImage> sensitivity;  // index i * kParamCount + k

  const MagnitudeImage& at(std::size_t i, std::size_t k) const {
    return sensitivity[i * kParamCount + k];
  }
};

/// Finite-difference sensitivity of the magnitude image. Differences are
/// central in the interior and one-sided where a step would leave the bounds.
/// The result is center-cropped to (out_rows, out_cols) when those are nonzero.
inline ImageJacobian image_jacobian_fd(const Imager& imager, std::span<const ScattererParams> set,
                                       std::span<const ParamMask> frozen, const ParamBounds& bounds,
                                       const ParamVector& steps = kDefaultFdSteps,
                                       std::size_t out_rows = 0, std::size_t out_cols = 0) {
  if (frozen.size() != set.size()) throw std::invalid_argument("image_jacobian_fd: mask count mismatch");
  const std::size_t rows = out_rows ? out_rows : imager.image_rows();
  const std::size_t cols = out_cols ? out_cols : imager.image_cols();

  std::vector<ComplexGrid> parts;
  parts.reserve(set.size());
  ComplexGrid total(imager.image_rows(), imager.image_cols());
  for (const auto& p : set) {
    parts.push_back(imager.scatterer_image(p));
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += parts.back()[j];
  }

  auto magnitude_with = [&](std::size_t i, const ScattererParams& replacement) {
    ComplexGrid img = total;
    const ComplexGrid part = imager.scatterer_image(replacement);
    for (std::size_t j = 0; j < img.size(); ++j) img[j] += part[j] - parts[i][j];
    return center_crop(Imager::magnitude(img), rows, cols);
  };

  ImageJacobian jac;
  jac.scatterers = set.size();
  jac.sensitivity.assign(set.size() * kParamCount, MagnitudeImage(rows, cols));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ParamVector base = set[i].to_vector();
    for (std::size_t k = 0; k < kParamCount; ++k) {
      if (frozen[i][k]) continue;
      if (!(steps[k] > 0.0)) throw std::invalid_argument("image_jacobian_fd: step must be positive");
      const double hi = std::min(base[k] + steps[k], bounds.hi[k]);
      const double lo = std::max(base[k] - steps[k], bounds.lo[k]);
      if (!(hi > lo)) {
        throw std::domain_error("image_jacobian_fd: step for " + std::string(kParamNames[k]) +
                                " collapses at the bounds");
      }
      ParamVector up = base;
      ParamVector down = base;
      up[k] = hi;
      down[k] = lo;
      const auto img_up = magnitude_with(i, ScattererParams::from_vector(up, set[i].type));
      const auto img_down = magnitude_with(i, ScattererParams::from_vector(down, set[i].type));
      auto& dst = jac.sensitivity[i * kParamCount + k];
      const double inv = 1.0 / (hi - lo);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (img_up[j] - img_down[j]) * inv;
    }
  }
  return jac;
}

}  // namespace smgaa
