#pragma once

// Attributed scattering center model: scatterer parameters, scattering-type
// taxonomy, parameter normalization and the raw/normalized frequency responses.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smgaa {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;

enum class ScatteringType {
  Trihedral,
  TopHat,
  Sphere,
  CornerDiffraction,
  Dihedral,
  Cylinder,
  EdgeBroadside,
  EdgeDiffraction,
};

inline constexpr std::array<ScatteringType, 8> kAllScatteringTypes = {
    ScatteringType::Trihedral,     ScatteringType::TopHat,   ScatteringType::Sphere,
    ScatteringType::CornerDiffraction, ScatteringType::Dihedral, ScatteringType::Cylinder,
    ScatteringType::EdgeBroadside, ScatteringType::EdgeDiffraction,
};

inline constexpr bool is_localized(ScatteringType t) noexcept {
  return t == ScatteringType::Trihedral || t == ScatteringType::TopHat ||
         t == ScatteringType::Sphere || t == ScatteringType::CornerDiffraction;
}

inline constexpr std::string_view to_string(ScatteringType t) noexcept {
  switch (t) {
    case ScatteringType::Trihedral: return "Trihedral";
    case ScatteringType::TopHat: return "TopHat";
    case ScatteringType::Sphere: return "Sphere";
    case ScatteringType::CornerDiffraction: return "CornerDiffraction";
    case ScatteringType::Dihedral: return "Dihedral";
    case ScatteringType::Cylinder: return "Cylinder";
    case ScatteringType::EdgeBroadside: return "EdgeBroadside";
    case ScatteringType::EdgeDiffraction: return "EdgeDiffraction";
  }
  return "Unknown";
}

inline ScatteringType scattering_type_from_string(std::string_view name) {
  for (auto t : kAllScatteringTypes) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown scattering type: " + std::string(name));
}

/// Positions of the seven scatterer attributes inside a parameter vector.
enum ParamIndex : std::size_t {
  kAmplitude = 0,
  kRange = 1,
  kCrossRange = 2,
  kAlpha = 3,
  kGamma = 4,
  kLength = 5,
  kOrientation = 6,
};
inline constexpr std::size_t kParamCount = 7;
using ParamVector = std::array<double, kParamCount>;
using ParamMask = std::array<bool, kParamCount>;

inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "A", "x_p", "y_p", "alpha", "gamma_p", "L_p", "phi_p"};

/// Normalized scatterer. Locations and length are in pixels relative to the
/// image center, gamma_p is dimensionless and the orientation lies in [-1, 1].
struct ScattererParams {
  double amplitude = 0.0;
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double length = 0.0;
  double orientation = 0.0;
  ScatteringType type = ScatteringType::Trihedral;

  ParamVector to_vector() const noexcept {
    return {amplitude, x, y, alpha, gamma, length, orientation};
  }
  static ScattererParams from_vector(const ParamVector& v, ScatteringType t) noexcept {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], t};
  }
  friend bool operator==(const ScattererParams&, const ScattererParams&) = default;
};

/// Physical scatterer: metres, radians and seconds as in the ASCM.
struct RawScattererParams {
  double amplitude = 0.0;
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double length = 0.0;
  double orientation = 0.0;
};

enum class WindowFamily { Taylor, Rectangular };

struct WindowSpec {
  WindowFamily family = WindowFamily::Taylor;
  double sidelobe_db = -35.0;
  int nbar = 4;
};

/// SAR imaging parameter set: carrier, bandwidth, aperture, sample counts and taper.
struct ImagingConfig {
  double center_frequency = 9.6e9;
  double bandwidth = 0.59e9;
  double aperture = 0.051;
  int m = 85;
  int n = 85;
  int m_star = 88;
  int n_star = 88;
  WindowSpec window{};
  double c = kSpeedOfLight;
  /// Sample the physical-unit model on the polar raster and resample bilinearly instead of
  /// evaluating the normalized model directly on the Cartesian grid.
  bool polar_resampling = false;

  double eta_x() const noexcept { return double(m - 1) / double(m_star - 1); }
  double eta_y() const noexcept { return double(n - 1) / double(n_star - 1); }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("ImagingConfig: " + what);
    };
    if (!(std::isfinite(center_frequency) && std::isfinite(bandwidth) && std::isfinite(aperture)))
      fail("non-finite value");
    if (m < 2 || n < 2) fail("m and n must be >= 2");
    if (m > m_star || n > n_star) fail("m <= m* and n <= n* required");
    if (!(bandwidth > 0.0 && center_frequency > bandwidth / 2.0))
      fail("requires f_c > B/2 > 0");
    if (!(aperture > 0.0 && aperture < std::numbers::pi)) fail("aperture must be in (0, pi)");
    if (window.family == WindowFamily::Taylor && (window.sidelobe_db >= 0.0 || window.nbar < 1))
      fail("Taylor window needs sidelobe_db < 0 and nbar >= 1");
  }

  /// Parameter set with the 128-point zero padding of the reference configuration.
  static ImagingConfig reference_128() {
    ImagingConfig cfg;
    cfg.m_star = 128;
    cfg.n_star = 128;
    return cfg;
  }
};

struct PixelSpacing {
  double range = 0.0;
  double cross_range = 0.0;
};

inline PixelSpacing pixel_spacing(const ImagingConfig& cfg) {
  cfg.validate();
  const double px = cfg.c / (2.0 * cfg.bandwidth) * cfg.eta_x();
  const double py =
      (1.0 / cfg.center_frequency) * cfg.c / (4.0 * std::sin(cfg.aperture / 2.0)) * cfg.eta_y();
  return {px, py};
}

struct TypeTemplate {
  double alpha = 0.0;
  ParamMask frozen{};
  std::array<std::optional<double>, kParamCount> forced{};
};

/// Frequency dependence and frozen/forced attributes for one scattering type.
inline TypeTemplate scattering_type_template(ScatteringType kind) noexcept {
  TypeTemplate t;
  switch (kind) {
    case ScatteringType::Trihedral: t.alpha = 1.0; break;
    case ScatteringType::TopHat: t.alpha = 0.5; break;
    case ScatteringType::Sphere: t.alpha = 0.0; break;
    case ScatteringType::CornerDiffraction: t.alpha = -1.0; break;
    case ScatteringType::Dihedral: t.alpha = 1.0; break;
    case ScatteringType::Cylinder: t.alpha = 0.5; break;
    case ScatteringType::EdgeBroadside: t.alpha = 0.0; break;
    case ScatteringType::EdgeDiffraction: t.alpha = -0.5; break;
  }
  t.frozen[kAlpha] = true;
  t.forced[kAlpha] = t.alpha;
  if (is_localized(kind)) {
    t.frozen[kLength] = t.frozen[kOrientation] = true;
    t.forced[kLength] = 0.0;
    t.forced[kOrientation] = 0.0;
  } else {
    t.frozen[kGamma] = true;
    t.forced[kGamma] = 0.0;
  }
  return t;
}

/// Overwrites the type-forced attributes of p with their template values.
inline ScattererParams apply_type_template(ScattererParams p) noexcept {
  const auto tmpl = scattering_type_template(p.type);
  auto v = p.to_vector();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (tmpl.forced[i]) v[i] = *tmpl.forced[i];
  }
  return ScattererParams::from_vector(v, p.type);
}

inline ScattererParams normalize_params(const RawScattererParams& raw, const ImagingConfig& cfg,
                                        ScatteringType type = ScatteringType::Trihedral) {
  for (double v : {raw.amplitude, raw.x, raw.y, raw.alpha, raw.gamma, raw.length, raw.orientation}) {
    if (!std::isfinite(v)) throw std::invalid_argument("normalize_params: non-finite parameter");
  }
  const auto sp = pixel_spacing(cfg);
  ScattererParams p;
  p.amplitude = raw.amplitude;
  p.x = raw.x / sp.range;
  p.y = raw.y / sp.cross_range;
  p.alpha = raw.alpha;
  p.gamma = raw.gamma * 2.0 * std::numbers::pi * cfg.center_frequency;
  p.length = raw.length / sp.cross_range;
  p.orientation = raw.orientation / (cfg.aperture / 2.0);
  p.type = type;
  return p;
}

inline RawScattererParams denormalize_params(const ScattererParams& p, const ImagingConfig& cfg) {
  const auto sp = pixel_spacing(cfg);
  RawScattererParams raw;
  raw.amplitude = p.amplitude;
  raw.x = p.x * sp.range;
  raw.y = p.y * sp.cross_range;
  raw.alpha = p.alpha;
  raw.gamma = p.gamma / (2.0 * std::numbers::pi * cfg.center_frequency);
  raw.length = p.length * sp.cross_range;
  raw.orientation = p.orientation * (cfg.aperture / 2.0);
  return raw;
}

/// Unnormalized sinc: sin(u)/u with sinc(0) = 1.
inline double sinc(double u) noexcept {
  if (std::abs(u) < 1e-8) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

/// (j * ratio)^alpha on the principal branch, ratio > 0.
inline Complex frequency_power(double ratio, double alpha) noexcept {
  return std::polar(std::pow(ratio, alpha), alpha * std::numbers::pi / 2.0);
}

/// Single-scatterer response at frequency f (Hz) and aspect phi (rad), physical units.
inline Complex eval_raw_response(double f, double phi, const RawScattererParams& raw,
                                 const ImagingConfig& cfg) {
  const double pi = std::numbers::pi;
  const Complex freq = std::pow(Complex(0.0, f / cfg.center_frequency), raw.alpha);
  const double phase = -4.0 * pi * f / cfg.c * (raw.x * std::cos(phi) + raw.y * std::sin(phi));
  const double extent = sinc(2.0 * pi * f / cfg.c * raw.length * std::sin(phi - raw.orientation));
  const double aspect = std::exp(-2.0 * pi * f * raw.gamma * std::sin(phi));
  const Complex unit = freq * std::polar(1.0, phase) * extent * aspect;
  return raw.amplitude * unit;
}

/// Single-scatterer response at Cartesian frequency (f_x, f_y), normalized parameters.
inline Complex eval_normalized_response(double fx, double fy, const ScattererParams& p,
                                        const ImagingConfig& cfg) {
  if (!(fx > 0.0)) throw std::domain_error("eval_normalized_response: f_x must be positive");
  const double pi = std::numbers::pi;
  const auto sp = pixel_spacing(cfg);
  const double fc = cfg.center_frequency;
  const double half = cfg.aperture / 2.0;
  const double radial = std::sqrt(fx * fx + fy * fy);
  const Complex freq = frequency_power(radial / fc, p.alpha);
  const double aspect = std::exp(-(fy / fc) * p.gamma);
  const double extent = sinc(pi * radial / (2.0 * std::sin(half) * fc) * p.length * cfg.eta_y() *
                             std::sin(std::atan(fy / fx) - p.orientation * half));
  const double phase = -4.0 * pi / cfg.c * (sp.range * p.x * fx + sp.cross_range * p.y * fy);
  const Complex unit = freq * aspect * extent * std::polar(1.0, phase);
  return p.amplitude * unit;
}

}  // namespace smgaa
