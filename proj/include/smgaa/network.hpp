#pragma once

// Compact all-convolutional classifier: convolution / rectifier / max-pool
// stacks ending in a convolution that maps to one logit per class.

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smgaa/grid.hpp"

namespace smgaa {

enum class LayerKind : std::uint32_t { Conv = 0, ReLU = 1, MaxPool = 2 };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int kernel = 0;    // Conv: square kernel size; MaxPool: window (stride = window)
  int stride = 1;    // Conv only
  int channels = 0;  // Conv output channels

  static LayerSpec conv(int kernel, int channels, int stride = 1) {
    return {LayerKind::Conv, kernel, stride, channels};
  }
  static LayerSpec relu() { return {LayerKind::ReLU, 0, 1, 0}; }
  static LayerSpec pool(int window) { return {LayerKind::MaxPool, window, window, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkConfig {
  std::string name = "aconv-a";
  int input_rows = 88;
  int input_cols = 88;
  int classes = 10;
  std::vector<LayerSpec> layers;

  /// Four conv/rectifier/pool blocks and a class map.
  static NetworkConfig aconv_a(int classes = 10, int size = 88) {
    NetworkConfig c{"aconv-a", size, size, classes, {}};
    c.layers = {LayerSpec::conv(5, 8),  LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(5, 16), LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(4, 32), LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(3, 32), LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(3, classes)};
    return c;
  }

  /// Shallower and wider variant with larger receptive fields, for transfer tests.
  static NetworkConfig aconv_b(int classes = 10, int size = 88) {
    NetworkConfig c{"aconv-b", size, size, classes, {}};
    c.layers = {LayerSpec::conv(9, 12), LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(5, 24), LayerSpec::relu(), LayerSpec::pool(3),
                LayerSpec::conv(5, 48), LayerSpec::relu(), LayerSpec::pool(2),
                LayerSpec::conv(4, classes)};
    return c;
  }

  static NetworkConfig by_name(const std::string& name, int classes = 10, int size = 88) {
    if (name == "aconv-a") return aconv_a(classes, size);
    if (name == "aconv-b") return aconv_b(classes, size);
    throw std::invalid_argument("unknown network architecture: " + name);
  }
};

struct TensorShape {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  int spatial() const noexcept { return rows * cols; }
};

/// Shape after each layer; throws when the stack is inconsistent or does not
/// end in a 1x1 map with one channel per class.
inline std::vector<TensorShape> infer_shapes(const NetworkConfig& cfg) {
  if (cfg.classes < 2) throw std::invalid_argument("NetworkConfig: need at least two classes");
  std::vector<TensorShape> shapes;
  TensorShape s{1, cfg.input_rows, cfg.input_cols};
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.kernel < 1 || l.stride < 1 || l.channels < 1 || l.kernel > s.rows || l.kernel > s.cols)
          throw std::invalid_argument("NetworkConfig: invalid convolution at layer " + std::to_string(i));
        s = {l.channels, (s.rows - l.kernel) / l.stride + 1, (s.cols - l.kernel) / l.stride + 1};
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::MaxPool:
        if (l.kernel < 1 || s.rows / l.kernel < 1 || s.cols / l.kernel < 1)
          throw std::invalid_argument("NetworkConfig: invalid pooling at layer " + std::to_string(i));
        s = {s.channels, s.rows / l.kernel, s.cols / l.kernel};
        break;
    }
    shapes.push_back(s);
  }
  if (shapes.empty() || cfg.layers.back().kind != LayerKind::Conv || s.rows != 1 || s.cols != 1 ||
      s.channels != cfg.classes) {
    throw std::invalid_argument("NetworkConfig '" + cfg.name +
                                "' must end in a convolution producing 1x1x" +
                                std::to_string(cfg.classes));
  }
  return shapes;
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct ConvParams {
  RowMatrix<T> weight;  // out_channels x (in_channels * k * k)
  Vector<T> bias;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> confidences;
  int label = -1;
};

inline constexpr double kLogFloor = 1e-12;

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - peak);
  for (auto& v : p) v /= sum;
  return p;
}

inline double cross_entropy(std::span<const double> confidences, int label) {
  return -std::log(std::max(confidences[static_cast<std::size_t>(label)], kLogFloor));
}

template <typename T>
class Network {
 public:
  using Matrix = RowMatrix<T>;

  /// Parameter gradients, laid out like the convolution parameters.
  struct Gradients {
    std::vector<ConvParams<T>> conv;
  };

  Network() = default;

  explicit Network(NetworkConfig cfg, std::uint64_t seed = 1) : cfg_(std::move(cfg)) {
    shapes_ = infer_shapes(cfg_);
    std::mt19937_64 rng(seed);
    TensorShape in{1, cfg_.input_rows, cfg_.input_cols};
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
      const auto& l = cfg_.layers[i];
      if (l.kind == LayerKind::Conv) {
        const int fan_in = in.channels * l.kernel * l.kernel;
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        ConvParams<T> p;
        p.weight.resize(l.channels, fan_in);
        for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
          for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = static_cast<T>(dist(rng));
        p.bias = Vector<T>::Zero(l.channels);
        conv_.push_back(std::move(p));
      }
      in = shapes_[i];
    }
  }

  const NetworkConfig& config() const noexcept { return cfg_; }
  int classes() const noexcept { return cfg_.classes; }
  std::vector<ConvParams<T>>& conv_layers() noexcept { return conv_; }
  const std::vector<ConvParams<T>>& conv_layers() const noexcept { return conv_; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : conv_) n += static_cast<std::size_t>(p.weight.size() + p.bias.size());
    return n;
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out;
    out.cfg_ = cfg_;
    out.shapes_ = shapes_;
    for (const auto& p : conv_) out.conv_.push_back({p.weight.template cast<U>(), p.bias.template cast<U>()});
    return out;
  }

  template <typename U>
  std::vector<double> logits(const Grid<U>& image) const {
    Tape& tape = workspace();
    run_forward(image, tape);
    return extract_logits(tape);
  }

  template <typename U>
  Prediction forward(const Grid<U>& image) const {
    Prediction p;
    p.logits = logits(image);
    p.confidences = softmax(p.logits);
    p.label = static_cast<int>(std::max_element(p.confidences.begin(), p.confidences.end()) -
                               p.confidences.begin());
    return p;
  }

  template <typename U>
  int predict(const Grid<U>& image) const {
    return forward(image).label;
  }

  template <typename U>
  double loss(const Grid<U>& image, int label) const {
    check_label(label);
    return cross_entropy(forward(image).confidences, label);
  }

  /// Exact reverse-mode d(scale * loss)/d(pixel). `loss_out`, when given,
  /// receives the unscaled loss of the forward pass.
  template <typename U>
  Grid<T> input_gradient(const Grid<U>& image, int label, double scale = 1.0,
                         double* loss_out = nullptr) const {
    check_label(label);
    Tape& tape = workspace();
    run_forward(image, tape);
    const auto conf = softmax(extract_logits(tape));
    if (loss_out) *loss_out = cross_entropy(conf, label);
    set_logit_gradient(tape, conf, label, scale);
    run_backward(tape, nullptr, true);
    Grid<T> out(static_cast<std::size_t>(cfg_.input_rows), static_cast<std::size_t>(cfg_.input_cols));
    std::copy_n(tape.grads[0].data(), out.size(), out.data());
    return out;
  }

  /// Adds d(scale * loss)/d(params) into `grads` and returns the loss.
  template <typename U>
  double accumulate_gradients(const Grid<U>& image, int label, Gradients& grads, double scale = 1.0,
                              int* predicted = nullptr) const {
    check_label(label);
    if (grads.conv.empty()) grads = zero_gradients();
    Tape& tape = workspace();
    run_forward(image, tape);
    const auto conf = softmax(extract_logits(tape));
    if (predicted) *predicted = static_cast<int>(std::max_element(conf.begin(), conf.end()) - conf.begin());
    set_logit_gradient(tape, conf, label, scale);
    run_backward(tape, &grads, false);
    return cross_entropy(conf, label);
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& p : conv_) {
      g.conv.push_back({Matrix::Zero(p.weight.rows(), p.weight.cols()), Vector<T>::Zero(p.bias.size())});
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& p : conv_) {
      if (!p.weight.allFinite() || !p.bias.allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.cfg_.layers != b.cfg_.layers || a.conv_.size() != b.conv_.size()) return false;
    for (std::size_t i = 0; i < a.conv_.size(); ++i) {
      if (a.conv_[i].weight != b.conv_[i].weight || a.conv_[i].bias != b.conv_[i].bias) return false;
    }
    return true;
  }

 private:
  template <typename>
  friend class Network;
  template <typename U>
  friend Network<U> load_checkpoint_as(const std::filesystem::path&);

  // Activations and backward buffers, reused across calls so the hot path does
  // not allocate once the shapes have been seen.
  struct Tape {
    std::vector<Matrix> acts;   // acts[0] is the input, acts[i + 1] the output of layer i
    std::vector<Matrix> cols;   // im2col buffers of conv layers (index = layer)
    std::vector<Matrix> grads;  // grads[i] = dL/d acts[i]
    std::vector<std::vector<int>> argmax;
    Matrix dcols;
  };

  static Tape& workspace() {
    thread_local Tape tape;
    return tape;
  }

  void check_label(int label) const {
    if (label < 0 || label >= cfg_.classes) {
      throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(cfg_.classes) + ")");
    }
  }

  TensorShape input_shape() const noexcept { return {1, cfg_.input_rows, cfg_.input_cols}; }

  std::vector<double> extract_logits(const Tape& tape) const {
    const Matrix& out = tape.acts.back();
    std::vector<double> lg(static_cast<std::size_t>(cfg_.classes));
    for (int j = 0; j < cfg_.classes; ++j) lg[j] = static_cast<double>(out(j, 0));
    return lg;
  }

  void set_logit_gradient(Tape& tape, const std::vector<double>& conf, int label, double scale) const {
    Matrix& g = tape.grads.back();
    g.resize(cfg_.classes, 1);
    // the loss is flat where the floored confidence saturates
    const bool floored = conf[static_cast<std::size_t>(label)] < kLogFloor;
    for (int j = 0; j < cfg_.classes; ++j) {
      const double v = floored ? 0.0 : conf[j] - (j == label ? 1.0 : 0.0);
      g(j, 0) = static_cast<T>(scale * v);
    }
  }

  template <typename U>
  void run_forward(const Grid<U>& image, Tape& tape) const {
    if (image.rows() != std::size_t(cfg_.input_rows) || image.cols() != std::size_t(cfg_.input_cols)) {
      throw std::invalid_argument("network '" + cfg_.name + "' expects " + std::to_string(cfg_.input_rows) +
                                  "x" + std::to_string(cfg_.input_cols) + " input, got " +
                                  std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
    }
    const std::size_t layers = cfg_.layers.size();
    tape.acts.resize(layers + 1);
    tape.cols.resize(layers);
    tape.grads.resize(layers + 1);
    tape.argmax.resize(layers);
    tape.acts[0].resize(1, static_cast<Eigen::Index>(image.size()));
    for (std::size_t i = 0; i < image.size(); ++i) tape.acts[0](0, Eigen::Index(i)) = static_cast<T>(image[i]);

    TensorShape in = input_shape();
    std::size_t conv_index = 0;
    for (std::size_t i = 0; i < layers; ++i) {
      const auto& l = cfg_.layers[i];
      const auto& out_shape = shapes_[i];
      const Matrix& x = tape.acts[i];
      Matrix& y = tape.acts[i + 1];
      switch (l.kind) {
        case LayerKind::Conv: {
          im2col(x, in, l.kernel, l.stride, out_shape, tape.cols[i]);
          const auto& p = conv_[conv_index++];
          y.resize(out_shape.channels, out_shape.spatial());
          y.noalias() = p.weight * tape.cols[i];
          y.colwise() += p.bias;
          break;
        }
        case LayerKind::ReLU:
          y.resize(x.rows(), x.cols());
          y = x.cwiseMax(T(0));
          break;
        case LayerKind::MaxPool:
          max_pool(x, in, l.kernel, out_shape, y, tape.argmax[i]);
          break;
      }
      in = out_shape;
    }
  }

  // Expects tape.grads.back() set; leaves dL/d(input) in tape.grads[0] when want_input.
  void run_backward(Tape& tape, Gradients* grads, bool want_input) const {
    std::size_t conv_index = conv_.size();
    for (std::size_t li = cfg_.layers.size(); li-- > 0;) {
      const auto& l = cfg_.layers[li];
      const TensorShape in = li == 0 ? input_shape() : shapes_[li - 1];
      const Matrix& gout = tape.grads[li + 1];
      Matrix& gin = tape.grads[li];
      switch (l.kind) {
        case LayerKind::Conv: {
          const auto& p = conv_[--conv_index];
          const Matrix& cols = tape.cols[li];
          if (grads) {
            grads->conv[conv_index].weight.noalias() += gout * cols.transpose();
            grads->conv[conv_index].bias += gout.rowwise().sum();
          }
          if (li == 0 && !want_input) return;
          tape.dcols.resize(p.weight.cols(), gout.cols());
          tape.dcols.noalias() = p.weight.transpose() * gout;
          col2im(tape.dcols, in, l.kernel, l.stride, shapes_[li], gin);
          break;
        }
        case LayerKind::ReLU: {
          const Matrix& y = tape.acts[li + 1];
          gin.resize(gout.rows(), gout.cols());
          gin = (y.array() > T(0)).select(gout, T(0));
          break;
        }
        case LayerKind::MaxPool: {
          gin.setZero(in.channels, in.spatial());
          const auto& idx = tape.argmax[li];
          for (Eigen::Index c = 0; c < gout.rows(); ++c) {
            for (Eigen::Index j = 0; j < gout.cols(); ++j) {
              gin(c, idx[static_cast<std::size_t>(c * gout.cols() + j)]) += gout(c, j);
            }
          }
          break;
        }
      }
    }
  }

  static void im2col(const Matrix& x, const TensorShape& in, int k, int s, const TensorShape& out, Matrix& cols) {
    cols.resize(in.channels * k * k, out.spatial());
    for (int c = 0; c < in.channels; ++c) {
      const T* src = x.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* dst = cols.row((c * k + ky) * k + kx).data();
          for (int oy = 0; oy < out.rows; ++oy) {
            const T* row = src + (oy * s + ky) * in.cols + kx;
            T* d = dst + oy * out.cols;
            if (s == 1) {
              std::copy_n(row, out.cols, d);
            } else {
              for (int ox = 0; ox < out.cols; ++ox) d[ox] = row[ox * s];
            }
          }
        }
      }
    }
  }

  static void col2im(const Matrix& dcols, const TensorShape& in, int k, int s, const TensorShape& out, Matrix& dx) {
    dx.setZero(in.channels, in.spatial());
    for (int c = 0; c < in.channels; ++c) {
      T* dst = dx.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* src = dcols.row((c * k + ky) * k + kx).data();
          for (int oy = 0; oy < out.rows; ++oy) {
            T* row = dst + (oy * s + ky) * in.cols + kx;
            const T* g = src + oy * out.cols;
            for (int ox = 0; ox < out.cols; ++ox) row[ox * s] += g[ox];
          }
        }
      }
    }
  }

  static void max_pool(const Matrix& x, const TensorShape& in, int p, const TensorShape& out, Matrix& y,
                       std::vector<int>& argmax) {
    y.resize(out.channels, out.spatial());
    argmax.assign(static_cast<std::size_t>(out.channels) * out.spatial(), 0);
    for (int c = 0; c < out.channels; ++c) {
      const T* src = x.row(c).data();
      for (int oy = 0; oy < out.rows; ++oy) {
        for (int ox = 0; ox < out.cols; ++ox) {
          int best = (oy * p) * in.cols + ox * p;
          for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) {
              const int idx = (oy * p + dy) * in.cols + ox * p + dx;
              if (src[idx] > src[best]) best = idx;
            }
          }
          y(c, oy * out.cols + ox) = src[best];
          argmax[static_cast<std::size_t>(c) * out.spatial() + oy * out.cols + ox] = best;
        }
      }
    }
  }

  NetworkConfig cfg_;
  std::vector<TensorShape> shapes_;
  std::vector<ConvParams<T>> conv_;
};

// Checkpoint container: "SMGAANET" magic, u32 version, architecture manifest,
// u64 parameter count, then little-endian float32 weights and biases per conv.
inline constexpr char kCheckpointMagic[8] = {'S', 'M', 'G', 'A', 'A', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  const auto& cfg = net.config();
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.name.size()));
  os.write(cfg.name.data(), static_cast<std::streamsize>(cfg.name.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.input_rows));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.input_cols));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.classes));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.layers.size()));
  for (const auto& l : cfg.layers) {
    detail::put_u32(os, static_cast<std::uint32_t>(l.kind));
    detail::put_u32(os, static_cast<std::uint32_t>(l.kernel));
    detail::put_u32(os, static_cast<std::uint32_t>(l.stride));
    detail::put_u32(os, static_cast<std::uint32_t>(l.channels));
  }
  const auto count = static_cast<std::uint64_t>(net.parameter_count());
  detail::put_u32(os, static_cast<std::uint32_t>(count & 0xffffffffu));
  detail::put_u32(os, static_cast<std::uint32_t>(count >> 32));
  for (const auto& p : net.conv_layers()) {
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) detail::put_f32(os, static_cast<float>(p.weight(r, c)));
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) detail::put_f32(os, static_cast<float>(p.bias(r)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

template <typename T>
Network<T> load_checkpoint_as(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw std::runtime_error("not a network checkpoint: " + path.string());
  }
  if (const auto v = detail::get_u32(is); v != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v) + ": " + path.string());
  }
  NetworkConfig cfg;
  cfg.name.resize(detail::get_u32(is));
  is.read(cfg.name.data(), static_cast<std::streamsize>(cfg.name.size()));
  cfg.input_rows = static_cast<int>(detail::get_u32(is));
  cfg.input_cols = static_cast<int>(detail::get_u32(is));
  cfg.classes = static_cast<int>(detail::get_u32(is));
  const auto layer_count = detail::get_u32(is);
  if (layer_count > 4096) throw std::runtime_error("corrupt checkpoint manifest: " + path.string());
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    l.kind = static_cast<LayerKind>(detail::get_u32(is));
    l.kernel = static_cast<int>(detail::get_u32(is));
    l.stride = static_cast<int>(detail::get_u32(is));
    l.channels = static_cast<int>(detail::get_u32(is));
    cfg.layers.push_back(l);
  }
  Network<T> net(cfg, 0);
  const std::uint64_t lo = detail::get_u32(is);
  const std::uint64_t count = lo | (std::uint64_t(detail::get_u32(is)) << 32);
  if (count != net.parameter_count()) throw std::runtime_error("checkpoint parameter count mismatch: " + path.string());
  for (auto& p : net.conv_layers()) {
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = static_cast<T>(detail::get_f32(is));
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) p.bias(r) = static_cast<T>(detail::get_f32(is));
  }
  return net;
}

using Classifier = Network<float>;
using WideClassifier = Network<double>;

inline Classifier load_checkpoint(const std::filesystem::path& path) {
  return load_checkpoint_as<float>(path);
}

}  // namespace smgaa
