#pragma once

// Minibatch SGD with momentum for the compact classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "smgaa/config.hpp"
#include "smgaa/grid.hpp"
#include "smgaa/network.hpp"

namespace smgaa {

/// Labeled image with its target/shadow mask (mask may be empty when unused).
struct Sample {
  Image image;
  int label = 0;
  Grid<std::uint8_t> mask;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 16;
  int epochs = 12;
  std::uint64_t seed = 1;
  /// Side of the random training crop, re-padded to the input size by shifting
  /// the crop back to a random position; 0 disables augmentation.
  int crop_size = 0;
  /// Multiplies the learning rate after every epoch.
  double lr_decay = 0.9;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum in [0, 1)");
    if (crop_size < 0) throw std::invalid_argument("TrainConfig: crop size must be >= 0");
  }

  Config to_config() const {
    Config c;
    c.set("train.learning_rate", learning_rate);
    c.set("train.momentum", momentum);
    c.set("train.weight_decay", weight_decay);
    c.set("train.batch_size", batch_size);
    c.set("train.epochs", epochs);
    c.set("train.seed", seed);
    c.set("train.crop_size", crop_size);
    c.set("train.lr_decay", lr_decay);
    return c;
  }

  static TrainConfig from_config(const Config& c) {
    TrainConfig t;
    t.learning_rate = c.get("train.learning_rate", t.learning_rate);
    t.momentum = c.get("train.momentum", t.momentum);
    t.weight_decay = c.get("train.weight_decay", t.weight_decay);
    t.batch_size = c.get("train.batch_size", t.batch_size);
    t.epochs = c.get("train.epochs", t.epochs);
    t.seed = c.get("train.seed", t.seed);
    t.crop_size = c.get("train.crop_size", t.crop_size);
    t.lr_decay = c.get("train.lr_decay", t.lr_decay);
    t.validate();
    return t;
  }
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
};

/// Optional hook applied to each batch before the gradient step; receives the
/// epoch, the sample indices and their (augmented) images, which it may replace.
using BatchTransform = std::function<void(int, std::span<const std::size_t>, std::vector<Image>&)>;

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Random translation: a crop_size window is moved to a random offset, the
// vacated border is filled with zeros. Keeps the input size fixed.
inline Image random_shift(const Image& img, int crop_size, std::mt19937_64& rng) {
  const int rows = static_cast<int>(img.rows());
  const int cols = static_cast<int>(img.cols());
  if (crop_size <= 0 || crop_size >= std::min(rows, cols)) return img;
  const int slack = std::min(rows, cols) - crop_size;
  std::uniform_int_distribution<int> d(-slack / 2, slack / 2);
  const int dr = d(rng);
  const int dc = d(rng);
  Image out(img.rows(), img.cols(), 0.0f);
  for (int r = 0; r < rows; ++r) {
    const int sr = r - dr;
    if (sr < 0 || sr >= rows) continue;
    for (int c = 0; c < cols; ++c) {
      const int sc = c - dc;
      if (sc >= 0 && sc < cols) out(std::size_t(r), std::size_t(c)) = img(std::size_t(sr), std::size_t(sc));
    }
  }
  return out;
}

}  // namespace detail

/// Trains in place. Deterministic for a fixed seed: shuffling and augmentation
/// use a private stream that the transform hook never touches.
template <typename T>
TrainReport train(Network<T>& net, std::span<const Sample> data, const TrainConfig& cfg,
                  const BatchTransform& transform = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& s : data) {
    if (s.label < 0 || s.label >= net.classes())
      throw std::invalid_argument("train: label " + std::to_string(s.label) + " out of range");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto velocity = net.zero_gradients();
  TrainReport report;
  double lr = cfg.learning_rate;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const double scale = 1.0 / double(stop - start);
      auto grads = net.zero_gradients();
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      std::vector<Image> images;
      images.reserve(batch.size());
      for (std::size_t idx : batch) images.push_back(detail::random_shift(data[idx].image, cfg.crop_size, rng));
      if (transform) transform(epoch, batch, images);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        int predicted = -1;
        const double l = net.accumulate_gradients(images[b - start], data[idx].label, grads, scale, &predicted);
        if (!std::isfinite(l)) {
          std::ostringstream msg;
          msg << "non-finite training loss at epoch " << epoch << ", sample " << idx;
          throw NonFiniteLossError(msg.str());
        }
        loss_sum += l;
        correct += static_cast<std::size_t>(predicted == data[idx].label);
      }
      auto& layers = net.conv_layers();
      for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& v = velocity.conv[i];
        auto& g = grads.conv[i];
        if (cfg.weight_decay > 0.0) g.weight += T(cfg.weight_decay) * layers[i].weight;
        v.weight = T(cfg.momentum) * v.weight - T(lr) * g.weight;
        v.bias = T(cfg.momentum) * v.bias - T(lr) * g.bias;
        layers[i].weight += v.weight;
        layers[i].bias += v.bias;
      }
      if (!net.all_finite()) {
        throw NonFiniteLossError("non-finite weights after update in epoch " + std::to_string(epoch));
      }
    }
    report.epochs.push_back({epoch, loss_sum / double(data.size()), double(correct) / double(data.size())});
    lr *= cfg.lr_decay;
  }
  return report;
}

template <typename T>
double accuracy(const Network<T>& net, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty set");
  std::size_t correct = 0;
  for (const auto& s : data) correct += static_cast<std::size_t>(net.predict(s.image) == s.label);
  return double(correct) / double(data.size());
}

}  // namespace smgaa
