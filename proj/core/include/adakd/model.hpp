#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace adakd::model {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& text);
std::string activation_str(Activation a);

/// One fully connected layer: w is row-major [out][in], b has length out.
struct ParamBlock {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

/// Gradients with the same shapes as the network's parameter blocks.
struct GradientSet {
  std::vector<ParamBlock> blocks;

  void zero();
  void scale(double s);
  /// this += other, blockwise. Shapes must match.
  void add(const GradientSet& other);
};

/// Intermediate values of one forward pass, kept so backward() can reuse
/// them. inputs[l] feeds layer l; pre[l] is its affine output before the
/// activation. The network's logits are pre.back().
struct Trace {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

/// Fixed-depth dense network. The hidden layers share one activation;
/// the final layer is linear so its outputs can be read as logits.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<std::size_t> layer_sizes, Activation act);

  /// Fan-in uniform init: layer l draws its weights in index order from
  /// uniform(-sqrt(1/in), sqrt(1/in)) using a per-layer substream of
  /// seed, so deepening the net never reshuffles earlier layers. Biases
  /// start at zero.
  void init(std::uint64_t seed);

  /// Construct + init in one call.
  static DenseNet make(std::vector<std::size_t> layer_sizes, Activation act,
                       std::uint64_t seed);

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Trace& trace) const;

  /// Backprop of dL/dlogits through the trace; accumulates (+=) into
  /// grads, which must already have this network's shapes.
  void backward_into(const Trace& trace, std::span<const double> dlogits,
                     GradientSet& grads) const;

  GradientSet zero_gradients() const;

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t num_classes() const { return sizes_.back(); }
  std::size_t param_count() const;

  /// Versioned text checkpoint; doubles are written as C hex-floats so a
  /// save/load round trip reproduces every parameter bit for bit.
  void save(const std::filesystem::path& path) const;
  static DenseNet load(const std::filesystem::path& path);

 private:
  std::vector<std::size_t> sizes_;
  Activation act_ = Activation::relu;
  std::vector<ParamBlock> blocks_;
};

}  // namespace adakd::model
