#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace viewfield {

using Matrix = Eigen::MatrixXd;

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters live in one flat buffer, layer by layer: the weight matrix
/// (out x in, column-major) followed by the bias. Batches are column-major:
/// one sample per column.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> activations;  // input followed by every hidden output
  };

  Mlp() = default;
  /// dims = {input, hidden..., output}.
  explicit Mlp(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  void init_fan_in(std::mt19937_64& rng);

  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients; writes d(loss)/d(input) if d_input is set.
  void backward(const Cache& cache, const Matrix& d_output, std::span<double> d_params,
                Matrix* d_input = nullptr) const;

  bool operator==(const Mlp& other) const = default;

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1];
  }

  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace viewfield
