#include "viewfield/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace viewfield {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MutVecMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  std::size_t offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    if (dims_[l] < 1 || dims_[l + 1] < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(offset, 0.0);
}

void Mlp::init_fan_in(std::mt19937_64& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t weights = static_cast<std::size_t>(dims_[l]) * dims_[l + 1];
    for (std::size_t i = 0; i < weights; ++i) params_[weight_offset(l) + i] = dist(rng);
    for (int i = 0; i < dims_[l + 1]; ++i) params_[bias_offset(l) + i] = 0.0;
  }
}

Matrix Mlp::forward(const Matrix& input, Cache* cache) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input size mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Matrix current = input;
  for (int l = 0; l < num_layers(); ++l) {
    ConstMap w(params_.data() + weight_offset(l), dims_[l + 1], dims_[l]);
    ConstVecMap b(params_.data() + bias_offset(l), dims_[l + 1]);
    Matrix next = w * current;
    next.colwise() += b;
    if (l + 1 < num_layers()) {
      next = next.cwiseMax(0.0);
      if (cache) cache->activations.push_back(next);
    }
    current = std::move(next);
  }
  return current;
}

void Mlp::backward(const Cache& cache, const Matrix& d_output, std::span<double> d_params,
                   Matrix* d_input) const {
  Matrix delta = d_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Matrix& in = cache.activations[l];
    ConstMap w(params_.data() + weight_offset(l), dims_[l + 1], dims_[l]);
    MutMap dw(d_params.data() + weight_offset(l), dims_[l + 1], dims_[l]);
    MutVecMap db(d_params.data() + bias_offset(l), dims_[l + 1]);
    // Products land in aligned temporaries first: accumulating straight into
    // the caller's buffer lets its address change the kernel's rounding.
    const Matrix dw_step = delta * in.transpose();
    const Eigen::VectorXd db_step = delta.rowwise().sum();
    dw += dw_step;
    db += db_step;
    if (l > 0) {
      Matrix back = w.transpose() * delta;
      delta = back.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
    } else if (d_input) {
      *d_input = w.transpose() * delta;
    }
  }
}

}  // namespace viewfield
