// Copyright 2026 The FusionDeepMF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FUSIONDEEPMF_LINALG_HPP_
#define FUSIONDEEPMF_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fusiondeepmf/rng.hpp"

namespace fdmf {

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void Fill(double v);
  void FillNormal(Rng& rng, double mean, double stddev);
  DenseMatrix Transposed() const;
  double SquaredNorm() const;
  bool AllFinite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix MatMul(const DenseMatrix& a, const DenseMatrix& b);

// out = m * x
void MatVec(const DenseMatrix& m, std::span<const double> x,
            std::span<double> out);
// out = m^T * x
void MatTVec(const DenseMatrix& m, std::span<const double> x,
             std::span<double> out);

double Dot(std::span<const double> a, std::span<const double> b);

struct SvdResult {
  DenseMatrix u;             // rows x k, orthonormal columns
  std::vector<double> s;     // k singular values, non-increasing
  DenseMatrix vt;            // k x cols, orthonormal rows
};

// Rank-k truncated SVD. Signs are normalized so that the largest-magnitude
// entry of every left singular vector is positive, which makes the result
// reproducible across runs.
SvdResult TruncatedSvd(const DenseMatrix& a, std::size_t k);

inline double Sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double Relu(double x) { return x > 0.0 ? x : 0.0; }

// Subgradient at exactly 0 is taken to be 0.
inline double ReluGrad(double pre_activation) {
  return pre_activation > 0.0 ? 1.0 : 0.0;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config)
      : m(n, 0.0), v(n, 0.0), cfg(config) {}

  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;
  AdamConfig cfg;
};

// One bias-corrected Adam update (Kingma & Ba, Algorithm 1). Throws
// InvalidArgument on shape mismatch.
void AdamStep(std::span<double> params, std::span<const double> grads,
              AdamState& state);

// Central-difference gradient of f at x.
std::vector<double> FiniteDiffGrad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double step);

// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)
double MaxRelativeError(std::span<const double> a, std::span<const double> b,
                        double floor = 1e-3);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_LINALG_HPP_
