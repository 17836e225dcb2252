// Copyright 2026 The resim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "resim/common.hpp"

namespace resim {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl;

// One executed differentiable op. `backward` reads the output's gradient
// and accumulates into the inputs' gradients; it runs exactly once.
struct GradNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl& out)> backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;  // non-null only for op outputs on the tape
};

// Dense double-precision tensor with reverse-mode autodiff. Values are
// written once by the op that creates them; only graph-free leaves (model
// parameters, ring buffers) may be mutated in place, between graphs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }
  bool requires_grad() const { return impl_->requires_grad; }

  const double* data() const { return impl_->data.data(); }
  const std::vector<double>& values() const { return impl_->data; }

  // In-place access for graph-free leaves; throws on op outputs.
  double* mutable_data();

  // Scalar value; throws NotScalar otherwise.
  double item() const;

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad() { impl_->grad.clear(); }

  // A graph-free copy of the values (no gradient ever flows through it).
  Tensor detach() const;

  // Throws NonFiniteValue if any element is NaN/Inf (used by debug checks).
  void check_finite(const char* what) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local tape switch, RAII style; key-encoder and evaluation forwards
// run under NoGradGuard so they never build graph.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
// into every requires_grad tensor reachable from the loss. The traversed
// graph is consumed; a second sweep over it throws GraphConsumed.
void backward(const Tensor& loss);

namespace detail {

Tensor make_tensor(Shape shape, std::vector<double> data);

// Registers `out` on the tape when grad mode is on and any input requires
// grad; otherwise leaves it a constant.
void attach(Tensor& out, std::vector<Tensor> inputs, std::function<void(TensorImpl&)> backward_fn);

std::vector<double>& ensure_grad(TensorImpl& t);

}  // namespace detail
}  // namespace resim
