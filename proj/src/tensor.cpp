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

#include "resim/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace resim {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d <= 0) throw ShapeMismatch("shape dimensions must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  const int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(n), value);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
    throw ShapeMismatch("from_vector: " + shape_str(shape) + " does not match " +
                        std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

double* Tensor::mutable_data() {
  if (impl_->node) throw Error("mutable_data on an op output; only leaves may be mutated");
  return impl_->data.data();
}

double Tensor::item() const {
  if (numel() != 1) throw NotScalar("expected a scalar, got shape " + shape_str(shape()));
  return impl_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) throw Error("tensor has no gradient (backward not run, or detached)");
  return impl_->grad;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

void Tensor::check_finite(const char* what) const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) {
      throw NonFiniteValue(std::string(what) + ": non-finite value in tensor " +
                           shape_str(shape()));
    }
  }
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace detail {

Tensor make_tensor(Shape shape, std::vector<double> data) {
  return Tensor::from_vector(std::move(shape), std::move(data), false);
}

void attach(Tensor& out, std::vector<Tensor> inputs, std::function<void(TensorImpl&)> backward_fn) {
  if (!grad_enabled()) return;
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  if (!needs) return;
  auto node = std::make_shared<GradNode>();
  node->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward_fn);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
}

std::vector<double>& ensure_grad(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

}  // namespace detail

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw NotScalar("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  }
  auto root = loss.impl();
  if (!root->requires_grad) {
    throw Error("backward: loss is not connected to any requires_grad tensor");
  }

  // Post-order DFS (iterative) gives a topological order of the tape.
  std::vector<std::shared_ptr<TensorImpl>> topo;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    std::shared_ptr<TensorImpl> impl;
    size_t next_child = 0;
  };
  std::vector<Frame> stack;
  if (root->node) stack.push_back({root, 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    auto& node = f.impl->node;
    if (node->consumed) {
      throw GraphConsumed("backward: graph already consumed; rerun the forward pass");
    }
    if (f.next_child < node->inputs.size()) {
      auto child = node->inputs[f.next_child++];
      if (child->node && !visited.count(child.get())) {
        visited.insert(child.get());
        stack.push_back({child, 0});
      }
    } else {
      topo.push_back(f.impl);
      stack.pop_back();
    }
  }

  detail::ensure_grad(*root);
  root->grad[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorImpl& impl = **it;
    auto node = impl.node;
    node->consumed = true;
    if (!impl.grad.empty()) {
      node->backward(impl);
    }
    // Release saved inputs and the closure; the consumed flag stays.
    node->backward = nullptr;
    node->inputs.clear();
  }
}

}  // namespace resim
