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
#include <string>
#include <vector>

#include "resim/tensor.hpp"

namespace resim {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_rel_err < tolerance; }
};

// Central finite differences against reverse-mode gradients.
//   rel err = |analytic - numeric| / max(1, |analytic|, |numeric|)
// `loss_fn` must rebuild the scalar loss from the current leaf values each
// call (the previous graph is consumed by backward). `samples_per_tensor`
// limits FD probes per leaf (0 = every coordinate).
double finite_diff_max_err(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& leaves, int samples_per_tensor, double h,
                           Rng& rng);

// Named suites behind the check-gradients command. Module is one of
// all | tensor | pooling | encoder | losses; "all" appends the end-to-end
// pipeline check (contrastive mode, 2-image batch).
std::vector<GradCheckResult> run_gradient_checks(const std::string& module);

}  // namespace resim
