// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msdkws/autograd.hpp"
#include "msdkws/container.hpp"
#include "msdkws/error.hpp"

namespace msdkws {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// One AdamW update of a flat parameter block. `step` is the 1-based step
/// index used for bias correction. Decay is decoupled: p ← p − lr·wd·p first.
inline void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                         std::span<double> v, std::uint64_t step, double lr, const AdamWHyper& h) {
  const double bc1 = 1.0 - std::pow(h.beta1, double(step));
  const double bc2 = 1.0 - std::pow(h.beta2, double(step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] -= lr * h.weight_decay * p[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWHyper hyper) : params_(std::move(params)), hyper_(hyper) {
    if (!(hyper_.beta1 >= 0.0 && hyper_.beta1 < 1.0 && hyper_.beta2 >= 0.0 && hyper_.beta2 < 1.0)) {
      throw ParameterError("AdamW betas must lie in [0,1)");
    }
    for (Parameter* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  /// Applies one update from the parameters' current grads. Throws before
  /// touching anything if a gradient entry is not finite.
  void step(double lr) {
    if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
    for (Parameter* p : params_) {
      if (!p->grad.all_finite()) throw NumericalError("non-finite gradient in " + p->name + "; step aborted");
    }
    ++steps_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      adamw_update(params_[i]->value.data(), params_[i]->grad.data(), m_[i].data(), v_[i].data(), steps_, lr,
                   hyper_);
    }
  }

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamWHyper& hyper() const noexcept { return hyper_; }

  void append_state(std::vector<NamedTensor>& out) const {
    out.push_back({"adam.steps", Tensor::scalar(double(steps_))});
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.push_back({"adam.m." + params_[i]->name, m_[i]});
      out.push_back({"adam.v." + params_[i]->name, v_[i]});
    }
  }

  void restore_state(const std::vector<NamedTensor>& records) {
    auto find = [&](const std::string& name) -> const Tensor& {
      for (const auto& r : records)
        if (r.name == name) return r.tensor;
      throw FormatError("checkpoint lacks optimizer record " + name);
    };
    steps_ = static_cast<std::uint64_t>(find("adam.steps")[0]);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Tensor& m = find("adam.m." + params_[i]->name);
      const Tensor& v = find("adam.v." + params_[i]->name);
      if (m.shape() != m_[i].shape() || v.shape() != v_[i].shape()) {
        throw FormatError("optimizer state shape mismatch for " + params_[i]->name);
      }
      m_[i] = m;
      v_[i] = v;
    }
  }

 private:
  std::vector<Parameter*> params_;
  AdamWHyper hyper_;
  std::vector<Tensor> m_, v_;
  std::uint64_t steps_ = 0;
};

}  // namespace msdkws
