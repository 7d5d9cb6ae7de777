#pragma once

// Finite-difference gradient oracle used by the test suites. Independent of
// the reverse-mode path it checks: it only evaluates forward passes.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dmn/tensor.hpp"

namespace dmn_test {

struct GradCheckReport {
  double max_err = 0.0;       // worst |analytic - numeric| / scale
  std::string worst;          // "param[index]" of the worst entry
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central finite differences over every entry of every parameter.
// `build` must construct the full forward graph from scratch, binding the
// given parameters through Graph::param, and return the scalar root.
// The error scale for each entry is max(|analytic|, |numeric|, floor).
template <class Build>
GradCheckReport check_gradients(std::vector<dmn::Parameter<double>*> params,
                                Build build, double eps = 1e-5,
                                double floor = 1e-3) {
  auto eval = [&]() {
    dmn::Graph<double> g;
    return g.value(build(g)).item();
  };

  for (auto* p : params) p->zero_grad();
  {
    dmn::Graph<double> g;
    auto root = build(g);
    g.backward(root);
  }

  GradCheckReport rep;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double fp = eval();
      p->value[i] = saved - eps;
      const double fm = eval();
      p->value[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double scale =
          std::max({std::abs(analytic), std::abs(numeric), floor});
      const double err = std::abs(analytic - numeric) / scale;
      if (err > rep.max_err) {
        rep.max_err = err;
        rep.worst = p->name + "[" + std::to_string(i) + "]";
        rep.analytic_at_worst = analytic;
        rep.numeric_at_worst = numeric;
      }
    }
  }
  return rep;
}

}  // namespace dmn_test
