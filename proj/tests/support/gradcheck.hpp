#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "lottery/numerics/ops.hpp"
#include "lottery/numerics/rng.hpp"

namespace lottery::testing {

// |analytic - numeric| / max(|analytic|, |numeric|, floor). Below the floor the
// check degrades to an absolute one: a loss of magnitude ~10 carries ~1e-12 of
// cancellation noise in any difference quotient, which is meaningless relative
// to a 1e-9 gradient.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Fourth-order central difference of `loss` with respect to `coordinate`:
// (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h. The wider step keeps
// cancellation error small when the loss sums many terms.
inline double central_difference(const std::function<double()>& loss, double& coordinate,
                                 double step = 1e-3) {
  const double saved = coordinate;
  auto at = [&](double offset) {
    coordinate = saved + offset;
    return loss();
  };
  const double f2 = at(2 * step);
  const double f1 = at(step);
  const double m1 = at(-step);
  const double m2 = at(-2 * step);
  coordinate = saved;
  return (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * step);
}

// Builds `forward` on a fresh tape with every input as a leaf, reduces the
// output against fixed random weights, and compares each input coordinate's
// gradient to central differences. Returns the worst relative error.
inline double check_op_gradient(
    std::vector<Tensor<double>>& inputs,
    const std::function<ad::Var<double>(std::vector<ad::Var<double>>&)>& forward,
    std::uint64_t seed = 7) {
  Tensor<double> probe;
  {
    ad::Tape<double> tape;
    std::vector<ad::Var<double>> vars;
    for (auto& in : inputs) {
      vars.push_back(tape.leaf(in));
    }
    Rng rng(seed);
    probe = rng_normal<double>(rng, forward(vars).shape(), 0.0, 1.0);
  }
  auto reduce = [&](ad::Tape<double>& tape, std::vector<ad::Var<double>>& vars) {
    ad::Var<double> out = forward(vars);
    if (out.value().size() == 1) {
      return ad::scale(out, probe[0]);
    }
    return ad::sum(ad::mul(out, tape.constant(probe)));
  };

  ad::Tape<double> tape;
  std::vector<ad::Var<double>> vars;
  for (auto& in : inputs) {
    vars.push_back(tape.leaf(in));
  }
  ad::Var<double> loss = reduce(tape, vars);
  tape.backward(loss);

  auto evaluate = [&]() {
    ad::Tape<double> t(false);
    std::vector<ad::Var<double>> vs;
    for (auto& in : inputs) {
      vs.push_back(t.leaf(in));
    }
    return reduce(t, vs).value().item();
  };

  double worst = 0.0;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    const Tensor<double> analytic = vars[which].grad();
    for (std::size_t i = 0; i < inputs[which].size(); ++i) {
      const double numeric = central_difference(evaluate, inputs[which][i]);
      const double err = relative_error(analytic[i], numeric);
      if (std::getenv("GRADCHECK_VERBOSE") != nullptr && err > 1e-7) {
        std::fprintf(stderr, "input %zu coord %zu analytic %.15g numeric %.15g err %g\n", which,
                     i, analytic[i], numeric, err);
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace lottery::testing
