#pragma once

#include <algorithm>
#include <vector>

#include "dmfrl/numkit.hpp"
#include "oracles.hpp"

namespace oracle {

/// Loss = sum(output * probe). Checks every trainable parameter exposed by
/// `net.parameters()` and the input gradient against central differences.
template <class Net>
GradCheck check_gradients(Net& net, const dmfrl::Matrix& input, const dmfrl::Matrix& probe,
                          double step = 1e-6) {
  auto loss = [&](const dmfrl::Matrix& x) {
    const dmfrl::Matrix y = net.predict(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * probe.data()[i];
    return s;
  };
  net.zero_grad();
  net.forward(input);
  const dmfrl::Matrix input_grad = net.backward(probe);

  GradCheck total;
  auto merge = [&](const GradCheck& c) {
    total.max_rel_error = std::max(total.max_rel_error, c.max_rel_error);
    total.checked += c.checked;
  };
  for (const auto& p : net.parameters()) {
    const std::vector<double> analytic(p.grad.begin(), p.grad.end());
    merge(finite_difference([&] { return loss(input); }, p.value, analytic, step));
  }
  dmfrl::Matrix x = input;
  const std::vector<double> analytic(input_grad.data().begin(), input_grad.data().end());
  merge(finite_difference([&] { return loss(x); }, x.data(), analytic, step));
  return total;
}

}  // namespace oracle
