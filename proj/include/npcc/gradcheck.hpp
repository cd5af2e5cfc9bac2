#pragma once

#include <string>
#include <vector>

#include "npcc/mopa_train.hpp"
#include "npcc/synthetic.hpp"
#include "npcc/trainer.hpp"

namespace npcc {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0;
  int checks = 0;
  double tolerance = 1e-6;

  bool passed() const { return max_rel_err < tolerance; }
};

namespace gradcheck_detail {

// relative to the gradient scale, floored at 1: exact-zero gradients (for
// instance the key bias, which shifts every logit of a row equally and
// cancels in the softmax) then compare at absolute precision instead of
// amplifying finite-difference noise
inline double relErr(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
}

/// Central finite differences of `loss` over `checks` random coordinates of
/// the flattened views, compared to `analytic` at the same coordinates.
/// `params` lists (pointer, size) pairs into the live parameter storage.
struct FlatView {
  std::vector<std::pair<double*, Eigen::Index>> spans;

  Eigen::Index size() const {
    Eigen::Index total = 0;
    for (const auto& s : spans) total += s.second;
    return total;
  }
  double& at(Eigen::Index i) {
    for (const auto& s : spans) {
      if (i < s.second) return s.first[i];
      i -= s.second;
    }
    throw ShapeError("flat view index out of range");
  }
};

template <typename W>
FlatView flatten(W& w) {
  FlatView view;
  visitMopaTensors([&](const char*, auto& t) { view.spans.emplace_back(t.data(), t.size()); }, w);
  return view;
}

inline void flattenTensor(FlatView& view, FeatureMatrix<double>& t) {
  view.spans.emplace_back(t.data(), t.size());
}
inline void flattenTensor(FlatView& view, Vector<double>& t) {
  view.spans.emplace_back(t.data(), t.size());
}

template <typename LossFn>
GradCheckReport checkAgainstFd(const std::string& name, FlatView& params, FlatView& grads,
                               LossFn&& loss, int checks, Rng& rng, double tolerance,
                               double step = 1e-6) {
  GradCheckReport report{name, 0, checks, tolerance};
  const Eigen::Index n = params.size();
  for (int c = 0; c < checks; ++c) {
    const Eigen::Index i = Eigen::Index(rng.below(uint64_t(n)));
    double& p = params.at(i);
    const double saved = p;
    const double h = step * std::max(1.0, std::abs(saved));
    p = saved + h;
    const double up = loss();
    p = saved - h;
    const double down = loss();
    p = saved;
    const double numeric = (up - down) / (2 * h);
    report.max_rel_err = std::max(report.max_rel_err, relErr(grads.at(i), numeric));
  }
  return report;
}

}  // namespace gradcheck_detail

/// Runs the central-difference suites for every layer and the end-to-end
/// teacher-forced loss, all in 64-bit precision.
std::vector<GradCheckReport> runGradChecks(uint64_t seed);

}  // namespace npcc
