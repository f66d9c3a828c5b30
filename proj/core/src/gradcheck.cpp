#include "focus/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "focus/rng.hpp"

namespace focus {

std::vector<GradCheckEntry> GradCheckReport::failures() const {
  std::vector<GradCheckEntry> out;
  for (const auto& e : entries) {
    if (!(e.error < tolerance)) out.push_back(e);
  }
  return out;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << ": " << entries.size() << " coordinates over "
     << checked_tensors.size() << " tensors, max error " << max_error << " (tol " << tolerance
     << ")";
  for (const auto& f : failures()) {
    os << "\n  " << f.name << "[" << f.index << "] analytic=" << f.analytic
       << " numeric=" << f.numeric << " err=" << f.error;
  }
  return os.str();
}

GradCheckReport grad_check(const LossClosure& loss, ParamStore& params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;

  params.zero_grad();
  loss(params, true);
  // Snapshot analytic gradients before finite differencing overwrites state.
  std::map<std::string, Matrix> analytic;
  for (auto& [name, t] : params.entries()) {
    if (!t.requires_grad) continue;
    analytic[name] = t.grad ? *t.grad : Matrix(t.rows(), t.cols());
  }
  params.zero_grad();

  CounterRng rng(options.seed);
  for (auto& [name, t] : params.entries()) {
    if (!t.requires_grad) continue;
    report.checked_tensors.push_back(name);
    const std::size_t n = t.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      double& x = t.value.values()[idx];
      const double saved = x;
      x = saved + options.step;
      const double up = loss(params, false);
      x = saved - options.step;
      const double down = loss(params, false);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      GradCheckEntry e;
      e.name = name;
      e.index = idx;
      e.analytic = analytic[name].values()[idx];
      e.numeric = numeric;
      e.error = std::abs(e.analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (!std::isfinite(e.error)) e.error = std::numeric_limits<double>::infinity();
      report.max_error = std::max(report.max_error, e.error);
      if (!(e.error < options.tolerance)) report.passed = false;
      report.entries.push_back(e);
    }
  }
  params.zero_grad();
  return report;
}

}  // namespace focus
