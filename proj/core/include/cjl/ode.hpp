#pragma once

// Adaptive Dormand-Prince 5(4) driver on top of Boost.Odeint's controlled stepper.
// Adds what the library integrate_* functions do not: domain-exit truncation located on
// the cubic Hermite interpolant, observer-driven early stop, and full step history for
// dense output.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "cjl/errors.hpp"

namespace cjl {

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
struct OdeSample {
  double t;
  State<N> y;
  State<N> dy;
};

template <std::size_t N>
State<N> hermite(const OdeSample<N>& a, const OdeSample<N>& b, double t) {
  double h = b.t - a.t;
  double s = (t - a.t) / h;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  State<N> y;
  for (std::size_t i = 0; i < N; ++i) y[i] = h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i];
  return y;
}

template <std::size_t N>
State<N> hermite_derivative(const OdeSample<N>& a, const OdeSample<N>& b, double t) {
  double h = b.t - a.t;
  double s = (t - a.t) / h;
  double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
  double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
  State<N> y;
  for (std::size_t i = 0; i < N; ++i) y[i] = (d00 * a.y[i] + d01 * b.y[i]) / h + d10 * a.dy[i] + d11 * b.dy[i];
  return y;
}

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h0 = 0.0;  // 0: automatic
  double hmax = std::numeric_limits<double>::infinity();
  double hmin = 1e-13;
  std::size_t max_steps = 2000000;
};

enum class OdeStatus { Completed, Truncated, Stopped };

template <std::size_t N>
struct OdeResult {
  std::vector<OdeSample<N>> samples;
  OdeStatus status = OdeStatus::Completed;
  double end_t = 0.0;

  const OdeSample<N>& back() const { return samples.back(); }
  // Dense output; t must lie within the sampled range.
  State<N> at(double t) const {
    std::size_t i = locate(t);
    if (i + 1 >= samples.size()) return samples.back().y;
    return hermite(samples[i], samples[i + 1], t);
  }
  std::size_t locate(double t) const {
    bool fwd = samples.back().t >= samples.front().t;
    std::size_t lo = 0, hi = samples.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if ((samples[mid].t <= t) == fwd)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }
};

struct AlwaysInside {
  template <class S>
  bool operator()(double, const S&) const { return true; }
};
struct NoObserver {
  template <class S>
  bool operator()(const S&, const S&) const { return true; }
};

// sys(y, dydt, t). Integrates from t0 to t1 (either direction). inside(t, y) false ends
// the run with status Truncated at the located exit; observer(prev, cur) false ends it
// with status Stopped. DomainError thrown from sys inside a trial step shrinks the step.
template <std::size_t N, class Sys, class Inside = AlwaysInside, class Observer = NoObserver>
OdeResult<N> integrate_ode(Sys&& sys, const State<N>& y0, double t0, double t1, const OdeOptions& opt,
                           Inside&& inside = Inside{}, Observer&& observer = Observer{}) {
  namespace odeint = boost::numeric::odeint;
  using S = State<N>;
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const double T = std::abs(t1 - t0);
  auto rhs = [&](const S& y, S& dy, double tau) {
    sys(y, dy, t0 + dir * tau);
    if (dir < 0)
      for (auto& v : dy) v = -v;
  };
  auto ctrl = odeint::make_controlled(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<S>());

  OdeResult<N> res;
  auto push = [&](double tau, const S& y, const S& dytau) {
    OdeSample<N> s{t0 + dir * tau, y, dytau};
    if (dir < 0)
      for (auto& v : s.dy) v = -v;
    res.samples.push_back(s);
  };

  S y = y0, dy, yn, dyn;
  rhs(y, dy, 0.0);
  push(0.0, y, dy);
  res.end_t = t0;
  if (T == 0.0) return res;

  double tau = 0.0;
  double dt = opt.h0 > 0 ? opt.h0 : std::min(T, 1e-2);
  std::size_t steps = 0;
  while (tau < T) {
    if (++steps > opt.max_steps) throw IntegrationError("ode: maximum step count exceeded");
    bool last = false;
    if (dt > opt.hmax) dt = opt.hmax;
    if (tau + dt >= T) {
      dt = T - tau;
      last = true;
    }
    double tnew = tau;
    double dtry = dt;
    odeint::controlled_step_result r;
    try {
      r = ctrl.try_step(rhs, y, dy, tnew, yn, dyn, dtry);
    } catch (const DomainError&) {
      dt *= 0.5;
      if (dt < opt.hmin) {
        res.status = OdeStatus::Truncated;
        res.end_t = t0 + dir * tau;
        return res;
      }
      continue;
    }
    if (r == odeint::fail) {
      dt = dtry;
      if (dt < opt.hmin) throw IntegrationError("ode: step size underflow");
      continue;
    }
    if (last) tnew = T;
    OdeSample<N> prev{tau, y, dy}, cur{tnew, yn, dyn};
    if (!inside(t0 + dir * tnew, yn)) {
      double lo = tau, hi = tnew;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (inside(t0 + dir * mid, hermite(prev, cur, mid)))
          lo = mid;
        else
          hi = mid;
      }
      if (lo > tau) {
        S ye = hermite(prev, cur, lo), dye;
        rhs(ye, dye, lo);
        push(lo, ye, dye);
      }
      res.status = OdeStatus::Truncated;
      res.end_t = t0 + dir * lo;
      return res;
    }
    push(tnew, yn, dyn);
    res.end_t = t0 + dir * tnew;
    y = yn;
    dy = dyn;
    tau = tnew;
    dt = dtry;
    if (!observer(res.samples[res.samples.size() - 2], res.samples.back())) {
      res.status = OdeStatus::Stopped;
      return res;
    }
  }
  return res;
}

}  // namespace cjl
