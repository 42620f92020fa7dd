#pragma once

// Small dense Levenberg-Marquardt solver with an optional Huber loss applied
// per residual block.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <limits>

namespace carm::lsq {

struct Options {
  int max_iterations = 200;
  double step_tolerance = 1e-8;
  double cost_tolerance = 1e-10;
  /// Huber threshold on the norm of each residual block; <= 0 disables it.
  double huber_delta = 0.0;
  double initial_lambda = 1e-4;
};

struct Summary {
  bool converged = false;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Huber cost of a residual block with norm `e`.
inline double huber_cost(double e, double delta) {
  if (delta <= 0.0 || e <= delta) return 0.5 * e * e;
  return delta * (e - 0.5 * delta);
}

inline double huber_weight(double e, double delta) {
  if (delta <= 0.0 || e <= delta) return 1.0;
  return delta / e;
}

// Problem concept:
//   int block_size() const;                 residual rows per block
//   void evaluate(const VectorXd& x, VectorXd& r, MatrixXd* jac) const;
//   optional: VectorXd plus(const VectorXd& x, const VectorXd& dx) const;
template <typename Problem>
concept HasPlus = requires(const Problem& p, const Eigen::VectorXd& x) {
  { p.plus(x, x) } -> std::convertible_to<Eigen::VectorXd>;
};

template <typename Problem>
double robust_cost(const Problem& problem, const Eigen::VectorXd& r, double delta) {
  const int bs = problem.block_size();
  double cost = 0.0;
  for (Eigen::Index b = 0; b + bs <= r.size(); b += bs) {
    cost += huber_cost(r.segment(b, bs).norm(), delta);
  }
  return cost;
}

/// Gauss-Newton model of the Huber cost: blocks in the linear region get
/// weight delta/|r| and no curvature along their own residual direction.
template <typename Problem>
void normal_equations(const Problem& problem, const Eigen::VectorXd& r,
                      const Eigen::MatrixXd& jac, double delta, Eigen::MatrixXd& hessian,
                      Eigen::VectorXd& gradient) {
  const int bs = problem.block_size();
  // Rows of `model` are the Jacobian rows as they enter the Hessian.
  Eigen::MatrixXd model = jac;
  Eigen::VectorXd weighted = r;
  for (Eigen::Index b = 0; b + bs <= r.size(); b += bs) {
    const auto rb = r.segment(b, bs);
    const double e = rb.norm();
    const double w = huber_weight(e, delta);
    if (w < 1.0) {
      const Eigen::VectorXd dir = rb / e;
      const auto jb = jac.middleRows(b, bs);
      model.middleRows(b, bs) = std::sqrt(w) * (jb - dir * (dir.transpose() * jb));
      weighted.segment(b, bs) *= w;
    }
  }
  gradient.noalias() = jac.transpose() * weighted;
  hessian.noalias() = model.transpose() * model;
}

template <typename Problem>
Eigen::VectorXd apply_step(const Problem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& dx) {
  if constexpr (HasPlus<Problem>) {
    return problem.plus(x, dx);
  } else {
    return x + dx;
  }
}

template <typename Problem>
Summary solve(const Problem& problem, Eigen::VectorXd& x, const Options& opts = {}) {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(x, r, &jac);
  double cost = robust_cost(problem, r, opts.huber_delta);

  Summary summary;
  summary.initial_cost = cost;
  double lambda = opts.initial_lambda;
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;

  for (int it = 0; it < opts.max_iterations; ++it) {
    summary.iterations = it + 1;
    if (cost <= 1e-30) {
      summary.converged = true;
      break;
    }
    normal_equations(problem, r, jac, opts.huber_delta, hessian, gradient);
    if (gradient.lpNorm<Eigen::Infinity>() < 1e-14) {
      summary.converged = true;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = hessian;
      for (Eigen::Index i = 0; i < damped.rows(); ++i) {
        damped(i, i) += lambda * std::max(hessian(i, i), 1e-12);
      }
      const Eigen::VectorXd dx = damped.ldlt().solve(-gradient);
      if (!dx.allFinite()) {
        lambda *= 10.0;
        if (lambda > 1e16) break;
        continue;
      }
      const Eigen::VectorXd candidate = apply_step(problem, x, dx);
      Eigen::VectorXd r_new;
      problem.evaluate(candidate, r_new, nullptr);
      const double new_cost = robust_cost(problem, r_new, opts.huber_delta);
      if (std::isfinite(new_cost) && new_cost < cost) {
        const double reduction = cost - new_cost;
        const bool small_step = dx.norm() < opts.step_tolerance * (x.norm() + opts.step_tolerance);
        x = candidate;
        cost = new_cost;
        problem.evaluate(x, r, &jac);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (small_step || reduction < opts.cost_tolerance * std::max(cost, 1e-300)) {
          summary.converged = true;
        }
      } else {
        if (dx.norm() < opts.step_tolerance * (x.norm() + opts.step_tolerance)) {
          // The model step is already negligible: a local minimum.
          summary.converged = true;
          break;
        }
        lambda *= 10.0;
        if (lambda > 1e16) break;
      }
    }
    if (summary.converged) break;
    if (!accepted) {
      // Damping saturated without improvement; nothing left to gain.
      summary.converged = true;
      break;
    }
  }

  // Near the minimum cost differences vanish below rounding; finish with
  // undamped steps judged by the gradient instead.
  if (summary.converged && cost > 1e-30) {
    normal_equations(problem, r, jac, opts.huber_delta, hessian, gradient);
    for (int it = 0; it < 5; ++it) {
      const Eigen::VectorXd dx = hessian.ldlt().solve(-gradient);
      if (!dx.allFinite()) break;
      const Eigen::VectorXd candidate = apply_step(problem, x, dx);
      Eigen::VectorXd r_new;
      Eigen::MatrixXd jac_new;
      problem.evaluate(candidate, r_new, &jac_new);
      const double new_cost = robust_cost(problem, r_new, opts.huber_delta);
      if (!(new_cost <= cost + 1e-12 * std::max(cost, 1.0))) break;
      Eigen::MatrixXd h_new;
      Eigen::VectorXd g_new;
      normal_equations(problem, r_new, jac_new, opts.huber_delta, h_new, g_new);
      if (!(g_new.norm() < gradient.norm())) break;
      x = candidate;
      r = r_new;
      jac = jac_new;
      cost = new_cost;
      hessian = h_new;
      gradient = g_new;
    }
  }
  summary.final_cost = cost;
  return summary;
}

/// Central-difference Jacobian of `f` at `x`.
template <typename Fn>
Eigen::MatrixXd numeric_jacobian(const Fn& f, const Eigen::VectorXd& x, Eigen::Index rows) {
  Eigen::MatrixXd jac(rows, x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const Eigen::VectorXd fp = f(xp);
    xp(i) = x(i) - h;
    const Eigen::VectorXd fm = f(xp);
    xp(i) = x(i);
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace carm::lsq
