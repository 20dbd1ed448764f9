/*
 * Copyright 2026 The uso Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef USO_SRC_LBFGS_HPP
#define USO_SRC_LBFGS_HPP

// Box-constrained limited-memory quasi-Newton minimizer: gradient
// projection onto the box, two-loop recursion on the free variables and an
// Armijo backtracking search along the projected path. Internal only.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace uso::detail {

/// Returns f(x) and writes its gradient. May return +inf to reject x.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline MinimizeResult minimize_box(const Objective& f, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                   int max_iterations, int memory = 8, double gtol = 1e-7,
                                   double ftol = 1e-12) {
    const Eigen::Index n = x0.size();
    MinimizeResult res;
    res.x = project(x0, lo, hi);
    Eigen::VectorXd g(n);
    res.f = f(res.x, g);
    if (!std::isfinite(res.f)) return res;

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int it = 0; it < max_iterations; ++it) {
        res.iterations = it + 1;
        Eigen::VectorXd pg = project(res.x - g, lo, hi) - res.x;
        if (pg.lpNorm<Eigen::Infinity>() < gtol) break;

        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            bool at_lo = res.x[i] <= lo[i] && g[i] > 0.0;
            bool at_hi = res.x[i] >= hi[i] && g[i] < 0.0;
            free[i] = !(at_lo || at_hi);
        }
        auto mask = [&](Eigen::VectorXd v) {
            for (Eigen::Index i = 0; i < n; ++i)
                if (!free[i]) v[i] = 0.0;
            return v;
        };

        Eigen::VectorXd q = mask(g);
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m);
        for (std::size_t k = m; k-- > 0;) {
            alpha[k] = rho_hist[k] * mask(s_hist[k]).dot(q);
            q -= alpha[k] * mask(y_hist[k]);
        }
        if (m > 0) {
            Eigen::VectorXd ys = mask(y_hist.back());
            double yy = ys.squaredNorm();
            if (yy > 0.0) q *= mask(s_hist.back()).dot(ys) / yy;
        }
        for (std::size_t k = 0; k < m; ++k) {
            double beta = rho_hist[k] * mask(y_hist[k]).dot(q);
            q += (alpha[k] - beta) * mask(s_hist[k]);
        }
        Eigen::VectorXd d = -mask(q);
        if (!(d.dot(g) < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = -mask(g);
            if (!(d.dot(g) < 0.0)) break;
        }

        double step = 1.0;
        if (m == 0) step = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-12));
        Eigen::VectorXd x_new, g_new(n);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = project(res.x + step * d, lo, hi);
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * g.dot(x_new - res.x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = g_new - g;
        double sy = s.dot(y);
        double f_old = res.f;
        res.x = x_new;
        res.f = f_new;
        g = g_new;
        if (sy > 1e-12 * std::max(1.0, s.squaredNorm())) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (std::fabs(f_old - f_new) <= ftol * std::max(1.0, std::fabs(f_old))) break;
    }
    return res;
}

}  // namespace uso::detail

#endif  // USO_SRC_LBFGS_HPP
