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

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "uso/error.hpp"
#include "uso/surrogate.hpp"

using namespace uso;

namespace {

struct Data {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<double> lo, hi;
};

Data sine_data(std::size_t n, std::size_t d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Data out;
    out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    out.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < d; ++j) {
        out.lo.push_back(-2.0 - j);
        out.hi.push_back(3.0 + 2.0 * j);
    }
    for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
        double f = 0;
        for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
            const double t = u(rng);
            out.x(i, j) = out.lo[j] + t * (out.hi[j] - out.lo[j]);
            f += std::sin(3 * t + j);
        }
        out.y(i) = 10 + 4 * f;
    }
    return out;
}

oracle::DenseGp oracle_of(const Data& d, const KernelParams& p) {
    oracle::Mat rows(static_cast<std::size_t>(d.x.rows()), oracle::Vec(static_cast<std::size_t>(d.x.cols())));
    for (Eigen::Index i = 0; i < d.x.rows(); ++i)
        for (Eigen::Index j = 0; j < d.x.cols(); ++j) rows[i][j] = d.x(i, j);
    return oracle::DenseGp(rows, oracle::Vec(d.y.data(), d.y.data() + d.y.size()), d.lo, d.hi,
                           oracle::Vec(p.lengthscales.data(), p.lengthscales.data() + p.lengthscales.size()),
                           p.signal_variance, p.noise_variance);
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("rbf kernel matches its closed form") {
    KernelParams p;
    p.lengthscales = Eigen::Vector2d(0.5, 2.0);
    p.signal_variance = 1.7;
    Eigen::Vector2d a(0.1, 0.2), b(0.4, 0.9);
    const double expect = 1.7 * std::exp(-0.5 * (0.09 / 0.25 + 0.49 / 4.0));
    CHECK(rbf(p, a, b) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(rbf(p, a, a) == doctest::Approx(1.7));
}

TEST_CASE("kernel params validation") {
    auto p = KernelParams::isotropic(2, 0.3, 1.0, 1e-4);
    CHECK_NOTHROW(p.validate(2));
    CHECK_THROWS_AS(p.validate(3), Error);
    p.noise_variance = 1e-12;
    CHECK_THROWS_AS(p.validate(2), Error);
    p = KernelParams::isotropic(2, -1.0, 1.0, 1e-4);
    CHECK_THROWS_AS(p.validate(2), Error);
}

TEST_CASE("conditioned model equals the dense oracle") {
    const auto d = sine_data(9, 3, 1);
    KernelParams p;
    p.lengthscales = Eigen::Vector3d(0.3, 0.6, 1.2);
    p.signal_variance = 1.3;
    p.noise_variance = 1e-3;
    const auto m = GpModel::condition(d.x, d.y, d.lo, d.hi, p);
    const auto o = oracle_of(d, p);
    CHECK(m.lml() == doctest::Approx(o.lml()).epsilon(1e-10));
    CHECK(m.y_mean() == doctest::Approx(o.y_mean()).epsilon(1e-14));
    CHECK(m.y_std() == doctest::Approx(o.y_std()).epsilon(1e-14));
    std::vector<double> q = {0.5, -1.0, 4.0};
    const auto pr = m.predict(q);
    const auto ref = o.raw(q);
    CHECK(pr.mu == doctest::Approx(ref.mu).epsilon(1e-10));
    CHECK(pr.sigma == doctest::Approx(ref.sigma).epsilon(1e-8));
}

TEST_CASE("lml gradient matches finite differences") {
    const auto d = sine_data(8, 2, 2);
    KernelParams p;
    p.lengthscales = Eigen::Vector2d(0.4, 0.8);
    p.signal_variance = 0.9;
    p.noise_variance = 0.01;
    const auto m = GpModel::condition(d.x, d.y, d.lo, d.hi, p);
    Eigen::VectorXd grad;
    const double base = log_marginal_likelihood(m.data(), p, grad);
    CHECK(base == doctest::Approx(m.lml()));
    REQUIRE(grad.size() == 4);
    const double h = 1e-6;
    auto at = [&](int k, double delta) {
        KernelParams q = p;
        if (k < 2) q.lengthscales(k) *= std::exp(delta);
        else if (k == 2) q.signal_variance *= std::exp(delta);
        else q.noise_variance *= std::exp(delta);
        return log_marginal_likelihood(m.data(), q);
    };
    for (int k = 0; k < 4; ++k) {
        const double fd = (at(k, h) - at(k, -h)) / (2 * h);
        CHECK(grad(k) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("fit improves on every start and is deterministic") {
    const auto d = sine_data(10, 2, 3);
    const auto a = GpModel::fit(d.x, d.y, d.lo, d.hi, 11);
    const auto b = GpModel::fit(d.x, d.y, d.lo, d.hi, 11);
    CHECK(a.lml() == b.lml());
    CHECK(a.params().lengthscales == b.params().lengthscales);
    REQUIRE(a.start_lmls().size() == 8);
    for (double s : a.start_lmls()) CHECK(a.lml() >= s - 1e-9);
    CHECK(a.params().noise_variance >= kNoiseFloor);
    CHECK_NOTHROW(a.params().validate(2));
}

TEST_CASE("prediction interpolates training data with small noise") {
    const auto d = sine_data(7, 1, 4);
    const auto m = GpModel::condition(d.x, d.y, d.lo, d.hi, KernelParams::isotropic(1, 0.3, 1.0, 1e-8));
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        std::vector<double> x = {d.x(i, 0)};
        const auto p = m.predict(x);
        CHECK(p.mu == doctest::Approx(d.y(i)).epsilon(1e-4));
        CHECK(p.sigma < 1e-2 * m.y_std());
    }
}

TEST_CASE("gradient of the prediction matches finite differences") {
    const auto d = sine_data(8, 2, 5);
    const auto m = GpModel::fit(d.x, d.y, d.lo, d.hi, 3);
    Eigen::Vector2d u(0.37, 0.61);
    const auto g = m.predict_unit_with_grad(u);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
        Eigen::Vector2d up = u, dn = u;
        up(j) += h;
        dn(j) -= h;
        const auto pu = m.predict_unit_with_grad(up), pd = m.predict_unit_with_grad(dn);
        CHECK(g.dmu(j) == doctest::Approx((pu.mu - pd.mu) / (2 * h)).epsilon(1e-4));
        CHECK(g.dsigma(j) == doctest::Approx((pu.sigma - pd.sigma) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("joint prediction agrees with marginal prediction") {
    const auto d = sine_data(8, 2, 6);
    const auto m = GpModel::fit(d.x, d.y, d.lo, d.hi, 1);
    std::vector<std::vector<double>> pts = {{0.1, 0.2}, {1.0, 2.5}, {-1.0, 0.0}};
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    m.predict_joint(pts, mean, cov);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto p = m.predict(pts[i]);
        CHECK(mean(static_cast<Eigen::Index>(i)) == doctest::Approx(p.mu));
        CHECK(std::sqrt(cov(i, i)) == doctest::Approx(p.sigma).epsilon(1e-6));
    }
    CHECK((cov - cov.transpose()).norm() < 1e-12);
}

TEST_CASE("constant targets give a degenerate but finite model") {
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 0.5, 1.0;
    Eigen::VectorXd y = Eigen::VectorXd::Constant(3, 4.0);
    std::vector<double> lo = {0.0}, hi = {1.0};
    const auto m = GpModel::fit(x, y, lo, hi, 0);
    CHECK(m.degenerate());
    std::vector<double> q = {0.25};
    const auto p = m.predict(q);
    CHECK(p.mu == doctest::Approx(4.0));
    CHECK(std::isfinite(p.sigma));
}

TEST_CASE("duplicate inputs stay factorizable") {
    Eigen::MatrixXd x(4, 1);
    x << 0.3, 0.3, 0.3, 0.7;
    Eigen::VectorXd y(4);
    y << 1.0, 1.0, 1.0, 2.0;
    std::vector<double> lo = {0.0}, hi = {1.0};
    const auto m = GpModel::condition(x, y, lo, hi, KernelParams::isotropic(1, 0.5, 1.0, 1e-8));
    CHECK(m.jitter() <= 1e-4);
    std::vector<double> q = {0.5};
    CHECK(std::isfinite(m.predict(q).mu));
}

TEST_CASE("bad bounds are rejected") {
    const auto d = sine_data(4, 2, 7);
    std::vector<double> lo = {0, 0}, hi = {1, 0};
    CHECK_THROWS_AS(GpModel::fit(d.x, d.y, lo, hi, 0), Error);
    std::vector<double> lo1 = {0};
    CHECK_THROWS_AS(GpModel::fit(d.x, d.y, lo1, lo1, 0), Error);
}

}  // TEST_SUITE
