#include <doctest.h>

#include <set>

#include "mrd/errors.hpp"
#include "mrd/kernel.hpp"
#include "mrd/rng.hpp"
#include "oracles.hpp"

using namespace mrd;

namespace {

ArdKernelParams random_params(std::mt19937_64& rng, Index q) {
  ArdKernelParams p;
  p.variance = oracle::uniform(rng, 1, 1, 0.2, 3.0)(0, 0);
  p.weights = oracle::uniform(rng, q, 1, 0.0, 2.0);
  return p;
}

}  // namespace

TEST_CASE("ard kernel matches entrywise formula") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index q = 1 + trial % 4;
    const ArdKernelParams p = random_params(rng, q);
    const Matrix xa = oracle::normal(rng, 1 + trial % 5, q);
    const Matrix xb = oracle::normal(rng, 2 + trial % 3, q);
    CHECK((ard_kernel(p, xa, xb) - oracle::ard(p.variance, p.weights, xa, xb)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("ard gram is symmetric PSD with variance on the diagonal") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const Index q = 1 + trial % 3;
    const ArdKernelParams p = random_params(rng, q);
    const Matrix x = oracle::normal(rng, 8, q);
    const Matrix k = ard_kernel(p, x, x);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((k.diagonal().array() - p.variance).abs().maxCoeff() < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * p.variance);
  }
}

TEST_CASE("zero weight makes the kernel ignore that coordinate") {
  std::mt19937_64 rng(3);
  ArdKernelParams p = random_params(rng, 3);
  p.weights[1] = 0.0;
  Matrix x = oracle::normal(rng, 5, 3);
  const Matrix k0 = ard_kernel(p, x, x);
  x.col(1) = oracle::normal(rng, 5, 1, 10.0);
  CHECK((ard_kernel(p, x, x) - k0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ard kernel derivatives agree with central differences") {
  std::mt19937_64 rng(4);
  const ArdKernelParams p = random_params(rng, 3);
  const Matrix xa = oracle::normal(rng, 4, 3);
  const Matrix xb = oracle::normal(rng, 3, 3);
  const ArdKernelGrads g = ard_kernel_grads(p, xa, xb);
  const double h = 1e-6;
  for (Index i = 0; i < xa.rows(); ++i) {
    for (Index j = 0; j < xb.rows(); ++j) {
      auto entry = [&](const ArdKernelParams& pp, const Matrix& a, const Matrix& b) {
        return oracle::ard(pp.variance, pp.weights, a, b)(i, j);
      };
      ArdKernelParams pv = p;
      pv.variance += h;
      ArdKernelParams mv = p;
      mv.variance -= h;
      CHECK(g.d_variance(i, j) == doctest::Approx((entry(pv, xa, xb) - entry(mv, xa, xb)) / (2 * h)).epsilon(1e-6));
      for (Index q = 0; q < 3; ++q) {
        ArdKernelParams pw = p, mw = p;
        pw.weights[q] += h;
        mw.weights[q] -= h;
        CHECK(g.d_weights[q](i, j) ==
              doctest::Approx((entry(pw, xa, xb) - entry(mw, xa, xb)) / (2 * h)).epsilon(1e-6));
        Matrix ap = xa, am = xa;
        ap(i, q) += h;
        am(i, q) -= h;
        CHECK(g.d_xa[q](i, j) == doctest::Approx((entry(p, ap, xb) - entry(p, am, xb)) / (2 * h)).epsilon(1e-6));
        Matrix bp = xb, bm = xb;
        bp(j, q) += h;
        bm(j, q) -= h;
        CHECK(g.d_xb[q](i, j) == doctest::Approx((entry(p, xa, bp) - entry(p, xa, bm)) / (2 * h)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("gram vjp agrees with central differences") {
  std::mt19937_64 rng(5);
  const ArdKernelParams p = random_params(rng, 2);
  const Matrix x = oracle::normal(rng, 5, 2);
  const Matrix up = oracle::normal(rng, 5, 5);
  const ArdGramVjp vjp = ard_gram_vjp(p, x, up);
  auto f = [&](const oracle::Vector& v) {
    ArdKernelParams pp;
    pp.variance = v[0];
    pp.weights = v.segment(1, 2);
    const Matrix xx = Eigen::Map<const Matrix>(v.data() + 3, 5, 2);
    return up.cwiseProduct(oracle::ard(pp.variance, pp.weights, xx, xx)).sum();
  };
  oracle::Vector v(13);
  v << p.variance, p.weights, Eigen::Map<const oracle::Vector>(x.data(), 10);
  const oracle::Vector num = oracle::central_difference(f, v, 1e-6);
  CHECK(vjp.variance == doctest::Approx(num[0]).epsilon(1e-6));
  for (Index q = 0; q < 2; ++q) CHECK(vjp.weights[q] == doctest::Approx(num[1 + q]).epsilon(1e-6));
  for (Index i = 0; i < 10; ++i) CHECK(vjp.inputs.data()[i] == doctest::Approx(num[3 + i]).epsilon(1e-5));
}

TEST_CASE("kernel rejects mismatched shapes and invalid parameters") {
  ArdKernelParams p;
  p.weights = Vector::Ones(2);
  CHECK_THROWS_AS(ard_kernel(p, Matrix::Zero(3, 2), Matrix::Zero(3, 3)), DimensionError);
  p.variance = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.variance = 1.0;
  p.weights[0] = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  TemporalKernelParams t;
  t.lengthscale = 0.0;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("temporal kernel") {
  TemporalKernelParams p{2.0, 0.5, 1e-5};
  Vector t(3);
  t << 0.0, 0.25, 1.0;
  const Matrix k = temporal_kernel(p, t);
  CHECK(k(0, 0) == doctest::Approx(2.0 + 1e-5));
  CHECK(k(0, 1) == doctest::Approx(2.0 * std::exp(-0.5 * 0.25 * 0.25 / 0.25)));
  const Matrix kc = temporal_kernel(p, t, t);
  CHECK(kc(1, 1) == doctest::Approx(2.0));

  const double h = 1e-6;
  TemporalKernelParams pp = p, pm = p;
  pp.lengthscale += h;
  pm.lengthscale -= h;
  const Matrix num = (temporal_kernel(pp, t) - temporal_kernel(pm, t)) / (2 * h);
  CHECK((temporal_kernel_d_lengthscale(p, t) - num).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("stable cholesky solves and escalates jitter") {
  std::mt19937_64 rng(6);
  const Matrix a = oracle::random_spd(rng, 6);
  const Matrix b = oracle::normal(rng, 6, 2);
  const StableCholesky chol(a);
  CHECK(chol.jitter() == 0.0);
  CHECK((a * chol.solve(b) - b).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(chol.log_det() == doctest::Approx(std::log(a.determinant())));
  CHECK((chol.inverse() * a - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);

  // rank one: needs jitter but stays factorizable
  const Matrix v = oracle::normal(rng, 6, 1);
  const StableCholesky low(v * v.transpose());
  CHECK(low.jitter() > 0.0);
  CHECK(low.jitter() <= 1e-2 * (v * v.transpose()).diagonal().mean() * (1 + 1e-12));

  Matrix bad = Matrix::Identity(3, 3);
  bad(0, 0) = -5.0;
  CHECK_THROWS_AS(StableCholesky{bad}, SingularMatrixError);

  const PsdSolveResult r = stable_psd_solve(a, b);
  CHECK((a * r.solution - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("named streams are deterministic and independent") {
  auto a1 = named_stream(7, "alpha");
  auto a2 = named_stream(7, "alpha");
  auto b = named_stream(7, "beta");
  auto c = named_stream(8, "alpha");
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 5; ++i) {
    const auto x = a1();
    CHECK(x == a2());
    seen.insert(x);
    seen.insert(b());
    seen.insert(c());
  }
  CHECK(seen.size() == 15);
}
