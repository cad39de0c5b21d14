#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "pase/robustness.hpp"

using namespace pase;

TEST_CASE("mask plan selects exactly round(ratio * T) steps") {
  Rng rng(41);
  CHECK(make_mask_plan(10, 0.2, rng.fork(1)).count() == 2);
  CHECK(make_mask_plan(10, 0.0, rng.fork(2)).count() == 0);
  CHECK(make_mask_plan(7, 0.15, rng.fork(3)).count() == 1);  // round(1.05)
  CHECK(make_mask_plan(3, 0.5, rng.fork(4)).count() == 2);   // round(1.5)
  CHECK_THROWS_AS(make_mask_plan(5, 1.0, rng.fork(5)), UsageError);
  CHECK_THROWS_AS(make_mask_plan(5, -0.1, rng.fork(6)), UsageError);
}

TEST_CASE("mask plan is reproducible from its stream") {
  Rng rng(42);
  const auto a = make_mask_plan(50, 0.3, rng.fork(7));
  const auto b = make_mask_plan(50, 0.3, rng.fork(7));
  CHECK(a.mask == b.mask);
}

TEST_CASE("apply_mask replaces selected rows with the fill vector") {
  Rng rng(43);
  const MatD seq = test::random_mat<double>(rng, 10, 4);
  const VecD fill = test::random_vec<double>(rng, 4);

  MaskPlan none;
  none.mask.assign(10, false);
  CHECK((apply_mask(seq, none, fill) - seq).cwiseAbs().maxCoeff() == 0.0);

  MaskPlan all;
  all.mask.assign(10, true);
  const MatD masked = apply_mask(seq, all, fill);
  for (Eigen::Index t = 0; t < 10; ++t)
    CHECK((masked.row(t).transpose() - fill).cwiseAbs().maxCoeff() == 0.0);

  const auto plan = make_mask_plan(10, 0.2, rng.fork(1));
  const MatD partial = apply_mask(seq, plan, fill);
  int replaced = 0;
  for (Eigen::Index t = 0; t < 10; ++t)
    if ((partial.row(t).transpose() - fill).cwiseAbs().maxCoeff() == 0.0) ++replaced;
  CHECK(replaced == 2);

  MaskPlan wrong;
  wrong.mask.assign(9, false);
  CHECK_THROWS_AS(apply_mask(seq, wrong, fill), UsageError);
}

TEST_CASE("reconstruct: identity and zero heads") {
  Rng rng(44);
  const MatD seq = test::random_mat<double>(rng, 5, 4);
  AffineHead<double> head;
  head.w = MatD::Identity(4, 4);
  head.b = MatD::Zero(4, 1);
  CHECK((reconstruct(seq, head) - seq).cwiseAbs().maxCoeff() == 0.0);
  head.w.setZero();
  CHECK(reconstruct(seq, head).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reconstruct matches a scalar affine oracle") {
  Rng rng(45);
  const MatD seq = test::random_mat<double>(rng, 3, 4);
  AffineHead<double> head;
  head.init(4, rng);
  const MatD got = reconstruct(seq, head);
  for (Eigen::Index t = 0; t < 3; ++t)
    for (Eigen::Index i = 0; i < 4; ++i) {
      double want = head.b(i, 0);
      for (Eigen::Index j = 0; j < 4; ++j) want += head.w(i, j) * seq(t, j);
      CHECK(std::abs(got(t, i) - want) < 1e-12);
    }
}

TEST_CASE("reconstruction loss: zero on identical inputs, 1/N for a unit bump") {
  Rng rng(46);
  const MatD v = test::random_mat<double>(rng, 4, 3);
  const MatD a = test::random_mat<double>(rng, 5, 3);
  CHECK(reconstruction_loss(v, v, a, a) == 0.0);

  MatD v2 = v;
  v2(1, 2) += 1.0;
  const double n = double(v.size() + a.size());
  CHECK(reconstruction_loss(v2, v, a, a) == doctest::Approx(1.0 / n).epsilon(1e-12));

  MatD bad = MatD::Zero(4, 4);
  CHECK_THROWS_AS(reconstruction_loss(bad, v, a, a), UsageError);
}

TEST_CASE("reconstruction loss matches a brute-force sum-of-squares oracle") {
  Rng rng(47);
  const MatD v_rec = test::random_mat<double>(rng, 4, 6);
  const MatD v_orig = test::random_mat<double>(rng, 4, 6);
  const MatD a_rec = test::random_mat<double>(rng, 7, 6);
  const MatD a_orig = test::random_mat<double>(rng, 7, 6);
  double want = 0;
  for (Eigen::Index i = 0; i < v_rec.rows(); ++i)
    for (Eigen::Index j = 0; j < v_rec.cols(); ++j) {
      const double d = v_rec(i, j) - v_orig(i, j);
      want += d * d;
    }
  for (Eigen::Index i = 0; i < a_rec.rows(); ++i)
    for (Eigen::Index j = 0; j < a_rec.cols(); ++j) {
      const double d = a_rec(i, j) - a_orig(i, j);
      want += d * d;
    }
  want /= double(v_rec.size() + a_rec.size());
  CHECK(std::abs(reconstruction_loss(v_rec, v_orig, a_rec, a_orig) - want) < 1e-12);
}

TEST_CASE("loss is invariant under a common permutation of time steps") {
  Rng rng(48);
  const MatD v_rec = test::random_mat<double>(rng, 5, 3);
  const MatD v_orig = test::random_mat<double>(rng, 5, 3);
  const MatD a_rec = test::random_mat<double>(rng, 4, 3);
  const MatD a_orig = test::random_mat<double>(rng, 4, 3);
  const double base = reconstruction_loss(v_rec, v_orig, a_rec, a_orig);

  std::vector<int> perm{3, 0, 4, 1, 2};
  MatD pv_rec(5, 3), pv_orig(5, 3);
  for (int t = 0; t < 5; ++t) {
    pv_rec.row(t) = v_rec.row(perm[size_t(t)]);
    pv_orig.row(t) = v_orig.row(perm[size_t(t)]);
  }
  CHECK(reconstruction_loss(pv_rec, pv_orig, a_rec, a_orig) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("closed-form gradient: d loss / d rec = 2 (rec - orig) / N") {
  Rng rng(49);
  const MatD v_rec = test::random_mat<double>(rng, 4, 3);
  const MatD v_orig = test::random_mat<double>(rng, 4, 3);
  const MatD a_rec = test::random_mat<double>(rng, 2, 3);
  const MatD a_orig = test::random_mat<double>(rng, 2, 3);
  const Eigen::Index n = v_rec.size() + a_rec.size();
  const MatD got = reconstruction_loss_grad(v_rec, v_orig, n);
  const MatD want = 2.0 * (v_rec - v_orig) / double(n);
  CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);

  // and it agrees with finite differences on the loss
  MatD probe = v_rec;
  auto loss = [&]() { return reconstruction_loss(probe, v_orig, a_rec, a_orig); };
  CHECK(test::fd_check_mat(probe, got, 1e-6, loss) < 1e-7);
}

TEST_CASE("audio and visual masks from independent streams are uncorrelated") {
  Rng rng(50);
  const int draws = 1000, t_len = 20;
  double sum_a = 0, sum_v = 0, sum_av = 0, sum_aa = 0, sum_vv = 0;
  const double n = double(draws * t_len);
  for (int d = 0; d < draws; ++d) {
    const auto ma = make_mask_plan(t_len, 0.3, rng.fork(0x61, uint64_t(d)));
    const auto mv = make_mask_plan(t_len, 0.3, rng.fork(0x76, uint64_t(d)));
    for (int t = 0; t < t_len; ++t) {
      const double a = ma.mask[size_t(t)] ? 1 : 0;
      const double v = mv.mask[size_t(t)] ? 1 : 0;
      sum_a += a;
      sum_v += v;
      sum_av += a * v;
      sum_aa += a * a;
      sum_vv += v * v;
    }
  }
  const double cov = sum_av / n - (sum_a / n) * (sum_v / n);
  const double var_a = sum_aa / n - (sum_a / n) * (sum_a / n);
  const double var_v = sum_vv / n - (sum_v / n) * (sum_v / n);
  const double corr = cov / std::sqrt(var_a * var_v);
  CHECK(std::abs(corr) < 0.1);
}
