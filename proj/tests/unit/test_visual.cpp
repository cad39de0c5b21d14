#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "pase/visual.hpp"

using namespace pase;

namespace {

template <class S>
FeatureMap<S> random_window(Rng& rng, int channels, int size, double amp = 0.5) {
  FeatureMap<S> w(channels, size, size);
  w.data = test::random_mat<S>(rng, channels, size * size, amp);
  return w;
}

/// Operator norm of the conv's linear part via power iteration on A^T A.
double conv_operator_norm(const ConvLayerSpec& sp, const ConvParams<double>& p,
                          int h, int w, Rng& rng, int iters = 120) {
  ConvParams<double> lin = p;
  lin.b.setZero();
  FeatureMap<double> v(sp.in_ch, h, w);
  v.data = test::random_mat<double>(rng, sp.in_ch, h * w);
  v.data /= v.data.norm();
  MatD scratch;
  double sigma = 0;
  for (int it = 0; it < iters; ++it) {
    const auto av = conv2d_forward(v, sp, lin, scratch);
    sigma = av.data.norm();
    FeatureMap<double> atav(sp.in_ch, h, w);
    MatD dw = MatD::Zero(p.w.rows(), p.w.cols());
    MatD db = MatD::Zero(p.b.rows(), 1);
    conv2d_backward(v, sp, lin, av, dw, db, &atav, scratch);
    const double n = atav.data.norm();
    if (n == 0) return 0;
    v.data = atav.data / n;
  }
  return sigma;
}

}  // namespace

TEST_CASE("shape audit: the default stack maps 96x96 to 1x1 through the exact chain") {
  const auto specs = VisualStack<float>::table3_specs();
  REQUIRE(specs.size() == 14);

  // channel chain is intact
  int ch = 15;
  for (const auto& sp : specs) {
    CHECK(sp.in_ch == ch);
    ch = sp.out_ch;
    if (sp.kind == LayerKind::residual_block) {
      CHECK(sp.in_ch == sp.out_ch);
      CHECK(sp.sh == 1);
      CHECK(sp.sw == 1);
    }
  }
  CHECK(ch == 512);

  std::pair<int, int> shape{96, 96};
  std::vector<std::pair<int, int>> milestones;
  milestones.push_back(shape);
  for (const auto& sp : specs) {
    auto next = conv_output_shape(sp, shape);
    if (next != shape) milestones.push_back(next);
    shape = next;
  }
  const std::vector<std::pair<int, int>> expected = {
      {96, 96}, {94, 47}, {47, 24}, {24, 12}, {12, 6}, {6, 3}, {1, 1}};
  CHECK(milestones == expected);
  CHECK(shape == std::pair<int, int>{1, 1});
}

TEST_CASE("reduced_specs(1, 96) reproduces the default stack row for row") {
  const auto a = VisualStack<float>::table3_specs();
  const auto b = VisualStack<float>::reduced_specs(1, 96);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].kind == b[i].kind);
    CHECK(a[i].in_ch == b[i].in_ch);
    CHECK(a[i].out_ch == b[i].out_ch);
    CHECK(a[i].kh == b[i].kh);
    CHECK(a[i].kw == b[i].kw);
    CHECK(a[i].sh == b[i].sh);
    CHECK(a[i].sw == b[i].sw);
    CHECK(a[i].ph == b[i].ph);
    CHECK(a[i].pw == b[i].pw);
  }
}

TEST_CASE("reduced clones still collapse to 1x1 at smaller input sizes") {
  for (int size : {16, 24, 48, 96}) {
    const auto specs = VisualStack<float>::reduced_specs(8, size);
    std::pair<int, int> shape{size, size};
    for (const auto& sp : specs) shape = conv_output_shape(sp, shape);
    CHECK(shape == std::pair<int, int>{1, 1});
  }
}

TEST_CASE("zero weights and biases give a zero embedding") {
  Rng rng(31);
  auto stack = VisualStack<double>::make(
      VisualStack<double>::reduced_specs(8, 24), 24, rng);
  for (auto& l : stack.layers) {
    l.conv1.w.setZero();
    l.conv1.b.setZero();
    if (l.spec.kind == LayerKind::residual_block) {
      l.conv2.w.setZero();
      l.conv2.b.setZero();
    }
  }
  auto window = random_window<double>(rng, 15, 24);
  CHECK(encode_window(stack, window).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residual block with zero inner weights is identity-compose-relu") {
  Rng rng(32);
  ConvLayerSpec sp{LayerKind::residual_block, 4, 4, 3, 3, 1, 1, 1, 1};
  ConvParams<double> c1, c2;
  c1.init(sp, rng);
  c2.init(sp, rng);
  c1.w.setZero();
  c1.b.setZero();
  c2.w.setZero();
  c2.b.setZero();
  FeatureMap<double> x(4, 6, 6);
  x.data = test::random_mat<double>(rng, 4, 36).cwiseAbs();  // non-negative

  MatD scratch;
  FeatureMap<double> a1 = conv2d_forward(x, sp, c1, scratch);
  relu_inplace(a1.data);
  FeatureMap<double> y = conv2d_forward(a1, sp, c2, scratch);
  y.data += x.data;
  relu_inplace(y.data);
  CHECK((y.data - x.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_window rejects wrong input shapes") {
  Rng rng(33);
  auto stack = VisualStack<double>::make(
      VisualStack<double>::reduced_specs(8, 24), 24, rng);
  auto bad_channels = random_window<double>(rng, 3, 24);
  CHECK_THROWS_AS(encode_window(stack, bad_channels), DataError);
  auto bad_size = random_window<double>(rng, 15, 16);
  CHECK_THROWS_AS(encode_window(stack, bad_size), DataError);
}

TEST_CASE("encode_frame_sequence maps windows independently") {
  Rng rng(34);
  auto stack = VisualStack<double>::make(
      VisualStack<double>::reduced_specs(16, 16), 16, rng);
  auto w1 = random_window<double>(rng, 15, 16);
  auto w2 = random_window<double>(rng, 15, 16);

  const MatD single = encode_frame_sequence(stack, {w1});
  CHECK(single.rows() == 1);
  CHECK(single.cols() == stack.out_dim());

  const MatD same = encode_frame_sequence(stack, {w1, w1, w1});
  CHECK((same.row(0) - same.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((same.row(1) - same.row(2)).cwiseAbs().maxCoeff() == 0.0);

  const MatD ab = encode_frame_sequence(stack, {w1, w2});
  const MatD ba = encode_frame_sequence(stack, {w2, w1});
  CHECK((ab.row(0) - ba.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ab.row(1) - ba.row(0)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(encode_frame_sequence(stack, {}), DataError);
}

TEST_CASE("visual gradients match central differences on the width/8 clone") {
  Rng rng(35);
  auto stack = VisualStack<double>::make(
      VisualStack<double>::reduced_specs(8, 96), 96, rng);
  auto window = random_window<double>(rng, 15, 96);
  const VecD probe = test::random_vec<double>(rng, stack.out_dim());

  Mat<double> scratch;
  auto loss = [&]() {
    VisualTrace<double> tr;
    return probe.dot(visual_forward(stack, window, tr, scratch));
  };

  VisualTrace<double> trace;
  visual_forward(stack, window, trace, scratch);
  VisualGrad<double> grad;
  grad.init_zero(stack);
  visual_backward(stack, window, trace, probe, grad, scratch);

  // Exhaustive differencing over ~250k parameters is infeasible; sample a
  // fixed handful of coordinates from every tensor instead. Coordinates whose
  // stencil straddles a ReLU kink carry no usable slope estimate and are
  // skipped.
  const double eps = 1e-5;
  double worst = 0;
  Rng pick(99);
  auto check_tensor = [&](MatD& param, const MatD& analytic) {
    for (int s = 0; s < 4; ++s) {
      const auto i = Eigen::Index(pick.index(size_t(param.rows())));
      const auto j = Eigen::Index(pick.index(size_t(param.cols())));
      const double err =
          test::kink_aware_err(param, i, j, eps, analytic(i, j), loss);
      if (err >= 0) worst = std::max(worst, err);
    }
  };
  for (size_t l = 0; l < stack.layers.size(); ++l) {
    check_tensor(stack.layers[l].conv1.w, grad.layers[l].w1);
    check_tensor(stack.layers[l].conv1.b, grad.layers[l].b1);
    if (stack.layers[l].spec.kind == LayerKind::residual_block) {
      check_tensor(stack.layers[l].conv2.w, grad.layers[l].w2);
      check_tensor(stack.layers[l].conv2.b, grad.layers[l].b2);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("jitter-sized input changes are bounded by the layer-norm product") {
  Rng rng(36);
  auto stack = VisualStack<double>::make(
      VisualStack<double>::reduced_specs(8, 24), 24, rng);

  // Per-layer Lipschitz factors from power-iteration operator norms; ReLU is
  // 1-Lipschitz and a residual block is bounded by 1 + |c1| |c2|.
  double bound = 1.0;
  std::pair<int, int> shape{24, 24};
  for (const auto& l : stack.layers) {
    Rng r2 = rng.fork(uint64_t(bound * 1e6));
    if (l.spec.kind == LayerKind::conv) {
      bound *= conv_operator_norm(l.spec, l.conv1, shape.first, shape.second, r2);
    } else {
      const double n1 =
          conv_operator_norm(l.spec, l.conv1, shape.first, shape.second, r2);
      const double n2 =
          conv_operator_norm(l.spec, l.conv2, shape.first, shape.second, r2);
      bound *= 1.0 + n1 * n2;
    }
    shape = conv_output_shape(l.spec, shape);
  }

  auto base = random_window<double>(rng, 15, 24);
  for (int trial = 0; trial < 5; ++trial) {
    const double eps_amp = 1e-3;
    FeatureMap<double> jittered = base;
    jittered.data += test::random_mat<double>(rng, 15, 24 * 24, eps_amp);
    const VecD a = encode_window(stack, base);
    const VecD b = encode_window(stack, jittered);
    const double input_dist = (jittered.data - base.data).norm();
    // 1% slack for the power-iteration estimate converging from below
    CHECK((a - b).norm() <= bound * input_dist * 1.01);
  }
}
