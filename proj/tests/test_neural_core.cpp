#include <doctest.h>

#include <cmath>
#include <random>

#include "lmkbqa/errors.hpp"
#include "lmkbqa/model.hpp"
#include "lmkbqa/neural_core.hpp"

using namespace lmkbqa;
using M = nn::Matrix<double>;
using R = nn::RowVector<double>;

namespace {

M mat(std::initializer_list<std::initializer_list<double>> rows) {
  M m(static_cast<long>(rows.size()), static_cast<long>(rows.begin()->size()));
  long i = 0;
  for (const auto& r : rows) {
    long j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

R row(std::initializer_list<double> v) { return mat({v}); }

bool close(const M& a, const M& b, double tol) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).cwiseAbs().maxCoeff() <= tol;
}

M random_matrix(std::mt19937_64& rng, long r, long c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  M m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// First two softmax outputs of [1/sqrt(2), 0], computed by hand.
const double kHi = std::exp(1 / std::sqrt(2.0)) / (std::exp(1 / std::sqrt(2.0)) + 1);
const double kLo = 1 - kHi;

}  // namespace

TEST_CASE("project") {
  const M x = mat({{1, 2}, {3, -1}});
  CHECK(nn::project<double>(x, M::Identity(2, 2), R::Zero(2)) == x);
  const M c = nn::project<double>(x, M::Zero(2, 3), row({1, 2, 3}));
  CHECK(c.row(0) == row({1, 2, 3}));
  CHECK(c.row(1) == row({1, 2, 3}));
  CHECK(nn::project<double>(mat({{1, 2}}), 2 * M::Identity(2, 2), R::Zero(2)) == mat({{2, 4}}));
  CHECK_THROWS_AS(nn::project<double>(x, M::Identity(3, 3), R::Zero(3)), ShapeMismatch);
}

TEST_CASE("conv1d") {
  const M x = mat({{1, -2}, {0.5, 4}, {3, 3}});
  std::array<M, 3> identity{M::Zero(2, 2), M::Identity(2, 2), M::Zero(2, 2)};
  CHECK(nn::conv1d<double>(x, identity, R::Zero(2)) == x);
  std::array<M, 3> ones{M::Ones(1, 1), M::Ones(1, 1), M::Ones(1, 1)};
  CHECK(nn::conv1d<double>(mat({{1}, {2}, {3}}), ones, R::Zero(1)) == mat({{3}, {6}, {5}}));
  std::array<M, 3> zero{M::Zero(2, 2), M::Zero(2, 2), M::Zero(2, 2)};
  const M b = nn::conv1d<double>(x, zero, row({7, -7}));
  for (long i = 0; i < 3; ++i) CHECK(b.row(i) == row({7, -7}));
  // taps[0] reads the previous row, taps[2] the next one.
  std::array<M, 3> prev{M::Ones(1, 1), M::Zero(1, 1), M::Zero(1, 1)};
  CHECK(nn::conv1d<double>(mat({{1}, {2}, {3}}), prev, R::Zero(1)) == mat({{0}, {1}, {2}}));
}

TEST_CASE("softmax") {
  CHECK(close(nn::softmax_rows<double>(mat({{2, 2, 2, 2}})), mat({{0.25, 0.25, 0.25, 0.25}}), 1e-15));
  const M s = nn::softmax_rows<double>(mat({{0.7071, 0}}));
  CHECK(std::abs(s(0, 0) - 0.6698) < 1e-4);
  CHECK(std::abs(s(0, 1) - 0.3302) < 1e-4);
  CHECK(nn::softmax_rows<double>(mat({{-3}})) == mat({{1}}));
  CHECK(close(nn::softmax_cols<double>(mat({{0.7071}, {0}})), mat({{s(0, 0)}, {s(0, 1)}}), 1e-15));
  // Huge logits stay finite.
  const M big = nn::softmax_rows<double>(mat({{1000, 999}}));
  CHECK(std::isfinite(big(0, 0)));
  CHECK(big.sum() == doctest::Approx(1.0));
}

TEST_CASE("softmax rows sum to one on random matrices") {
  std::mt19937_64 rng(1);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const M m = random_matrix(rng, 1 + static_cast<long>(rng() % 8), 1 + static_cast<long>(rng() % 8), 10.0);
    const M s = nn::softmax_rows<double>(m);
    worst = std::max(worst, (s.rowwise().sum().array() - 1.0).abs().maxCoeff());
    CHECK(s.minCoeff() >= 0.0);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("multi-head self-attention") {
  const M id = M::Identity(2, 2);
  SUBCASE("single token attends to itself") {
    const M x = mat({{0.3, -1.2}});
    CHECK(close(nn::multi_head_self_attention<double>(x, id, id, id, id, 1), x, 1e-15));
  }
  SUBCASE("two orthogonal tokens") {
    const M out = nn::multi_head_self_attention<double>(id, id, id, id, id, 1);
    CHECK(close(out, mat({{0.6698, 0.3302}, {0.3302, 0.6698}}), 1e-4));
    CHECK(close(out, mat({{kHi, kLo}, {kLo, kHi}}), 1e-12));
  }
  SUBCASE("identical rows average to themselves") {
    const M x = mat({{0.5, 2}, {0.5, 2}});
    CHECK(close(nn::multi_head_self_attention<double>(x, id, id, id, id, 1), x, 1e-12));
  }
  SUBCASE("heads own disjoint column blocks") {
    const M x = mat({{1, 0, 0, 2}, {0, 1, 3, 0}});
    const M i4 = M::Identity(4, 4);
    nn::AttentionCache<double> cache;
    const M out = nn::multi_head_self_attention<double>(x, i4, i4, i4, i4, 2, &cache);
    REQUIRE(cache.weights.size() == 2);
    const M h0 = nn::multi_head_self_attention<double>(M(x.leftCols(2)), id, id, id, id, 1);
    const M h1 = nn::multi_head_self_attention<double>(M(x.rightCols(2)), id, id, id, id, 1);
    CHECK(close(out.leftCols(2), h0, 1e-12));
    CHECK(close(out.rightCols(2), h1, 1e-12));
  }
  SUBCASE("width must split evenly") {
    CHECK_THROWS_AS(nn::multi_head_self_attention<double>(M::Identity(3, 3), M::Identity(3, 3), M::Identity(3, 3),
                                                          M::Identity(3, 3), M::Identity(3, 3), 2),
                    ShapeMismatch);
  }
}

TEST_CASE("self-attention is permutation equivariant") {
  std::mt19937_64 rng(4);
  const M x = random_matrix(rng, 5, 4);
  const M wq = random_matrix(rng, 4, 4), wk = random_matrix(rng, 4, 4), wv = random_matrix(rng, 4, 4),
          wo = random_matrix(rng, 4, 4);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(5);
  p.indices() << 3, 0, 4, 1, 2;
  const M a = p * nn::multi_head_self_attention<double>(x, wq, wk, wv, wo, 2);
  const M b = nn::multi_head_self_attention<double>(M(p * x), wq, wk, wv, wo, 2);
  CHECK(close(a, b, 1e-12));
}

TEST_CASE("feed_forward") {
  const M id = M::Identity(2, 2);
  const M x = mat({{1, 0.5}, {0, 2}});
  CHECK(nn::feed_forward<double>(x, id, R::Zero(2), id, R::Zero(2)) == x);
  CHECK(nn::feed_forward<double>(-x - M::Ones(2, 2), id, R::Zero(2), id, R::Zero(2)) == M::Zero(2, 2));
  CHECK(nn::feed_forward<double>(mat({{1}}), mat({{2}}), row({-1}), mat({{3}}), row({0})) == mat({{3}}));
}

TEST_CASE("layer_norm") {
  const double eps = nn::kLayerNormEps;
  CHECK(close(nn::layer_norm<double>(mat({{4, 4, 4}}), R::Ones(3), R::Zero(3), eps), M::Zero(1, 3), 1e-12));
  CHECK(close(nn::layer_norm<double>(mat({{1, -1}}), R::Ones(2), R::Zero(2), eps), mat({{1, -1}}), 1e-4));
  CHECK(close(nn::layer_norm<double>(mat({{2, 0}}), R::Ones(2), R::Ones(2), eps), mat({{2, 0}}), 1e-4));
  const double s = 1.0 / std::sqrt(1.0 + eps);
  CHECK(close(nn::layer_norm<double>(mat({{2, 0}}), R::Ones(2), R::Ones(2), eps), mat({{1 + s, 1 - s}}), 1e-15));
}

TEST_CASE("encoder block") {
  std::mt19937_64 rng(8);
  ModelDims dims{4, 4, 2, 6, 1};
  const M x = random_matrix(rng, 3, 4);
  SUBCASE("zero sub-block weights with unit gains is the identity") {
    auto b = zero_block<double>(dims);
    b.conv_norm_gain = b.attn_norm_gain = b.ffn_norm_gain = R::Ones(4);
    CHECK(close(encoder_block<double>(x, b, 2), x, 1e-15));
  }
  SUBCASE("inference is deterministic; seeded dropout is reproducible") {
    const auto w = init_weights<double>(dims, 3);
    const auto& b = w.question_encoder[0];
    CHECK(encoder_block<double>(x, b, 2) == encoder_block<double>(x, b, 2));
    std::mt19937_64 r1(5), r2(5);
    const M d1 = encoder_block<double>(x, b, 2, Dropout{0.3, &r1});
    const M d2 = encoder_block<double>(x, b, 2, Dropout{0.3, &r2});
    CHECK(d1 == d2);
    CHECK(d1 != encoder_block<double>(x, b, 2));
  }
}

TEST_CASE("dropout masks are inverted and seeded") {
  std::mt19937_64 rng(6);
  const auto m = dropout_mask<double>(200, 50, Dropout{0.3, &rng});
  const double keep = 1.0 / 0.7;
  long zeros = 0;
  for (long i = 0; i < m.size(); ++i) {
    CHECK((m.data()[i] == 0.0 || m.data()[i] == keep));
    zeros += m.data()[i] == 0.0;
  }
  CHECK(static_cast<double>(zeros) / static_cast<double>(m.size()) == doctest::Approx(0.3).epsilon(0.05));
  const auto off = dropout_mask<double>(3, 3, Dropout{});
  CHECK(apply_mask<double>(M::Ones(3, 3), off) == M::Ones(3, 3));
}

TEST_CASE("trilinear similarity") {
  CHECK(nn::trilinear_similarity<double>(mat({{1, 0}}), mat({{0, 1}}), R::Ones(6)) == mat({{2}}));
  CHECK(nn::trilinear_similarity<double>(mat({{1, 0}, {1, 1}}), mat({{0, 1}}), R::Zero(6)) == M::Zero(1, 2));
  CHECK(nn::trilinear_similarity<double>(mat({{1, 1}}), mat({{1, 1}}), R::Ones(6)) == mat({{6}}));
  // S is context rows by question rows.
  const M s = nn::trilinear_similarity<double>(M::Ones(2, 3), M::Ones(4, 3), R::Ones(9));
  CHECK(s.rows() == 4);
  CHECK(s.cols() == 2);
}

TEST_CASE("cross attention") {
  SUBCASE("single question token") {
    const M q = mat({{0.2, -0.4}});
    const M c = mat({{1, 2}, {3, 4}, {5, 6}});
    const auto a = nn::cross_attention<double>(q, c, nn::trilinear_similarity<double>(q, c, R::Ones(6)));
    for (long i = 0; i < 3; ++i) CHECK(close(a.c2q.row(i), q, 1e-15));
  }
  SUBCASE("one token each") {
    const M q = mat({{0.2, -0.4}});
    const M c = mat({{1, 2}});
    const auto a = nn::cross_attention<double>(q, c, mat({{3.0}}));
    CHECK(close(a.q2c, c, 1e-15));
  }
  SUBCASE("uniform column softmax averages the context") {
    const M q = mat({{9, 9}});
    const M c = M::Identity(2, 2);
    const auto a = nn::cross_attention<double>(q, c, M::Zero(2, 1));
    CHECK(close(a.q2c, mat({{0.5, 0.5}, {0.5, 0.5}}), 1e-15));
  }
}

TEST_CASE("fusion") {
  CHECK(nn::fusion_input<double>(mat({{1, 2}}), mat({{3, 4}}), mat({{0, 1}})) == mat({{1, 2, 3, 4, 3, 8, 0, 2}}));
  CHECK(nn::fusion_input<double>(mat({{0, 0}}), mat({{3, 4}}), mat({{5, 1}})) == mat({{0, 0, 3, 4, 0, 0, 0, 0}}));
  const M c = mat({{1, 2}, {-1, 0.5}});
  M select = M::Zero(8, 2);
  select.topRows(2) = M::Identity(2, 2);
  CHECK(nn::fuse<double>(c, c, c, select, R::Zero(2)) == c);
  CHECK_THROWS_AS(nn::fuse<double>(c, c, c, M::Zero(6, 2), R::Zero(2)), ShapeMismatch);
}

TEST_CASE("max pool and cosine") {
  const M x = mat({{1, 5}, {3, -1}});
  CHECK(nn::max_pool<double>(mat({{4, -2}})) == row({4, -2}));
  CHECK(nn::max_pool<double>(x) == row({3, 5}));
  const R v = row({0.3, -2, 7});
  CHECK(nn::cosine<double>(v, v) == doctest::Approx(1.0));
  CHECK(std::abs(nn::cosine<double>(row({1, 1}), row({1, 0})) - 0.7071) < 1e-4);
  CHECK(std::abs(nn::cosine<double>(row({1, 1}), row({1, 0})) - 1 / std::sqrt(2.0)) < 1e-6);
  CHECK_THROWS_AS(nn::cosine<double>(row({0, 0}), row({1, 0})), ZeroVector);
}
