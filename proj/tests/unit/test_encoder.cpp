#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "ibkd/encoder.hpp"
#include "ibkd/objectives.hpp"

using namespace ibkd;
using encoder::MLPSpec;
using encoder::StudentModel;
using testutil::error_kind;

namespace {

// Forward pass written out directly: tanh on hidden layers, identity output.
Matrix forward_oracle(const StudentModel& m, const Matrix& x) {
  Matrix a = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    Matrix z(a.rows(), L.w.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t o = 0; o < L.w.rows(); ++o) {
        double acc = L.b(0, o);
        for (std::size_t k = 0; k < L.w.cols(); ++k) acc += a(i, k) * L.w(o, k);
        z(i, o) = l + 1 < m.layers.size() ? std::tanh(acc) : acc;
      }
    a = z;
  }
  return a;
}

// Sets every parameter of `m` from the flattened vector `flat`.
void set_params(StudentModel& m, const Matrix& flat) {
  std::size_t k = 0;
  for (Matrix* p : m.parameters())
    for (double& v : p->data()) v = flat.data()[k++];
}

Matrix get_params(StudentModel& m) {
  std::vector<double> flat;
  for (Matrix* p : m.parameters()) flat.insert(flat.end(), p->data().begin(), p->data().end());
  return Matrix(1, flat.size(), flat);
}

Matrix flatten_grads(const encoder::Gradients& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    flat.insert(flat.end(), g.w[l].data().begin(), g.w[l].data().end());
    flat.insert(flat.end(), g.b[l].data().begin(), g.b[l].data().end());
  }
  return Matrix(1, flat.size(), flat);
}

}  // namespace

TEST_CASE("MLPSpec validation") {
  CHECK(error_kind([] { MLPSpec{{4}}.validate(); }) == ErrorKind::Config);
  CHECK(error_kind([] { MLPSpec{{4, 0, 2}}.validate(); }) == ErrorKind::Config);
  CHECK_FALSE(error_kind([] { MLPSpec{{4, 2}}.validate(); }));
}

TEST_CASE("initialization") {
  const auto m = StudentModel::init(MLPSpec{{6, 5, 3}}, 42);
  REQUIRE(m.layers.size() == 2);
  CHECK(m.layers[0].w.rows() == 5);
  CHECK(m.layers[0].w.cols() == 6);
  const double limit = std::sqrt(6.0 / 11.0);
  for (double v : m.layers[0].w.data()) CHECK(std::abs(v) <= limit);
  for (double v : m.layers[1].b.data()) CHECK(v == 0.0);
  CHECK(StudentModel::init(MLPSpec{{6, 5, 3}}, 42) == m);
  CHECK_FALSE(StudentModel::init(MLPSpec{{6, 5, 3}}, 43) == m);
}

TEST_CASE("forward examples") {
  auto m = StudentModel::init(MLPSpec{{3, 4, 2}}, 1);
  for (Matrix* p : m.parameters()) *p = Matrix(p->rows(), p->cols());
  CHECK(encoder::forward(m, testutil::uniform(5, 3, 2)).output == Matrix(5, 2));

  auto id = StudentModel::init(MLPSpec{{3, 3}}, 1);
  id.layers[0].w = Matrix::identity(3);
  const Matrix x = testutil::uniform(4, 3, 3);
  CHECK(encoder::forward(id, x).output == x);

  const auto net = StudentModel::init(MLPSpec{{5, 7, 3}}, 9);
  const Matrix xr = testutil::uniform(6, 5, 4);
  CHECK(testutil::max_abs_diff(encoder::forward(net, xr).output, forward_oracle(net, xr)) < 1e-12);
  CHECK(encoder::forward(net, xr).output == encoder::forward(net, xr).output);
  CHECK(error_kind([&] { encoder::forward(net, Matrix(2, 4)); }) == ErrorKind::Shape);
}

TEST_CASE("backward examples") {
  auto m = StudentModel::init(MLPSpec{{4, 3}}, 5);
  const Matrix x = testutil::uniform(6, 4, 6);
  const auto fwd = encoder::forward(m, x);
  const auto zero = encoder::backward(m, fwd.cache, Matrix(6, 3));
  CHECK(testutil::max_abs(zero.w[0]) == 0.0);
  CHECK(testutil::max_abs(zero.grad_in) == 0.0);

  const Matrix g = testutil::uniform(6, 3, 7);
  const auto lin = encoder::backward(m, fwd.cache, g);
  CHECK(lin.w[0] == linalg::matmul_tn(g, x));
}

TEST_CASE("backward rejects a stale cache") {
  auto m = StudentModel::init(MLPSpec{{4, 3, 2}}, 5);
  const auto fwd = encoder::forward(m, testutil::uniform(3, 4, 1));
  m.layers[0].w(0, 0) += 1e-3;
  CHECK(error_kind([&] { encoder::backward(m, fwd.cache, Matrix(3, 2)); }) == ErrorKind::State);
  const auto fresh = encoder::forward(m, testutil::uniform(3, 4, 1));
  CHECK(error_kind([&] { encoder::backward(m, fresh.cache, Matrix(3, 5)); }) == ErrorKind::State);
}

TEST_CASE("3-layer network gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto m = StudentModel::init(MLPSpec{{5, 6, 4, 3}}, seed);
    const Matrix x = testutil::uniform(7, 5, seed + 10), target = testutil::uniform(7, 3, seed + 20);
    auto loss = [&](StudentModel& model) {
      const Matrix out = encoder::forward(model, x).output;
      return 0.5 * linalg::frobenius_sq(linalg::sub(out, target));
    };
    const auto fwd = encoder::forward(m, x);
    const auto g = encoder::backward(m, fwd.cache, linalg::sub(fwd.output, target));
    const Matrix theta = get_params(m);
    const Matrix fd = linalg::finite_diff_grad(
        [&](const Matrix& p) {
          StudentModel copy = m;
          set_params(copy, p);
          return loss(copy);
        },
        theta);
    CHECK(linalg::max_rel_error(flatten_grads(g), fd) < 1e-4);
    const Matrix fdx = linalg::finite_diff_grad(
        [&](const Matrix& xx) {
          return 0.5 * linalg::frobenius_sq(linalg::sub(encoder::forward(m, xx).output, target));
        },
        x);
    CHECK(linalg::max_rel_error(g.grad_in, fdx) < 1e-4);
  }
}

TEST_CASE("project") {
  const Matrix s = testutil::uniform(4, 5, 3);
  Matrix top(2, 5);
  top(0, 0) = top(1, 1) = 1.0;
  const Matrix t = encoder::project(top, s);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t(i, 0) == s(i, 0));
    CHECK(t(i, 1) == s(i, 1));
  }
  CHECK(encoder::project(Matrix(2, 5), s) == Matrix(4, 2));
  const Matrix p = testutil::uniform(3, 5, 4);
  CHECK(testutil::max_abs_diff(encoder::project(p, s), linalg::matmul(s, linalg::transpose(p))) < 1e-12);
  CHECK(error_kind([&] { encoder::project(Matrix(2, 4), s); }) == ErrorKind::Shape);
}

TEST_CASE("heads") {
  auto m = StudentModel::init(MLPSpec{{4, 6}}, 1);
  m.attach_alignment(3);
  CHECK(m.align->w == Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  CHECK(error_kind([&] { m.attach_projection(6, 1); }) == ErrorKind::Config);
  m.attach_projection(3, 1);
  CHECK(m.embedding_dim() == 3);
  CHECK(encoder::embed(m, testutil::uniform(2, 4, 5)).cols() == 3);
  CHECK(m.parameters().size() == 4);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto m = StudentModel::init(MLPSpec{{4, 5, 3}}, 11);
  m.attach_projection(2, 12);
  m.attach_alignment(6);
  const auto bytes = encoder::serialize_checkpoint(m);
  const auto back = encoder::deserialize_checkpoint(bytes);
  CHECK(back == m);
  CHECK(back.checksum() == m.checksum());
  CHECK(encoder::serialize_checkpoint(back) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "ibkd_unit_ckpt.bin").string();
  encoder::save_checkpoint(path, m);
  CHECK(encoder::load_checkpoint(path) == m);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(error_kind([&] { encoder::deserialize_checkpoint(bad); }) == ErrorKind::Format);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK(error_kind([&] { encoder::deserialize_checkpoint(cut); }) == ErrorKind::Format);
}

TEST_CASE("teacher lookup table") {
  encoder::LookupTable t({"a", "b"}, Matrix{{1, 0}, {0, 1}});
  const encoder::TeacherModel teacher(t);
  CHECK(teacher.dim() == 2);
  const std::vector<std::string> ids{"b", "a"};
  CHECK(teacher.embed(ids, Matrix(2, 7)) == Matrix{{0, 1}, {1, 0}});
  const std::vector<std::string> missing{"z"};
  CHECK(error_kind([&] { teacher.embed(missing, Matrix(1, 7)); }) == ErrorKind::Data);
  CHECK(error_kind([] { encoder::LookupTable({"a", "a"}, Matrix(2, 2)); }) == ErrorKind::Data);

  const encoder::TeacherModel net(StudentModel::init(MLPSpec{{3, 2}}, 4));
  const Matrix x = testutil::uniform(2, 3, 5);
  CHECK(net.embed(ids, x) == encoder::forward(StudentModel::init(MLPSpec{{3, 2}}, 4), x).output);
}

TEST_CASE("encoder composed with each loss: end-to-end parameter gradients") {
  DistillConfig cfg;
  cfg.kernel = kernels::KernelSpec::rbf(0.5);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto m = StudentModel::init(MLPSpec{{4, 5, 3}}, seed);
    const Matrix x = testutil::uniform(6, 4, seed + 1), t = testutil::uniform(6, 3, seed + 2);
    const objectives::AlignmentHead head{testutil::uniform(3, 3, seed + 3)};
    const auto fwd = encoder::forward(m, x);
    const auto ev = objectives::loss_distill_stage_grads(fwd.output, t, x, head, cfg);
    const Matrix analytic = flatten_grads(encoder::backward(m, fwd.cache, ev.grad_s));
    const Matrix fd = linalg::finite_diff_grad(
        [&](const Matrix& p) {
          StudentModel copy = m;
          set_params(copy, p);
          return objectives::loss_distill_stage(encoder::forward(copy, x).output, t, x, head, cfg).total;
        },
        get_params(m));
    CHECK(linalg::max_rel_error(analytic, fd) < 1e-4);
  }
}
