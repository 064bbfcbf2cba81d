#include <doctest.h>

#include "imbp/model.hpp"
#include "models.hpp"

using namespace imbp;
using namespace imbp::testing;

namespace {

bool has(const std::vector<Violation>& v, ViolationCode code) {
  for (const auto& x : v)
    if (x.code == code) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal pure-death model is valid") {
  CHECK(check_discrete(pure_death()).empty());
  CHECK_NOTHROW(validate_discrete(pure_death()));
}

TEST_CASE("offspring law charging e_i is rejected") {
  const auto spec = one_type(1.0, {{{1}, 1.0}});
  CHECK(has(check_discrete(spec), ViolationCode::SelfOffspringLoop));
}

TEST_CASE("offspring law with a mass deficit is rejected") {
  auto spec = fission_and_death();
  spec.offspring[0] = {{{2, 0}, 0.9}};
  const auto v = check_discrete(spec);
  CHECK(has(v, ViolationCode::NonstochasticPMF));
  CHECK(v.front().field.find("offspring[0]") != std::string::npos);
}

TEST_CASE("nonpositive rate and negative offspring") {
  auto spec = pure_death();
  spec.lambda = {0.0};
  CHECK(has(check_discrete(spec), ViolationCode::NonpositiveRate));
  spec = one_type(1.0, {{{-1}, 1.0}});
  CHECK(has(check_discrete(spec), ViolationCode::NegativeOffspring));
}

TEST_CASE("validate reports every violation at once") {
  auto spec = fission_and_death();
  spec.lambda = {-1.0, 1.0};
  spec.offspring[1] = {{{0, 1}, 1.0}};
  try {
    validate_discrete(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.has(ViolationCode::NonpositiveRate));
    CHECK(e.has(ViolationCode::SelfOffspringLoop));
  }
}

TEST_CASE("dimension mismatch") {
  auto spec = fission_and_death();
  spec.interaction = Matrix::Zero(1, 1);
  CHECK(has(check_discrete(spec), ViolationCode::DimensionMismatch));
}

TEST_CASE("subcritical continuous model with negative diagonal is valid") {
  const auto spec = one_dim(-2.0, 0.0, 1.0);
  CHECK(check_continuous(spec).empty());
}

TEST_CASE("negative off-diagonal B is rejected") {
  ContinuousModelSpec s;
  s.d = 2;
  s.B = Matrix::Zero(2, 2);
  s.B(0, 1) = -1.0;
  s.C = Matrix::Zero(2, 2);
  s.sigma = {0.0, 0.0};
  s.jump_measures.resize(2);
  CHECK(has(check_continuous(s), ViolationCode::NegativeOffDiagonalB));
}

TEST_CASE("negative sigma is rejected") {
  CHECK(has(check_continuous(one_dim(0.0, 0.0, -0.1)), ViolationCode::NegativeSigma));
}

TEST_CASE("jump sampler supported at the origin is rejected") {
  auto spec = one_dim(0.0, 0.0, 0.0);
  spec.jump_measures[0].components.push_back({1.0, AtomJump{{0.0}}, true});
  CHECK(has(check_continuous(spec), ViolationCode::JumpMeasureIntegrability));
}

TEST_CASE("pareto tail without a first moment is rejected, with one is accepted") {
  auto spec = one_dim(0.0, 0.0, 0.0);
  spec.jump_measures[0].components.push_back({1.0, ParetoJump{{1.0}, 1.0, 0.8}, false});
  CHECK(has(check_continuous(spec), ViolationCode::JumpMeasureIntegrability));
  spec.jump_measures[0].components[0].sampler = ParetoJump{{1.0}, 1.0, 1.5};
  CHECK(check_continuous(spec).empty());
}

TEST_CASE("negative jump direction is rejected") {
  auto spec = one_dim(0.0, 0.0, 0.0);
  spec.jump_measures[0].components.push_back({1.0, ExponentialJump{{-1.0}, 1.0}, true});
  CHECK_FALSE(check_continuous(spec).empty());
}

TEST_CASE("jump means") {
  CHECK(jump_mean(AtomJump{{0.5, 2.0}}) == RealVec{0.5, 2.0});
  CHECK(jump_mean(ExponentialJump{{1.0, 2.0}, 0.25}) == RealVec{0.25, 0.5});
  // E s = scale * alpha / (alpha - 1)
  CHECK(jump_mean(ParetoJump{{1.0}, 2.0, 3.0})[0] == doctest::Approx(3.0));
  CHECK(std::isinf(jump_mean(ParetoJump{{1.0}, 1.0, 1.0})[0]));
}

TEST_CASE("mean matrix of simple models") {
  CHECK(derive_mean_matrix(pure_death())(0, 0) == doctest::Approx(-1.0));
  CHECK(derive_mean_matrix(binary_fission())(0, 0) == doctest::Approx(1.0));
  const Matrix a = derive_mean_matrix(fission_and_death());
  CHECK(a(0, 0) == doctest::Approx(1.0));
  CHECK(a(0, 1) == doctest::Approx(0.0));
  CHECK(a(1, 0) == doctest::Approx(0.0));
  CHECK(a(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("mean matrix with cross offspring") {
  DiscreteModelSpec s;
  s.d = 2;
  s.lambda = {2.0, 1.0};
  s.offspring = {{{{1, 1}, 0.5}, {{0, 0}, 0.5}}, {{{0, 0}, 1.0}}};
  s.interaction = Matrix::Zero(2, 2);
  const Matrix a = derive_mean_matrix(s);
  // lambda_1 (E v - e_1) = 2 * ((0.5, 0.5) - (1, 0))
  CHECK(a(0, 0) == doctest::Approx(-1.0));
  CHECK(a(0, 1) == doctest::Approx(1.0));
  CHECK(a(1, 1) == doctest::Approx(-1.0));
}
