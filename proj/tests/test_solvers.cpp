#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "saddlekit/problems.hpp"
#include "saddlekit/solvers.hpp"

using namespace saddlekit;

namespace {

std::vector<std::pair<double, double>> scalar_path(const Trace& t) {
  std::vector<std::pair<double, double>> out;
  for (const auto& r : t.records) out.emplace_back(r.x[0], r.y[0]);
  return out;
}

SaddleProblem lasso_identity() {
  return make_generalized_lasso(Matrix::identity(2), Vector{1, 1}, 0.5, Matrix::identity(2));
}

}  // namespace

TEST(Schedule, Validation) {
  const SaddleProblem p = make_counterexample();
  EXPECT_NO_THROW(validate_schedule(p, StepSchedule::single(0.5), false));
  EXPECT_NO_THROW(validate_schedule(p, StepSchedule::single(1.0), false));
  EXPECT_THROW(validate_schedule(p, StepSchedule::single(1.0), true), StepBoundError);
  EXPECT_NO_THROW(validate_schedule(p, StepSchedule::pair(0.5, 2.0), false));
  try {
    validate_schedule(p, StepSchedule::single(1.5), false);
    FAIL();
  } catch (const StepBoundError& e) {
    EXPECT_DOUBLE_EQ(e.value(), 1.5);
    EXPECT_NE(std::string(e.what()).find("1.5"), std::string::npos);
  }
  EXPECT_THROW(StepSchedule::single(0.0), ConfigError);
  EXPECT_THROW(StepSchedule::pair(-1.0, 1.0), ConfigError);
  EXPECT_DOUBLE_EQ(StepSchedule::pair(0.25, 4.0).effective_step(), 1.0);
}

TEST(ArrowHurwicz, FirstStep) {
  const SaddleProblem p = make_counterexample();
  const SolverState st = arrow_hurwicz_step(p, SolverState::initial(Vector{0}, Vector{1}), 1.0);
  EXPECT_EQ(st.x, Vector{0});
  EXPECT_EQ(st.y, Vector{2});
}

TEST(ArrowHurwicz, SixPointOrbit) {
  const SaddleProblem p = make_counterexample();
  const Trace t = run(p, Algorithm::kArrowHurwicz, StepSchedule::single(1.0), Vector{0}, Vector{1}, 6);
  const std::vector<std::pair<double, double>> expected{{0, 1}, {0, 2}, {1, 2}, {2, 1}, {2, 0}, {1, 0}, {0, 1}};
  EXPECT_EQ(scalar_path(t), expected);
}

TEST(ArrowHurwicz, OrbitPersistsForAllSmallSteps) {
  // Q(u, v) = u^2 + v^2 + s u v with u = x - 1, v = y - 1 is conserved exactly by the linear map.
  const SaddleProblem p = make_counterexample();
  for (double s : {0.1, 0.5, 1.0}) {
    const Trace t = run(p, Algorithm::kArrowHurwicz, StepSchedule::single(s), Vector{0}, Vector{1}, 10000);
    auto q = [s](const TraceRecord& r) {
      const double u = r.x[0] - 1.0;
      const double v = r.y[0] - 1.0;
      return u * u + v * v + s * u * v;
    };
    const double q0 = q(t.records.front());
    double worst = 0.0;
    for (const auto& r : t.records) worst = std::max(worst, std::abs(q(r) - q0));
    EXPECT_LE(worst, 1e-12) << "s=" << s;
    EXPECT_GT(std::abs(t.back().x[0] - 1.0) + std::abs(t.back().y[0] - 1.0), 0.1) << "s=" << s;
  }
}

TEST(ArrowHurwicz, DivergesPastBound) {
  const SaddleProblem p = make_counterexample();
  RunOptions opts;
  opts.demonstration = true;
  try {
    run(p, Algorithm::kArrowHurwicz, StepSchedule::single(2.05), Vector{0}, Vector{1}, 10000, opts);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.last_finite_index(), 0u);
  }
  EXPECT_THROW(run(p, Algorithm::kArrowHurwicz, StepSchedule::single(2.05), Vector{0}, Vector{1}, 10), StepBoundError);
}

TEST(Pdhg, HandTrajectory) {
  const SaddleProblem p = make_counterexample();
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(1.0), Vector{0}, Vector{1}, 3);
  const std::vector<std::pair<double, double>> expected{{0, 1}, {0, 2}, {1, 1}, {1, 1}};
  EXPECT_EQ(scalar_path(t), expected);
}

TEST(Pdhg, GeneralWithEqualStepsIsBitIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SaddleProblem p = make_random_quadratic(4, 3, seed);
    const double s = 0.9 / p.norm_F;
    const Trace a = run(p, Algorithm::kPdhg, StepSchedule::single(s), Vector(4, 1.0), Vector(3, -1.0), 200);
    const Trace b = run(p, Algorithm::kGeneralPdhg, StepSchedule::pair(s, s), Vector(4, 1.0), Vector(3, -1.0), 200);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a.records[k].x, b.records[k].x);
      EXPECT_EQ(a.records[k].y, b.records[k].y);
    }
  }
}

TEST(Pdhg, GeneralScheduleOnCounterexampleStaysBounded) {
  const SaddleProblem p = make_counterexample();
  const StepSchedule sched = StepSchedule::pair(0.5, 2.0);
  const Trace t = run(p, Algorithm::kGeneralPdhg, sched, Vector{0}, Vector{1}, 2000);
  // Weighted energy about the saddle (1, 1), minus-sign coupling.
  auto energy = [&](const TraceRecord& r) {
    const double u = r.x[0] - 1.0;
    const double v = r.y[0] - 1.0;
    return u * u / (2 * 0.5) + v * v / (2 * 2.0) - (-u) * v;
  };
  double prev = energy(t.records.front());
  for (const auto& r : t.records) {
    EXPECT_LE(std::abs(r.x[0]) + std::abs(r.y[0]), 10.0);
    const double e = energy(r);
    EXPECT_LE(e, prev + 1e-12);
    prev = e;
  }
}

TEST(Pdhg, LassoConverges) {
  const SaddleProblem p = lasso_identity();
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector(2), Vector(2), 500);
  EXPECT_LE(norm_inf(t.back().x - Vector{0.5, 0.5}), 1e-8);
  EXPECT_LE(norm_inf(t.back().y - Vector{0.5, 0.5}), 1e-8);
}

TEST(Pdhg, SaddleIsFixedPoint) {
  const SaddleProblem p = lasso_identity();
  const SaddleCertificate c = saddle_oracle(p);
  for (Algorithm a : {Algorithm::kArrowHurwicz, Algorithm::kPdhg}) {
    const Trace t = run(p, a, StepSchedule::single(0.7), c.x_star, c.y_star, 5);
    for (const auto& r : t.records) {
      EXPECT_LE(norm_inf(r.x - c.x_star), 1e-12);
      EXPECT_LE(norm_inf(r.y - c.y_star), 1e-12);
    }
  }
  const Trace g = run(p, Algorithm::kGeneralPdhg, StepSchedule::pair(0.25, 2.0), c.x_star, c.y_star, 5);
  EXPECT_LE(norm_inf(g.back().x - c.x_star), 1e-12);
}

TEST(Pdhg, ExpandedFormResidual) {
  // (x+ - x)/s - F^T(y+ - y) = -F^T y+ - grad f(x+)
  // (y+ - y)/s - F(x+ - x)   =  F x+   - grad g*(y+)
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SaddleProblem p = make_random_quadratic(5, 3, seed);
    const double s = 0.8 / p.norm_F;
    const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(s), Vector(5, 2.0), Vector(3, -1.0), 50);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const Vector& x = t.records[k].x;
      const Vector& y = t.records[k].y;
      const Vector& xn = t.records[k + 1].x;
      const Vector& yn = t.records[k + 1].y;
      const Vector r1 = (1.0 / s) * (xn - x) - matvec_transposed(p.F, yn - y) + matvec_transposed(p.F, yn) +
                        gradient(p.f, xn);
      const Vector r2 = (1.0 / s) * (yn - y) - matvec(p.F, xn - x) - matvec(p.F, xn) + gradient(p.gstar, yn);
      EXPECT_LE(norm_inf(r1), 1e-9);
      EXPECT_LE(norm_inf(r2), 1e-9);
    }
  }
}

TEST(Solver, RunningSumsMatchRecords) {
  const SaddleProblem p = make_random_quadratic(3, 2, 7);
  SolverState st = SolverState::initial(Vector(3, 1.0), Vector(2, 1.0));
  EXPECT_FALSE(st.averages().has_value());
  Vector sx(3);
  Vector sy(2);
  for (int k = 0; k < 30; ++k) {
    st = pdhg_step(p, st, 0.5 / p.norm_F);
    sx += st.x;
    sy += st.y;
    EXPECT_LE(norm_inf(st.sum_x - sx), 1e-12);
    EXPECT_LE(norm_inf(st.sum_y - sy), 1e-12);
  }
  const auto avg = st.averages();
  ASSERT_TRUE(avg.has_value());
  EXPECT_LE(norm_inf(avg->first - (1.0 / 30.0) * sx), 1e-14);
}

TEST(Solver, ZeroIterationsAndScheduleKind) {
  const SaddleProblem p = make_counterexample();
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector{3}, Vector{4}, 0);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.back().x, Vector{3});
  EXPECT_THROW(run(p, Algorithm::kPdhg, StepSchedule::pair(0.5, 0.5), Vector{0}, Vector{0}, 1), ConfigError);
  EXPECT_THROW(run(p, Algorithm::kArrowHurwicz, StepSchedule::pair(0.5, 0.5), Vector{0}, Vector{0}, 1), ConfigError);
  EXPECT_THROW(run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector{0, 0}, Vector{0}, 1), DimensionError);
  EXPECT_THROW(run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector{NAN}, Vector{0}, 1), ConfigError);
}

TEST(Solver, EarlyStopOnSmallIncrement) {
  const SaddleProblem p = lasso_identity();
  RunOptions opts;
  opts.early_stop_ne = 1e-20;
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector(2), Vector(2), 100000, opts);
  EXPECT_LT(t.size(), 100001u);
}

TEST(Solver, MetadataAndHash) {
  const SaddleProblem p = make_counterexample();
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(0.5), Vector{0}, Vector{1}, 1);
  EXPECT_EQ(t.meta.problem_hash, problem_hash(make_counterexample()));
  EXPECT_NE(t.meta.problem_hash, problem_hash(lasso_identity()));
  EXPECT_EQ(parse_algorithm("general-pdhg"), Algorithm::kGeneralPdhg);
  EXPECT_THROW(parse_algorithm("adam"), ConfigError);
}
