#include <random>

#include <gtest/gtest.h>

#include "rbfx/serialization.hpp"
#include "test_support.hpp"

using namespace rbfx;
using rbfx::testing::uniform;

namespace {

template <class Scalar>
Interpolant<Scalar> sample_interpolant(const Kernel& k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const PointSet x = generate_points(CubeDomain::unit(k.dim()), PointScheme::halton(12));
  Vector<Scalar> y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = Scalar(uniform(rng, -1, 1));
  return solve<Scalar>(k, x, y);
}

} // namespace

TEST(KernelJson, RoundTrip) {
  for (const Kernel& k : {Kernel::multiquadric(1.0, 0.5, 2), Kernel::multiquadric(-3.0, 2.0, 1), Kernel::gaussian(4.0, 3)}) {
    EXPECT_EQ(kernel_from_json(kernel_to_json(k)), k);
  }
  EXPECT_EQ(kernel_from_json(nlohmann::json::parse(R"({"family":"mq","beta":3,"c":1})")), Kernel::multiquadric(3, 1, 1));
  EXPECT_THROW(kernel_from_json(nlohmann::json::parse(R"({"family":"tps","beta":3})")), Error);
  EXPECT_THROW(kernel_from_json(nlohmann::json::parse(R"({"family":"gaussian"})")), Error);
  EXPECT_THROW(kernel_from_json(nlohmann::json::parse(R"({"family":"multiquadric","beta":2,"c":1})")), Error);
}

TEST(InterpolantJson, DoubleRoundTripIsExact) {
  const auto s = sample_interpolant<double>(Kernel::multiquadric(3.0, 0.4, 2), 61);
  const nlohmann::json j = interpolant_to_json(s);
  EXPECT_EQ(j["version"], kInterpolantFormatVersion);
  EXPECT_EQ(j["basis_order"], "graded-lex");
  EXPECT_EQ(j["b"].size(), 3u);
  const auto t = interpolant_from_json<double>(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(t.coeffs(), s.coeffs());
  EXPECT_EQ(t.polycoeffs(), s.polycoeffs());
  EXPECT_EQ(t.nodes().matrix(), s.nodes().matrix());
  EXPECT_EQ(t.kernel(), s.kernel());
  EXPECT_EQ(t.condition_estimate(), s.condition_estimate());
  Eigen::VectorXd x(2);
  x << 0.31, 0.77;
  EXPECT_EQ(t.evaluate(x), s.evaluate(x));
}

TEST(InterpolantJson, HighPrecisionRoundTrip) {
  const auto s = sample_interpolant<HighPrecision>(Kernel::gaussian(2.0, 1), 62);
  const nlohmann::json j = interpolant_to_json(s);
  EXPECT_EQ(j["scalar"], "high");
  ASSERT_TRUE(j["c"][0].is_string());
  const auto t = interpolant_from_json<HighPrecision>(nlohmann::json::parse(j.dump()));
  for (int i = 0; i < s.coeffs().size(); ++i) {
    EXPECT_LE(abs(t.coeffs()[i] - s.coeffs()[i]), HighPrecision("1e-150") * (1 + abs(s.coeffs()[i])));
  }
}

TEST(InterpolantJson, RejectsMalformedDocuments) {
  const auto s = sample_interpolant<double>(Kernel::multiquadric(1.0, 0.5, 1), 63);
  nlohmann::json j = interpolant_to_json(s);
  auto code = [](const nlohmann::json& doc) {
    try {
      interpolant_from_json<double>(doc);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  auto bad = j;
  bad["version"] = 99;
  EXPECT_EQ(code(bad), ErrorCode::ParseError);
  bad = j;
  bad.erase("c");
  EXPECT_EQ(code(bad), ErrorCode::ParseError);
  bad = j;
  bad["b"] = nlohmann::json::array();
  EXPECT_EQ(code(bad), ErrorCode::DimensionMismatch);
  bad = j;
  bad["c"][0] = "x";
  EXPECT_EQ(code(bad), ErrorCode::ParseError);
  bad = j;
  bad["nodes"][0] = {0.1, 0.2};
  EXPECT_EQ(code(bad), ErrorCode::DimensionMismatch);
}

TEST(FitReportJson, Shape) {
  auto report = make_fit_report(MQRateFit{1.5, 0.25, 0.98}, 4);
  report.regime_counts = {{"small-d", 3}, {"large-d", 1}};
  const nlohmann::json j = to_json(report);
  EXPECT_EQ(j["model"], "mq");
  EXPECT_EQ(j["params"]["lambda_hat"], 0.25);
  EXPECT_EQ(j["params"]["C_hat"], 1.5);
  EXPECT_EQ(j["r2"], 0.98);
  EXPECT_EQ(j["n_samples"], 4);
  EXPECT_EQ(j["regime_counts"]["large-d"], 1);
  const auto back = fit_report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.params, report.params);
  EXPECT_EQ(back.regime_counts, report.regime_counts);

  const nlohmann::json g = to_json(make_fit_report(GaussianRateFit{2.0, 0.5, 1.0, 0.9}, 5));
  EXPECT_EQ(g["model"], "gaussian");
  EXPECT_EQ(g["params"].size(), 3u);
  EXPECT_TRUE(g["regime_counts"].is_object());
  EXPECT_THROW(fit_report_from_json(nlohmann::json::parse(R"({"model":"tps"})")), Error);
}
