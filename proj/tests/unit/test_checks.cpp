#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

#include "lipattn/attention.hpp"
#include "lipattn/bounds.hpp"
#include "lipattn/checks.hpp"
#include "lipattn/ot.hpp"

using namespace lipattn;

namespace {

void expect_pass(const CheckReport& r) {
  EXPECT_TRUE(r.passed) << r.describe();
  for (const auto& m : r.metrics) EXPECT_GT(m.instances, 0u) << m.name;
}

}  // namespace

TEST(Checks, PushforwardConsistency) { expect_pass(check_pushforward_consistency(1, 30)); }

TEST(Checks, FrobeniusWassersteinLink) { expect_pass(check_frobenius_wasserstein_link(2, 30)); }

TEST(Checks, MaskedJacobianStructure) { expect_pass(check_masked_jacobian_structure(3, 30)); }

TEST(Checks, MeanFieldRatio) { expect_pass(check_mean_field_ratio(4, 50)); }

// Two slices of weight 1/2 at A = 0: moving the first slice by delta moves
// the second slice's output by delta / 2, so the d_2 ratio is sqrt(5/4).
TEST(Checks, MaskedMeanFieldCounterexample) {
  const AttentionParams p = AttentionParams::from_bilinear(Matrix::from_rows({{0.0}}), Matrix::identity(1));
  const Vector pos{0.5, 1.0};
  const SimplexWeights w({0.5, 0.5});
  const OrderedDiscreteMeasure mu(pos, Matrix::from_rows({{0.0}, {0.0}}), w);
  const OrderedDiscreteMeasure nu(pos, Matrix::from_rows({{0.1}, {0.0}}), w);
  const double ratio = conditional_dp(pushforward_masked_attention(mu, p), pushforward_masked_attention(nu, p), 2.0) /
                       conditional_dp(mu, nu, 2.0);
  EXPECT_NEAR(ratio, std::sqrt(1.25), 1e-12);
  EXPECT_DOUBLE_EQ(upper_masked_mean_field(BoundInputs::from_params(p, 2, 0.1)), 1.0);
}

TEST(Checks, MaskedMeanFieldRatioReportsExcess) {
  const CheckReport r = check_masked_mean_field_ratio(4, 200);
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_GT(r.metrics[0].worst, 0.0);
}

TEST(Checks, JsonSummaryShape) {
  const std::vector<CheckReport> reports{check_pushforward_consistency(5, 3)};
  const auto j = nlohmann::json::parse(checks_to_json(reports));
  EXPECT_TRUE(j.at("passed").is_boolean());
  ASSERT_EQ(j.at("checks").size(), 1u);
  const auto& m = j.at("checks")[0].at("metrics")[0];
  EXPECT_TRUE(m.contains("worst_instance"));
  EXPECT_TRUE(m.at("worst_instance").contains("seed"));
}

TEST(Checks, FailureNamesWorstInstance) {
  CheckReport r;
  r.name = "demo";
  r.passed = false;
  r.metrics.push_back({"metric", 2.0, 1.0, false, {42, 3, 2}, 5});
  const std::string text = r.describe();
  EXPECT_NE(text.find("FAIL demo"), std::string::npos);
  EXPECT_NE(text.find("seed 42"), std::string::npos);
}
