#include "gectl_oracles/oracles.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "gectl/errors.hpp"

namespace gectl::oracles {
namespace {

TEST(QuadratureTest, ConvergesUnderRefinement) {
  const GroundEffectParams ge;
  const double tilt = 0.05;
  const double coarse = QuadratureLevelingTorque(0.2, tilt, 9.8, ge, 0.3, 1024);
  const double fine = QuadratureLevelingTorque(0.2, tilt, 9.8, ge, 0.3, 2048);
  EXPECT_LT(std::abs(coarse - fine), 1e-8 * std::abs(fine));
}

TEST(QuadratureTest, LevelHasNoTorque) {
  EXPECT_NEAR(QuadratureLevelingTorque(0.2, 0.0, 9.8, GroundEffectParams{}, 0.3), 0.0, 1e-15);
}

TEST(QuadratureTest, RotorCircleBelowGround) {
  EXPECT_THROW(QuadratureLevelingTorque(0.01, 0.2, 9.8, GroundEffectParams{}, 0.3),
               DomainError);
}

TEST(OracleRegistryTest, NamesAndUnknown) {
  EXPECT_EQ(OracleNames().size(), 6u);
  EXPECT_THROW(RunOracle("nope"), InputError);
  const OracleResult r = RunOracle("derivative-identity");
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.name, "derivative-identity");
}

}  // namespace
}  // namespace gectl::oracles
