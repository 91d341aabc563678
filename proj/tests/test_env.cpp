#include <random>

#include <gtest/gtest.h>

#include "mmloco/env.hpp"

using namespace mmloco;

namespace {

Environment empty_env() { return Environment(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)}, {}); }

Environment block_env() {
  return Environment(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)}, {Box{Vec3(-1, -1, 0), Vec3(1, 1, 2)}});
}

}  // namespace

TEST(IsFree, OpenSpaceAboveGround) { EXPECT_TRUE(empty_env().is_free(Vec3(0, 0, 1))); }

TEST(IsFree, BelowGroundIsOccupied) { EXPECT_FALSE(empty_env().is_free(Vec3(0, 0, -0.1))); }

TEST(IsFree, GroundPlaneItselfIsOccupied) { EXPECT_FALSE(empty_env().is_free(Vec3(0, 0, 0))); }

TEST(IsFree, ObstacleInteriorIsOccupied) { EXPECT_FALSE(block_env().is_free(Vec3(0, 0, 1))); }

TEST(IsFree, ObstacleFaceIsOccupied) {
  EXPECT_FALSE(block_env().is_free(Vec3(1, 0, 1)));
  EXPECT_TRUE(block_env().is_free(Vec3(1 + 1e-9, 0, 1)));
}

TEST(IsFree, OutsideBoundsIsOccupied) { EXPECT_FALSE(empty_env().is_free(Vec3(6, 0, 1))); }

TEST(GroundHeight, FlatEverywhere) {
  const auto env = empty_env();
  for (double x : {-4.0, 0.0, 3.3})
    for (double y : {-2.0, 0.5}) EXPECT_EQ(env.ground_height(x, y), 0.0);
}

TEST(GroundHeight, TopOfRestingBox) {
  const Environment env(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)}, {Box{Vec3(0, 0, 0), Vec3(1, 1, 0.5)}});
  EXPECT_EQ(env.ground_height(0.5, 0.5), 0.5);
  EXPECT_EQ(env.ground_height(2.0, 0.5), 0.0);
}

TEST(GroundHeight, HighestRestingBoxWins) {
  const Environment env(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)},
                        {Box{Vec3(0, 0, 0), Vec3(1, 1, 0.5)}, Box{Vec3(0.5, 0, 0), Vec3(1, 1, 0.8)}});
  EXPECT_EQ(env.ground_height(0.75, 0.5), 0.8);
  EXPECT_EQ(env.ground_height(0.25, 0.5), 0.5);
}

TEST(GroundHeight, FloatingBoxIsIgnored) {
  const Environment env(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)}, {Box{Vec3(0, 0, 1), Vec3(1, 1, 2)}});
  EXPECT_EQ(env.ground_height(0.5, 0.5), 0.0);
}

TEST(GroundHeight, OutsideFootprintThrows) { EXPECT_THROW(empty_env().ground_height(7.0, 0.0), OutsideWorkspace); }

TEST(SegmentFree, OpenSegment) {
  EXPECT_TRUE(empty_env().segment_free(Vec3(-4, -4, 1), Vec3(4, 3, 2), 0.05));
}

TEST(SegmentFree, ThroughObstacleCentre) {
  EXPECT_FALSE(block_env().segment_free(Vec3(-3, 0, 1), Vec3(3, 0, 1), 2.0 / 10));
}

TEST(SegmentFree, DegenerateFreePoint) { EXPECT_TRUE(empty_env().segment_free(Vec3(1, 1, 1), Vec3(1, 1, 1), 0.1)); }

TEST(SegmentFree, RejectsNonPositiveStep) {
  EXPECT_THROW(empty_env().segment_free(Vec3(0, 0, 1), Vec3(1, 0, 1), 0.0), Error);
}

TEST(SegmentFree, PointSegmentMatchesIsFree) {
  const auto env = block_env();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.5, 5.5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    EXPECT_EQ(env.segment_free(p, p, 0.1), env.is_free(p));
  }
}

TEST(SegmentFree, SmallerStepNeverClearsABlockedSegment) {
  // thin wall that coarse sampling can step over
  const Environment env(0.0, Box{Vec3(-5, -5, -1), Vec3(5, 5, 5)}, {Box{Vec3(0.30, -5, 0), Vec3(0.32, 5, 5)}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), z(0.2, 3.0);
  int blocked = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec3 a(u(rng), u(rng), z(rng)), b(u(rng), u(rng), z(rng));
    bool was_blocked = false;
    for (double step = 1.0; step > 1e-3; step *= 0.83) {
      const bool free = env.segment_free(a, b, step);
      if (was_blocked) {
        EXPECT_FALSE(free) << "step " << step;
      }
      was_blocked = was_blocked || !free;
    }
    blocked += was_blocked;
  }
  EXPECT_GT(blocked, 50);
}

TEST(Environment, RejectsInvertedObstacle) {
  EXPECT_THROW(Environment(0.0, Box{Vec3(-1, -1, 0), Vec3(1, 1, 1)}, {Box{Vec3(0.5, 0, 0), Vec3(0.2, 1, 1)}}),
               ConfigError);
}

TEST(Environment, RejectsObstacleOutsideBounds) {
  EXPECT_THROW(Environment(0.0, Box{Vec3(-1, -1, 0), Vec3(1, 1, 1)}, {Box{Vec3(0.5, 0, 0), Vec3(2, 1, 1)}}),
               ConfigError);
}

TEST(Environment, InflatedGrowsObstacles) {
  const auto env = block_env().inflated(0.1);
  EXPECT_FALSE(env.is_free(Vec3(1.05, 0, 1)));
  EXPECT_TRUE(env.is_free(Vec3(1.15, 0, 1)));
}

TEST(EnvironmentJson, RoundTrip) {
  const auto env = block_env();
  const auto back = environment_from_json(to_json(env));
  EXPECT_EQ(to_json(back), to_json(env));
}

TEST(EnvironmentJson, MissingBoundsIsConfigError) {
  EXPECT_THROW(environment_from_json(nlohmann::json{{"ground_z", 0.0}}), ConfigError);
}

TEST(EnvironmentJson, PackagedScenariosLoad) {
  for (const char* name : {"wall.json", "empty.json"}) {
    const auto j = read_json_file(std::string(MMLOCO_SOURCE_DIR) + "/scenarios/" + name);
    EXPECT_NO_THROW(environment_from_json(j.at("environment"))) << name;
  }
}
