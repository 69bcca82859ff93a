#include <gtest/gtest.h>

#include "flatpack/catalog.hpp"
#include "flatpack/oracle.hpp"

namespace flatpack {
namespace {

EpisodeConfig config(std::string model, ActionMode mode = ActionMode::continuous) {
    EpisodeConfig c;
    c.model = std::move(model);
    c.mode = mode;
    c.max_steps = 5000;
    return c;
}

const std::vector<double>& values(const Action& a) { return std::get<std::vector<double>>(a.payload); }

TEST(Plan, Block) {
    const auto m = bundled_model("block");
    const AssemblyPlan p = plan(*m, m->part_ids());
    EXPECT_EQ(p.base, "lower");
    ASSERT_EQ(p.steps.size(), 1u);
    EXPECT_EQ(p.steps[0].target.str(), "lower.top");
    EXPECT_EQ(p.steps[0].moving.str(), "upper.bottom");
}

TEST(Plan, TableStartsFromBoard) {
    const auto m = bundled_model("table_simple");
    const AssemblyPlan p = plan(*m, m->part_ids());
    EXPECT_EQ(p.base, "board");
    ASSERT_EQ(p.steps.size(), 4u);
    std::set<std::string> legs;
    for (const auto& s : p.steps) {
        EXPECT_EQ(s.target.part, "board");
        legs.insert(s.moving.part);
    }
    EXPECT_EQ(legs.size(), 4u);
}

TEST(Plan, EveryStepTargetsAnAlreadyPlacedPart) {
    for (const auto& s : list_bundled_models()) {
        const auto m = bundled_model(s.name);
        const AssemblyPlan p = plan(*m, m->part_ids());
        std::set<std::string> placed{p.base};
        for (const auto& st : p.steps) {
            EXPECT_TRUE(placed.count(st.target.part)) << s.name;
            EXPECT_TRUE(placed.insert(st.moving.part).second) << s.name;
        }
        EXPECT_EQ(placed.size(), m->parts.size());
        EXPECT_EQ(p.steps.size(), m->parts.size() - 1);
    }
}

TEST(Plan, SinglePartAndDisconnectedSubset) {
    const auto m = bundled_model("table_simple");
    const AssemblyPlan one = plan(*m, {"leg_fl"});
    EXPECT_EQ(one.base, "leg_fl");
    EXPECT_TRUE(one.steps.empty());
    try {
        plan(*m, {"leg_fl", "leg_br"});
        FAIL() << "expected disconnected_subset";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::disconnected_subset);
    }
}

TEST(OracleStep, FirstActionHeadsForTheMovingPart) {
    Env env = Env::make(config("block"));
    const Observation obs = env.reset(0);
    OraclePolicy oracle(env);
    const Action a = oracle(obs);
    ASSERT_EQ(values(a).size(), kContinuousActionSize);
    // Cursor 0 idles; cursor 1 moves toward the upper part with hold off.
    for (std::size_t k = 0; k < kChannelsPerCursor; ++k) EXPECT_EQ(values(a)[k], 0.0);
    const Vec3 to_part = obs.find_part("upper")->pos - obs.cursors[1].pos;
    EXPECT_GT(values(a)[7] * to_part.x, 0.0);
    EXPECT_EQ(values(a)[14], 0.0);
}

TEST(OracleStep, ConnectsWhenAttachable) {
    Env env = Env::make(config("block"));
    env.reset(0);
    AssemblyState& s = env.mutable_state();
    const auto pair = env.model().mate_pairs().front();
    s.poses["upper"] = pose_compose(s.pose("lower"), goal_relative_pose(env.model(), pair.first, pair.second));
    s.cursors[1].held = "upper";
    OraclePolicy oracle(env);
    const Action a = oracle(env.observe());
    EXPECT_EQ(values(a)[14], 1.0);
    EXPECT_EQ(env.step(a).reward, 1.0);
}

TEST(OracleStep, FinishedPlanReleasesThenIdles) {
    Env env = Env::make(config("block"));
    env.reset(0);
    AssemblyState& s = env.mutable_state();
    s.weld.unite("lower", "upper");
    s.connected_pairs.insert(env.model().mate_pairs().front().id());
    s.cursors[1].held = "upper";
    OraclePolicy oracle(env);
    const Observation after = env.step(oracle(env.observe())).observation;
    EXPECT_FALSE(after.cursors[1].held);
    EXPECT_EQ(values(oracle(after)), std::vector<double>(kContinuousActionSize, 0.0));
}

TEST(RunOracle, TinyBudgetFails) {
    Env env = Env::make(config("block"));
    env.reset(0);
    const OracleOutcome out = run_oracle(env, 1);
    EXPECT_FALSE(out.success);
    EXPECT_EQ(out.steps_used, 1);
}

TEST(RunOracle, BlockSeedZero) {
    Env env = Env::make(config("block"));
    env.reset(0);
    const OracleOutcome out = run_oracle(env, 600);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.connections, 1);
    EXPECT_EQ(out.episode_return, 1.0);
    EXPECT_LE(out.steps_used, 600);
}

class OracleAllModels : public ::testing::TestWithParam<std::tuple<std::string, ActionMode>> {};

TEST_P(OracleAllModels, SucceedsWithinBudgetUsingLegalActions) {
    const auto& [name, mode] = GetParam();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Env env = Env::make(config(name, mode));
        Observation obs = env.reset(seed);
        OraclePolicy oracle(env);
        const int budget = 300 * static_cast<int>(oracle.assembly_plan().steps.size());
        int steps = 0, last_count = 0;
        while (!env.done() && steps < budget) {
            const Action a = oracle(obs);
            ASSERT_NO_THROW(decode_action(a, mode)) << name << " seed " << seed;
            obs = env.step(a).observation;
            EXPECT_GE(obs.connected_count, last_count);
            last_count = obs.connected_count;
            ++steps;
        }
        EXPECT_TRUE(env.success()) << name << " seed " << seed << " after " << steps << " steps";
    }
}

INSTANTIATE_TEST_SUITE_P(Models, OracleAllModels,
                         ::testing::Combine(::testing::Values("block", "chair_simple", "shelf_simple", "table_simple"),
                                            ::testing::Values(ActionMode::continuous, ActionMode::discrete)),
                         [](const auto& info) {
                             return std::get<0>(info.param) + "_" + std::string(to_string(std::get<1>(info.param)));
                         });

TEST(RunOracle, RandomSubsetsAndFixedOrientation) {
    for (const auto& s : list_bundled_models()) {
        EpisodeConfig c = config(s.name);
        c.random_subset = true;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Env env = Env::make(c);
            env.reset(seed);
            EXPECT_TRUE(run_oracle(env, 300 * static_cast<int>(env.active_parts().size())).success) << s.name;
        }
        c.random_subset = false;
        c.orientation_randomization = OrientationRandomization::none;
        Env env = Env::make(c);
        env.reset(3);
        EXPECT_TRUE(run_oracle(env, 300 * static_cast<int>(env.active_parts().size())).success) << s.name;
    }
}

TEST(RunOracle, BlockWithCollisionChecking) {
    EpisodeConfig c = config("block");
    c.collision_check = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Env env = Env::make(c);
        env.reset(seed);
        EXPECT_TRUE(run_oracle(env, 600).success) << "seed " << seed;
    }
}

TEST(RandomPolicy, ReproducibleAndInRange) {
    RandomPolicy a(9, ActionMode::continuous), b(9, ActionMode::continuous);
    RandomPolicy d(9, ActionMode::discrete);
    const Observation none;
    for (int i = 0; i < 200; ++i) {
        const Action x = a({});
        EXPECT_EQ(values(x), values(b({})));
        for (double v : values(x)) {
            EXPECT_GE(v, -1.0);
            EXPECT_LT(v, 1.0);
        }
        const Action y = d(none);
        EXPECT_GE(std::get<std::int64_t>(y.payload), 0);
        EXPECT_LT(std::get<std::int64_t>(y.payload), kDiscreteActionCount);
    }
}

}  // namespace
}  // namespace flatpack
