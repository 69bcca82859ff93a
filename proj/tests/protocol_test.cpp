#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "flatpack/protocol.hpp"

namespace flatpack {
namespace {

namespace fs = std::filesystem;

class ProtocolTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("flatpack_protocol_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        table_ = std::make_unique<SessionTable>(SessionTableOptions{dir_, std::chrono::minutes(10)});
    }
    void TearDown() override { fs::remove_all(dir_); }

    json send(json msg, ConnectionId conn = 1) {
        msg["id"] = ++next_id_;
        const json reply = handle_message(*table_, conn, msg);
        EXPECT_EQ(reply.at("id"), next_id_);
        return reply;
    }

    json ok(json msg, ConnectionId conn = 1) {
        const json reply = send(std::move(msg), conn);
        EXPECT_EQ(reply.at("type"), "result") << reply.dump();
        return reply.value("result", json::object());
    }

    std::string error_code(json msg, ConnectionId conn = 1) {
        const json reply = send(std::move(msg), conn);
        EXPECT_EQ(reply.at("type"), "error") << reply.dump();
        return reply.at("error").at("code");
    }

    std::string make(const std::string& model = "block", ConnectionId conn = 1) {
        return ok({{"type", "make"}, {"config", {{"model", model}}}}, conn).at("session_id");
    }

    fs::path dir_;
    std::unique_ptr<SessionTable> table_;
    std::int64_t next_id_ = 0;
};

TEST_F(ProtocolTest, Hello) {
    const json r = ok({{"type", "hello"}, {"protocol", 1}});
    EXPECT_EQ(r.at("protocol"), kProtocolVersion);
    EXPECT_EQ(r.at("engine"), kEngineVersion);
    EXPECT_EQ(error_code({{"type", "hello"}, {"protocol", 2}}), "version_mismatch");
}

TEST_F(ProtocolTest, ListModels) {
    const json r = ok({{"type", "list_models"}});
    ASSERT_EQ(r.at("models").size(), list_bundled_models().size());
    EXPECT_EQ(r.at("models").at(0).at("name"), "block");
}

TEST_F(ProtocolTest, FullCycleMatchesInProcessEnv) {
    const std::string sid = make();
    EpisodeConfig c;
    c.model = "block";
    Env local = Env::make(c);
    const Observation expected = local.reset(4);
    const json reset = ok({{"type", "reset"}, {"session_id", sid}, {"seed", 4}});
    EXPECT_EQ(canonical_dump(reset.at("obs")), serialize_observation(expected));
    EXPECT_EQ(reset.at("digest"), local.digest());

    RandomPolicy policy(1, ActionMode::continuous);
    for (int i = 0; i < 30; ++i) {
        const Action a = policy(expected);
        const StepResult r = local.step(a);
        const json step = ok({{"type", "step"}, {"session_id", sid}, {"action", to_json(a)}});
        EXPECT_EQ(step.at("digest"), local.digest());
        EXPECT_EQ(step.at("reward").get<double>(), r.reward);
        EXPECT_EQ(step.at("done"), r.done);
        EXPECT_TRUE(step.at("info").contains("events"));
    }
    EXPECT_EQ(ok({{"type", "observe"}, {"session_id", sid}}).at("digest"), local.digest());
}

TEST_F(ProtocolTest, ScriptedConnectRewardsOne) {
    const std::string sid = make();
    ok({{"type", "reset"}, {"session_id", sid}, {"seed", 0}});
    auto s = table_->find(1, sid);
    ASSERT_TRUE(s);
    AssemblyState& st = s->env.mutable_state();
    const auto pair = s->env.model().mate_pairs().front();
    st.poses["upper"] = pose_compose(st.pose("lower"), goal_relative_pose(s->env.model(), pair.first, pair.second));
    std::vector<double> v(15, 0.0);
    v[14] = 1;
    const json r = ok({{"type", "step"}, {"session_id", sid}, {"action", v}});
    EXPECT_EQ(r.at("reward"), 1.0);
    EXPECT_EQ(r.at("done"), true);
}

TEST_F(ProtocolTest, ErrorCodes) {
    EXPECT_EQ(error_code({{"type", "teleport"}}), "unknown_type");
    EXPECT_EQ(error_code({{"type", "reset"}, {"session_id", "nope"}, {"seed", 0}}), "unknown_session");
    EXPECT_EQ(error_code({{"type", "make"}, {"config", {{"model", "sofa"}}}}), "unknown_model");
    EXPECT_EQ(error_code({{"type", "make"}, {"config", {{"model", "block"}, {"max_steps", 0}}}}), "invalid_config");
    const std::string sid = make();
    EXPECT_EQ(error_code({{"type", "step"}, {"session_id", sid}, {"action", 0}}), "not_reset");
    EXPECT_EQ(error_code({{"type", "observe"}, {"session_id", sid}}), "not_reset");
    ok({{"type", "reset"}, {"session_id", sid}, {"seed", 0}});
    const std::string digest = ok({{"type", "observe"}, {"session_id", sid}}).at("digest");
    EXPECT_EQ(error_code({{"type", "step"}, {"session_id", sid}, {"action", {1, 2}}}), "bad_action");
    EXPECT_EQ(error_code({{"type", "step"}, {"session_id", sid}, {"action", "left"}}), "bad_action");
    EXPECT_EQ(error_code({{"type", "step"}, {"session_id", sid}}), "bad_request");
    EXPECT_EQ(error_code({{"type", "reset"}, {"session_id", sid}, {"seed", -1}}), "bad_request");
    // The session survives every rejected request.
    EXPECT_EQ(ok({{"type", "observe"}, {"session_id", sid}}).at("digest"), digest);
}

TEST_F(ProtocolTest, MalformedEnvelopes) {
    EXPECT_EQ(json::parse(handle_text(*table_, 1, "{\"type\":")).at("error").at("code"), "bad_json");
    EXPECT_EQ(json::parse(handle_text(*table_, 1, "")).at("error").at("code"), "bad_json");
    const json no_id = json::parse(handle_text(*table_, 1, R"({"type":"hello"})"));
    EXPECT_EQ(no_id.at("error").at("code"), "bad_request");
    EXPECT_TRUE(no_id.at("id").is_null());
    EXPECT_EQ(json::parse(handle_text(*table_, 1, "[1,2]")).at("error").at("code"), "bad_request");
    EXPECT_EQ(json::parse(handle_text(*table_, 1, R"({"id":3})")).at("error").at("code"), "bad_request");
    EXPECT_EQ(json::parse(handle_text(*table_, 1, R"({"id":3,"type":7})")).at("id"), 3);
}

TEST_F(ProtocolTest, FuzzedInputAlwaysYieldsOneReply) {
    std::mt19937_64 rng(17);
    const std::vector<std::string> seeds = {
        R"({"type":"make","id":1,"config":{"model":"block"}})",
        R"({"type":"step","id":2,"session_id":"s1","action":[0,0,0,0,0,0,1,0,0,0,0,0,0,0,1]})",
        R"({"type":"reset","id":3,"session_id":"s1","seed":5})",
        R"({"type":"record_start","id":4,"session_id":"s1","path":"a/b"})",
    };
    for (int i = 0; i < 3000; ++i) {
        std::string text = seeds[rng() % seeds.size()];
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits && !text.empty(); ++e) {
            const std::size_t pos = rng() % text.size();
            switch (rng() % 3) {
                case 0: text[pos] = static_cast<char>(rng() % 256); break;
                case 1: text.erase(pos, 1 + rng() % 8); break;
                default: text.resize(pos); break;
            }
        }
        std::string reply;
        ASSERT_NO_THROW(reply = handle_text(*table_, 1, text)) << text;
        const json j = json::parse(reply);
        EXPECT_TRUE(j.at("type") == "result" || j.at("type") == "error");
    }
}

TEST_F(ProtocolTest, SessionsAreIsolatedAndOwned) {
    const std::string a = make("block", 1);
    const std::string b = make("block", 2);
    EXPECT_NE(a, b);
    ok({{"type", "reset"}, {"session_id", a}, {"seed", 1}}, 1);
    const std::string digest_b = ok({{"type", "reset"}, {"session_id", b}, {"seed", 1}}, 2).at("digest");
    EXPECT_EQ(error_code({{"type", "observe"}, {"session_id", b}}, 1), "unknown_session");
    RandomPolicy policy(3, ActionMode::continuous);
    for (int i = 0; i < 20; ++i)
        ok({{"type", "step"}, {"session_id", a}, {"action", to_json(policy({}))}}, 1);
    EXPECT_EQ(ok({{"type", "observe"}, {"session_id", b}}, 2).at("digest"), digest_b);
    ok({{"type", "close"}, {"session_id", a}}, 1);
    EXPECT_EQ(error_code({{"type", "observe"}, {"session_id", a}}, 1), "unknown_session");
    EXPECT_EQ(error_code({{"type", "close"}, {"session_id", b}}, 1), "unknown_session");
    EXPECT_EQ(table_->erase_owner(2), std::vector<std::string>{b});
    EXPECT_EQ(table_->size(), 0u);
}

TEST_F(ProtocolTest, RecordingReplays) {
    const std::string sid = make();
    ok({{"type", "reset"}, {"session_id", sid}, {"seed", 8}});
    RandomPolicy policy(3, ActionMode::continuous);
    // Steps before record_start are still captured, so the file replays from reset.
    for (int i = 0; i < 5; ++i) ok({{"type", "step"}, {"session_id", sid}, {"action", to_json(policy({}))}});
    const json started = ok({{"type", "record_start"}, {"session_id", sid}, {"path", "demo/one"}, {"include_obs", true}});
    EXPECT_EQ(started.at("steps"), 5);
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", "x"}}), "bad_request");
    for (int i = 0; i < 10; ++i) ok({{"type", "step"}, {"session_id", sid}, {"action", to_json(policy({}))}});
    const json stopped = ok({{"type", "record_stop"}, {"session_id", sid}});
    EXPECT_EQ(stopped.at("steps"), 15);
    const fs::path file = stopped.at("path").get<std::string>();
    EXPECT_EQ(file, dir_ / "demo" / "one.traj.jsonl");
    const ReplayReport rep = replay_check(file);
    EXPECT_TRUE(rep.ok) << rep.reason;
    EXPECT_EQ(rep.steps, 15);
    EXPECT_EQ(error_code({{"type", "record_stop"}, {"session_id", sid}}), "bad_request");
}

TEST_F(ProtocolTest, ResetEndsRecording) {
    const std::string sid = make();
    ok({{"type", "reset"}, {"session_id", sid}, {"seed", 8}});
    ok({{"type", "record_start"}, {"session_id", sid}, {"path", "r.traj.jsonl"}});
    ok({{"type", "step"}, {"session_id", sid}, {"action", std::vector<double>(15, 0.0)}});
    const json r = ok({{"type", "reset"}, {"session_id", sid}, {"seed", 9}});
    EXPECT_EQ(r.at("recording_stopped").at("steps"), 1);
    EXPECT_TRUE(replay_check(dir_ / "r.traj.jsonl").ok);
}

TEST_F(ProtocolTest, RecordingPathsStayInsideRecordDir) {
    const std::string sid = make();
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", "x"}}), "not_reset");
    ok({{"type", "reset"}, {"session_id", sid}, {"seed", 0}});
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", "/tmp/evil"}}), "io_error");
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", "../evil"}}), "io_error");
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", "a/../../evil"}}), "io_error");
    EXPECT_EQ(error_code({{"type", "record_start"}, {"session_id", sid}, {"path", ""}}), "io_error");
}

TEST_F(ProtocolTest, IdleSessionsAreEvicted) {
    const auto t0 = Clock::now();
    auto s = table_->create(1, Env::make(EpisodeConfig{}), t0);
    EXPECT_TRUE(table_->evict_idle(t0 + std::chrono::minutes(9)).empty());
    EXPECT_EQ(table_->evict_idle(t0 + std::chrono::minutes(11)), std::vector<std::string>{s->id});
    EXPECT_EQ(table_->size(), 0u);
}

}  // namespace
}  // namespace flatpack
