// Wire harness: framing, message shapes, channel semantics, and full
// referee / state-service / prover sessions over in-memory and TCP channels.

#include <atomic>
#include <exception>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "magicrect/wire.hpp"

using namespace mr;
using nlohmann::json;

namespace {

std::set<std::string> keys_of(const std::string& payload) {
    const json j = json::parse(payload);
    std::set<std::string> out;
    for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
    return out;
}

struct ThreadGroup {
    std::vector<std::thread> threads;
    std::mutex mu;
    std::vector<std::string> errors;

    template <typename Fn>
    void spawn(Fn&& fn) {
        threads.emplace_back([this, fn = std::forward<Fn>(fn)]() mutable {
            try {
                fn();
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                errors.push_back(e.what());
            }
        });
    }
    void join() {
        for (std::thread& t : threads) t.join();
        threads.clear();
    }
};

void check_records_equal(const std::vector<RoundRecord>& a,
                         const std::vector<RoundRecord>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].round == b[i].round);
        CHECK(a[i].c == b[i].c);
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].a == b[i].a);
        CHECK(a[i].b == b[i].b);
        CHECK(a[i].accept == b[i].accept);
        CHECK(a[i].sub == b[i].sub);
    }
}

}  // namespace

TEST_CASE("frame encoding is a 4-byte big-endian length prefix") {
    const std::string f = encode_frame("abc");
    REQUIRE(f.size() == 7);
    CHECK(f[0] == 0);
    CHECK(f[1] == 0);
    CHECK(f[2] == 0);
    CHECK(f[3] == 3);
    CHECK(f.substr(4) == "abc");
    const std::string empty = encode_frame("");
    CHECK(empty == std::string(4, '\0'));
    const std::string big = encode_frame(std::string(300, 'x'));
    CHECK(big[2] == 1);
    CHECK(static_cast<unsigned char>(big[3]) == 44);
}

TEST_CASE("message payloads carry exactly their listed fields") {
    const std::string qa = msg_question_alice(5, 2);
    CHECK(keys_of(qa) == std::set<std::string>{"kind", "round-id", "x"});
    const json ja = json::parse(qa);
    CHECK(ja.at("kind") == "question-alice");
    CHECK(ja.at("round-id") == 5);
    CHECK(ja.at("x") == 2);

    CHECK(keys_of(msg_question_bob(5, 1, 3)) ==
          std::set<std::string>{"kind", "round-id", "c", "y"});
    CHECK(keys_of(msg_hello("alice", 3)) ==
          std::set<std::string>{"kind", "v", "role", "n"});
    CHECK(json::parse(msg_hello("alice", 3)).at("v") == "v1");
    CHECK(keys_of(msg_answer(4, {1, -1, 1})) ==
          std::set<std::string>{"kind", "round-id", "outputs"});
    CHECK(json::parse(msg_answer(4, {1, -1, 1})).at("outputs") ==
          json::array({1, -1, 1}));
    CHECK(keys_of(msg_round_result(9, true)) ==
          std::set<std::string>{"kind", "round-id", "accept"});
    CHECK(keys_of(msg_end_session(100)) == std::set<std::string>{"kind", "rounds"});
}

TEST_CASE("memory channels deliver in order, time out, and close") {
    ChannelPair pair = memory_channel();
    pair.left->send("one");
    pair.left->send("two");
    CHECK(pair.right->recv(-1) == "one");
    CHECK(pair.right->recv(-1) == "two");
    CHECK(pair.right->recv(30) == std::nullopt);

    pair.left->send("last");
    pair.left->close();
    CHECK(pair.right->recv(-1) == "last");
    CHECK_THROWS_AS(pair.right->recv(-1), ChannelClosed);
    CHECK_THROWS_AS(pair.right->send("x"), ChannelClosed);
}

TEST_CASE("tcp channels frame payloads and close cleanly") {
    Listener listener(0);
    REQUIRE(listener.port() > 0);

    ThreadGroup group;
    group.spawn([&] {
        auto server = listener.accept(5000);
        auto msg = server->recv(5000);
        REQUIRE(msg.has_value());
        server->send("echo:" + *msg);
        // Wait for the client to hang up.
        CHECK_THROWS_AS(server->recv(5000), ChannelClosed);
    });

    auto client = tcp_connect("127.0.0.1", listener.port(), 1000, 5, 50);
    client->send("ping");
    const auto reply = client->recv(5000);
    REQUIRE(reply.has_value());
    CHECK(*reply == "echo:ping");
    client->close();
    group.join();
    CHECK(group.errors.empty());
}

TEST_CASE("listener accept times out and dead ports refuse connections") {
    Listener listener(0);
    CHECK_THROWS_AS(listener.accept(40), WireError);
    const int dead_port = listener.port();
    // No pending connection on this listener; connecting elsewhere fails.
    Listener other(0);
    CHECK(other.port() != dead_port);
    CHECK_THROWS_AS(tcp_connect("127.0.0.1", 1, 200), WireError);
}

TEST_CASE("handshake failures abort the referee") {
    WireRefereeConfig cfg;
    cfg.run.n = 3;
    cfg.run.rounds = 1;
    cfg.hello_timeout_ms = 500;

    SUBCASE("role conflict") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 3));
        b.right->send(msg_hello("alice", 3));
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("n mismatch") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 7));
        b.right->send(msg_hello("bob", 7));
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("bad version") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(json{{"kind", "hello"}, {"v", "v0"}, {"role", "alice"}, {"n", 3}}.dump());
        b.right->send(msg_hello("bob", 3));
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("unknown role") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(json{{"kind", "hello"}, {"v", "v1"}, {"role", "carol"}, {"n", 3}}.dump());
        b.right->send(msg_hello("bob", 3));
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("malformed hello frame") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send("not json");
        b.right->send(msg_hello("bob", 3));
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("hello timeout") {
        ChannelPair a = memory_channel(), b = memory_channel();
        cfg.hello_timeout_ms = 40;
        CHECK_THROWS_AS(referee_session(*a.left, *b.left, cfg), WireError);
    }
}

TEST_CASE("full in-memory session matches the in-process runner") {
    const int rounds = 1000;
    RunConfig run;
    run.n = 3;
    run.seed = 42;
    run.rounds = rounds;

    auto run_wire = [&]() {
        ChannelPair ref_a = memory_channel(), ref_b = memory_channel();
        ChannelPair st_a = memory_channel(), st_b = memory_channel();
        const DeviceModel dev = make_honest_device(3);

        Transcript result;
        ThreadGroup group;
        group.spawn([&] {
            WireRefereeConfig cfg;
            cfg.run = run;
            result = referee_session(*ref_a.left, *ref_b.left, cfg);
        });
        group.spawn([&] {
            StateServiceConfig scfg;
            scfg.n = 3;
            scfg.seed = run.seed;
            state_session(*st_a.left, *st_b.left, scfg);
        });
        group.spawn([&] {
            prover_session(*ref_a.right, *st_a.right, dev, "alice");
            st_a.right->close();
        });
        group.spawn([&] {
            prover_session(*ref_b.right, *st_b.right, dev, "bob");
            st_b.right->close();
        });
        group.join();
        REQUIRE_MESSAGE(group.errors.empty(),
                        (group.errors.empty() ? "" : group.errors.front()));
        return result;
    };

    const Transcript wire = run_wire();
    CHECK(wire.device == "wire");
    CHECK(wire.voided == 0);
    CHECK(int(wire.records.size()) == rounds);
    CHECK(wire.accepted() == rounds);  // honest device never fails

    const Transcript direct = run_protocol(make_honest_device(3), run);
    check_records_equal(wire.records, direct.records);

    // Same seed, same everything.
    const Transcript again = run_wire();
    check_records_equal(wire.records, again.records);
}

TEST_CASE("noisy in-memory session matches the in-process runner") {
    const NoiseModel noise = NoiseModel::uniform(0.3);
    RunConfig run;
    run.n = 3;
    run.seed = 97;
    run.rounds = 400;

    ChannelPair ref_a = memory_channel(), ref_b = memory_channel();
    ChannelPair st_a = memory_channel(), st_b = memory_channel();
    const DeviceModel dev = make_honest_device(3);  // plans only; noise is state-side

    Transcript wire;
    ThreadGroup group;
    group.spawn([&] {
        WireRefereeConfig cfg;
        cfg.run = run;
        wire = referee_session(*ref_a.left, *ref_b.left, cfg);
    });
    group.spawn([&] {
        StateServiceConfig scfg;
        scfg.n = 3;
        scfg.seed = run.seed;
        scfg.noise = noise;
        state_session(*st_a.left, *st_b.left, scfg);
    });
    group.spawn([&] {
        prover_session(*ref_a.right, *st_a.right, dev, "alice");
        st_a.right->close();
    });
    group.spawn([&] {
        prover_session(*ref_b.right, *st_b.right, dev, "bob");
        st_b.right->close();
    });
    group.join();
    REQUIRE(group.errors.empty());

    CHECK(wire.accepted() < run.rounds);  // theta 0.3 must lose some rounds
    const Transcript direct = run_protocol(make_honest_device(3, noise), run);
    check_records_equal(wire.records, direct.records);
}

TEST_CASE("prover stats count answers and accepts") {
    RunConfig run;
    run.n = 3;
    run.seed = 8;
    run.rounds = 120;

    ChannelPair ref_a = memory_channel(), ref_b = memory_channel();
    ChannelPair st_a = memory_channel(), st_b = memory_channel();
    const DeviceModel dev = make_honest_device(3);

    Transcript wire;
    ProverStats stats_a, stats_b;
    ThreadGroup group;
    group.spawn([&] {
        WireRefereeConfig cfg;
        cfg.run = run;
        wire = referee_session(*ref_a.left, *ref_b.left, cfg);
    });
    group.spawn([&] {
        StateServiceConfig scfg;
        scfg.n = 3;
        scfg.seed = run.seed;
        state_session(*st_a.left, *st_b.left, scfg);
    });
    group.spawn([&] {
        stats_a = prover_session(*ref_a.right, *st_a.right, dev, "alice");
        st_a.right->close();
    });
    group.spawn([&] {
        stats_b = prover_session(*ref_b.right, *st_b.right, dev, "bob");
        st_b.right->close();
    });
    group.join();
    REQUIRE(group.errors.empty());

    CHECK(stats_a.answered == run.rounds);
    CHECK(stats_b.answered == run.rounds);
    CHECK(stats_a.accepted == wire.accepted());
    CHECK(stats_b.accepted == wire.accepted());
}

TEST_CASE("a silent prover voids rounds without killing the session") {
    WireRefereeConfig cfg;
    cfg.run.n = 3;
    cfg.run.seed = 3;
    cfg.run.rounds = 3;
    cfg.answer_timeout_ms = 80;

    ChannelPair a = memory_channel(), b = memory_channel();
    Transcript t;
    ThreadGroup group;
    group.spawn([&] { t = referee_session(*a.left, *b.left, cfg); });
    // Alice says hello and then never answers.
    group.spawn([&] {
        a.right->send(msg_hello("alice", 3));
        try {
            for (;;) {
                auto msg = a.right->recv(-1);
                if (!msg) continue;
                if (json::parse(*msg).at("kind") == "end-session") break;
            }
        } catch (const ChannelClosed&) {
        }
    });
    // Bob answers promptly.
    group.spawn([&] {
        b.right->send(msg_hello("bob", 3));
        try {
            for (;;) {
                auto msg = b.right->recv(-1);
                if (!msg) continue;
                const json j = json::parse(*msg);
                if (j.at("kind") == "end-session") break;
                if (j.at("kind") == "question-bob")
                    b.right->send(msg_answer(j.at("round-id").get<long long>(),
                                             {1, 1, -1}));
            }
        } catch (const ChannelClosed&) {
        }
    });
    group.join();
    REQUIRE(group.errors.empty());

    CHECK(t.voided == 3);
    CHECK(t.records.empty());
    CHECK(t.accepted() == 0);
}

TEST_CASE("stale answers are discarded, future answers abort") {
    WireRefereeConfig cfg;
    cfg.run.n = 3;
    cfg.run.seed = 3;
    cfg.run.rounds = 2;
    cfg.answer_timeout_ms = 2000;

    SUBCASE("stale answers from voided rounds are skipped") {
        ChannelPair a = memory_channel(), b = memory_channel();
        Transcript t;
        ThreadGroup group;
        group.spawn([&] { t = referee_session(*a.left, *b.left, cfg); });
        group.spawn([&] {
            a.right->send(msg_hello("alice", 3));
            try {
                for (;;) {
                    auto msg = a.right->recv(-1);
                    if (!msg) continue;
                    const json j = json::parse(*msg);
                    if (j.at("kind") == "end-session") break;
                    if (j.at("kind") == "question-alice") {
                        const long long rid = j.at("round-id").get<long long>();
                        // A late duplicate from an earlier round, then the
                        // real answer.
                        if (rid > 0) a.right->send(msg_answer(rid - 1, {-1, -1, -1}));
                        a.right->send(msg_answer(rid, {1, 1, 1}));
                    }
                }
            } catch (const ChannelClosed&) {
            }
        });
        group.spawn([&] {
            b.right->send(msg_hello("bob", 3));
            try {
                for (;;) {
                    auto msg = b.right->recv(-1);
                    if (!msg) continue;
                    const json j = json::parse(*msg);
                    if (j.at("kind") == "end-session") break;
                    if (j.at("kind") == "question-bob")
                        b.right->send(msg_answer(j.at("round-id").get<long long>(),
                                                 {1, 1, -1}));
                }
            } catch (const ChannelClosed&) {
            }
        });
        group.join();
        REQUIRE(group.errors.empty());
        CHECK(t.voided == 0);
        CHECK(int(t.records.size()) == 2);
    }

    SUBCASE("future answers are a protocol breach") {
        ChannelPair a = memory_channel(), b = memory_channel();
        std::atomic<bool> threw{false};
        ThreadGroup group;
        group.spawn([&] {
            try {
                referee_session(*a.left, *b.left, cfg);
            } catch (const WireError&) {
                threw = true;
            }
            a.left->close();
            b.left->close();
        });
        group.spawn([&] {
            try {
                a.right->send(msg_hello("alice", 3));
                for (;;) {
                    auto msg = a.right->recv(-1);
                    if (!msg) continue;
                    const json j = json::parse(*msg);
                    if (j.at("kind") == "end-session") break;
                    if (j.at("kind") == "question-alice")
                        a.right->send(msg_answer(
                            j.at("round-id").get<long long>() + 7, {1, 1, 1}));
                }
            } catch (const ChannelClosed&) {
            }
        });
        group.spawn([&] {
            try {
                b.right->send(msg_hello("bob", 3));
                for (;;) {
                    auto msg = b.right->recv(-1);
                    if (!msg) continue;
                    const json j = json::parse(*msg);
                    if (j.at("kind") == "end-session") break;
                    if (j.at("kind") == "question-bob")
                        b.right->send(msg_answer(j.at("round-id").get<long long>(),
                                                 {1, 1, -1}));
                }
            } catch (const ChannelClosed&) {
            }
        });
        group.join();
        REQUIRE(group.errors.empty());
        CHECK(threw);
    }
}

TEST_CASE("malformed answers lose rounds rather than aborting") {
    WireRefereeConfig cfg;
    cfg.run.n = 3;
    cfg.run.seed = 12;
    cfg.run.rounds = 4;

    ChannelPair a = memory_channel(), b = memory_channel();
    Transcript t;
    ThreadGroup group;
    group.spawn([&] { t = referee_session(*a.left, *b.left, cfg); });
    group.spawn([&] {  // Alice answers with the wrong arity every round.
        a.right->send(msg_hello("alice", 3));
        try {
            for (;;) {
                auto msg = a.right->recv(-1);
                if (!msg) continue;
                const json j = json::parse(*msg);
                if (j.at("kind") == "end-session") break;
                if (j.at("kind") == "question-alice")
                    a.right->send(
                        msg_answer(j.at("round-id").get<long long>(), {1, 1}));
            }
        } catch (const ChannelClosed&) {
        }
    });
    group.spawn([&] {
        b.right->send(msg_hello("bob", 3));
        try {
            for (;;) {
                auto msg = b.right->recv(-1);
                if (!msg) continue;
                const json j = json::parse(*msg);
                if (j.at("kind") == "end-session") break;
                if (j.at("kind") == "question-bob")
                    b.right->send(msg_answer(j.at("round-id").get<long long>(),
                                             {1, 1, -1}));
            }
        } catch (const ChannelClosed&) {
        }
    });
    group.join();
    REQUIRE(group.errors.empty());
    CHECK(t.voided == 0);
    CHECK(int(t.records.size()) == 4);
    CHECK(t.accepted() == 0);
}

TEST_CASE("provers abort on questions for the other role") {
    ChannelPair ref = memory_channel();
    ChannelPair st = memory_channel();
    // Queue the bad question before the prover starts; channels buffer.
    ref.left->send(msg_question_bob(0, 0, 1));
    CHECK_THROWS_AS(
        prover_session(*ref.right, *st.right, make_honest_device(3), "alice"),
        WireError);
}

TEST_CASE("prover rejects unknown roles and non-Pauli devices up front") {
    ChannelPair ref = memory_channel();
    ChannelPair st = memory_channel();
    CHECK_THROWS_AS(
        prover_session(*ref.right, *st.right, make_honest_device(3), "carol"),
        WireError);

    DeviceModel dense_dev = make_honest_device(3);
    dense_dev.alice[0].ops[0].dense.assign(64, {0.0, 0.0});
    CHECK_FALSE(dense_dev.wire_compatible());
    CHECK_THROWS_AS(prover_session(*ref.right, *st.right, dense_dev, "alice"),
                    WireError);
}

TEST_CASE("state service enforces the request protocol") {
    StateServiceConfig cfg;
    cfg.n = 3;
    cfg.seed = 1;
    cfg.request_timeout_ms = 1000;

    SUBCASE("round desync") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 3));
        b.right->send(msg_hello("bob", 3));
        a.right->send(json{{"kind", "measure"},
                           {"round-id", 0},
                           {"role", "alice"},
                           {"ops", json::array({"X__"})}}
                          .dump());
        b.right->send(json{{"kind", "measure"},
                           {"round-id", 1},
                           {"role", "bob"},
                           {"ops", json::array({"X__"})}}
                          .dump());
        CHECK_THROWS_AS(state_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("wrong request kind") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 3));
        b.right->send(msg_hello("bob", 3));
        a.right->send(json{{"kind", "answer"}, {"round-id", 0}}.dump());
        CHECK_THROWS_AS(state_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("role mismatch in a request") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 3));
        b.right->send(msg_hello("bob", 3));
        a.right->send(json{{"kind", "measure"},
                           {"round-id", 0},
                           {"role", "bob"},
                           {"ops", json::array({"X__"})}}
                          .dump());
        CHECK_THROWS_AS(state_session(*a.left, *b.left, cfg), WireError);
    }
    SUBCASE("clean shutdown at a round boundary") {
        ChannelPair a = memory_channel(), b = memory_channel();
        a.right->send(msg_hello("alice", 3));
        b.right->send(msg_hello("bob", 3));
        a.right->close();
        b.right->close();
        CHECK_NOTHROW(state_session(*a.left, *b.left, cfg));
    }
}

TEST_CASE("full session over real TCP sockets") {
    RunConfig run;
    run.n = 3;
    run.seed = 64;
    run.rounds = 60;

    Listener ref_listener(0);
    Listener st_listener(0);
    const DeviceModel dev = make_honest_device(3);

    Transcript wire;
    ThreadGroup group;
    group.spawn([&] {
        auto c1 = ref_listener.accept(5000);
        auto c2 = ref_listener.accept(5000);
        WireRefereeConfig cfg;
        cfg.run = run;
        wire = referee_session(*c1, *c2, cfg);
    });
    group.spawn([&] {
        auto c1 = st_listener.accept(5000);
        auto c2 = st_listener.accept(5000);
        StateServiceConfig scfg;
        scfg.n = 3;
        scfg.seed = run.seed;
        state_session(*c1, *c2, scfg);
    });
    group.spawn([&] {
        auto ref = tcp_connect("127.0.0.1", ref_listener.port(), 1000, 10, 50);
        auto st = tcp_connect("127.0.0.1", st_listener.port(), 1000, 10, 50);
        prover_session(*ref, *st, dev, "alice");
    });
    group.spawn([&] {
        auto ref = tcp_connect("127.0.0.1", ref_listener.port(), 1000, 10, 50);
        auto st = tcp_connect("127.0.0.1", st_listener.port(), 1000, 10, 50);
        prover_session(*ref, *st, dev, "bob");
    });
    group.join();
    REQUIRE_MESSAGE(group.errors.empty(),
                    (group.errors.empty() ? "" : group.errors.front()));

    CHECK(wire.voided == 0);
    CHECK(wire.accepted() == run.rounds);
    const Transcript direct = run_protocol(make_honest_device(3), run);
    check_records_equal(wire.records, direct.records);
}
