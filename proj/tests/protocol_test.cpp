// Protocol rounds: input sampling, member keys, scoring, the threaded runner
// and the epsilon estimator.

#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "magicrect/protocol.hpp"
#include "magicrect/rng.hpp"
#include "magicrect/strategies.hpp"

using namespace mr;
using nlohmann::json;

namespace {

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

TEST_CASE("round mixes") {
    const RoundMix m3 = RoundMix::standard(3);
    CHECK(m3.game == 0.5);
    CHECK(m3.local == 0.5);
    CHECK(m3.pair == 0.0);
    const RoundMix m7 = RoundMix::standard(7);
    CHECK(m7.game == doctest::Approx(1.0 / 3));
    CHECK(m7.pair == doctest::Approx(1.0 / 3));
    CHECK(m3.valid(3));
    CHECK_FALSE(RoundMix{0.5, 0.25, 0.25}.valid(3));  // pair rounds need n > 3
    CHECK(RoundMix{0.5, 0.25, 0.25}.valid(7));
    CHECK_FALSE(RoundMix{0.7, 0.7, -0.4}.valid(7));
    CHECK_FALSE(RoundMix{0.5, 0.4, 0.0}.valid(7));  // does not sum to 1
}

TEST_CASE("run config validation") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.rounds = 10;
    CHECK_NOTHROW(cfg.validate());
    cfg.n = 5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.n = 15;  // 3 mod 4 but beyond the dense engine
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.n = 3;
    cfg.rounds = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.rounds = 10;
    cfg.mix = {0.5, 0.25, 0.25};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("input sampling consumes one uniform and two bounded draws") {
    const RoundMix mix = RoundMix::standard(7);
    for (int round = 1; round <= 50; ++round) {
        RngStream used(11, round, kInputLane);
        RngStream replay(11, round, kInputLane);
        const Inputs in = sample_inputs(7, mix, used);

        const double u = replay.uniform();
        const int x = 1 + static_cast<int>(replay.integer(3));
        const int y = 1 + static_cast<int>(replay.integer(7));
        const int c = u < mix.game ? 0 : u < mix.game + mix.local ? 1 : 2;
        CHECK(in.c == c);
        CHECK(in.x == x);
        CHECK(in.y == y);
        // Both streams must now be in the same position.
        CHECK(used.uniform() == replay.uniform());
    }
}

TEST_CASE("input sampling covers all inputs roughly uniformly") {
    RngStream rng(3, 1, kInputLane);
    const RoundMix mix = RoundMix::standard(3);
    int c_count[3] = {0, 0, 0};
    int x_count[4] = {0, 0, 0, 0};
    int y_count[4] = {0, 0, 0, 0};
    const int trials = 30000;
    for (int t = 0; t < trials; ++t) {
        const Inputs in = sample_inputs(3, mix, rng);
        ++c_count[in.c];
        ++x_count[in.x];
        ++y_count[in.y];
    }
    CHECK(c_count[2] == 0);
    CHECK(std::abs(c_count[0] - trials / 2) < 600);
    for (int x = 1; x <= 3; ++x) CHECK(std::abs(x_count[x] - trials / 3) < 600);
    for (int y = 1; y <= 3; ++y) CHECK(std::abs(y_count[y] - trials / 3) < 600);
}

TEST_CASE("member keys per round are the frozen ones") {
    using K = std::vector<std::string>;
    CHECK(round_member_keys(3, 0, 1, 2) == K{"g:1,2"});
    CHECK(round_member_keys(3, 0, 3, 3) == K{"g:3,3"});
    CHECK(round_member_keys(3, 1, 1, 2) == K{"X:2"});
    CHECK(round_member_keys(3, 1, 2, 2) == K{});
    CHECK(round_member_keys(3, 1, 3, 2) == K{"Z:1", "Z:3"});
    CHECK(round_member_keys(7, 1, 3, 1) == K{"Z:2", "Z:3", "Z:4", "Z:5", "Z:6", "Z:7"});
    CHECK(round_member_keys(7, 2, 1, 1) == K{"XX:2,7", "XX:3,6", "XX:4,5"});
    CHECK(round_member_keys(7, 2, 3, 1) == K{"ZZ:2,7", "ZZ:3,6", "ZZ:4,5"});
    CHECK(round_member_keys(7, 2, 2, 1) == K{});
}

TEST_CASE("round scoring by hand") {
    SUBCASE("game rounds") {
        const Inputs in{0, 1, 2};
        // p = a1 * a3 = 1, matches b[0].
        RoundRecord rec = score_round(3, 9, in, {1, 1, 1}, {1, 1, -1});
        CHECK(rec.round == 9);
        CHECK(rec.accept);
        CHECK(rec.sub == std::vector<uint8_t>{1});
        rec = score_round(3, 9, in, {1, 1, 1}, {-1, 1, 1});
        CHECK_FALSE(rec.accept);
        CHECK(rec.sub == std::vector<uint8_t>{0});
        // Bob's game answers must multiply to -1.
        rec = score_round(3, 9, in, {1, 1, 1}, {1, 1, 1});
        CHECK_FALSE(rec.accept);
    }

    SUBCASE("local rounds compare answers site by site") {
        RoundRecord rec = score_round(3, 1, {1, 1, 2}, {1, -1, 1}, {1, -1, -1});
        CHECK(rec.accept);  // X:2 compares index 1
        rec = score_round(3, 1, {1, 1, 2}, {1, -1, 1}, {1, 1, -1});
        CHECK_FALSE(rec.accept);
        rec = score_round(3, 1, {1, 3, 2}, {1, -1, 1}, {1, 1, 1});
        CHECK(rec.sub == std::vector<uint8_t>{1, 1});  // Z:1 and Z:3
        rec = score_round(3, 1, {1, 3, 2}, {1, -1, -1}, {1, 1, 1});
        CHECK(rec.sub == std::vector<uint8_t>{1, 0});
        CHECK_FALSE(rec.accept);
        // x = 2 rounds have no members and accept well-formed answers.
        rec = score_round(3, 1, {1, 2, 2}, {1, -1, 1}, {-1, -1, -1});
        CHECK(rec.accept);
        CHECK(rec.sub.empty());
        rec = score_round(3, 1, {1, 2, 2}, {1, -1, 1}, {-1, -1});
        CHECK_FALSE(rec.accept);  // malformed arity still rejects
    }

    SUBCASE("pair rounds check products over colored edges") {
        // n = 7, color 1 edges: (2,7) (3,6) (4,5). Bob answers 6 values,
        // X halves first.
        const std::vector<int> a = {1, 1, -1, 1, -1, 1, -1};
        std::vector<int> b = {-1, -1, -1, 1, 1, 1};
        // X members: a2*a7*b0 = 1*(-1)*(-1), a3*a6*b1 = (-1)(1)(-1),
        // a4*a5*b2 = (1)(-1)(-1); all pass.
        RoundRecord rec = score_round(7, 2, {2, 1, 1}, a, b);
        CHECK(rec.accept);
        CHECK(rec.sub == std::vector<uint8_t>{1, 1, 1});
        // Z members read the second half of b.
        rec = score_round(7, 2, {2, 3, 1}, a, b);
        CHECK(rec.sub == std::vector<uint8_t>{0, 0, 0});
        CHECK_FALSE(rec.accept);
        b[1] = 1;
        rec = score_round(7, 2, {2, 1, 1}, a, b);
        CHECK(rec.sub == std::vector<uint8_t>{1, 0, 1});
        CHECK_FALSE(rec.accept);
    }

    SUBCASE("malformed answers fail the whole round") {
        const Inputs in{0, 1, 1};
        CHECK_FALSE(score_round(3, 1, in, {1, 1}, {1, 1, -1}).accept);
        CHECK_FALSE(score_round(3, 1, in, {1, 0, 1}, {1, 1, -1}).accept);
        CHECK_FALSE(score_round(3, 1, in, {1, 1, 1}, {1, -1}).accept);
        const RoundRecord rec = score_round(3, 1, in, {1, 1}, {1, 1, -1});
        CHECK(rec.sub == std::vector<uint8_t>{0});
    }
}

TEST_CASE("honest runs accept every round and estimate zero epsilon") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.seed = 17;
    cfg.rounds = 2000;
    EpsilonReport streaming;
    const Transcript t = run_protocol(make_honest_device(3), cfg, &streaming);
    CHECK(t.n == 3);
    CHECK(t.seed == 17);
    CHECK(t.voided == 0);
    CHECK(int(t.records.size()) == cfg.rounds);
    CHECK(t.accepted() == cfg.rounds);
    CHECK(t.device == "honest");

    const EpsilonReport rep = estimate_epsilons(t);
    CHECK(rep.n == 3);
    CHECK(rep.seed == 17);
    CHECK(rep.rounds == cfg.rounds);
    REQUIRE(rep.families.size() == 2);
    for (const FamilyEstimate& fam : rep.families) {
        CHECK(fam.complete());
        CHECK(fam.eps_hat() == 0.0);
        CHECK(fam.upper() > 0.0);
        CHECK(fam.upper() < 0.5);
    }

    // Streaming tallies must match the recomputed estimator exactly.
    REQUIRE(streaming.families.size() == rep.families.size());
    CHECK(streaming.n == rep.n);
    CHECK(streaming.seed == rep.seed);
    CHECK(streaming.rounds == rep.rounds);
    for (std::size_t f = 0; f < rep.families.size(); ++f) {
        REQUIRE(streaming.families[f].members.size() ==
                rep.families[f].members.size());
        for (std::size_t m = 0; m < rep.families[f].members.size(); ++m) {
            CHECK(streaming.families[f].members[m].key ==
                  rep.families[f].members[m].key);
            CHECK(streaming.families[f].members[m].samples ==
                  rep.families[f].members[m].samples);
            CHECK(streaming.families[f].members[m].passes ==
                  rep.families[f].members[m].passes);
        }
    }
}

TEST_CASE("transcripts are independent of the thread count") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.seed = 23;
    cfg.rounds = 600;
    cfg.threads = 1;
    const Transcript serial = run_protocol(make_honest_device(3), cfg);
    cfg.threads = 4;
    const Transcript parallel = run_protocol(make_honest_device(3), cfg);
    CHECK(serial.seed == parallel.seed);
    check_records_equal(serial.records, parallel.records);
}

TEST_CASE("rerunning the same seed reproduces the transcript") {
    RunConfig cfg;
    cfg.n = 7;
    cfg.seed = 4;
    cfg.rounds = 300;
    const DeviceModel dev = make_honest_device(7, NoiseModel::uniform(0.15));
    const Transcript t1 = run_protocol(dev, cfg);
    const Transcript t2 = run_protocol(dev, cfg);
    check_records_equal(t1.records, t2.records);
    CHECK(t1.device == "noisy-honest");
}

TEST_CASE("config n zero adopts the device size and mismatches throw") {
    RunConfig cfg;
    cfg.n = 0;
    cfg.seed = 1;
    cfg.rounds = 20;
    const Transcript t = run_protocol(make_honest_device(7), cfg);
    CHECK(t.n == 7);
    cfg.n = 3;
    CHECK_THROWS_AS(run_protocol(make_honest_device(7), cfg), std::invalid_argument);
}

TEST_CASE("noisy runs reject some rounds and the estimator sees it") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.seed = 77;
    cfg.rounds = 4000;
    const Transcript t = run_protocol(make_honest_device(3, NoiseModel::uniform(0.4)), cfg);
    CHECK(t.accepted() < cfg.rounds);
    const EpsilonReport rep = estimate_epsilons(t);
    // eps1 should be near 1 - cos(0.4) ~ 0.0789, far below the noiseless 0.
    const FamilyEstimate& e1 = rep.family("eps1");
    CHECK(e1.eps_hat() > 0.02);
    CHECK(e1.eps_hat() < 0.25);
    CHECK_THROWS_AS(rep.family("eps9"), std::out_of_range);
}

TEST_CASE("transcript save and load round-trip") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.seed = 31;
    cfg.rounds = 50;
    cfg.mix = {0.6, 0.4, 0.0};
    const Transcript t = run_protocol(make_honest_device(3), cfg);
    const std::string path = "protocol_test_transcript.jsonl";
    transcript_save(t, path);
    const Transcript back = transcript_load(path);
    std::remove(path.c_str());

    CHECK(back.n == t.n);
    CHECK(back.seed == t.seed);
    CHECK(back.device == t.device);
    CHECK(back.voided == t.voided);
    CHECK(back.mix.game == doctest::Approx(t.mix.game));
    CHECK(back.mix.local == doctest::Approx(t.mix.local));
    check_records_equal(back.records, t.records);

    CHECK_THROWS_AS(transcript_load("no-such-transcript.jsonl"), std::runtime_error);
}

TEST_CASE("estimator member bookkeeping") {
    EpsilonReport rep = make_empty_report(7, 0.02);
    REQUIRE(rep.families.size() == 3);
    CHECK(rep.families[0].members.size() == 21);   // 3 rows x 7 columns
    CHECK(rep.families[1].members.size() == 14);   // X and Z per site
    CHECK(rep.families[2].members.size() == 42);   // 2 axes x C(7,2) edges
    CHECK(rep.families[0].alpha_member == doctest::Approx(0.02 / 21));
    CHECK(rep.families[2].alpha_member == doctest::Approx(0.02 / 42));
    CHECK_FALSE(rep.families[0].complete());
    CHECK(rep.families[0].upper() == 2.0);

    // One tallied game round marks exactly one member.
    const RoundRecord rec = score_round(7, 1, {0, 2, 5}, {1, 1, 1, 1, 1, 1, 1},
                                        {1, 1, -1});
    tally_record(rep, 7, rec);
    const FamilyEstimate& e0 = rep.families[0];
    long long total_samples = 0;
    for (const MemberStat& m : e0.members) total_samples += m.samples;
    CHECK(total_samples == 1);
    CHECK_FALSE(e0.complete());
    CHECK(e0.upper() == 2.0);
}

TEST_CASE("member statistics formulas") {
    MemberStat m{"g:1,1", 2000, 1990};
    CHECK(m.rate() == doctest::Approx(0.995));
    CHECK(m.eps() == doctest::Approx(0.01));
    const double alpha = 0.01 / 24;
    CHECK(m.rate_half_width(alpha) ==
          doctest::Approx(std::sqrt(std::log(2.0 / alpha) / (2.0 * 2000))));
    CHECK(m.eps_half_width(alpha) == doctest::Approx(2 * m.rate_half_width(alpha)));
    const MemberStat empty{"g:1,2", 0, 0};
    CHECK(empty.rate_half_width(alpha) == 2.0);
}

TEST_CASE("epsilon report serializes with run identification") {
    RunConfig cfg;
    cfg.n = 3;
    cfg.seed = 123;
    cfg.rounds = 400;
    EpsilonReport rep;
    run_protocol(make_honest_device(3), cfg, &rep);
    const json j = json::parse(epsilon_report_json(rep));
    CHECK(j.at("kind").get<std::string>() == "epsilon-report");
    CHECK(j.at("n").get<int>() == 3);
    CHECK(j.at("seed").get<uint64_t>() == 123);
    CHECK(j.at("rounds").get<long long>() == 400);
    REQUIRE(j.at("families").is_array());
    CHECK(j.at("families").size() == 2);
    const auto& fam = j.at("families").at(0);
    CHECK(fam.at("name").get<std::string>() == "eps0");
    CHECK(fam.at("members").size() == 9);
    CHECK(fam.at("complete").get<bool>());
    const auto& member = fam.at("members").at(0);
    for (const char* field : {"key", "samples", "passes", "rate", "eps",
                              "rate_half_width", "eps_half_width"})
        CHECK(member.contains(field));
}
