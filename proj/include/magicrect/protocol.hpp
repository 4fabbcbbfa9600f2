#pragma once

// The self-testing protocol: rounds are sampled as game (c=0), local check
// (c=1) or pair check (c=2), Alice always measures her row plan while Bob's
// plan depends on (c,y), and the referee scores per-member predicates. The
// estimator turns transcript tallies into per-family epsilon estimates with
// Hoeffding confidence widths.

#include <cstdint>
#include <string>
#include <vector>

#include "magicrect/rng.hpp"
#include "magicrect/strategies.hpp"

namespace mr {

struct RoundMix {
    double game = 0, local = 0, pair = 0;

    // n = 3 splits rounds between game and local checks; larger n adds pair
    // checks with equal weight.
    static RoundMix standard(int n);
    bool valid(int n) const;
};

struct RunConfig {
    int n = 3;
    uint64_t seed = 1;
    int rounds = 1000;
    RoundMix mix;    // all-zero means standard(n)
    int threads = 0; // 0 = hardware concurrency

    RoundMix effective_mix() const;
    void validate() const;
};

struct Inputs {
    int c = 0, x = 1, y = 1;
};

Inputs sample_inputs(int n, const RoundMix& mix, RngStream& rng);

struct RoundRecord {
    int round = 0;
    int c = 0, x = 1, y = 1;
    std::vector<int> a, b;        // +/-1 answers
    bool accept = false;
    std::vector<uint8_t> sub;     // per-member predicate results, member order
};

// Estimator member keys contributing samples in a round with these inputs,
// e.g. "g:1,2", "X:3", "Z:1", "XX:2,5". Empty for x = 2 check rounds.
std::vector<std::string> round_member_keys(int n, int c, int x, int y);

// Scores answers against the round's predicates. Malformed answers fail
// every member of the round (a loss, not an error).
RoundRecord score_round(int n, int round_id, const Inputs& in,
                        const std::vector<int>& a, const std::vector<int>& b);

struct Transcript {
    int n = 3;
    uint64_t seed = 1;
    RoundMix mix;
    std::string device;
    int voided = 0;
    std::vector<RoundRecord> records;

    long long accepted() const;
};

// --- epsilon estimation ----------------------------------------------------

struct MemberStat {
    std::string key;
    long long samples = 0;
    long long passes = 0;

    double rate() const { return samples ? static_cast<double>(passes) / samples : 0.0; }
    double eps() const { return samples ? 2.0 * (1.0 - rate()) : 0.0; }
    // Hoeffding half-width for the accept rate at confidence 1 - alpha.
    double rate_half_width(double alpha) const;
    // The epsilon estimate lives on a width-2 scale, so its width doubles.
    double eps_half_width(double alpha) const { return 2.0 * rate_half_width(alpha); }
};

struct FamilyEstimate {
    std::string name;
    double alpha_member = 0.01;  // family alpha split over members (Bonferroni)
    std::vector<MemberStat> members;

    bool complete() const;       // every member has at least one sample
    double eps_hat() const;      // max member epsilon
    double half_width() const;   // max member half-width (sampled members)
    double upper() const;        // conservative upper end, clamped to [0,2]
};

struct EpsilonReport {
    int n = 3;
    uint64_t seed = 0;  // 0 when the tallies did not come from a seeded run
    double alpha = 0.01;
    long long rounds = 0;
    std::vector<FamilyEstimate> families;  // eps0, eps1 and (n > 3) eps2

    const FamilyEstimate& family(const std::string& name) const;
};

EpsilonReport make_empty_report(int n, double alpha);
void tally_record(EpsilonReport& report, int n, const RoundRecord& rec);
EpsilonReport estimate_epsilons(const Transcript& t, double alpha = 0.01);

// --- protocol runner --------------------------------------------------------

RoundRecord run_round(const DeviceModel& dev, const RunConfig& cfg, int round_id);

// Runs rounds on a small thread pool; records are merged in round order, so
// the transcript is independent of the thread count. When `streaming` is
// given it receives the tallies accumulated during the run (the estimator
// recomputed from the transcript must agree exactly).
Transcript run_protocol(const DeviceModel& dev, const RunConfig& cfg,
                        EpsilonReport* streaming = nullptr);

// --- serialization (one JSON object per line, header first) ----------------

void transcript_save(const Transcript& t, const std::string& path);
Transcript transcript_load(const std::string& path);
std::string epsilon_report_json(const EpsilonReport& report);  // single object

}  // namespace mr
