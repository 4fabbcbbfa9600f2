#pragma once

// Robustness-bound catalog for the self-test, plus the norm-level ledger
// that measures every bound's left-hand side on an honest (possibly noisy)
// device and compares it against the right-hand side evaluated at exactly
// computed check-failure rates.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "magicrect/strategies.hpp"

namespace mr {

struct ExactEpsilons {
    double eps0 = 0, eps1 = 0, eps2 = 0;
};

// Per-member check correlations of an honest device, from the closed-form
// Bell expectations. Labels: "g:x,y", "X:i", "Z:i@y", "XX:i,j", "ZZ:i,j".
// Every value is +1 for a noiseless honest device.
std::vector<std::pair<std::string, double>> correlation_members(const DeviceModel& dev);

// Worst member deficit per check family: eps_c = max over the family's
// members of (1 - correlation). Exact counterparts of the estimator's
// per-family epsilon estimates.
ExactEpsilons exact_epsilons(const DeviceModel& dev);

// A correlation of reflections at 1 - eps pins the states to within
// sqrt(2 eps) of each other.
double state_estimate_bound(double eps);

// One bound family:
//   max over quantifier bindings of ||expr |Psi>||
//     <= c0 sqrt(2 eps0) + c1 sqrt(2 eps1) + c2 sqrt(2 eps2).
struct BoundEntry {
    std::string name;
    std::string category;   // corr | comm | anticomm | lemma | chain
    std::string instance;   // worst binding (measured reports only)
    int instances = 0;      // bindings measured (0 in catalog-only reports)
    double c0 = 0, c1 = 0, c2 = 0;
    double lhs = 0;
    double rhs = 0;
    double margin = 0;      // rhs - lhs
    bool pass = false;      // margin >= -1e-9
};

struct BoundReport {
    int n = 3;
    bool measured = false;  // true when the LHS norms were evaluated
    double theta = 0;       // noise angle of the device (reporting only)
    double eps0 = 0, eps1 = 0, eps2 = 0;
    double delta = 0;       // max RHS over corr/comm/anticomm entries
    bool all_pass = false;
    std::string note;
    std::vector<BoundEntry> entries;
};

// The catalog with right-hand sides evaluated at the given epsilons; no
// state is built, so any n = 3 or n = 3 (mod 4), n >= 7 is accepted.
BoundReport bound_catalog(int n, double eps0, double eps1, double eps2);

struct LedgerOptions {
    bool inject_bug = false;   // test hook: flips one sign in a correlation LHS
    int max_instances = 0;     // per-family binding cap; 0 = default for n
    uint64_t sample_seed = 7;  // stream seed for capped binding selection
    int sigma_samples = 6;     // permutations per permutation-quantified family
    int threads = 0;           // 0 = hardware concurrency
};

// Measures every catalog LHS on the device's shared state and checks it
// against the RHS at the device's exact epsilons. Honest devices with
// n in {3, 7, 11} only.
BoundReport ledger_verify(const DeviceModel& dev, const LedgerOptions& opts = {});

// delta(n, eps): worst RHS over the entries feeding the state certificate
// when every family epsilon equals eps.
double final_robustness(int n, double eps);

// One JSON object per line: header first, then an object per entry.
std::string bound_report_json(const BoundReport& rep);
BoundReport bound_report_parse(const std::string& text);

}  // namespace mr
