#pragma once

// Device models: what each side measures for a given input and how raw
// outcomes are postprocessed into answers. Includes the honest one-side-local
// strategy, a two-qubit magic-square baseline that ignores the locality
// checks, a padded square adversary for n > 3, and custom devices loaded from
// JSON descriptors.

#include <string>
#include <vector>

#include "magicrect/bell.hpp"
#include "magicrect/pauli.hpp"

namespace mr {

// One answer bit: sign * product of the outcomes of the listed ops.
struct OutputTerm {
    int sign = 1;
    std::vector<int> factors;  // 0-based indices into MeasurePlan::ops
};

struct MeasurePlan {
    std::vector<MeasureOp> ops;
    std::vector<OutputTerm> outputs;
};

std::vector<int> apply_outputs(const MeasurePlan& plan, const std::vector<int>& outcomes);

enum class DeviceKind { Honest, BaselineSquare, Padded, Custom };

struct DeviceModel {
    DeviceKind kind = DeviceKind::Honest;
    std::string name;
    int pairs = 3;
    NoiseModel noise;

    std::vector<MeasurePlan> alice;             // by row x in 1..3
    std::vector<std::vector<MeasurePlan>> bob;  // [c][y-1]; bob[2] empty when n == 3

    const MeasurePlan& alice_plan(int x) const;
    const MeasurePlan& bob_plan(int c, int y) const;
    bool has_pair_rounds() const { return !bob[2].empty(); }
    // Plans that only measure Pauli strings can be replayed over the wire.
    bool wire_compatible() const;
};

// Cell (r,c) of the standard two-qubit magic square, embedded on sites 1 and
// 2 of an n-site string. Rows multiply to +I and columns to -I.
PauliString square_cell(int n, int r, int c);

// Honest strategy: Alice measures single-qubit X/Y/Z per row; Bob measures
// (n-1)-qubit products in game rounds, single qubits in local checks and
// qubit pairs keyed by the K_n edge coloring in pair checks.
DeviceModel make_honest_device(int n, NoiseModel noise = {});

// Magic-square strategy (n = 3) that wins every game round but answers all
// check rounds with its two-qubit cell outcomes.
DeviceModel make_baseline_square_device();

// n > 3 adversary: plays the two-qubit square on qubits 1..2 and pads the
// remaining answers deterministically. Wins every game round; pair checks
// that straddle the square boundary are where it gets caught.
DeviceModel make_padded_device(int n);

// JSON descriptor (per-input plans of Pauli text or dense matrices plus
// output maps). Validates shapes and that every operator is a reflection.
DeviceModel device_from_json(const std::string& json_text);
DeviceModel device_from_file(const std::string& path);

// Noise descriptor: {"kind":"none"} | {"kind":"uniform","theta":t} |
// {"kind":"per-pair","angles":[...]} (angle count checked against n).
NoiseModel noise_from_json(const std::string& json_text, int n);

}  // namespace mr
