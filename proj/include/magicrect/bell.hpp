#pragma once

// Engine for n shared Bell pairs. Keeps the joint 2n-qubit pure state dense
// (n <= 12), with Alice's qubit q on bit q-1 and Bob's qubit q on bit n+q-1.
// Correlations of Pauli observables are available through two independent
// routes: an analytic per-pair trace formula and the dense state vector.

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "magicrect/pauli.hpp"
#include "magicrect/rng.hpp"

namespace mr {

using cd = std::complex<double>;
using Amplitudes = std::vector<cd>;

constexpr int kMaxDensePairs = 12;

// Unitary single-qubit noise applied to Bob's half of each pair at
// preparation time: V(theta) = exp(+i*theta*Y/2), which maps X to
// cos(theta)X - sin(theta)Z and leaves Y fixed in the Heisenberg picture.
struct NoiseModel {
    enum class Kind { None, Uniform, PerPair };
    Kind kind = Kind::None;
    double theta = 0.0;
    std::vector<double> angles;  // 1 entry per pair when kind == PerPair

    static NoiseModel none() { return {}; }
    static NoiseModel uniform(double theta) {
        return {Kind::Uniform, theta, {}};
    }
    static NoiseModel per_pair(std::vector<double> angles) {
        return {Kind::PerPair, 0.0, std::move(angles)};
    }

    double angle(int pair) const;  // 1-based pair index
    bool trivial() const;
};

class SharedState {
public:
    explicit SharedState(int pairs, const NoiseModel& noise = {});

    int pairs() const { return n_; }
    Amplitudes& amps() { return a_; }
    const Amplitudes& amps() const { return a_; }
    double norm() const;

private:
    int n_;
    Amplitudes a_;
};

enum class Side { Alice, Bob };

// A side-local reflection to be measured: either a Pauli string over the
// side's n qubits (phase must be +1 or -1), or a dense Hermitian involution
// on the side's full 2^n-dimensional space (row-major).
struct MeasureOp {
    PauliString pauli;
    Amplitudes dense;

    bool is_pauli() const { return dense.empty(); }
    static MeasureOp from_pauli(PauliString p) { return {std::move(p), {}}; }
};

// Applies a Pauli string for one side to the joint state (out-of-place).
void apply_pauli(const PauliString& p, Side side, int pairs, const Amplitudes& in,
                 Amplitudes& out);
// Applies a general measurement operator for one side.
void apply_op(const MeasureOp& op, Side side, int pairs, const Amplitudes& in,
              Amplitudes& out);

// <psi| A_alice x B_bob |psi> on the dense state.
double dense_expectation(const SharedState& st, const PauliString& alice,
                         const PauliString& bob);

// Same quantity by the closed per-pair formula tr(S (V^dag T V)^T)/2,
// without touching a state vector. Imaginary parts must cancel; the
// magnitude-checked real part is returned.
double bell_expectation(int pairs, const PauliString& alice, const PauliString& bob,
                        const NoiseModel& noise = {});

// Projective measurement of a reflection: projects with (I +/- M)/2, returns
// the outcome and renormalizes the state. Exactly one uniform draw is
// consumed per call, and outcome probabilities within 1e-12 of 0 or 1 are
// snapped before drawing.
int measure_reflection(SharedState& st, Side side, const MeasureOp& op, RngStream& rng);

// Sequentially measures a list of mutually commuting reflections. Pauli pairs
// are checked symplectically; pairs involving a dense operator are checked by
// a commutator Frobenius norm <= 1e-9 on the side space.
std::vector<int> measure_joint(SharedState& st, Side side,
                               const std::vector<MeasureOp>& ops, RngStream& rng);

// --- operator expressions ------------------------------------------------
//
// Small expression trees over side-tagged Pauli reflections, evaluated by
// applying them to the shared state. Used to measure norms such as
// ||(X_a - X_b)|Psi>|| or anticommutator norms.

struct OperatorExpr;
using ExprPtr = std::shared_ptr<const OperatorExpr>;

struct OperatorExpr {
    enum class Kind { Leaf, Sum, Product, Commutator, Anticommutator, Difference };
    Kind kind = Kind::Leaf;
    Side side = Side::Alice;       // Leaf only
    PauliString op;                // Leaf only
    std::vector<ExprPtr> children;
    std::vector<double> weights;   // Sum only, parallel to children
};

ExprPtr expr_leaf(Side side, PauliString op);
ExprPtr expr_sum(std::vector<double> weights, std::vector<ExprPtr> children);
ExprPtr expr_product(std::vector<ExprPtr> factors);  // applied right to left
ExprPtr expr_commutator(ExprPtr a, ExprPtr b);
ExprPtr expr_anticommutator(ExprPtr a, ExprPtr b);
ExprPtr expr_difference(ExprPtr a, ExprPtr b);

// expr|psi> for the state's pair count.
Amplitudes apply_expr(const ExprPtr& e, const SharedState& st);
// ||expr|Psi>||.
double norm_of(const ExprPtr& e, const SharedState& st);

}  // namespace mr
