#include "magicrect/bell.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace mr {

namespace {

using Mat2 = std::array<cd, 4>;  // row-major 2x2

constexpr cd I1 = cd(0, 1);

Mat2 letter_matrix(Pauli p) {
    switch (p) {
        case Pauli::I: return {cd(1), cd(0), cd(0), cd(1)};
        case Pauli::X: return {cd(0), cd(1), cd(1), cd(0)};
        case Pauli::Y: return {cd(0), -I1, I1, cd(0)};
        case Pauli::Z: return {cd(1), cd(0), cd(0), cd(-1)};
    }
    std::abort();
}

Mat2 mul2(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

Mat2 dagger2(const Mat2& a) {
    return {std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])};
}

Mat2 rotation(double theta) {
    // exp(+i*theta*Y/2)
    double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {cd(c), cd(s), cd(-s), cd(c)};
}

uint64_t side_bit(Side side, int pairs, std::size_t q) {
    return side == Side::Alice ? q - 1 : pairs + q - 1;
}

void check_pairs(int pairs) {
    if (pairs < 1 || pairs > kMaxDensePairs)
        throw std::invalid_argument("dense engine supports 1..12 pairs");
}

}  // namespace

double NoiseModel::angle(int pair) const {
    switch (kind) {
        case Kind::None: return 0.0;
        case Kind::Uniform: return theta;
        case Kind::PerPair:
            if (pair < 1 || pair > static_cast<int>(angles.size()))
                throw std::out_of_range("noise angle index");
            return angles[pair - 1];
    }
    std::abort();
}

bool NoiseModel::trivial() const {
    if (kind == Kind::None) return true;
    if (kind == Kind::Uniform) return theta == 0.0;
    for (double a : angles)
        if (a != 0.0) return false;
    return true;
}

SharedState::SharedState(int pairs, const NoiseModel& noise) : n_(pairs) {
    check_pairs(pairs);
    if (noise.kind == NoiseModel::Kind::PerPair &&
        static_cast<int>(noise.angles.size()) != pairs)
        throw std::invalid_argument("per-pair noise needs one angle per pair");
    const std::size_t dim = std::size_t{1} << (2 * pairs);
    a_.assign(dim, cd(0));
    const double amp = 1.0 / std::sqrt(static_cast<double>(std::size_t{1} << pairs));
    for (std::size_t s = 0; s < (std::size_t{1} << pairs); ++s)
        a_[s | (s << pairs)] = amp;
    if (noise.trivial()) return;
    for (int q = 1; q <= pairs; ++q) {
        double theta = noise.angle(q);
        if (theta == 0.0) continue;
        Mat2 v = rotation(theta);
        const uint64_t bit = uint64_t{1} << (pairs + q - 1);
        for (std::size_t s = 0; s < a_.size(); ++s) {
            if (s & bit) continue;
            cd a0 = a_[s], a1 = a_[s | bit];
            a_[s] = v[0] * a0 + v[1] * a1;
            a_[s | bit] = v[2] * a0 + v[3] * a1;
        }
    }
}

double SharedState::norm() const {
    double s = 0;
    for (const cd& v : a_) s += std::norm(v);
    return std::sqrt(s);
}

void apply_pauli(const PauliString& p, Side side, int pairs, const Amplitudes& in,
                 Amplitudes& out) {
    check_pairs(pairs);
    if (static_cast<int>(p.sites()) != pairs)
        throw std::invalid_argument("pauli string size does not match pair count");
    if (in.size() != (std::size_t{1} << (2 * pairs)))
        throw std::invalid_argument("state size mismatch");
    uint64_t xmask = 0, zmask = 0;
    int ny = 0;
    for (int q = 1; q <= pairs; ++q) {
        uint64_t bit = uint64_t{1} << side_bit(side, pairs, q);
        if (p.x[q - 1]) xmask |= bit;
        if (p.z[q - 1]) zmask |= bit;
        if (p.x[q - 1] && p.z[q - 1]) ++ny;
    }
    cd base = p.phase();
    for (int t = 0; t < (ny & 3); ++t) base *= I1;
    out.resize(in.size());
    for (std::size_t s = 0; s < in.size(); ++s) {
        double sign = (__builtin_popcountll(s & zmask) & 1) ? -1.0 : 1.0;
        out[s ^ xmask] = base * sign * in[s];
    }
}

void apply_op(const MeasureOp& op, Side side, int pairs, const Amplitudes& in,
              Amplitudes& out) {
    if (op.is_pauli()) {
        apply_pauli(op.pauli, side, pairs, in, out);
        return;
    }
    const std::size_t dim = std::size_t{1} << pairs;
    if (op.dense.size() != dim * dim)
        throw std::invalid_argument("dense operator size does not match pair count");
    out.assign(in.size(), cd(0));
    if (side == Side::Alice) {
        for (std::size_t hi = 0; hi < dim; ++hi) {
            const std::size_t off = hi << pairs;
            for (std::size_t r = 0; r < dim; ++r) {
                cd acc(0);
                for (std::size_t c = 0; c < dim; ++c) acc += op.dense[r * dim + c] * in[off | c];
                out[off | r] = acc;
            }
        }
    } else {
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) {
                const cd m = op.dense[r * dim + c];
                if (m == cd(0)) continue;
                const std::size_t roff = r << pairs, coff = c << pairs;
                for (std::size_t lo = 0; lo < dim; ++lo) out[roff | lo] += m * in[coff | lo];
            }
    }
}

double dense_expectation(const SharedState& st, const PauliString& alice,
                         const PauliString& bob) {
    if (!alice.hermitian() || !bob.hermitian())
        throw std::invalid_argument("expectation needs hermitian pauli strings");
    Amplitudes t1, t2;
    apply_pauli(alice, Side::Alice, st.pairs(), st.amps(), t1);
    apply_pauli(bob, Side::Bob, st.pairs(), t1, t2);
    cd acc(0);
    for (std::size_t s = 0; s < t2.size(); ++s) acc += std::conj(st.amps()[s]) * t2[s];
    return acc.real();
}

double bell_expectation(int pairs, const PauliString& alice, const PauliString& bob,
                        const NoiseModel& noise) {
    if (pairs < 1) throw std::invalid_argument("pair count must be positive");
    if (static_cast<int>(alice.sites()) != pairs || static_cast<int>(bob.sites()) != pairs)
        throw std::invalid_argument("pauli string size does not match pair count");
    if (!alice.hermitian() || !bob.hermitian())
        throw std::invalid_argument("expectation needs hermitian pauli strings");
    cd acc = alice.phase() * bob.phase();
    for (int q = 1; q <= pairs; ++q) {
        Mat2 s = letter_matrix(alice.at(q));
        Mat2 t = letter_matrix(bob.at(q));
        double theta = noise.angle(q);
        if (theta != 0.0) {
            Mat2 v = rotation(theta);
            t = mul2(dagger2(v), mul2(t, v));
        }
        // tr(S T^transpose)/2 for this pair of the Bell product state
        cd tr = s[0] * t[0] + s[1] * t[1] + s[2] * t[2] + s[3] * t[3];
        acc *= tr / 2.0;
    }
    if (std::abs(acc.imag()) > 1e-9)
        throw std::logic_error("bell expectation came out non-real");
    return acc.real();
}

int measure_reflection(SharedState& st, Side side, const MeasureOp& op, RngStream& rng) {
    if (op.is_pauli() && !op.pauli.hermitian())
        throw std::invalid_argument("measured pauli must have phase +1 or -1");
    Amplitudes phi;
    apply_op(op, side, st.pairs(), st.amps(), phi);
    cd e(0);
    for (std::size_t s = 0; s < phi.size(); ++s) e += std::conj(st.amps()[s]) * phi[s];
    double ev = e.real();
    if (ev > 1) ev = 1;
    if (ev < -1) ev = -1;
    double p = (1 + ev) / 2;
    // Deterministic outcomes accumulate ~1e-15 of float error; snap them so
    // perfect correlations never produce spurious opposite outcomes.
    if (p > 1 - 1e-12) p = 1;
    if (p < 1e-12) p = 0;
    const double u = rng.uniform();  // always draw, to keep streams aligned
    const int outcome = u < p ? 1 : -1;
    Amplitudes& a = st.amps();
    double nrm2 = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        a[s] = (a[s] + static_cast<double>(outcome) * phi[s]) / 2.0;
        nrm2 += std::norm(a[s]);
    }
    const double nrm = std::sqrt(nrm2);
    if (nrm < 1e-9) throw std::logic_error("projection annihilated the state");
    for (cd& v : a) v /= nrm;
    return outcome;
}

namespace {

Amplitudes op_dense_on_side(const MeasureOp& op, int pairs) {
    if (!op.is_pauli()) return op.dense;
    return op.pauli.dense();
}

bool ops_commute(const MeasureOp& a, const MeasureOp& b, int pairs) {
    if (a.is_pauli() && b.is_pauli()) return a.pauli.commutes_with(b.pauli);
    const std::size_t dim = std::size_t{1} << pairs;
    Amplitudes ma = op_dense_on_side(a, pairs), mb = op_dense_on_side(b, pairs);
    double frob2 = 0;
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            cd ab(0), ba(0);
            for (std::size_t t = 0; t < dim; ++t) {
                ab += ma[r * dim + t] * mb[t * dim + c];
                ba += mb[r * dim + t] * ma[t * dim + c];
            }
            frob2 += std::norm(ab - ba);
        }
    return std::sqrt(frob2) <= 1e-9;
}

}  // namespace

std::vector<int> measure_joint(SharedState& st, Side side,
                               const std::vector<MeasureOp>& ops, RngStream& rng) {
    for (std::size_t i = 0; i < ops.size(); ++i)
        for (std::size_t j = i + 1; j < ops.size(); ++j)
            if (!ops_commute(ops[i], ops[j], st.pairs()))
                throw std::invalid_argument("joint measurement of non-commuting operators");
    std::vector<int> outcomes;
    outcomes.reserve(ops.size());
    for (const MeasureOp& op : ops)
        outcomes.push_back(measure_reflection(st, side, op, rng));
    return outcomes;
}

// --- operator expressions ------------------------------------------------

ExprPtr expr_leaf(Side side, PauliString op) {
    auto e = std::make_shared<OperatorExpr>();
    e->kind = OperatorExpr::Kind::Leaf;
    e->side = side;
    e->op = std::move(op);
    return e;
}

ExprPtr expr_sum(std::vector<double> weights, std::vector<ExprPtr> children) {
    if (weights.size() != children.size())
        throw std::invalid_argument("sum needs one weight per child");
    auto e = std::make_shared<OperatorExpr>();
    e->kind = OperatorExpr::Kind::Sum;
    e->children = std::move(children);
    e->weights = std::move(weights);
    return e;
}

ExprPtr expr_product(std::vector<ExprPtr> factors) {
    if (factors.empty()) throw std::invalid_argument("empty product");
    auto e = std::make_shared<OperatorExpr>();
    e->kind = OperatorExpr::Kind::Product;
    e->children = std::move(factors);
    return e;
}

namespace {

ExprPtr expr_pairwise(OperatorExpr::Kind kind, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<OperatorExpr>();
    e->kind = kind;
    e->children = {std::move(a), std::move(b)};
    return e;
}

Amplitudes apply_rec(const OperatorExpr& e, int pairs, const Amplitudes& in) {
    switch (e.kind) {
        case OperatorExpr::Kind::Leaf: {
            Amplitudes out;
            apply_pauli(e.op, e.side, pairs, in, out);
            return out;
        }
        case OperatorExpr::Kind::Sum: {
            Amplitudes acc(in.size(), cd(0));
            for (std::size_t i = 0; i < e.children.size(); ++i) {
                Amplitudes part = apply_rec(*e.children[i], pairs, in);
                for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += e.weights[i] * part[s];
            }
            return acc;
        }
        case OperatorExpr::Kind::Product: {
            Amplitudes cur = in;
            for (auto it = e.children.rbegin(); it != e.children.rend(); ++it)
                cur = apply_rec(**it, pairs, cur);
            return cur;
        }
        case OperatorExpr::Kind::Commutator:
        case OperatorExpr::Kind::Anticommutator: {
            const double sign = e.kind == OperatorExpr::Kind::Commutator ? -1.0 : 1.0;
            Amplitudes ab = apply_rec(*e.children[0], pairs, apply_rec(*e.children[1], pairs, in));
            Amplitudes ba = apply_rec(*e.children[1], pairs, apply_rec(*e.children[0], pairs, in));
            for (std::size_t s = 0; s < ab.size(); ++s) ab[s] += sign * ba[s];
            return ab;
        }
        case OperatorExpr::Kind::Difference: {
            Amplitudes a = apply_rec(*e.children[0], pairs, in);
            Amplitudes b = apply_rec(*e.children[1], pairs, in);
            for (std::size_t s = 0; s < a.size(); ++s) a[s] -= b[s];
            return a;
        }
    }
    std::abort();
}

}  // namespace

ExprPtr expr_commutator(ExprPtr a, ExprPtr b) {
    return expr_pairwise(OperatorExpr::Kind::Commutator, std::move(a), std::move(b));
}

ExprPtr expr_anticommutator(ExprPtr a, ExprPtr b) {
    return expr_pairwise(OperatorExpr::Kind::Anticommutator, std::move(a), std::move(b));
}

ExprPtr expr_difference(ExprPtr a, ExprPtr b) {
    return expr_pairwise(OperatorExpr::Kind::Difference, std::move(a), std::move(b));
}

Amplitudes apply_expr(const ExprPtr& e, const SharedState& st) {
    return apply_rec(*e, st.pairs(), st.amps());
}

double norm_of(const ExprPtr& e, const SharedState& st) {
    Amplitudes v = apply_expr(e, st);
    double s = 0;
    for (const cd& c : v) s += std::norm(c);
    return std::sqrt(s);
}

}  // namespace mr
