#include "magicrect/strategies.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "magicrect/coloring.hpp"

namespace mr {

namespace {

using nlohmann::json;

void check_rectangle_n(int n) {
    if (n != 3 && (n < 7 || n % 4 != 3))
        throw std::invalid_argument("pair count must be 3 or congruent to 3 mod 4");
}

PauliString letters(int n, std::initializer_list<std::pair<int, Pauli>> assign) {
    PauliString s(n);
    for (auto [q, p] : assign) s.set(q, p);
    return s;
}

// Product of one letter over every site except y.
PauliString product_except(int n, int y, Pauli p) {
    PauliString s(n);
    for (int j = 1; j <= n; ++j)
        if (j != y) s.set(j, p);
    return s;
}

OutputTerm from_op(int index) { return {1, {index}}; }
OutputTerm constant(int sign) { return {sign, {}}; }

MeasurePlan honest_alice_plan(int n, int x) {
    const Pauli row = x == 1 ? Pauli::X : x == 2 ? Pauli::Y : Pauli::Z;
    MeasurePlan plan;
    for (int j = 1; j <= n; ++j) {
        plan.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, j, row)));
        plan.outputs.push_back(from_op(j - 1));
    }
    return plan;
}

MeasurePlan honest_bob_game_plan(int n, int y) {
    MeasurePlan plan;
    plan.ops.push_back(MeasureOp::from_pauli(product_except(n, y, Pauli::X)));
    plan.ops.push_back(MeasureOp::from_pauli(product_except(n, y, Pauli::Y)));
    plan.ops.push_back(MeasureOp::from_pauli(product_except(n, y, Pauli::Z)));
    for (int i = 0; i < 3; ++i) plan.outputs.push_back(from_op(i));
    return plan;
}

MeasurePlan honest_bob_local_plan(int n, int y) {
    MeasurePlan plan;
    plan.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, y, Pauli::X)));
    std::vector<int> op_of(n + 1, -1);
    op_of[y] = 0;
    for (int j = 1; j <= n; ++j) {
        if (j == y) continue;
        op_of[j] = static_cast<int>(plan.ops.size());
        plan.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, j, Pauli::Z)));
    }
    for (int j = 1; j <= n; ++j) plan.outputs.push_back(from_op(op_of[j]));
    return plan;
}

MeasurePlan honest_bob_pair_plan(int n, int y) {
    // The tested pairs {y-k, y+k} are the color-y edges of K_n, in k order.
    MeasurePlan plan;
    for (Pauli p : {Pauli::X, Pauli::Z})
        for (auto [i, j] : edges_of_color(n, y)) {
            plan.ops.push_back(MeasureOp::from_pauli(letters(n, {{i, p}, {j, p}})));
            plan.outputs.push_back(from_op(static_cast<int>(plan.ops.size()) - 1));
        }
    return plan;
}

}  // namespace

std::vector<int> apply_outputs(const MeasurePlan& plan, const std::vector<int>& outcomes) {
    if (outcomes.size() != plan.ops.size())
        throw std::invalid_argument("outcome count does not match plan");
    std::vector<int> out;
    out.reserve(plan.outputs.size());
    for (const OutputTerm& term : plan.outputs) {
        int v = term.sign;
        for (int f : term.factors) v *= outcomes.at(f);
        out.push_back(v);
    }
    return out;
}

const MeasurePlan& DeviceModel::alice_plan(int x) const {
    if (x < 1 || x > 3) throw std::invalid_argument("row input must be in 1..3");
    return alice[x - 1];
}

const MeasurePlan& DeviceModel::bob_plan(int c, int y) const {
    if (c < 0 || c > 2) throw std::invalid_argument("round kind must be 0, 1 or 2");
    if (y < 1 || y > pairs) throw std::invalid_argument("column input must be in 1..n");
    if (c == 2 && bob[2].empty())
        throw std::invalid_argument("device has no pair-check plans");
    return bob[c][y - 1];
}

bool DeviceModel::wire_compatible() const {
    auto plan_ok = [](const MeasurePlan& p) {
        for (const MeasureOp& op : p.ops)
            if (!op.is_pauli()) return false;
        return true;
    };
    for (const MeasurePlan& p : alice)
        if (!plan_ok(p)) return false;
    for (const auto& fam : bob)
        for (const MeasurePlan& p : fam)
            if (!plan_ok(p)) return false;
    return true;
}

PauliString square_cell(int n, int r, int c) {
    static const char* cells[3][3] = {
        {"+1 IZ", "+1 ZI", "+1 ZZ"},
        {"+1 XI", "+1 IX", "+1 XX"},
        {"-1 XZ", "-1 ZX", "+1 YY"},
    };
    if (r < 1 || r > 3 || c < 1 || c > 3) throw std::invalid_argument("square cell index");
    if (n < 2) throw std::invalid_argument("square cells need at least 2 sites");
    PauliString two = PauliString::parse(cells[r - 1][c - 1]);
    PauliString out(n);
    out.k = two.k;
    out.set(1, two.at(1));
    out.set(2, two.at(2));
    return out;
}

DeviceModel make_honest_device(int n, NoiseModel noise) {
    check_rectangle_n(n);
    DeviceModel d;
    d.kind = DeviceKind::Honest;
    d.name = noise.trivial() ? "honest" : "noisy-honest";
    d.pairs = n;
    d.noise = std::move(noise);
    for (int x = 1; x <= 3; ++x) d.alice.push_back(honest_alice_plan(n, x));
    d.bob.resize(3);
    for (int y = 1; y <= n; ++y) {
        d.bob[0].push_back(honest_bob_game_plan(n, y));
        d.bob[1].push_back(honest_bob_local_plan(n, y));
        if (n > 3) d.bob[2].push_back(honest_bob_pair_plan(n, y));
    }
    return d;
}

DeviceModel make_baseline_square_device() {
    const int n = 3;
    DeviceModel d;
    d.kind = DeviceKind::BaselineSquare;
    d.name = "baseline-square";
    d.pairs = n;
    for (int x = 1; x <= 3; ++x) {
        MeasurePlan plan;
        for (int c = 1; c <= 3; ++c) {
            plan.ops.push_back(MeasureOp::from_pauli(square_cell(n, x, c)));
            plan.outputs.push_back(from_op(c - 1));
        }
        d.alice.push_back(std::move(plan));
    }
    d.bob.resize(3);
    for (int y = 1; y <= n; ++y) {
        // Both round kinds are answered with the column's cell outcomes; the
        // device has no single-qubit measurements to offer the local checks.
        MeasurePlan plan;
        for (int r = 1; r <= 3; ++r) {
            plan.ops.push_back(MeasureOp::from_pauli(square_cell(n, r, y)));
            plan.outputs.push_back(from_op(r - 1));
        }
        d.bob[0].push_back(plan);
        d.bob[1].push_back(std::move(plan));
    }
    return d;
}

DeviceModel make_padded_device(int n) {
    check_rectangle_n(n);
    if (n == 3) throw std::invalid_argument("padded adversary needs n > 3");
    DeviceModel d;
    d.kind = DeviceKind::Padded;
    d.name = "padded-square";
    d.pairs = n;

    for (int x = 1; x <= 3; ++x) {
        MeasurePlan plan;
        for (int c = 1; c <= 3; ++c)
            plan.ops.push_back(MeasureOp::from_pauli(square_cell(n, x, c)));
        // Answers on the square block are pair products of the cell outcomes
        // (equal to the remaining cell's outcome, since rows multiply to +I);
        // the padding block is filled with a constant -1 so that every row
        // product comes out -1 and Bob can always win with (-1,-1,-1).
        plan.outputs.push_back(OutputTerm{1, {1, 2}});
        plan.outputs.push_back(OutputTerm{1, {0, 2}});
        plan.outputs.push_back(OutputTerm{1, {0, 1}});
        for (int j = 4; j <= n; ++j) plan.outputs.push_back(constant(-1));
        d.alice.push_back(std::move(plan));
    }

    d.bob.resize(3);
    for (int y = 1; y <= n; ++y) {
        MeasurePlan game;
        if (y <= 3) {
            for (int r = 1; r <= 3; ++r) {
                game.ops.push_back(MeasureOp::from_pauli(square_cell(n, r, y)));
                game.outputs.push_back(from_op(r - 1));
            }
        } else {
            for (int r = 1; r <= 3; ++r) game.outputs.push_back(constant(-1));
        }
        d.bob[0].push_back(std::move(game));

        MeasurePlan local;
        std::vector<int> op_of(4, -1);  // square qubits 1..3
        if (y <= 3) {
            op_of[y] = 0;
            local.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, y, Pauli::X)));
        }
        for (int j = 1; j <= 3; ++j) {
            if (j == y) continue;
            op_of[j] = static_cast<int>(local.ops.size());
            local.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, j, Pauli::Z)));
        }
        for (int j = 1; j <= n; ++j)
            local.outputs.push_back(j <= 3 ? from_op(op_of[j]) : constant(-1));
        d.bob[1].push_back(std::move(local));

        MeasurePlan pair;
        for (Pauli p : {Pauli::X, Pauli::Z})
            for (auto [lo, hi] : edges_of_color(n, y)) {
                if (hi <= 3) {
                    pair.ops.push_back(MeasureOp::from_pauli(letters(n, {{lo, p}, {hi, p}})));
                    pair.outputs.push_back(from_op(static_cast<int>(pair.ops.size()) - 1));
                } else if (lo > 3) {
                    // Padding-padding pairs: both answers are the constant -1,
                    // so their product is +1.
                    pair.outputs.push_back(constant(1));
                } else if (p == Pauli::Z) {
                    // Straddling Z pair: measure Z on the square qubit and
                    // fold in the padding constant.
                    pair.ops.push_back(MeasureOp::from_pauli(PauliString::single(n, lo, Pauli::Z)));
                    pair.outputs.push_back(OutputTerm{-1, {static_cast<int>(pair.ops.size()) - 1}});
                } else {
                    // Straddling X pair: nothing useful to measure.
                    pair.outputs.push_back(constant(-1));
                }
            }
        d.bob[2].push_back(std::move(pair));
    }
    return d;
}

namespace {

NoiseModel noise_from_json(const json& j, int n) {
    if (j.is_null()) return NoiseModel::none();
    const std::string kind = j.value("kind", "none");
    if (kind == "none") return NoiseModel::none();
    if (kind == "uniform") return NoiseModel::uniform(j.at("theta").get<double>());
    if (kind == "per-pair") {
        auto angles = j.at("angles").get<std::vector<double>>();
        if (static_cast<int>(angles.size()) != n)
            throw std::invalid_argument("per-pair noise needs one angle per pair");
        return NoiseModel::per_pair(std::move(angles));
    }
    throw std::invalid_argument("unknown noise kind \"" + kind + "\"");
}

MeasureOp op_from_json(const json& j, int n) {
    if (j.is_string()) {
        PauliString p = PauliString::parse(j.get<std::string>());
        if (static_cast<int>(p.sites()) != n)
            throw std::invalid_argument("pauli operator has wrong site count");
        if (!p.hermitian())
            throw std::invalid_argument("measured pauli must have phase +1 or -1");
        return MeasureOp::from_pauli(std::move(p));
    }
    if (!j.is_object() || !j.contains("dense"))
        throw std::invalid_argument("operator must be a pauli string or {\"dense\": ...}");
    if (n > 6) throw std::invalid_argument("dense operators are limited to n <= 6");
    const std::size_t dim = std::size_t{1} << n;
    const auto& rows = j.at("dense");
    if (rows.size() != dim * dim)
        throw std::invalid_argument("dense operator must be a flat 2^n x 2^n entry list");
    MeasureOp op;
    op.dense.reserve(dim * dim);
    for (const auto& entry : rows) {
        if (!entry.is_array() || entry.size() != 2)
            throw std::invalid_argument("dense entries must be [re, im] pairs");
        op.dense.emplace_back(entry[0].get<double>(), entry[1].get<double>());
    }
    // Reflections only: hermitian and squaring to the identity.
    double herm = 0, invo = 0;
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            herm += std::norm(op.dense[r * dim + c] - std::conj(op.dense[c * dim + r]));
            cd acc(0);
            for (std::size_t t = 0; t < dim; ++t)
                acc += op.dense[r * dim + t] * op.dense[t * dim + c];
            invo += std::norm(acc - (r == c ? cd(1) : cd(0)));
        }
    if (std::sqrt(herm) > 1e-9 || std::sqrt(invo) > 1e-9)
        throw std::invalid_argument("dense operator is not a reflection");
    return op;
}

MeasurePlan plan_from_json(const json& j, int n, std::size_t output_arity) {
    MeasurePlan plan;
    for (const auto& op : j.at("ops")) plan.ops.push_back(op_from_json(op, n));
    for (const auto& out : j.at("outputs")) {
        OutputTerm term;
        term.sign = out.at("sign").get<int>();
        if (term.sign != 1 && term.sign != -1)
            throw std::invalid_argument("output sign must be +1 or -1");
        if (out.contains("factors"))
            term.factors = out.at("factors").get<std::vector<int>>();
        for (int f : term.factors)
            if (f < 0 || f >= static_cast<int>(plan.ops.size()))
                throw std::invalid_argument("output factor index out of range");
        plan.outputs.push_back(std::move(term));
    }
    if (plan.outputs.size() != output_arity)
        throw std::invalid_argument("plan has the wrong number of outputs");
    return plan;
}

}  // namespace

DeviceModel device_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    DeviceModel d;
    d.kind = DeviceKind::Custom;
    d.pairs = j.at("n").get<int>();
    check_rectangle_n(d.pairs);
    if (d.pairs > kMaxDensePairs)
        throw std::invalid_argument("device exceeds the dense engine pair limit");
    d.name = j.value("name", "custom");
    d.noise = noise_from_json(j.contains("noise") ? j["noise"] : json(), d.pairs);

    const int n = d.pairs;
    const auto& alice = j.at("alice");
    if (alice.size() != 3) throw std::invalid_argument("alice needs one plan per row");
    for (const auto& plan : alice) d.alice.push_back(plan_from_json(plan, n, n));

    d.bob.resize(3);
    const auto& bob = j.at("bob");
    const auto& game = bob.at("game");
    const auto& local = bob.at("local");
    if (game.size() != static_cast<std::size_t>(n) ||
        local.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("bob needs one game and one local plan per column");
    for (const auto& plan : game) d.bob[0].push_back(plan_from_json(plan, n, 3));
    for (const auto& plan : local) d.bob[1].push_back(plan_from_json(plan, n, n));
    if (n > 3) {
        const auto& pair = bob.at("pair");
        if (pair.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("bob needs one pair plan per column");
        for (const auto& plan : pair) d.bob[2].push_back(plan_from_json(plan, n, n - 1));
    } else if (bob.contains("pair") && !bob["pair"].empty()) {
        throw std::invalid_argument("pair plans are not part of the n = 3 protocol");
    }
    return d;
}

DeviceModel device_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open device file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return device_from_json(ss.str());
}

NoiseModel noise_from_json(const std::string& json_text, int n) {
    return noise_from_json(json::parse(json_text), n);
}

}  // namespace mr
