#include "magicrect/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "magicrect/bell.hpp"
#include "magicrect/coloring.hpp"

namespace mr {
namespace {

using nlohmann::json;

constexpr double kMarginTolerance = 1e-9;

std::string fmt_int(const char* key, int v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s=%d", key, v);
    return buf;
}

// --- honest instantiation vocabulary ---------------------------------------

PauliString axis_site(int n, Pauli p, int q) {
    return PauliString::single(n, q, p);
}

PauliString axis_pair(int n, Pauli p, int i, int j) {
    PauliString s(n);
    s.set(i, p);
    s.set(j, p);
    return s;
}

PauliString axis_except(int n, Pauli p, int q) {
    PauliString s(n);
    for (int k = 1; k <= n; ++k)
        if (k != q) s.set(k, p);
    return s;
}

PauliString axis_all(int n, Pauli p) {
    PauliString s(n);
    for (int k = 1; k <= n; ++k) s.set(k, p);
    return s;
}

ExprPtr A(PauliString p) { return expr_leaf(Side::Alice, std::move(p)); }
ExprPtr B(PauliString p) { return expr_leaf(Side::Bob, std::move(p)); }

ExprPtr plus(ExprPtr a, ExprPtr b) {
    return expr_sum({1.0, 1.0}, {std::move(a), std::move(b)});
}

// --- catalog structure ------------------------------------------------------

struct Instance {
    std::string label;
    ExprPtr expr;
};

struct BindCtx {
    int n = 3;
    std::vector<std::vector<int>> sigmas;  // 1-based site permutations
    bool inject_bug = false;
};

struct EntryDef {
    std::string name;
    std::string category;
    double c0 = 0, c1 = 0, c2 = 0;
    std::function<std::vector<Instance>(const BindCtx&)> bind;
};

std::string sigma_label(const std::vector<int>& sig) {
    std::string out = "sigma=(";
    for (size_t i = 0; i < sig.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(sig[i]);
    }
    out += ')';
    return out;
}

// The square M = X^{s_n} X^{s_1} Z^{s_1} Z^{s_2} of the swap operator shows
// up on the reference side of several chain steps.
std::vector<ExprPtr> swap_square(int n, const std::vector<int>& s) {
    std::vector<ExprPtr> f;
    for (int rep = 0; rep < 2; ++rep) {
        f.push_back(A(axis_site(n, Pauli::X, s[n - 1])));
        f.push_back(A(axis_site(n, Pauli::X, s[0])));
        f.push_back(A(axis_site(n, Pauli::Z, s[0])));
        f.push_back(A(axis_site(n, Pauli::Z, s[1])));
    }
    return f;
}

// Alice's side of the swap chain: (prod_{k != n} Z^{s_k})(prod_k X^{s_k})
// followed by (n-3)/2 conjugation blocks X Z Z X over descending site pairs.
std::vector<ExprPtr> swap_chain_factors(int n, const std::vector<int>& s) {
    std::vector<ExprPtr> f;
    f.push_back(A(axis_except(n, Pauli::Z, s[n - 1])));
    f.push_back(A(axis_all(n, Pauli::X)));
    for (int k = 1; k <= (n - 3) / 2; ++k) {
        int hi = s[n - 2 * k];      // sigma_{n-2k+1}
        int lo = s[n - 2 * k - 1];  // sigma_{n-2k}
        f.push_back(A(axis_site(n, Pauli::X, hi)));
        f.push_back(A(axis_site(n, Pauli::Z, hi)));
        f.push_back(A(axis_site(n, Pauli::Z, lo)));
        f.push_back(A(axis_site(n, Pauli::X, lo)));
    }
    return f;
}

// Bob's paired X/Z pair-check blocks over (sigma_{4k-1}, sigma_{4k+1}) and
// (sigma_{4k}, sigma_{4k+2}), k = 1..(n-3)/4.
void append_pair_blocks(std::vector<ExprPtr>& f, int n, const std::vector<int>& s,
                        Pauli first, Pauli second) {
    for (int k = 1; k <= (n - 3) / 4; ++k) {
        int a1 = s[4 * k - 2], b1 = s[4 * k];      // sigma_{4k-1}, sigma_{4k+1}
        int a2 = s[4 * k - 1], b2 = s[4 * k + 1];  // sigma_{4k},   sigma_{4k+2}
        f.push_back(B(axis_pair(n, first, a1, b1)));
        f.push_back(B(axis_pair(n, second, a1, b1)));
        f.push_back(B(axis_pair(n, second, a2, b2)));
        f.push_back(B(axis_pair(n, first, a2, b2)));
    }
}

std::vector<EntryDef> entry_defs(int n) {
    std::vector<EntryDef> defs;

    auto for_y = [n](std::function<Instance(int)> make) {
        return [n, make](const BindCtx&) {
            std::vector<Instance> out;
            for (int y = 1; y <= n; ++y) out.push_back(make(y));
            return out;
        };
    };

    defs.push_back({"corr_game_x", "corr", 1, 0, 0,
                    for_y([n](int y) -> Instance {
                        return {fmt_int("y", y),
                                expr_difference(A(axis_except(n, Pauli::X, y)),
                                                B(axis_except(n, Pauli::X, y)))};
                    })});
    // The y-row product matches the product of Bob's x- and z-row answers up
    // to a sign, so the residual is a sum rather than a difference.
    defs.push_back({"corr_game_y", "corr", 1, 0, 0,
                    for_y([n](int y) -> Instance {
                        ExprPtr bob =
                            n == 3 ? expr_product({B(axis_except(n, Pauli::X, y)),
                                                   B(axis_except(n, Pauli::Z, y))})
                                   : expr_product({B(axis_except(n, Pauli::Z, y)),
                                                   B(axis_except(n, Pauli::X, y))});
                        return {fmt_int("y", y),
                                plus(A(axis_except(n, Pauli::Y, y)), std::move(bob))};
                    })});
    defs.push_back({"corr_game_z", "corr", 1, 0, 0,
                    for_y([n](int y) -> Instance {
                        return {fmt_int("y", y),
                                expr_difference(A(axis_except(n, Pauli::Z, y)),
                                                B(axis_except(n, Pauli::Z, y)))};
                    })});
    defs.push_back({"corr_local_x", "corr", 0, 1, 0,
                    [n](const BindCtx& ctx) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i) {
                            ExprPtr a = A(axis_site(n, Pauli::X, i));
                            ExprPtr b = B(axis_site(n, Pauli::X, i));
                            ExprPtr e = ctx.inject_bug
                                            ? plus(std::move(a), std::move(b))
                                            : expr_difference(std::move(a), std::move(b));
                            out.push_back({fmt_int("i", i), std::move(e)});
                        }
                        return out;
                    }});
    defs.push_back({"corr_local_z", "corr", 0, 1, 0,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int j = 1; j <= n; ++j)
                            for (int y = 1; y <= n; ++y) {
                                if (y == j) continue;
                                out.push_back({fmt_int("j", j) + "," + fmt_int("y", y),
                                               expr_difference(A(axis_site(n, Pauli::Z, j)),
                                                               B(axis_site(n, Pauli::Z, j)))});
                            }
                        return out;
                    }});

    if (n > 3) {
        for (Pauli p : {Pauli::X, Pauli::Z}) {
            std::string nm = p == Pauli::X ? "corr_pair_x" : "corr_pair_z";
            defs.push_back({nm, "corr", 0, 0, 1,
                            [n, p](const BindCtx&) {
                                std::vector<Instance> out;
                                for (int i = 1; i <= n; ++i)
                                    for (int j = i + 1; j <= n; ++j)
                                        out.push_back(
                                            {fmt_int("i", i) + "," + fmt_int("j", j),
                                             expr_difference(A(axis_pair(n, p, i, j)),
                                                             B(axis_pair(n, p, i, j)))});
                                return out;
                            }});
        }
    }

    defs.push_back({"alice_comm", "comm", 0, 4, 0,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (Pauli m : {Pauli::X, Pauli::Z})
                            for (Pauli q : {Pauli::X, Pauli::Z})
                                for (int i = 1; i <= n; ++i)
                                    for (int j = i + 1; j <= n; ++j) {
                                        std::string lab =
                                            std::string("M=") +
                                            (m == Pauli::X ? "X" : "Z") + ",N=" +
                                            (q == Pauli::X ? "X" : "Z") + "," +
                                            fmt_int("i", i) + "," + fmt_int("j", j);
                                        out.push_back(
                                            {std::move(lab),
                                             expr_commutator(A(axis_site(n, m, i)),
                                                             A(axis_site(n, q, j)))});
                                    }
                        return out;
                    }});
    defs.push_back({"bob_comm_xx", "comm", 0, 4, 0,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            for (int j = i + 1; j <= n; ++j)
                                out.push_back({fmt_int("i", i) + "," + fmt_int("j", j),
                                               expr_commutator(B(axis_site(n, Pauli::X, i)),
                                                               B(axis_site(n, Pauli::X, j)))});
                        return out;
                    }});
    defs.push_back({"bob_comm_zz", "comm", 0, 4, 0,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            for (int j = i + 1; j <= n; ++j)
                                for (int k = 1; k <= n; ++k) {
                                    if (k == i) continue;
                                    for (int l = 1; l <= n; ++l) {
                                        if (l == j) continue;
                                        out.push_back(
                                            {fmt_int("i", i) + "," + fmt_int("j", j) + "," +
                                                 fmt_int("k", k) + "," + fmt_int("l", l),
                                             expr_commutator(B(axis_site(n, Pauli::Z, i)),
                                                             B(axis_site(n, Pauli::Z, j)))});
                                    }
                                }
                        return out;
                    }});
    defs.push_back({"bob_comm_xz", "comm", 0, 8, 0,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            for (int j = 1; j <= n; ++j) {
                                if (j == i) continue;
                                for (int l = 1; l <= n; ++l) {
                                    if (l == j) continue;
                                    out.push_back(
                                        {fmt_int("i", i) + "," + fmt_int("j", j) + "," +
                                             fmt_int("l", l),
                                         expr_commutator(B(axis_site(n, Pauli::X, i)),
                                                         B(axis_site(n, Pauli::Z, j)))});
                                }
                            }
                        return out;
                    }});

    const double a0 = n == 3 ? 9 : 3.0 * n;
    const double a1 = n == 3 ? 16 : 13.0 * (n - 1) / 2 + 17;
    const double a2 = n == 3 ? 0 : 2.0 * (n - 1);
    defs.push_back({"alice_anticomm", "anticomm", a0, a1, a2,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            out.push_back({fmt_int("i", i),
                                           expr_anticommutator(A(axis_site(n, Pauli::X, i)),
                                                               A(axis_site(n, Pauli::Z, i)))});
                        return out;
                    }});
    const double b1 = n == 3 ? 20 : 13.0 * (n - 1) / 2 + 21;
    defs.push_back({"bob_anticomm", "anticomm", a0, b1, a2,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            for (int j = 1; j <= n; ++j) {
                                if (j == i) continue;
                                out.push_back(
                                    {fmt_int("i", i) + "," + fmt_int("j", j),
                                     expr_anticommutator(B(axis_site(n, Pauli::X, i)),
                                                         B(axis_site(n, Pauli::Z, i)))});
                            }
                        return out;
                    }});

    if (n == 3) {
        defs.push_back({"alice_pair_anticomm", "anticomm", 9, 0, 0,
                        [n](const BindCtx&) {
                            std::vector<Instance> out;
                            for (int i = 1; i <= n; ++i)
                                for (int j = 1; j <= n; ++j)
                                    for (int k = 1; k <= n; ++k) {
                                        if (j == i || k == i || k == j) continue;
                                        out.push_back(
                                            {fmt_int("i", i) + "," + fmt_int("j", j) + "," +
                                                 fmt_int("k", k),
                                             expr_anticommutator(
                                                 A(axis_pair(n, Pauli::X, i, j)),
                                                 A(axis_pair(n, Pauli::Z, i, k)))});
                                    }
                            return out;
                        }});
        return defs;
    }

    // --- n >= 7: product-to-pair and permutation-chain entries --------------

    defs.push_back({"product_to_pair", "lemma", 0, 18, 4,
                    [n](const BindCtx&) {
                        std::vector<Instance> out;
                        for (int i = 1; i <= n; ++i)
                            for (int j = 1; j <= n; ++j)
                                for (int k = 1; k <= n; ++k)
                                    for (int l = 1; l <= n; ++l) {
                                        if (j == i || k == i || k == j || l == i ||
                                            l == j || l == k)
                                            continue;
                                        ExprPtr alice = expr_product(
                                            {A(axis_site(n, Pauli::X, l)),
                                             A(axis_site(n, Pauli::Z, l)),
                                             A(axis_site(n, Pauli::Z, k)),
                                             A(axis_site(n, Pauli::X, k)),
                                             A(axis_site(n, Pauli::X, j)),
                                             A(axis_site(n, Pauli::Z, j)),
                                             A(axis_site(n, Pauli::Z, i)),
                                             A(axis_site(n, Pauli::X, i))});
                                        ExprPtr bob = expr_product(
                                            {B(axis_pair(n, Pauli::X, i, k)),
                                             B(axis_pair(n, Pauli::Z, i, k)),
                                             B(axis_pair(n, Pauli::Z, j, l)),
                                             B(axis_pair(n, Pauli::X, j, l))});
                                        out.push_back(
                                            {fmt_int("i", i) + "," + fmt_int("j", j) + "," +
                                                 fmt_int("k", k) + "," + fmt_int("l", l),
                                             expr_difference(std::move(alice),
                                                             std::move(bob))});
                                    }
                        return out;
                    }});

    auto for_sigma = [](std::function<Instance(const std::vector<int>&)> make) {
        return [make](const BindCtx& ctx) {
            std::vector<Instance> out;
            for (const auto& s : ctx.sigmas) out.push_back(make(s));
            return out;
        };
    };

    defs.push_back(
        {"alice_to_pairs", "lemma", 0, 2.0 * n, n - 1.0,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             ExprPtr alice = expr_product({A(axis_except(n, Pauli::Z, s[n - 1])),
                                           A(axis_all(n, Pauli::X))});
             std::vector<ExprPtr> f;
             f.push_back(A(axis_site(n, Pauli::X, s[n - 1])));
             f.push_back(B(axis_pair(n, Pauli::X, s[0], s[1])));
             for (int k = 1; k <= (n - 3) / 4; ++k) {
                 f.push_back(B(axis_pair(n, Pauli::X, s[4 * k - 2], s[4 * k])));
                 f.push_back(B(axis_pair(n, Pauli::X, s[4 * k - 1], s[4 * k + 1])));
             }
             f.push_back(B(axis_pair(n, Pauli::Z, s[0], s[1])));
             for (int k = 1; k <= (n - 3) / 4; ++k) {
                 f.push_back(B(axis_pair(n, Pauli::Z, s[4 * k - 2], s[4 * k])));
                 f.push_back(B(axis_pair(n, Pauli::Z, s[4 * k - 1], s[4 * k + 1])));
             }
             return {sigma_label(s),
                     expr_difference(std::move(alice), expr_product(std::move(f)))};
         })});

    defs.push_back(
        {"chain_game_product", "chain", 1.0 * n, 0, 0,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             std::vector<ExprPtr> f;
             for (int k = 2; k <= n; ++k) {
                 f.push_back(B(axis_except(n, Pauli::Z, s[k - 1])));
                 f.push_back(B(axis_except(n, Pauli::X, s[k - 1])));
             }
             ExprPtr ref = expr_product({B(axis_except(n, Pauli::Z, s[0])),
                                         B(axis_except(n, Pauli::X, s[0]))});
             return {sigma_label(s), plus(expr_product(std::move(f)), std::move(ref))};
         })});

    defs.push_back(
        {"chain_shift", "chain", n + 2.0, 0, 0,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             std::vector<ExprPtr> f;
             for (int k = 2; k <= n - 1; ++k) {
                 f.push_back(B(axis_except(n, Pauli::Z, s[k - 1])));
                 f.push_back(B(axis_except(n, Pauli::X, s[k - 1])));
             }
             f.push_back(B(axis_except(n, Pauli::Z, s[n - 1])));
             f.push_back(A(axis_except(n, Pauli::X, s[n - 1])));
             ExprPtr ref = expr_product({B(axis_except(n, Pauli::Z, s[0])),
                                         A(axis_except(n, Pauli::X, s[0]))});
             return {sigma_label(s), plus(expr_product(std::move(f)), std::move(ref))};
         })});

    defs.push_back(
        {"alice_swap", "chain", 3.0 * n, 0, 0,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             std::vector<ExprPtr> f = swap_chain_factors(n, s);
             f.push_back(A(axis_site(n, Pauli::X, s[1])));
             ExprPtr ref = expr_product({A(axis_site(n, Pauli::X, s[n - 1])),
                                         A(axis_site(n, Pauli::X, s[0])),
                                         A(axis_site(n, Pauli::Z, s[0])),
                                         A(axis_site(n, Pauli::Z, s[1]))});
             return {sigma_label(s), plus(expr_product(std::move(f)), std::move(ref))};
         })});

    defs.push_back(
        {"check_swap", "chain", 0, 3, 2,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             ExprPtr left = expr_product({A(axis_site(n, Pauli::X, s[1])),
                                          B(axis_site(n, Pauli::Z, s[0])),
                                          B(axis_site(n, Pauli::Z, s[1])),
                                          B(axis_site(n, Pauli::X, s[n - 1])),
                                          B(axis_site(n, Pauli::X, s[0]))});
             ExprPtr right = expr_product({B(axis_site(n, Pauli::X, s[n - 1])),
                                           B(axis_pair(n, Pauli::Z, s[0], s[1])),
                                           B(axis_pair(n, Pauli::X, s[0], s[1]))});
             return {sigma_label(s), expr_difference(std::move(left), std::move(right))};
         })});

    defs.push_back(
        {"pair_estimate", "chain", 3.0 * n, 7, 2,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             std::vector<ExprPtr> f;
             f.push_back(B(axis_site(n, Pauli::X, s[n - 1])));
             f.push_back(B(axis_pair(n, Pauli::Z, s[0], s[1])));
             f.push_back(B(axis_pair(n, Pauli::X, s[0], s[1])));
             for (auto& g : swap_chain_factors(n, s)) f.push_back(std::move(g));
             return {sigma_label(s), plus(expr_product(std::move(f)),
                                          expr_product(swap_square(n, s)))};
         })});

    defs.push_back(
        {"paired_step", "chain", 3.0 * n, 9.0 * (n - 3) / 2 + 7, n - 1.0,
         for_sigma([n](const std::vector<int>& s) -> Instance {
             std::vector<ExprPtr> f;
             f.push_back(B(axis_site(n, Pauli::X, s[n - 1])));
             f.push_back(B(axis_pair(n, Pauli::Z, s[0], s[1])));
             f.push_back(B(axis_pair(n, Pauli::X, s[0], s[1])));
             append_pair_blocks(f, n, s, Pauli::X, Pauli::Z);
             f.push_back(A(axis_except(n, Pauli::Z, s[n - 1])));
             f.push_back(A(axis_all(n, Pauli::X)));
             return {sigma_label(s), plus(expr_product(std::move(f)),
                                          expr_product(swap_square(n, s)))};
         })});

    defs.push_back(
        {"x_collapse", "chain", 3.0 * n, 13.0 * (n - 1) / 2, 2.0 * (n - 1),
         for_sigma([n](const std::vector<int>& s) -> Instance {
             ExprPtr left = expr_product({A(axis_site(n, Pauli::X, s[n - 1])),
                                          B(axis_site(n, Pauli::X, s[n - 1]))});
             return {sigma_label(s),
                     plus(std::move(left), expr_product(swap_square(n, s)))};
         })});

    defs.push_back(
        {"pair_anticomm", "chain", 3.0 * n, 13.0 * (n - 1) / 2 + 1, 2.0 * (n - 1),
         for_sigma([n](const std::vector<int>& s) -> Instance {
             return {sigma_label(s),
                     expr_anticommutator(A(axis_pair(n, Pauli::X, s[0], s[n - 1])),
                                         A(axis_pair(n, Pauli::Z, s[0], s[1])))};
         })});

    return defs;
}

void validate_catalog_n(int n) {
    if (n != 3 && (n < 7 || n % 4 != 3))
        throw std::invalid_argument("bound catalog needs n = 3 or n = 3 (mod 4), n >= 7");
}

double rhs_value(const EntryDef& d, double e0, double e1, double e2) {
    return d.c0 * std::sqrt(2 * e0) + d.c1 * std::sqrt(2 * e1) + d.c2 * std::sqrt(2 * e2);
}

bool feeds_delta(const std::string& category) {
    return category == "corr" || category == "comm" || category == "anticomm";
}

std::string report_note(int n) {
    std::string note =
        "delta is the worst right-hand side over the correlation, commutation "
        "and anticommutation families; the state certificate consumes delta "
        "with a further constant of order n^(3/2) that is not evaluated here.";
    if (n == 3)
        note +=
            " The three-index anticommutator family is checked on Alice's "
            "game-round observables; prose descriptions of it sometimes say "
            "Bob's, and the Alice form is what is verified.";
    else
        note += " The ratio delta / (n sqrt(2 eps)) decreases toward 11.5 as n grows.";
    return note;
}

double report_theta(const NoiseModel& nm) {
    switch (nm.kind) {
        case NoiseModel::Kind::None:
            return 0;
        case NoiseModel::Kind::Uniform:
            return nm.theta;
        case NoiseModel::Kind::PerPair: {
            double worst = 0;
            for (double a : nm.angles)
                if (std::abs(a) > std::abs(worst)) worst = a;
            return worst;
        }
    }
    return 0;
}

std::vector<std::vector<int>> sigma_set(int n, int want, uint64_t seed) {
    std::vector<std::vector<int>> out;
    std::vector<int> id(n);
    std::iota(id.begin(), id.end(), 1);
    out.push_back(id);
    if (want > 1) {
        std::vector<int> rev(id.rbegin(), id.rend());
        out.push_back(std::move(rev));
    }
    RngStream rng(seed, 0, 3);
    while (static_cast<int>(out.size()) < want) {
        std::vector<int> s = id;
        for (size_t i = s.size() - 1; i > 0; --i) {
            size_t j = rng.integer(i + 1);
            std::swap(s[i], s[j]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void cap_instances(std::vector<Instance>& v, int cap, uint64_t seed, int family) {
    if (cap <= 0 || static_cast<int>(v.size()) <= cap) return;
    RngStream rng(seed, static_cast<uint64_t>(family), 2);
    for (int i = 0; i < cap; ++i) {
        size_t j = i + rng.integer(v.size() - i);
        std::swap(v[i], v[j]);
    }
    v.resize(cap);
}

}  // namespace

std::vector<std::pair<std::string, double>> correlation_members(const DeviceModel& dev) {
    if (dev.kind != DeviceKind::Honest)
        throw std::invalid_argument("correlation members need the honest strategy");
    const int n = dev.pairs;

    // Product observable behind one answer term of a Pauli-only plan.
    auto term_observable = [&](const MeasurePlan& plan, int index, int* sign) {
        const OutputTerm& t = plan.outputs.at(index);
        PauliString s = PauliString::identity(n);
        for (int f : t.factors) s *= plan.ops.at(f).pauli;
        *sign = t.sign;
        return s;
    };

    std::vector<std::pair<std::string, double>> out;
    char label[48];
    for (int y = 1; y <= n; ++y) {
        const MeasurePlan& game = dev.bob_plan(0, y);
        for (int x = 1; x <= 3; ++x) {
            const MeasurePlan& ap = dev.alice_plan(x);
            PauliString alice = PauliString::identity(n);
            int asign = 1;
            for (int k = 1; k <= n; ++k) {
                if (k == y) continue;
                int s = 1;
                alice *= term_observable(ap, k - 1, &s);
                asign *= s;
            }
            int bsign = 1;
            PauliString bob = term_observable(game, x - 1, &bsign);
            double corr =
                asign * bsign * bell_expectation(n, alice, bob, dev.noise);
            std::snprintf(label, sizeof label, "g:%d,%d", x, y);
            out.emplace_back(label, corr);
        }
    }

    for (int y = 1; y <= n; ++y) {
        const MeasurePlan& local = dev.bob_plan(1, y);
        const MeasurePlan& rowx = dev.alice_plan(1);
        const MeasurePlan& rowz = dev.alice_plan(3);
        for (int j = 1; j <= n; ++j) {
            int as = 1, bs = 1;
            if (j == y) {
                PauliString alice = term_observable(rowx, j - 1, &as);
                PauliString bob = term_observable(local, j - 1, &bs);
                std::snprintf(label, sizeof label, "X:%d", j);
                out.emplace_back(label,
                                 as * bs * bell_expectation(n, alice, bob, dev.noise));
            } else {
                PauliString alice = term_observable(rowz, j - 1, &as);
                PauliString bob = term_observable(local, j - 1, &bs);
                std::snprintf(label, sizeof label, "Z:%d@%d", j, y);
                out.emplace_back(label,
                                 as * bs * bell_expectation(n, alice, bob, dev.noise));
            }
        }
    }

    if (dev.has_pair_rounds()) {
        for (int y = 1; y <= n; ++y) {
            const MeasurePlan& pair = dev.bob_plan(2, y);
            auto edges = edges_of_color(n, y);
            const int half = static_cast<int>(edges.size());
            for (int e = 0; e < half; ++e) {
                auto [i, j] = edges[e];
                for (int row : {1, 3}) {
                    const MeasurePlan& ap = dev.alice_plan(row);
                    int s1 = 1, s2 = 1, bs = 1;
                    PauliString alice = term_observable(ap, i - 1, &s1);
                    alice *= term_observable(ap, j - 1, &s2);
                    int index = row == 1 ? e : half + e;
                    PauliString bob = term_observable(pair, index, &bs);
                    std::snprintf(label, sizeof label, "%s:%d,%d",
                                  row == 1 ? "XX" : "ZZ", i, j);
                    out.emplace_back(
                        label, s1 * s2 * bs * bell_expectation(n, alice, bob, dev.noise));
                }
            }
        }
    }
    return out;
}

ExactEpsilons exact_epsilons(const DeviceModel& dev) {
    ExactEpsilons eps;
    for (const auto& [label, corr] : correlation_members(dev)) {
        double deficit = std::max(0.0, 1.0 - corr);
        if (label[0] == 'g')
            eps.eps0 = std::max(eps.eps0, deficit);
        else if (label[1] == ':')
            eps.eps1 = std::max(eps.eps1, deficit);
        else
            eps.eps2 = std::max(eps.eps2, deficit);
    }
    return eps;
}

double state_estimate_bound(double eps) {
    if (eps < 0) throw std::invalid_argument("negative epsilon");
    return std::sqrt(2 * eps);
}

BoundReport bound_catalog(int n, double eps0, double eps1, double eps2) {
    validate_catalog_n(n);
    if (eps0 < 0 || eps1 < 0 || eps2 < 0)
        throw std::invalid_argument("negative epsilon");
    BoundReport rep;
    rep.n = n;
    rep.measured = false;
    rep.eps0 = eps0;
    rep.eps1 = eps1;
    rep.eps2 = eps2;
    rep.note = report_note(n);
    for (const EntryDef& d : entry_defs(n)) {
        BoundEntry e;
        e.name = d.name;
        e.category = d.category;
        e.c0 = d.c0;
        e.c1 = d.c1;
        e.c2 = d.c2;
        e.rhs = rhs_value(d, eps0, eps1, eps2);
        e.margin = e.rhs;
        e.pass = true;
        rep.entries.push_back(std::move(e));
        if (feeds_delta(d.category)) rep.delta = std::max(rep.delta, rep.entries.back().rhs);
    }
    rep.all_pass = true;
    return rep;
}

BoundReport ledger_verify(const DeviceModel& dev, const LedgerOptions& opts) {
    const int n = dev.pairs;
    if (n != 3 && n != 7 && n != 11)
        throw std::invalid_argument("norm ledger supports n in {3, 7, 11}");
    if (dev.kind != DeviceKind::Honest)
        throw std::invalid_argument("norm ledger needs the honest strategy");

    const ExactEpsilons eps = exact_epsilons(dev);
    const int cap = opts.max_instances > 0 ? opts.max_instances : (n <= 7 ? 0 : 24);

    BindCtx ctx;
    ctx.n = n;
    ctx.inject_bug = opts.inject_bug;
    ctx.sigmas = sigma_set(n, std::max(1, opts.sigma_samples), opts.sample_seed);

    std::vector<EntryDef> defs = entry_defs(n);
    struct Job {
        int entry;
        std::string label;
        ExprPtr expr;
    };
    std::vector<Job> jobs;
    std::vector<int> counts(defs.size(), 0);
    for (size_t d = 0; d < defs.size(); ++d) {
        std::vector<Instance> inst = defs[d].bind(ctx);
        cap_instances(inst, cap, opts.sample_seed, static_cast<int>(d));
        counts[d] = static_cast<int>(inst.size());
        for (Instance& one : inst)
            jobs.push_back({static_cast<int>(d), std::move(one.label), std::move(one.expr)});
    }

    SharedState st(n, dev.noise);
    std::vector<double> norms(jobs.size(), 0.0);
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    int nthreads = opts.threads > 0 ? opts.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    nthreads = std::clamp<int>(nthreads, 1, static_cast<int>(jobs.size()));
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= jobs.size() || failed.load()) return;
            try {
                norms[i] = norm_of(jobs[i].expr, st);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) std::rethrow_exception(error);

    BoundReport rep;
    rep.n = n;
    rep.measured = true;
    rep.theta = report_theta(dev.noise);
    rep.eps0 = eps.eps0;
    rep.eps1 = eps.eps1;
    rep.eps2 = eps.eps2;
    rep.note = report_note(n);
    rep.all_pass = true;
    for (size_t d = 0; d < defs.size(); ++d) {
        BoundEntry e;
        e.name = defs[d].name;
        e.category = defs[d].category;
        e.instances = counts[d];
        e.c0 = defs[d].c0;
        e.c1 = defs[d].c1;
        e.c2 = defs[d].c2;
        e.rhs = rhs_value(defs[d], eps.eps0, eps.eps1, eps.eps2);
        rep.entries.push_back(std::move(e));
    }
    for (size_t i = 0; i < jobs.size(); ++i) {
        BoundEntry& e = rep.entries[jobs[i].entry];
        if (norms[i] >= e.lhs) {
            e.lhs = norms[i];
            e.instance = jobs[i].label;
        }
    }
    for (BoundEntry& e : rep.entries) {
        e.margin = e.rhs - e.lhs;
        e.pass = e.margin >= -kMarginTolerance;
        rep.all_pass = rep.all_pass && e.pass;
        if (feeds_delta(e.category)) rep.delta = std::max(rep.delta, e.rhs);
    }
    return rep;
}

double final_robustness(int n, double eps) {
    return bound_catalog(n, eps, eps, eps).delta;
}

std::string bound_report_json(const BoundReport& rep) {
    json head{{"kind", "bound-report"},
              {"n", rep.n},
              {"measured", rep.measured},
              {"theta", rep.theta},
              {"eps0", rep.eps0},
              {"eps1", rep.eps1},
              {"eps2", rep.eps2},
              {"delta", rep.delta},
              {"all_pass", rep.all_pass},
              {"note", rep.note}};
    std::string out = head.dump();
    out += '\n';
    for (const BoundEntry& e : rep.entries) {
        json line{{"name", e.name},         {"category", e.category},
                  {"instance", e.instance}, {"instances", e.instances},
                  {"c0", e.c0},             {"c1", e.c1},
                  {"c2", e.c2},             {"lhs", e.lhs},
                  {"rhs", e.rhs},           {"margin", e.margin},
                  {"pass", e.pass}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

BoundReport bound_report_parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    BoundReport rep;
    bool have_head = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (!have_head) {
            if (j.value("kind", "") != "bound-report")
                throw std::invalid_argument("not a bound report");
            rep.n = j.at("n").get<int>();
            rep.measured = j.at("measured").get<bool>();
            rep.theta = j.at("theta").get<double>();
            rep.eps0 = j.at("eps0").get<double>();
            rep.eps1 = j.at("eps1").get<double>();
            rep.eps2 = j.at("eps2").get<double>();
            rep.delta = j.at("delta").get<double>();
            rep.all_pass = j.at("all_pass").get<bool>();
            rep.note = j.at("note").get<std::string>();
            have_head = true;
            continue;
        }
        BoundEntry e;
        e.name = j.at("name").get<std::string>();
        e.category = j.at("category").get<std::string>();
        e.instance = j.at("instance").get<std::string>();
        e.instances = j.at("instances").get<int>();
        e.c0 = j.at("c0").get<double>();
        e.c1 = j.at("c1").get<double>();
        e.c2 = j.at("c2").get<double>();
        e.lhs = j.at("lhs").get<double>();
        e.rhs = j.at("rhs").get<double>();
        e.margin = j.at("margin").get<double>();
        e.pass = j.at("pass").get<bool>();
        rep.entries.push_back(std::move(e));
    }
    if (!have_head) throw std::invalid_argument("empty bound report");
    return rep;
}

}  // namespace mr
