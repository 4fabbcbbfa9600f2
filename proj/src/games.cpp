#include "magicrect/games.hpp"

#include <numeric>
#include <stdexcept>

namespace mr {

namespace {

bool all_signs(const std::vector<int>& v) {
    for (int s : v)
        if (s != 1 && s != -1) return false;
    return true;
}

int product(const std::vector<int>& v) {
    int p = 1;
    for (int s : v) p *= s;
    return p;
}

}  // namespace

bool RectangleGame::valid() const {
    if (alpha.empty() || beta.empty()) return false;
    if (!all_signs(alpha) || !all_signs(beta)) return false;
    return product(alpha) * product(beta) == -1;
}

RectangleGame RectangleGame::three_by(int n) {
    if (n < 1 || n % 2 == 0) throw std::invalid_argument("3 x n games need odd n");
    RectangleGame g;
    g.alpha.assign(3, 1);
    g.beta.assign(n, -1);
    return g;
}

std::string Fraction::str() const {
    return std::to_string(num) + "/" + std::to_string(den);
}

Fraction classical_value(const RectangleGame& game) {
    if (!game.valid()) throw std::invalid_argument("invalid magic rectangle game");
    const int m = game.rows(), n = game.cols();
    if ((m - 1) * n > 24)
        throw std::invalid_argument("game too large for exact enumeration");

    // Enumerate Bob's deterministic strategies: a valid column fill per input
    // y. For each, Alice's rows are independent; she matches all n columns
    // when her row-product constraint allows it and n-1 otherwise.
    const uint64_t per_col = uint64_t{1} << (m - 1);
    uint64_t total = 1;
    for (int y = 0; y < n; ++y) total *= per_col;

    std::vector<std::vector<int>> cols(n, std::vector<int>(m));
    long long best_wins = 0;
    for (uint64_t strat = 0; strat < total; ++strat) {
        uint64_t rest = strat;
        for (int y = 0; y < n; ++y) {
            uint64_t bits = rest % per_col;
            rest /= per_col;
            int prod = 1;
            for (int i = 0; i < m - 1; ++i) {
                cols[y][i] = (bits >> i) & 1 ? -1 : 1;
                prod *= cols[y][i];
            }
            cols[y][m - 1] = game.beta[y] * prod;
        }
        long long wins = 0;
        for (int x = 0; x < m; ++x) {
            int prod = 1;
            for (int y = 0; y < n; ++y) prod *= cols[y][x];
            wins += prod == game.alpha[x] ? n : n - 1;
        }
        if (wins > best_wins) best_wins = wins;
    }

    long long den = static_cast<long long>(m) * n;
    long long g = std::gcd(best_wins, den);
    return {best_wins / g, den / g};
}

bool three_by_n_wins(int n, int x, int y, const std::vector<int>& a,
                     const std::vector<int>& b) {
    if (n < 1 || n % 2 == 0) throw std::invalid_argument("3 x n games need odd n");
    if (x < 1 || x > 3 || y < 1 || y > n) throw std::invalid_argument("bad game inputs");
    // Malformed answers are losses, not errors: the referee scores them 0.
    if (static_cast<int>(a.size()) != n || !all_signs(a)) return false;
    if (b.size() != 3 || !all_signs(b) || product(b) != -1) return false;
    int p = 1;
    for (int k = 1; k <= n; ++k)
        if (k != y) p *= a[k - 1];
    return p == b[x - 1];
}

}  // namespace mr
