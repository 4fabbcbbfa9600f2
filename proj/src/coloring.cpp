#include "magicrect/coloring.hpp"

#include <set>
#include <stdexcept>

namespace mr {

namespace {

void check_n(int n) {
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("coloring needs odd n >= 3");
}

}  // namespace

int edge_color(int n, int a, int b) {
    check_n(n);
    if (a < 1 || a > n || b < 1 || b > n || a == b)
        throw std::invalid_argument("edge endpoints must be distinct vertices in 1..n");
    // (a+b)/2 mod n, with division by 2 realized as multiplication by the
    // inverse (n+1)/2. An edge {v-i, v+i} then gets color v.
    int c = static_cast<int>((static_cast<long long>(a + b) * ((n + 1) / 2)) % n);
    return c == 0 ? n : c;
}

std::vector<std::pair<int, int>> edges_of_color(int n, int v) {
    check_n(n);
    if (v < 1 || v > n) throw std::invalid_argument("color must be in 1..n");
    std::vector<std::pair<int, int>> out;
    out.reserve((n - 1) / 2);
    for (int i = 1; i <= (n - 1) / 2; ++i) {
        int a = (v - i) % n;
        if (a <= 0) a += n;
        int b = (v + i) % n;
        if (b <= 0) b += n;
        out.emplace_back(std::min(a, b), std::max(a, b));
    }
    return out;
}

bool coloring_is_proper(int n) {
    check_n(n);
    // Every edge appears in exactly one color class, classes match
    // edge_color, and no vertex repeats within a class.
    std::set<std::pair<int, int>> seen;
    for (int v = 1; v <= n; ++v) {
        std::set<int> vertices;
        for (auto [a, b] : edges_of_color(n, v)) {
            if (edge_color(n, a, b) != v) return false;
            if (!vertices.insert(a).second || !vertices.insert(b).second) return false;
            if (!seen.insert({a, b}).second) return false;
        }
    }
    return seen.size() == static_cast<std::size_t>(n) * (n - 1) / 2;
}

}  // namespace mr
