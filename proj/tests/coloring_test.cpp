// Edge coloring of K_n: exhaustive partition checks for odd n.

#include <set>
#include <stdexcept>
#include <utility>

#include "doctest.h"
#include "magicrect/coloring.hpp"

using namespace mr;

TEST_CASE("color classes partition the edges of K_n for odd n up to 101") {
    for (int n = 3; n <= 101; n += 2) {
        CAPTURE(n);
        std::set<std::pair<int, int>> seen;
        for (int v = 1; v <= n; ++v) {
            const auto edges = edges_of_color(n, v);
            REQUIRE(int(edges.size()) == (n - 1) / 2);
            std::set<int> touched;
            for (const auto& [a, b] : edges) {
                CHECK(a < b);
                CHECK(1 <= a);
                CHECK(b <= n);
                // The class of color v is a perfect matching avoiding v.
                CHECK(a != v);
                CHECK(b != v);
                CHECK(touched.insert(a).second);
                CHECK(touched.insert(b).second);
                CHECK(seen.insert({a, b}).second);
                CHECK(edge_color(n, a, b) == v);
                CHECK(edge_color(n, b, a) == v);
            }
        }
        CHECK(int(seen.size()) == n * (n - 1) / 2);
        CHECK(coloring_is_proper(n));
    }
}

TEST_CASE("the n=7 classes match the frozen schedule") {
    using E = std::vector<std::pair<int, int>>;
    CHECK(edges_of_color(7, 1) == E{{2, 7}, {3, 6}, {4, 5}});
    CHECK(edges_of_color(7, 2) == E{{1, 3}, {4, 7}, {5, 6}});
    CHECK(edges_of_color(7, 3) == E{{2, 4}, {1, 5}, {6, 7}});
    CHECK(edges_of_color(7, 4) == E{{3, 5}, {2, 6}, {1, 7}});
    CHECK(edges_of_color(7, 5) == E{{4, 6}, {3, 7}, {1, 2}});
    CHECK(edges_of_color(7, 6) == E{{5, 7}, {1, 4}, {2, 3}});
    CHECK(edges_of_color(7, 7) == E{{1, 6}, {2, 5}, {3, 4}});
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(edge_color(4, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(edge_color(1, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(edge_color(7, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(edge_color(7, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(edge_color(7, 1, 8), std::invalid_argument);
    CHECK_THROWS_AS(edges_of_color(7, 0), std::invalid_argument);
    CHECK_THROWS_AS(edges_of_color(7, 8), std::invalid_argument);
    CHECK_THROWS_AS(edges_of_color(6, 1), std::invalid_argument);
}
