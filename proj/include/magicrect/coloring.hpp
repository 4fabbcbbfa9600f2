#pragma once

// Proper edge coloring of the complete graph K_n for odd n, used to schedule
// pair checks: the edges of color v are exactly the pairs {v-i, v+i} mod n,
// so each input v tests (n-1)/2 disjoint pairs and every pair is covered by
// exactly one input.

#include <utility>
#include <vector>

namespace mr {

// Color in {1..n} of edge {a,b} of K_n (vertices 1..n, a != b, n odd).
int edge_color(int n, int a, int b);

// The (n-1)/2 edges of color v, each as an ordered pair (min, max).
std::vector<std::pair<int, int>> edges_of_color(int n, int v);

// Exhaustively checks that edge_color/edges_of_color form a proper edge
// coloring partitioning all of K_n's edges. Returns true when consistent.
bool coloring_is_proper(int n);

}  // namespace mr
