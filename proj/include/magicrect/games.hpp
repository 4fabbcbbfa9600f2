#pragma once

// Magic rectangle games: an m x n game is fixed by row signs alpha and column
// signs beta whose total product is -1. Alice fills her assigned row with
// product alpha[x], Bob fills his column with product beta[y], and they win
// when the shared cell matches. The 3 x n form used by the self-test instead
// lets Alice answer n free bits a_1..a_n, scores her row as the products
// p_j = prod_{k != j} a_k, and requires Bob's triple to multiply to -1.

#include <cstdint>
#include <string>
#include <vector>

namespace mr {

struct RectangleGame {
    std::vector<int> alpha;  // row signs, size m
    std::vector<int> beta;   // column signs, size n

    int rows() const { return static_cast<int>(alpha.size()); }
    int cols() const { return static_cast<int>(beta.size()); }
    bool valid() const;

    // The 3 x n game with all-positive rows and all-negative columns (n odd).
    static RectangleGame three_by(int n);
    static RectangleGame magic_square() { return three_by(3); }
};

// Exact classical (deterministic-strategy) value of the game under uniform
// inputs, as a reduced fraction.
struct Fraction {
    long long num = 0, den = 1;
    bool operator==(const Fraction&) const = default;
    std::string str() const;
};

Fraction classical_value(const RectangleGame& game);

// Referee decision for one 3 x n round: Alice answers a (n entries of +/-1),
// Bob answers b (3 entries multiplying to -1). Malformed answers lose.
bool three_by_n_wins(int n, int x, int y, const std::vector<int>& a,
                     const std::vector<int>& b);

}  // namespace mr
