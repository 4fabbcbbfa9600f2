#pragma once

// Exact n-qubit Pauli string algebra. Letters are stored as per-site X/Z bits
// and the global phase as a power of i, so products, commutation checks and
// text round-trips are integer-exact.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mr {

enum class Pauli : uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

struct PauliString {
    std::vector<uint8_t> x, z;  // one bit per site; Y has both set
    uint8_t k = 0;              // global phase i^k, k in {0,1,2,3}

    PauliString() = default;
    explicit PauliString(std::size_t sites) : x(sites, 0), z(sites, 0) {}

    static PauliString identity(std::size_t sites) { return PauliString(sites); }
    // Single letter p at 1-based site q of an otherwise-identity string.
    static PauliString single(std::size_t sites, std::size_t q, Pauli p);
    // Parse "<phase> <letters>" such as "-i XIZ"; the phase token is optional.
    static PauliString parse(std::string_view text);

    std::size_t sites() const { return x.size(); }
    Pauli at(std::size_t q) const;        // 1-based
    void set(std::size_t q, Pauli p);     // 1-based
    std::complex<double> phase() const;
    bool hermitian() const { return k == 0 || k == 2; }
    bool identity_letters() const;
    int weight() const;                   // number of non-identity sites

    PauliString& operator*=(const PauliString& rhs);
    friend PauliString operator*(PauliString lhs, const PauliString& rhs) {
        lhs *= rhs;
        return lhs;
    }

    bool commutes_with(const PauliString& other) const;
    std::string str() const;

    // Row-major 2^sites x 2^sites matrix; intended for small oracle checks.
    std::vector<std::complex<double>> dense() const;

    bool operator==(const PauliString&) const = default;
};

}  // namespace mr
