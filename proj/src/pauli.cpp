#include "magicrect/pauli.hpp"

#include <array>
#include <cctype>
#include <stdexcept>

namespace mr {

namespace {

// letter code from bits: I=0, X=1, Y=2, Z=3
inline int code(uint8_t xb, uint8_t zb) {
    if (xb && zb) return 2;
    if (xb) return 1;
    if (zb) return 3;
    return 0;
}

// phase_table[a][b] = t with A*B = i^t * C sitewise, e.g. X*Y = i Z, Y*X = -i Z.
constexpr std::array<std::array<uint8_t, 4>, 4> phase_table = {{
    {0, 0, 0, 0},  // I*
    {0, 0, 1, 3},  // X*: XY=iZ, XZ=-iY
    {0, 3, 0, 1},  // Y*: YX=-iZ, YZ=iX
    {0, 1, 3, 0},  // Z*: ZX=iY, ZY=-iX
}};

constexpr char letter_chars[5] = "IXYZ";

}  // namespace

PauliString PauliString::single(std::size_t sites, std::size_t q, Pauli p) {
    PauliString s(sites);
    s.set(q, p);
    return s;
}

Pauli PauliString::at(std::size_t q) const {
    if (q < 1 || q > sites()) throw std::out_of_range("pauli site index");
    return static_cast<Pauli>(code(x[q - 1], z[q - 1]));
}

void PauliString::set(std::size_t q, Pauli p) {
    if (q < 1 || q > sites()) throw std::out_of_range("pauli site index");
    x[q - 1] = (p == Pauli::X || p == Pauli::Y) ? 1 : 0;
    z[q - 1] = (p == Pauli::Z || p == Pauli::Y) ? 1 : 0;
}

std::complex<double> PauliString::phase() const {
    switch (k & 3) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

bool PauliString::identity_letters() const {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] || z[i]) return false;
    return true;
}

int PauliString::weight() const {
    int w = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] || z[i]) ++w;
    return w;
}

PauliString& PauliString::operator*=(const PauliString& rhs) {
    if (sites() != rhs.sites()) throw std::invalid_argument("pauli size mismatch");
    int t = k + rhs.k;
    for (std::size_t i = 0; i < x.size(); ++i) {
        t += phase_table[code(x[i], z[i])][code(rhs.x[i], rhs.z[i])];
        x[i] ^= rhs.x[i];
        z[i] ^= rhs.z[i];
    }
    k = static_cast<uint8_t>(t & 3);
    return *this;
}

bool PauliString::commutes_with(const PauliString& other) const {
    if (sites() != other.sites()) throw std::invalid_argument("pauli size mismatch");
    // Strings commute iff the number of sites with anticommuting letters is even.
    int anti = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        anti += (x[i] & other.z[i]) ^ (z[i] & other.x[i]);
    return (anti & 1) == 0;
}

std::string PauliString::str() const {
    static const char* tokens[4] = {"+1", "+i", "-1", "-i"};
    std::string out = tokens[k & 3];
    out += ' ';
    for (std::size_t i = 0; i < x.size(); ++i) out += letter_chars[code(x[i], z[i])];
    return out;
}

PauliString PauliString::parse(std::string_view text) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    skip_ws();
    if (pos == text.size()) throw std::invalid_argument("empty pauli string");

    int k = 0;
    bool neg = false;
    if (text[pos] == '+' || text[pos] == '-') {
        neg = text[pos] == '-';
        ++pos;
    }
    if (pos < text.size() && (text[pos] == '1' || text[pos] == 'i')) {
        if (text[pos] == 'i') k = 1;
        ++pos;
    }
    if (neg) k += 2;
    skip_ws();

    PauliString out;
    for (; pos < text.size(); ++pos) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[pos])));
        if (std::isspace(static_cast<unsigned char>(c))) break;
        Pauli p;
        switch (c) {
            case 'I':
            case '_': p = Pauli::I; break;
            case 'X': p = Pauli::X; break;
            case 'Y': p = Pauli::Y; break;
            case 'Z': p = Pauli::Z; break;
            default: throw std::invalid_argument("bad pauli letter in \"" + std::string(text) + "\"");
        }
        out.x.push_back(p == Pauli::X || p == Pauli::Y);
        out.z.push_back(p == Pauli::Z || p == Pauli::Y);
    }
    skip_ws();
    if (pos != text.size()) throw std::invalid_argument("trailing characters in pauli string");
    if (out.sites() == 0) throw std::invalid_argument("pauli string has no letters");
    out.k = static_cast<uint8_t>(k & 3);
    return out;
}

std::vector<std::complex<double>> PauliString::dense() const {
    if (sites() > 12) throw std::invalid_argument("dense() limited to 12 sites");
    const std::size_t dim = std::size_t{1} << sites();
    std::vector<std::complex<double>> m(dim * dim, 0.0);
    uint64_t xmask = 0, zmask = 0;
    int ny = 0;
    for (std::size_t i = 0; i < sites(); ++i) {
        // site i maps to bit i (LSB first)
        if (x[i]) xmask |= uint64_t{1} << i;
        if (z[i]) zmask |= uint64_t{1} << i;
        if (x[i] && z[i]) ++ny;
    }
    std::complex<double> base = phase();
    for (int t = 0; t < (ny & 3); ++t) base *= std::complex<double>(0, 1);
    for (std::size_t col = 0; col < dim; ++col) {
        std::size_t row = col ^ xmask;
        double sign = (__builtin_popcountll(col & zmask) & 1) ? -1.0 : 1.0;
        m[row * dim + col] = base * sign;
    }
    return m;
}

}  // namespace mr
