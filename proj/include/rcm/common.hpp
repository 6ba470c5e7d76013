#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcm {

using Vertex = std::int64_t;

inline constexpr const char* kFormatVersion = "1";

// Error taxonomy. The CLI maps these onto exit codes: usage/parameter -> 2,
// resource -> 3, everything else that fails a check -> 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct HorizonError : Error {
    using Error::Error;
};
struct ResourceError : Error {
    using Error::Error;
};
struct UnsupportedTopologyError : Error {
    using Error::Error;
};
struct BoundaryError : Error {
    using Error::Error;
};
struct DegenerateDecompositionError : Error {
    using Error::Error;
};
struct NoBridgeError : Error {
    using Error::Error;
};
struct BudgetError : Error {
    using Error::Error;
};
struct ErgodicityError : Error {
    using Error::Error;
};
struct InsufficientTraceError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};

// Neumaier compensated accumulator; keeps mass-balance checks tight at 1e-12
// even over long supports.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

inline double kahan_total(const std::vector<double>& vals) {
    KahanSum s;
    for (double v : vals) s.add(v);
    return s.value();
}

}  // namespace rcm
