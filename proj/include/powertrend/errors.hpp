#pragma once

#include <stdexcept>
#include <string>

namespace powertrend {

// Base class for all numerical / domain failures raised by the library.
// Input-validation problems use std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Scaled normal-equation system exceeded the condition threshold:
// the candidate exponents are too close together for this lattice.
class NearSingularGram : public Error {
public:
    explicit NearSingularGram(const std::string& msg) : Error(msg) {}
};

// Fewer observations than the fit needs (N <= 2p).
class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& msg) : Error(msg) {}
};

// Every feasible coarse-grid candidate raised NearSingularGram.
class AllGridPointsSingular : public Error {
public:
    explicit AllGridPointsSingular(const std::string& msg) : Error(msg) {}
};

// Upsilon failed its positive-definiteness check.
class DegenerateUpsilon : public Error {
public:
    explicit DegenerateUpsilon(const std::string& msg) : Error(msg) {}
};

// A closed-form inverse denominator fell below tolerance; caller should
// fall back to a generic solve.
class FormulaSingularity : public Error {
public:
    explicit FormulaSingularity(const std::string& msg) : Error(msg) {}
};

// Zero restrictions on coefficients are not testable in this model.
class ZeroNullForBeta : public Error {
public:
    explicit ZeroNullForBeta(const std::string& msg) : Error(msg) {}
};

// Autocovariance bandwidth must satisfy m_i < n_i in every dimension.
class BandwidthTooLarge : public Error {
public:
    explicit BandwidthTooLarge(const std::string& msg) : Error(msg) {}
};

}  // namespace powertrend
