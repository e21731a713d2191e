#pragma once

#include <stdexcept>
#include <string>

namespace costknock {

/// Malformed or inconsistent caller input (dimension mismatches, bad values).
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

/// The requested knockoff construction admits no positive-semidefinite joint
/// law within the numerical repair budget.
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver exhausted its iteration budget before reaching the
/// requested tolerance.
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace costknock
