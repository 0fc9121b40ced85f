#pragma once

#include <stdexcept>
#include <string>

namespace gridmargin {

// Input-side failures: unreadable or structurally invalid case data, bad
// request configuration (unknown bus, invalid option combination).
// The CLI maps these to exit code 2.
class CaseError : public std::runtime_error {
public:
    explicit CaseError(const std::string& what) : std::runtime_error(what) {}
};

// Analysis-side failures: non-convergent base case, degenerate fold,
// saturated search where a fold is required, numerical checks that cannot
// be satisfied. The CLI maps these to exit code 1.
class StudyError : public std::runtime_error {
public:
    explicit StudyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gridmargin
