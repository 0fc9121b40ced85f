#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridmargin/foldanalysis.hpp"
#include "gridmargin/strength_pmr.hpp"
#include "gridmargin/strength_scr.hpp"

namespace gridmargin {

enum class OutputFormat { Table, Csv, Json };

// One strength row: a bus with its SCR and/or PMR halves. Columns absent from
// a half are left empty in table/CSV output.
struct StrengthRow {
    int bus = 0;
    std::string control_type;
    std::optional<ScrResult> scr;
    std::optional<PmrResult> pmr;
};

// Numeric policy: fixed 4 decimal places in tables and CSV (singular values
// use scientific notation to stay legible); JSON keeps full precision so a
// re-parse reproduces every field exactly.
std::string format_solution(const TypedNetwork& tn, const PowerFlowSolution& sol,
                            OutputFormat format);
std::string format_strength(const std::vector<StrengthRow>& rows, OutputFormat format,
                            bool with_trace);
std::string format_fold(const FoldStudy& study, OutputFormat format);
std::string format_distance_curve(const std::vector<DistancePoint>& curve,
                                  OutputFormat format);

}  // namespace gridmargin
