#include "gridmargin/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "gridmargin/foldanalysis.hpp"
#include "gridmargin/report.hpp"
#include "gridmargin/strength_pmr.hpp"
#include "gridmargin/strength_scr.hpp"

namespace gridmargin {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaseError("case file not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

OutputFormat parse_format(const std::string& s) {
    if (s == "table") return OutputFormat::Table;
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw CaseError("unknown format '" + s + "' (choose table, csv or json)");
}

std::vector<double> parse_lambda_grid(const std::string& s) {
    std::vector<double> grid;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        if (first == std::string::npos) throw CaseError("empty entry in --lambda-grid");
        const auto last = token.find_last_not_of(" \t");
        token = token.substr(first, last - first + 1);
        try {
            size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            grid.push_back(v);
        } catch (const std::exception&) {
            throw CaseError("bad number in --lambda-grid: '" + token + "'");
        }
    }
    if (grid.empty()) throw CaseError("--lambda-grid names no loading factors");
    return grid;
}

struct CliState {
    std::string case_path;
    int bus = 0;
    bool bus_given = false;

    double tolerance = 1e-8;
    int max_iter = 50;
    double step = 0.05;
    double bisection_tol = 1e-3;
    double cap = 20.0;
    std::string denominator = "nominal";
    std::string q_mode = "hold";
    bool with_trace = false;
    std::string format;  // empty = per-command default
    std::string output_path;
    std::string lambda_grid_text;
    bool include_study_transformer = false;

    SolveOptions solve_options() const { return SolveOptions{tolerance, max_iter}; }

    PmrOptions pmr_options() const {
        PmrOptions o;
        o.coarse_step_pu = step;
        o.bisection_tol_pu = bisection_tol;
        o.cap_multiple = cap;
        if (denominator == "nominal") {
            o.denominator_mode = DenominatorMode::Nominal;
        } else if (denominator == "actual") {
            o.denominator_mode = DenominatorMode::Actual;
        } else {
            throw CaseError("unknown denominator mode '" + denominator +
                            "' (choose nominal or actual)");
        }
        if (q_mode == "hold") {
            o.q_mode = QMode::HoldBaseQ;
        } else if (q_mode == "pf") {
            o.q_mode = QMode::ConstantPowerFactor;
        } else {
            throw CaseError("unknown q mode '" + q_mode + "' (choose hold or pf)");
        }
        o.solve = solve_options();
        return o;
    }

    OutputFormat format_or(OutputFormat fallback) const {
        return format.empty() ? fallback : parse_format(format);
    }

    int required_bus() const {
        if (!bus_given) throw CaseError("this command needs --bus");
        return bus;
    }
};

void add_common_options(CLI::App* sub, CliState& st) {
    sub->add_option("case", st.case_path, "case file (JSON)")->required();
    sub->add_option("--tolerance", st.tolerance, "mismatch tolerance (infinity norm)");
    sub->add_option("--max-iter", st.max_iter, "iteration limit per solve");
    sub->add_option("--format", st.format, "output format: table, csv or json");
    sub->add_option("--output", st.output_path, "write the report to this file");
}

void add_search_options(CLI::App* sub, CliState& st) {
    sub->add_option("--step", st.step, "coarse ramp step (p.u.)");
    sub->add_option("--bisection-tol", st.bisection_tol, "bracket width to stop at (p.u.)");
    sub->add_option("--cap", st.cap, "saturation cap as a multiple of the denominator");
    sub->add_option("--denominator", st.denominator, "rating denominator: nominal or actual");
    sub->add_option("--q-mode", st.q_mode, "ramp reactive policy: hold or pf");
    sub->add_flag("--trace", st.with_trace, "include every search probe in the report");
}

void emit(const CliState& st, std::ostream& out, const std::string& report) {
    if (st.output_path.empty()) {
        out << report;
        return;
    }
    std::ofstream f(st.output_path, std::ios::binary);
    if (!f) throw CaseError("cannot write output file: " + st.output_path);
    f << report;
}

std::string control_type_label(const Network& net, int bus) {
    const Plant* plant = net.plant_at(bus);
    return plant ? to_string(plant->control_type) : "none";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"grid strength screening: power flow, short-circuit ratio, power margin "
                 "ratio and loadability-limit analysis",
                 "gridmargin"};
    app.require_subcommand(1);
    CliState st;

    CLI::App* c_solve = app.add_subcommand("solve", "solve the base operating point");
    add_common_options(c_solve, st);

    CLI::App* c_scr = app.add_subcommand("scr", "short-circuit ratio at a bus");
    add_common_options(c_scr, st);
    c_scr->add_option("--bus", st.bus, "study bus id");
    c_scr->add_flag("--include-study-transformer", st.include_study_transformer,
                    "measure at the plant terminal instead of past its transformer");

    CLI::App* c_pmr = app.add_subcommand("pmr", "power margin ratio at a bus");
    add_common_options(c_pmr, st);
    add_search_options(c_pmr, st);
    c_pmr->add_option("--bus", st.bus, "study bus id");

    CLI::App* c_sweep = app.add_subcommand("sweep", "SCR and PMR for every plant bus");
    add_common_options(c_sweep, st);
    add_search_options(c_sweep, st);
    c_sweep->add_flag("--include-study-transformer", st.include_study_transformer,
                      "measure at the plant terminal instead of past its transformer");

    CLI::App* c_fold = app.add_subcommand("fold", "loadability limit point at a bus");
    add_common_options(c_fold, st);
    add_search_options(c_fold, st);
    c_fold->add_option("--bus", st.bus, "study bus id");

    CLI::App* c_curve =
        app.add_subcommand("distance-curve", "solution-pair distance vs loading margin");
    add_common_options(c_curve, st);
    add_search_options(c_curve, st);
    c_curve->add_option("--bus", st.bus, "study bus id");
    c_curve->add_option("--lambda-grid", st.lambda_grid_text,
                        "comma-separated loading factors in [-1, 0]");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    st.bus_given = (c_scr->count("--bus") != 0u) || (c_pmr->count("--bus") != 0u) ||
                   (c_fold->count("--bus") != 0u) || (c_curve->count("--bus") != 0u);

    try {
        const Network net = parse_case(read_file(st.case_path));

        if (app.got_subcommand(c_solve)) {
            const TypedNetwork tn = assign_base_types(net);
            const PowerFlowSolution sol = solve(tn, std::nullopt, st.solve_options());
            emit(st, out, format_solution(tn, sol, st.format_or(OutputFormat::Table)));
            if (!sol.converged) {
                err << "error: base power flow did not converge\n";
                return 1;
            }
            return 0;
        }

        if (app.got_subcommand(c_scr)) {
            const int bus = st.required_bus();
            const Plant* plant = net.plant_at(bus);
            if (!plant) throw CaseError("no plant at bus " + std::to_string(bus));
            StrengthRow row;
            row.bus = bus;
            row.control_type = to_string(plant->control_type);
            row.scr = scr(net, bus, plant->p_nominal_pu, !st.include_study_transformer);
            emit(st, out,
                 format_strength({row}, st.format_or(OutputFormat::Table), st.with_trace));
            return 0;
        }

        if (app.got_subcommand(c_pmr)) {
            const int bus = st.required_bus();
            StrengthRow row;
            row.bus = bus;
            row.control_type = control_type_label(net, bus);
            row.pmr = pmr(net, bus, st.pmr_options());
            emit(st, out,
                 format_strength({row}, st.format_or(OutputFormat::Table), st.with_trace));
            return 0;
        }

        if (app.got_subcommand(c_sweep)) {
            std::vector<int> plant_buses;
            for (const auto& p : net.plants) {
                if (p.control_type != ControlType::InfiniteBus) plant_buses.push_back(p.bus);
            }
            std::sort(plant_buses.begin(), plant_buses.end());
            std::vector<StrengthRow> rows;
            for (int bus : plant_buses) {
                StrengthRow row;
                row.bus = bus;
                row.control_type = control_type_label(net, bus);
                const Plant* plant = net.plant_at(bus);
                try {
                    row.scr = scr(net, bus, plant->p_nominal_pu, !st.include_study_transformer);
                } catch (const StudyError& e) {
                    err << "note: no SCR for bus " << bus << ": " << e.what() << '\n';
                }
                try {
                    row.pmr = pmr(net, bus, st.pmr_options());
                } catch (const StudyError& e) {
                    err << "note: no PMR for bus " << bus << ": " << e.what() << '\n';
                }
                rows.push_back(row);
            }
            emit(st, out,
                 format_strength(rows, st.format_or(OutputFormat::Table), st.with_trace));
            return 0;
        }

        if (app.got_subcommand(c_fold)) {
            const FoldStudy study = run_fold_study(net, st.required_bus(), st.pmr_options());
            emit(st, out, format_fold(study, st.format_or(OutputFormat::Table)));
            return 0;
        }

        if (app.got_subcommand(c_curve)) {
            const int bus = st.required_bus();
            const std::vector<double> grid =
                st.lambda_grid_text.empty()
                    ? std::vector<double>{-0.3, -0.2, -0.1, -0.05, -0.02, -0.01}
                    : parse_lambda_grid(st.lambda_grid_text);
            const FoldStudy study = run_fold_study(net, bus, st.pmr_options());
            const std::vector<DistancePoint> curve =
                distance_curve(study, grid, st.solve_options());
            emit(st, out, format_distance_curve(curve, st.format_or(OutputFormat::Csv)));
            return 0;
        }
    } catch (const CaseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const StudyError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace gridmargin
