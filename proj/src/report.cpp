#include "gridmargin/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace gridmargin {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kRadToDeg = 57.29577951308232;

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string sci4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4e", v);
    return buf;
}

std::string pad(const std::string& s, size_t width, bool left_align = false) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return left_align ? s + fill : fill + s;
}

const char* to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::Sep: return "sep";
        case StabilityClass::Uep: return "uep";
        case StabilityClass::Unknown: return "unknown";
    }
    return "?";
}

const char* to_string(DenominatorMode m) {
    return m == DenominatorMode::Nominal ? "nominal" : "actual";
}

ordered_json json_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

ordered_json scr_to_json(const ScrResult& r) {
    ordered_json j;
    j["z_th_pu"] = r.z_th_pu;
    j["scc_pu"] = r.scc_pu;
    j["p_nom_pu"] = r.p_nom_pu;
    j["scr"] = r.scr;
    j["excluded_elements"] = r.excluded_elements;
    return j;
}

ordered_json pmr_to_json(const PmrResult& r, bool with_trace) {
    ordered_json j;
    j["p_max_pu"] = r.p_max_pu;
    j["denominator_pu"] = r.denominator_pu;
    j["pmr"] = r.pmr;
    j["saturated"] = r.saturated;
    j["denominator_mode"] = to_string(r.denominator_mode);
    j["study_role"] = gridmargin::to_string(r.study_role);
    j["iterations_total"] = r.iterations_total;
    j["bracket_fail_pu"] = json_or_null(r.bracket_fail_pu);
    j["report_offset_pu"] = r.report_offset_pu;
    if (with_trace) {
        j["search_trace"] = ordered_json::array();
        for (const auto& t : r.search_trace) {
            j["search_trace"].push_back(
                {{"p_pu", t.p_pu}, {"converged", t.converged}, {"iterations", t.iterations}});
        }
    }
    return j;
}

}  // namespace

std::string format_solution(const TypedNetwork& tn, const PowerFlowSolution& sol,
                            OutputFormat format) {
    const Network& net = tn.network;
    const int n = tn.n_buses();

    if (format == OutputFormat::Json) {
        ordered_json j;
        j["buses"] = ordered_json::array();
        for (int i = 0; i < n; ++i) {
            ordered_json jb;
            jb["bus"] = net.buses[i].id;
            jb["name"] = net.buses[i].name;
            jb["role"] = to_string(tn.role[i]);
            jb["v_pu"] = sol.state.v(i);
            jb["angle_rad"] = sol.state.theta(i);
            jb["angle_deg"] = sol.state.theta(i) * kRadToDeg;
            jb["p_pu"] = sol.p_injection(i);
            jb["q_pu"] = sol.q_injection(i);
            j["buses"].push_back(jb);
        }
        j["iterations"] = sol.iterations;
        j["final_mismatch"] = sol.final_mismatch;
        j["converged"] = sol.converged;
        j["classification"] = to_string(sol.classification);
        return j.dump(2) + "\n";
    }

    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "bus,name,role,v_pu,angle_deg,p_pu,q_pu\n";
        for (int i = 0; i < n; ++i) {
            out << net.buses[i].id << ',' << net.buses[i].name << ',' << to_string(tn.role[i])
                << ',' << fixed4(sol.state.v(i)) << ',' << fixed4(sol.state.theta(i) * kRadToDeg)
                << ',' << fixed4(sol.p_injection(i)) << ',' << fixed4(sol.q_injection(i))
                << '\n';
        }
        return out.str();
    }

    out << pad("bus", 4) << "  " << pad("name", 10, true) << "  " << pad("role", 6, true)
        << pad("v_pu", 9) << pad("angle_deg", 11) << pad("p_pu", 10) << pad("q_pu", 10) << '\n';
    for (int i = 0; i < n; ++i) {
        out << pad(std::to_string(net.buses[i].id), 4) << "  " << pad(net.buses[i].name, 10, true)
            << "  " << pad(to_string(tn.role[i]), 6, true) << pad(fixed4(sol.state.v(i)), 9)
            << pad(fixed4(sol.state.theta(i) * kRadToDeg), 11)
            << pad(fixed4(sol.p_injection(i)), 10) << pad(fixed4(sol.q_injection(i)), 10) << '\n';
    }
    out << (sol.converged ? "converged" : "NOT converged") << " after " << sol.iterations
        << " iterations, max mismatch " << sci4(sol.final_mismatch)
        << ", classification: " << to_string(sol.classification) << '\n';
    return out.str();
}

std::string format_strength(const std::vector<StrengthRow>& rows, OutputFormat format,
                            bool with_trace) {
    if (format == OutputFormat::Json) {
        ordered_json j = ordered_json::array();
        for (const auto& row : rows) {
            ordered_json jr;
            jr["bus"] = row.bus;
            jr["control_type"] = row.control_type;
            jr["scr"] = row.scr ? scr_to_json(*row.scr) : ordered_json(nullptr);
            jr["pmr"] = row.pmr ? pmr_to_json(*row.pmr, with_trace) : ordered_json(nullptr);
            j.push_back(jr);
        }
        return j.dump(2) + "\n";
    }

    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "bus,control_type,scr,scc,z_th,pmr,pmr_mode,p_max,denominator,saturated,"
               "iterations_total\n";
        for (const auto& row : rows) {
            out << row.bus << ',' << row.control_type << ',';
            if (row.scr) {
                out << fixed4(row.scr->scr) << ',' << fixed4(row.scr->scc_pu) << ','
                    << fixed4(row.scr->z_th_pu);
            } else {
                out << ",,";
            }
            out << ',';
            if (row.pmr) {
                out << fixed4(row.pmr->pmr) << ',' << to_string(row.pmr->denominator_mode) << ','
                    << fixed4(row.pmr->p_max_pu) << ',' << fixed4(row.pmr->denominator_pu) << ','
                    << (row.pmr->saturated ? "true" : "false") << ','
                    << row.pmr->iterations_total;
            } else {
                out << ",,,,,";
            }
            out << '\n';
        }
        return out.str();
    }

    out << pad("bus", 4) << "  " << pad("control_type", 16, true) << pad("scr", 9)
        << pad("z_th", 10) << pad("pmr", 10) << pad("p_max", 10) << pad("denom", 10)
        << pad("mode", 9) << pad("iters", 7) << '\n';
    for (const auto& row : rows) {
        out << pad(std::to_string(row.bus), 4) << "  " << pad(row.control_type, 16, true);
        out << pad(row.scr ? fixed4(row.scr->scr) : "-", 9);
        out << pad(row.scr ? fixed4(row.scr->z_th_pu) : "-", 10);
        if (row.pmr) {
            const std::string prefix = row.pmr->saturated ? "> " : "";
            out << pad(prefix + fixed4(row.pmr->pmr), 10) << pad(fixed4(row.pmr->p_max_pu), 10)
                << pad(fixed4(row.pmr->denominator_pu), 10)
                << pad(to_string(row.pmr->denominator_mode), 9)
                << pad(std::to_string(row.pmr->iterations_total), 7);
        } else {
            out << pad("-", 10) << pad("-", 10) << pad("-", 10) << pad("-", 9) << pad("-", 7);
        }
        out << '\n';
        if (with_trace && row.pmr) {
            for (const auto& t : row.pmr->search_trace) {
                out << "    trace p=" << fixed4(t.p_pu) << "  "
                    << (t.converged ? "converged" : "failed") << " (" << t.iterations
                    << " iterations)\n";
            }
        }
        if (row.scr) {
            for (const auto& e : row.scr->excluded_elements) {
                out << "    excluded " << e << '\n';
            }
        }
    }
    return out.str();
}

std::string format_fold(const FoldStudy& study, OutputFormat format) {
    if (format == OutputFormat::Json) {
        ordered_json j;
        j["bus"] = study.fold.bus;
        j["p_max_pu"] = study.fold.p_max_pu;
        j["sigma_min"] = study.fold.sigma_min;
        j["sigma_max"] = study.fold.sigma_max;
        j["alpha"] = study.coeffs.alpha;
        j["beta"] = study.coeffs.beta;
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "bus,p_max,sigma_min,sigma_max,alpha,beta\n";
        out << study.fold.bus << ',' << fixed4(study.fold.p_max_pu) << ','
            << sci4(study.fold.sigma_min) << ',' << sci4(study.fold.sigma_max) << ','
            << fixed4(study.coeffs.alpha) << ',' << fixed4(study.coeffs.beta) << '\n';
        return out.str();
    }
    out << "limit point at bus " << study.fold.bus << '\n';
    out << "  p_max      " << fixed4(study.fold.p_max_pu) << '\n';
    out << "  sigma_min  " << sci4(study.fold.sigma_min) << '\n';
    out << "  sigma_max  " << sci4(study.fold.sigma_max) << '\n';
    out << "  alpha      " << fixed4(study.coeffs.alpha) << '\n';
    out << "  beta       " << fixed4(study.coeffs.beta) << '\n';
    return out.str();
}

std::string format_distance_curve(const std::vector<DistancePoint>& curve,
                                  OutputFormat format) {
    if (format == OutputFormat::Json) {
        ordered_json j = ordered_json::array();
        for (const auto& pt : curve) {
            ordered_json jp;
            jp["lambda"] = pt.lambda;
            jp["d_estimated"] = json_or_null(pt.d_estimated);
            jp["d_exact"] = json_or_null(pt.d_exact);
            jp["relative_error"] = json_or_null(pt.relative_error);
            jp["sep_converged"] = pt.sep_converged;
            jp["uep_converged"] = pt.uep_converged;
            jp["failure"] = pt.failure;
            j.push_back(jp);
        }
        return j.dump(2) + "\n";
    }

    std::ostringstream out;
    auto cell = [](double v) { return std::isnan(v) ? std::string{} : fixed6(v); };
    if (format == OutputFormat::Csv) {
        out << "lambda,d_estimated,d_exact,relative_error\n";
        for (const auto& pt : curve) {
            out << fixed6(pt.lambda) << ',' << cell(pt.d_estimated) << ',' << cell(pt.d_exact)
                << ',' << cell(pt.relative_error) << '\n';
        }
        return out.str();
    }

    out << pad("lambda", 10) << pad("d_estimated", 13) << pad("d_exact", 13)
        << pad("rel_error", 13) << '\n';
    for (const auto& pt : curve) {
        auto tcell = [](double v) { return std::isnan(v) ? std::string("-") : fixed6(v); };
        out << pad(fixed6(pt.lambda), 10) << pad(tcell(pt.d_estimated), 13)
            << pad(tcell(pt.d_exact), 13) << pad(tcell(pt.relative_error), 13);
        if (!pt.failure.empty()) out << "  ! " << pt.failure;
        out << '\n';
    }
    return out.str();
}

}  // namespace gridmargin
