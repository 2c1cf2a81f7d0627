#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "hfrac/config.hpp"
#include "hfrac/verifier.hpp"

namespace hfrac {

using Json = nlohmann::ordered_json;

inline std::string checksum_hex(const std::string& data) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(data)));
    return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_text: cannot open " + path);
    f << body;
}

inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "read_text: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline Json to_json(const KernelParams& kp) {
    return Json{{"n", kp.n}, {"s", kp.s}, {"p", kp.p}, {"Q", kp.Q()},
                {"sp_le_Q", kp.sp_le_Q()},
                {"triangle_constant", kp.norm.triangle_constant}};
}

inline Json to_json(const GridSpec& spec) {
    return Json{{"n", spec.n}, {"lower", spec.lower}, {"upper", spec.upper},
                {"resolution", spec.resolution}};
}

inline Json to_json(const SolveResult& r) {
    return Json{{"iterations", r.iterations},
                {"converged", r.converged},
                {"optimality", r.optimality},
                {"linear_residual", r.linear_residual},
                {"energy_trace", r.energy_trace},
                {"wall_ms", r.wall_ms}};
}

inline Json to_json(const EstimateReport& rep) {
    Json rhs = Json::object();
    for (const auto& [name, v] : rep.rhs_terms) rhs[name] = v;
    return Json{{"inequality", rep.inequality}, {"instance", rep.instance},
                {"lhs", rep.lhs},               {"rhs_terms", rhs},
                {"rhs_total", rep.rhs_total()}, {"fitted_c", rep.fitted_c},
                {"pass", rep.pass},             {"warnings", rep.warnings}};
}

inline Json to_json(const TailEstimate& t) {
    return Json{{"value", t.value},
                {"grid_part", t.grid_part},
                {"farfield_part", t.farfield_part},
                {"radius", t.radius},
                {"split_radius", t.split_radius},
                {"farfield_truncated", t.farfield_truncated}};
}

inline Json to_json(const BoundednessSweep& sweep) {
    return Json{{"inequality", "boundedness"},
                {"sup_half", sweep.sup_half},
                {"tail_half", sweep.tail_half},
                {"mean_term", sweep.mean_term},
                {"deltas", sweep.deltas},
                {"c_of_delta", sweep.c_of_delta},
                {"pass", sweep.pass},
                {"warnings", sweep.warnings}};
}

inline Json to_json(const HolderFit& fit) {
    Json rows = Json::array();
    for (const auto& row : fit.table)
        rows.push_back(Json{{"nominal_radius", row.nominal_radius},
                            {"effective_radius", row.effective_radius},
                            {"osc", row.osc},
                            {"cells", row.cells},
                            {"used", row.used}});
    return Json{{"inequality", "holder_fit"},
                {"alpha_hat", fit.alpha_hat},
                {"fit_valid", fit.fit_valid},
                {"flat", fit.flat},
                {"admissible_bound", fit.admissible_bound},
                {"oscillation_table", rows},
                {"warnings", fit.warnings}};
}

inline Json to_json(const DeGiorgiPipeline& pipe) {
    return Json{{"inequality", "degiorgi"},
                {"A0", pipe.A0},
                {"tail_w0", pipe.tail_w0},
                {"k_tilde", pipe.schedule.k_tilde},
                {"delta", pipe.schedule.delta},
                {"c_struct", pipe.schedule.c_struct},
                {"beta", pipe.schedule.beta()},
                {"C", pipe.schedule.C()},
                {"cbar", pipe.schedule.cbar()},
                {"H", pipe.schedule.H()},
                {"threshold", pipe.run.threshold},
                {"threshold_satisfied", pipe.run.threshold_satisfied},
                {"levels", pipe.run.A},
                {"converged", pipe.run.converged},
                {"sup_half", pipe.sup_half},
                {"sup_bound_holds", pipe.sup_bound_holds}};
}

inline Json to_json(const OscillationLedger& led) {
    Json rows = Json::array();
    for (const auto& lev : led.levels)
        rows.push_back(Json{{"radius", lev.radius},
                            {"cells", lev.cells},
                            {"osc_measured", lev.osc_measured},
                            {"omega_predicted", lev.omega_predicted},
                            {"density_high", lev.density_high},
                            {"density_low", lev.density_low},
                            {"branch", lev.branch},
                            {"within_prediction", lev.within_prediction}});
    return Json{{"inequality", "oscillation"},
                {"sigma", led.sigma},
                {"sigma_clamped", led.sigma_clamped},
                {"alpha", led.alpha},
                {"d", led.d},
                {"omega0", led.omega0},
                {"nu_star", led.nu_star},
                {"c_log", led.c_log},
                {"levels", rows},
                {"warnings", led.warnings}};
}

inline Json to_json(const KernelScalingReport& rep) {
    Json rows = Json::array();
    for (const auto& row : rep.rows)
        rows.push_back(Json{{"gamma", row.gamma},
                            {"fitted_slope", row.fitted_slope},
                            {"worst_doubling_error", row.worst_doubling_error},
                            {"pass", row.pass}});
    return Json{{"inequality", "kernel_tail_scaling"}, {"rows", rows}, {"pass", rep.pass}};
}

/// One row of the verify/sweep batch CSV; 17 significant digits, LF endings.
inline std::string csv_row(const std::string& inequality, const std::string& instance,
                           std::int64_t resolution, double lhs, double rhs_total, double fitted_c,
                           bool pass) {
    std::string row = inequality + "," + instance + "," + std::to_string(resolution) + "," +
                      format_g17(lhs) + "," + format_g17(rhs_total) + "," + format_g17(fitted_c) +
                      "," + (pass ? "1" : "0") + "\n";
    return row;
}

} // namespace hfrac
