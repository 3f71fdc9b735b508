#include "spinecho/curve_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spinecho {

std::filesystem::path curve_sidecar_path(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void save_curve(const CoherenceCurve& curve, const std::filesystem::path& csv_path,
                const nlohmann::ordered_json* provenance) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("save_curve: cannot open " + csv_path.string());
    out << "t_ms,L_real,L_imag\n";
    char line[128];
    for (int j = 0; j < curve.size(); ++j) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", curve.t_ms[j],
                      curve.values[j].real(), curve.values[j].imag());
        out << line;
    }
    out.close();

    const auto& m = curve.meta;
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.curve-meta/1";
    j["source"] = m.source;
    j["order"] = m.order;
    j["r_bath"] = m.r_bath;
    j["r_dipole"] = m.r_dipole;
    j["n_mc_samples"] = m.n_mc_samples;
    j["seed"] = m.seed;
    j["config_id"] = m.config_id;
    j["config_seed"] = m.config_seed;
    j["n_bath_spins"] = m.n_bath_spins;
    j["b_field"] = {m.b_field[0], m.b_field[1], m.b_field[2]};
    j["divergence_guard_count"] = m.divergence_guard_count;
    j["max_imag_residual"] = m.max_imag_residual;
    j["member_count"] = m.member_count;
    if (!m.member_config_seeds.empty()) j["member_config_seeds"] = m.member_config_seeds;
    if (provenance) j["provenance"] = *provenance;
    std::ofstream meta(curve_sidecar_path(csv_path));
    if (!meta)
        throw std::runtime_error("save_curve: cannot open " +
                                 curve_sidecar_path(csv_path).string());
    meta << j.dump(1) << "\n";
}

CoherenceCurve load_curve(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("load_curve: cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_ms,", 0) != 0)
        throw std::runtime_error("load_curve: " + csv_path.string() + ": bad header");
    std::vector<double> t;
    std::vector<Complex> v;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double a, b, c;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &a, &b, &c) != 3)
            throw std::runtime_error("load_curve: " + csv_path.string() + ": line " +
                                     std::to_string(lineno) + ": expected t,re,im");
        t.push_back(a);
        v.emplace_back(b, c);
    }

    CoherenceCurve curve;
    curve.t_ms = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
    curve.values =
        Eigen::Map<Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));

    const auto sidecar = curve_sidecar_path(csv_path);
    std::ifstream meta_in(sidecar);
    if (!meta_in) throw std::runtime_error("load_curve: missing sidecar " + sidecar.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(meta_in);
        auto& m = curve.meta;
        m.source = j.at("source").get<std::string>();
        m.order = j.at("order").get<int>();
        m.r_bath = j.at("r_bath").get<double>();
        m.r_dipole = j.at("r_dipole").get<double>();
        m.n_mc_samples = j.at("n_mc_samples").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_id = j.at("config_id").get<std::string>();
        m.config_seed = j.at("config_seed").get<std::uint64_t>();
        m.n_bath_spins = j.at("n_bath_spins").get<int>();
        for (int a = 0; a < 3; ++a) m.b_field[a] = j.at("b_field").at(a).get<double>();
        m.divergence_guard_count = j.at("divergence_guard_count").get<std::int64_t>();
        m.max_imag_residual = j.at("max_imag_residual").get<double>();
        m.member_count = j.at("member_count").get<int>();
        if (j.contains("member_config_seeds"))
            m.member_config_seeds = j["member_config_seeds"].get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_curve: " + sidecar.string() + ": " + e.what());
    }
    return curve;
}

} // namespace spinecho
