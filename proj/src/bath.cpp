#include "spinecho/bath.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "spinecho/rng.hpp"

namespace spinecho {

namespace {

// Fractional coordinates of the 8 sites of the conventional diamond cell,
// in quarters of the lattice constant.
constexpr std::array<std::array<int, 3>, 8> kSiteQuarters = {{
    {0, 0, 0},
    {0, 2, 2},
    {2, 0, 2},
    {2, 2, 0},
    {1, 1, 1},
    {1, 3, 3},
    {3, 1, 3},
    {3, 3, 1},
}};

struct SiteKey {
    std::int64_t x, y, z; // integer site coordinates in quarter-cells
    bool operator==(const SiteKey&) const = default;
};

struct SiteKeyHash {
    std::size_t operator()(const SiteKey& k) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::int64_t v : {k.x, k.y, k.z}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

} // namespace

double expected_spin_count(double ppm, double r_bath, const LatticeSpec& lattice) {
    if (ppm < 0.0) throw std::invalid_argument("expected_spin_count: negative concentration");
    if (r_bath <= 0.0) throw std::invalid_argument("expected_spin_count: r_bath must be > 0");
    const double volume = 4.0 / 3.0 * std::numbers::pi * r_bath * r_bath * r_bath;
    return lattice.site_density() * volume * ppm * 1e-6;
}

SpinBathConfiguration generate_configuration(double ppm, double r_bath,
                                             const LatticeSpec& lattice, std::uint64_t seed,
                                             const std::string& id) {
    if (ppm < 0.0 || ppm > 1e6)
        throw std::invalid_argument("generate_configuration: ppm out of [0, 1e6]");
    if (r_bath <= 0.0)
        throw std::invalid_argument("generate_configuration: r_bath must be > 0");
    if (r_bath > 0.5 * lattice.supercell_edge)
        throw std::invalid_argument(
            "generate_configuration: r_bath exceeds half the supercell edge; "
            "the sphere would be clipped");

    const double volume = 4.0 / 3.0 * std::numbers::pi * r_bath * r_bath * r_bath;
    const auto n_sites = static_cast<std::int64_t>(std::llround(lattice.site_density() * volume));

    Rng rng(seed);
    const std::int64_t count = binomial_count(rng, n_sites, ppm * 1e-6);

    // Uniform distinct sites inside the sphere by rejection from the bounding
    // cube of cells. The defect occupies (0,0,0) and a/4*(1,1,1); both stay
    // empty.
    const double quarter = lattice.a / 4.0;
    const std::int64_t cell_span = static_cast<std::int64_t>(std::floor(r_bath / lattice.a)) + 2;
    const std::uint64_t cells_per_edge = static_cast<std::uint64_t>(2 * cell_span + 1);

    std::unordered_set<SiteKey, SiteKeyHash> taken;
    taken.insert(SiteKey{0, 0, 0});
    taken.insert(SiteKey{1, 1, 1});

    const Matrix3d rot = nv_frame_rotation();
    SpinBathConfiguration config;
    config.ppm = ppm;
    config.r_bath = r_bath;
    config.seed = seed;
    config.id = id;
    config.lattice = lattice;
    config.spins.reserve(static_cast<std::size_t>(count));

    const double r2 = r_bath * r_bath;
    while (config.spins.size() < static_cast<std::size_t>(count)) {
        const std::int64_t cx = static_cast<std::int64_t>(rng.below(cells_per_edge)) - cell_span;
        const std::int64_t cy = static_cast<std::int64_t>(rng.below(cells_per_edge)) - cell_span;
        const std::int64_t cz = static_cast<std::int64_t>(rng.below(cells_per_edge)) - cell_span;
        const auto& frac = kSiteQuarters[rng.below(kSiteQuarters.size())];
        const SiteKey key{4 * cx + frac[0], 4 * cy + frac[1], 4 * cz + frac[2]};
        const Vector3d cubic(quarter * static_cast<double>(key.x),
                             quarter * static_cast<double>(key.y),
                             quarter * static_cast<double>(key.z));
        if (cubic.squaredNorm() > r2) continue;
        if (!taken.insert(key).second) continue;
        BathSpin spin;
        spin.position = rot * cubic;
        config.spins.push_back(spin);
    }
    return config;
}

namespace {

void validate_configuration(const SpinBathConfiguration& config, const std::string& where) {
    const double tol = 1e-9;
    std::unordered_set<SiteKey, SiteKeyHash> seen;
    const Matrix3d inv = nv_frame_rotation().transpose();
    const double quarter = config.lattice.a / 4.0;
    for (std::size_t i = 0; i < config.spins.size(); ++i) {
        const Vector3d& pos = config.spins[i].position;
        if (pos.norm() > config.r_bath + tol)
            throw std::runtime_error(where + ": spin " + std::to_string(i) +
                                     " lies outside the r_bath sphere");
        const Vector3d cubic = inv * pos;
        SiteKey key{};
        std::int64_t* idx[3] = {&key.x, &key.y, &key.z};
        for (int a = 0; a < 3; ++a) {
            const double q = cubic[a] / quarter;
            *idx[a] = static_cast<std::int64_t>(std::llround(q));
            if (std::abs(q - static_cast<double>(*idx[a])) * quarter > tol)
                throw std::runtime_error(where + ": spin " + std::to_string(i) +
                                         " is not on a lattice site");
        }
        if (!seen.insert(key).second)
            throw std::runtime_error(where + ": duplicate site at spin " + std::to_string(i));
    }
}

} // namespace

void save_configuration(const SpinBathConfiguration& config,
                        const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.bath-configuration/1";
    j["id"] = config.id;
    j["seed"] = config.seed;
    j["ppm"] = config.ppm;
    j["r_bath"] = config.r_bath;
    j["lattice"] = {{"a", config.lattice.a},
                    {"sites_per_cell", config.lattice.sites_per_cell},
                    {"supercell_edge", config.lattice.supercell_edge}};
    auto& spins = j["spins"] = nlohmann::ordered_json::array();
    for (const auto& s : config.spins)
        spins.push_back({{"pos", {s.position[0], s.position[1], s.position[2]}},
                         {"spin", s.spin},
                         {"gamma", s.gamma}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_configuration: cannot open " + path.string());
    out << j.dump(1) << "\n";
}

SpinBathConfiguration load_configuration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_configuration: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_configuration: " + path.string() + ": " + e.what());
    }
    SpinBathConfiguration config;
    try {
        if (j.at("schema").get<std::string>() != "spinecho.bath-configuration/1")
            throw std::runtime_error("unsupported schema " + j["schema"].get<std::string>());
        config.id = j.at("id").get<std::string>();
        config.seed = j.at("seed").get<std::uint64_t>();
        config.ppm = j.at("ppm").get<double>();
        config.r_bath = j.at("r_bath").get<double>();
        const auto& lat = j.at("lattice");
        config.lattice.a = lat.at("a").get<double>();
        config.lattice.sites_per_cell = lat.at("sites_per_cell").get<int>();
        config.lattice.supercell_edge = lat.at("supercell_edge").get<double>();
        for (const auto& s : j.at("spins")) {
            BathSpin spin;
            const auto& pos = s.at("pos");
            spin.position = Vector3d(pos.at(0).get<double>(), pos.at(1).get<double>(),
                                     pos.at(2).get<double>());
            spin.spin = s.at("spin").get<double>();
            spin.gamma = s.at("gamma").get<double>();
            config.spins.push_back(spin);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_configuration: " + path.string() +
                                 ": missing or malformed field: " + e.what());
    }
    validate_configuration(config, "load_configuration: " + path.string());
    return config;
}

} // namespace spinecho
