#pragma once

#include <fstream>
#include <string>

#include "contlab/measure.hpp"
#include "json.hpp"

namespace contlab {

using Json = nlohmann::ordered_json;

inline Json piece_to_json(const DensityPiece& pc) { return Json{{"grid", pc.grid}, {"values", pc.values}}; }

inline Json to_json(const SignedMeasure& m) {
    Json atoms = Json::array();
    for (const auto& a : m.atoms()) {
        if (m.dimension() == 1)
            atoms.push_back(Json::array({a.x[0], a.w}));
        else
            atoms.push_back(Json::array({a.x, a.w}));
    }
    Json j{{"d", m.dimension()}, {"atoms", atoms}};
    if (m.density().size() == 1) {
        j["density"] = piece_to_json(m.density()[0]);
    } else if (m.density().size() > 1) {
        Json arr = Json::array();
        for (const auto& pc : m.density()) arr.push_back(piece_to_json(pc));
        j["density"] = arr;
    }
    return j;
}

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw Error("unknown key '" + it.key() + "' in " + what);
    }
}

inline DensityPiece piece_from_json(const Json& j) {
    require(j.is_object(), "density must be an object with grid and values");
    reject_unknown(j, {"grid", "values"}, "density");
    return DensityPiece{j.at("grid").get<std::vector<double>>(), j.at("values").get<std::vector<double>>()};
}

}  // namespace detail

inline SignedMeasure measure_from_json(const Json& j) {
    require(j.is_object(), "measure must be a JSON object");
    detail::reject_unknown(j, {"d", "atoms", "density"}, "measure");
    const std::size_t d = j.value("d", std::size_t{1});
    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
        for (const auto& a : j.at("atoms")) {
            require(a.is_array() && a.size() == 2, "atom must be [x, w]");
            Point x = a[0].is_array() ? a[0].get<Point>() : Point{a[0].get<double>()};
            atoms.push_back({std::move(x), a[1].get<double>()});
        }
    }
    std::vector<DensityPiece> dens;
    if (j.contains("density")) {
        const auto& dj = j.at("density");
        if (dj.is_array())
            for (const auto& p : dj) dens.push_back(detail::piece_from_json(p));
        else if (!dj.is_null())
            dens.push_back(detail::piece_from_json(dj));
    }
    return SignedMeasure(d, std::move(atoms), std::move(dens));
}

inline Json to_json(const MeasurePath& p) {
    Json slices = Json::array();
    for (const auto& s : p.slices()) slices.push_back(to_json(s));
    return Json{{"T", p.horizon()}, {"times", p.times()}, {"slices", slices}};
}

inline MeasurePath path_from_json(const Json& j) {
    require(j.is_object(), "path must be a JSON object");
    detail::reject_unknown(j, {"T", "times", "slices"}, "path");
    const double T = j.at("T").get<double>();
    std::vector<SignedMeasure> slices;
    for (const auto& s : j.at("slices")) slices.push_back(measure_from_json(s));
    MeasurePath p(T, std::move(slices));
    if (j.contains("times")) {
        const auto times = j.at("times").get<std::vector<double>>();
        require(times.size() == p.times().size(), "times and slices differ in length");
        for (std::size_t i = 0; i < times.size(); ++i)
            require(std::abs(times[i] - p.times()[i]) <= 1e-9 * (1.0 + T), "times must be the uniform grid on [0, T]");
    }
    return p;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid JSON in " + path + ": " + e.what());
    }
}

/// (t, atom_index, x..., weight) rows.
inline void write_path_atoms_csv(std::ostream& os, const MeasurePath& p) {
    os << "t,atom_index";
    const std::size_t d = p.dimension();
    for (std::size_t i = 0; i < d; ++i) os << ",x" << i;
    os << ",weight\n";
    os.precision(17);
    for (std::size_t s = 0; s < p.slices().size(); ++s) {
        const auto& m = p.slice(s);
        for (std::size_t a = 0; a < m.atoms().size(); ++a) {
            os << p.times()[s] << ',' << a;
            for (double xi : m.atoms()[a].x) os << ',' << xi;
            os << ',' << m.atoms()[a].w << '\n';
        }
    }
}

/// (t, node, x, value) rows for density slices.
inline void write_path_density_csv(std::ostream& os, const MeasurePath& p) {
    os << "t,node,x,value\n";
    os.precision(17);
    for (std::size_t s = 0; s < p.slices().size(); ++s) {
        std::size_t node = 0;
        for (const auto& pc : p.slice(s).density())
            for (std::size_t i = 0; i < pc.grid.size(); ++i, ++node)
                os << p.times()[s] << ',' << node << ',' << pc.grid[i] << ',' << pc.values[i] << '\n';
    }
}

}  // namespace contlab
