#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "contlab/measure.hpp"
#include "contlab/measure_io.hpp"
#include "contlab/pairs.hpp"

namespace contlab {

struct CertificateOptions {
    double threshold = 0.05;
    double band = 1e-6;        ///< half-width of the dZ neighbourhood
    std::vector<Point> samples;  ///< condition-check grid; default region_samples(U)
    double margin_tol = 1e-9;
};

struct Certificate {
    std::string recipe;
    std::vector<double> ks;
    std::vector<double> J;
    std::vector<ConditionMargins> margins;
    std::optional<double> boundary_mass;
    double threshold = 0.05;
    std::string verdict;
};

/// J_k = int_0^T int_U |b - b_k| sqrt(V_k) d|mu_t| dt for each pair.
inline double certificate_functional(const MeasurePath& abs_path, const VectorField& b, const ApproximationPair& p,
                                     const Box& U, std::optional<double> t_end = std::nullopt,
                                     TimeRule rule = TimeRule::LeftEndpoint) {
    return path_integrate(abs_path, [&](const Point& x, double t) { return pair_gap(p, b, x, t); }, U, rule, t_end);
}

/// int_0^T |mu_t|(dZ +- band) dt over U (1D).
inline double boundary_mass(const MeasurePath& abs_path, const std::vector<double>& boundary, const Box& U, double band) {
    double s = 0.0;
    for (double z : boundary) {
        Box nb = Box::interval(std::max(U.lo[0], z - band), std::min(U.hi[0], z + band));
        if (nb.lo[0] > nb.hi[0]) continue;
        s += path_integrate(abs_path, [](const Point&, double) { return 1.0; }, nb);
    }
    return s;
}

inline std::string certificate_verdict(const Certificate& c, double margin_tol = 1e-9) {
    for (const auto& m : c.margins)
        if (!m.passes(margin_tol)) return "rejected";
    if (c.boundary_mass && *c.boundary_mass >= c.threshold) return "rejected";
    if (c.J.empty()) return "inconclusive";
    const std::size_t n = c.J.size();
    bool trend = true;
    for (std::size_t i = n >= 3 ? n - 3 : 0; i + 1 < n; ++i)
        if (c.J[i + 1] > c.J[i] * (1.0 + 1e-12) + 1e-15) trend = false;
    if (trend && c.J.back() < c.threshold) return "certified";
    return "inconclusive";
}

inline Certificate certify(const MeasurePath& path, const VectorField& b, const std::vector<ApproximationPair>& pairs,
                           const Box& U, const CertificateOptions& opt = {}) {
    require_bounded(U);
    require(path.dimension() == b.dimension() && U.dimension() == b.dimension(), "certificate: dimension mismatch");
    for (const auto& p : pairs) require(p.dimension() == b.dimension(), "certificate: pair dimension mismatch");
    Certificate c;
    c.threshold = opt.threshold;
    c.recipe = pairs.empty() ? "" : pairs.front().recipe;
    const MeasurePath ap = path.abs();
    const auto samples = opt.samples.empty() ? region_samples(U) : opt.samples;
    c.J.resize(pairs.size());
    c.margins.resize(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        c.J[i] = certificate_functional(ap, b, pairs[i], U);
        c.margins[i] = check_conditions(pairs[i], samples);
    });
    for (const auto& p : pairs) c.ks.push_back(p.k);
    if (b.dimension() == 1 && !pairs.empty())
        c.boundary_mass = boundary_mass(ap, pairs.back().boundary_points, U, opt.band);
    c.verdict = certificate_verdict(c, opt.margin_tol);
    return c;
}

inline Json margins_json(const ConditionMargins& m) {
    Json j{{"growth", m.growth},
           {"growth_normalized", m.growth_normalized},
           {"lyapunov", m.lyapunov},
           {"lyapunov_normalized", m.lyapunov_normalized},
           {"floor", m.floor},
           {"samples", m.samples}};
    if (m.quadratic) {
        j["quadratic_normalized"] = *m.quadratic;
        j["quadratic_C"] = *m.quadratic_C;
    }
    return j;
}

inline Json to_json(const Certificate& c) {
    Json margins = Json::object();
    Json gi = Json::array(), gii = Json::array(), detail = Json::array();
    for (const auto& m : c.margins) {
        gi.push_back(m.growth_normalized);
        gii.push_back(m.lyapunov_normalized);
        detail.push_back(margins_json(m));
    }
    margins["i"] = gi;
    margins["ii"] = gii;
    margins["per_k"] = detail;
    Json j{{"recipe", c.recipe}, {"ks", c.ks}, {"J", c.J}, {"margins", margins}};
    j["boundary_mass"] = c.boundary_mass ? Json(*c.boundary_mass) : Json(nullptr);
    j["threshold"] = c.threshold;
    j["verdict"] = c.verdict;
    return j;
}

inline void write_certificate_csv(std::ostream& os, const Certificate& c) {
    os << "k,J_k,margin_i,margin_ii\n";
    os.precision(17);
    for (std::size_t i = 0; i < c.J.size(); ++i)
        os << c.ks[i] << ',' << c.J[i] << ',' << c.margins[i].growth_normalized << ','
           << c.margins[i].lyapunov_normalized << '\n';
}

}  // namespace contlab
