#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "contlab/fields.hpp"

namespace contlab {

/// Radial profile beta >= 0 with semiconvexity constant: s -> beta(s) - lambda s
/// is non-increasing. Extended to s < 0 by beta(0).
struct BetaProfile {
    std::string name;
    std::function<double(double)> beta;
    double lambda = 0.0;
    double sup = 1.0;  ///< max beta
};

inline BetaProfile beta_profile(const std::string& name) {
    if (name == "one") return {name, [](double) { return 1.0; }, 0.0, 1.0};
    if (name == "decay") return {name, [](double s) { return 1.0 / (1.0 + std::max(s, 0.0)); }, 0.0, 1.0};
    if (name == "hinge")
        return {name, [](double s) { return std::clamp(s - 1.0, 0.0, 1.0); }, 1.0, 1.0};
    if (name == "cutoff") return {name, [](double s) { return std::max(0.0, 1.0 - std::max(s, 0.0)); }, 0.0, 1.0};
    throw Error("unknown beta profile '" + name + "'");
}

inline std::vector<std::string> beta_profile_names() { return {"cutoff", "decay", "hinge", "one"}; }

/// Smooth bounded potential W with sup |grad W| <= G and sup ||Hess W|| <= H.
struct Potential {
    std::string name;
    std::function<double(const Point&)> value;
    std::function<Point(const Point&)> gradient;
    std::function<Matrix(const Point&)> hessian;
    double G = 0.0;
    double H = 0.0;
    double sup = 1.0;
};

inline Potential potential(const std::string& name) {
    if (name == "gauss_bump") {
        Potential w;
        w.name = name;
        w.value = [](const Point& x) { return 1.0 - std::exp(-0.5 * dot(x, x)); };
        w.gradient = [](const Point& x) {
            const double e = std::exp(-0.5 * dot(x, x));
            Point g = x;
            for (auto& v : g) v *= e;
            return g;
        };
        w.hessian = [](const Point& x) {
            const double e = std::exp(-0.5 * dot(x, x));
            Matrix m(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = e * ((i == j ? 1.0 : 0.0) - x[i] * x[j]);
            return m;
        };
        w.G = std::exp(-0.5);
        w.H = 1.0;
        w.sup = 1.0;
        return w;
    }
    throw Error("unknown potential '" + name + "'");
}

/// -beta(|x|^2) x in dimension d.
inline VectorField radial_field(const BetaProfile& p, std::size_t d) {
    auto beta = p.beta;
    auto fn = [beta](const Point& x, double) {
        const double s = dot(x, x);
        const double c = -beta(s);
        Point r = x;
        for (auto& v : r) v *= c;
        return r;
    };
    VectorField v = VectorField::make(d, fn, "radial_beta:" + p.name + ":" + std::to_string(d));
    v.with_growth(p.sup);
    return v;
}

/// -beta(W(x)) grad W(x)
inline VectorField potential_field(const BetaProfile& p, const Potential& w, std::size_t d) {
    auto beta = p.beta;
    auto W = w;
    auto fn = [beta, W](const Point& x, double) {
        const double c = -beta(W.value(x));
        Point g = W.gradient(x);
        for (auto& v : g) v *= c;
        return g;
    };
    VectorField v = VectorField::make(d, fn, "potential:" + p.name + ":" + w.name);
    v.with_growth(p.sup * w.G);
    return v;
}

/// Piecewise-linear interpolation of (x, value) CSV samples.
inline VectorField table_field(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open field table " + file);
    std::vector<double> xs, vs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double x, v;
        if (!(ss >> x >> v)) continue;  // header
        xs.push_back(x);
        vs.push_back(v);
    }
    require(xs.size() >= 2, "field table needs at least two rows");
    for (std::size_t i = 1; i < xs.size(); ++i) require(xs[i] > xs[i - 1], "field table x must increase");
    auto fn = [xs, vs](double x, double) {
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - xs.begin()), 1, xs.size() - 1);
        const double s = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return vs[j - 1] + s * (vs[j] - vs[j - 1]);
    };
    VectorField f = VectorField::scalar(fn, "custom_table:" + file);
    f.with_domain(Box::interval(xs.front(), xs.back()));
    return f;
}

namespace detail {

inline double parse_number(const std::string& s, const std::string& spec) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("bad numeric parameter in field '" + spec + "'");
    }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

/// Catalog lookup: sqrt_abs, const:c, linear:a, pow_abs:p, ramp:c,
/// neg_ramp:c, radial_beta:name[:d], potential:name[:W[:d]], custom_table:file.
/// Terms joined by '+' are summed.
inline VectorField field_from_name(const std::string& spec) {
    if (spec.find('+') != std::string::npos && spec.rfind("custom_table:", 0) != 0) {
        std::vector<VectorField> terms;
        for (const auto& part : detail::split(spec, '+')) {
            require(!part.empty(), "empty term in field sum '" + spec + "'");
            terms.push_back(field_from_name(part));
        }
        const std::size_t d = terms.front().dimension();
        std::optional<double> growth = 0.0;
        for (const auto& f : terms) {
            require(f.dimension() == d, "field sum '" + spec + "' mixes dimensions");
            growth = growth && f.growth() ? std::optional<double>(*growth + *f.growth()) : std::nullopt;
        }
        VectorField sum = d == 1 ? VectorField::scalar(
                                       [terms](double x, double t) {
                                           double s = 0.0;
                                           for (const auto& f : terms) s += f.at(x, t);
                                           return s;
                                       },
                                       spec)
                                 : VectorField::make(
                                       d,
                                       [terms, d](const Point& x, double t) {
                                           Point s(d, 0.0);
                                           for (const auto& f : terms) s = axpy(1.0, f(x, t), s);
                                           return s;
                                       },
                                       spec);
        if (growth) sum.with_growth(*growth);
        return sum;
    }
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto num = [&] {
        require(!rest.empty(), "field '" + spec + "' needs a parameter");
        return detail::parse_number(rest, spec);
    };
    if (head == "sqrt_abs") {
        require(rest.empty(), "sqrt_abs takes no parameter");
        return VectorField::scalar([](double x, double) { return std::sqrt(std::abs(x)); }, spec).with_growth(1.0);
    }
    if (head == "const") {
        const double c = num();
        return VectorField::scalar([c](double, double) { return c; }, spec).with_growth(std::abs(c));
    }
    if (head == "linear") {
        const double a = num();
        SmoothField s = SmoothField::scalar([a](double x, double) { return a * x; },
                                            [a](double, double) { return a; }, spec);
        s.with_growth(std::abs(a));
        return s;
    }
    if (head == "pow_abs") {
        const double p = num();
        require(p > 0 && p <= 1, "pow_abs exponent must lie in (0, 1]");
        return VectorField::scalar([p](double x, double) { return std::pow(std::abs(x), p); }, spec).with_growth(1.0);
    }
    if (head == "ramp") {
        const double c = num();
        return VectorField::scalar([c](double x, double) { return std::max(0.0, x - c); }, spec)
            .with_growth(1.0 + std::abs(c));
    }
    if (head == "neg_ramp") {
        const double c = num();
        return VectorField::scalar([c](double x, double) { return std::max(0.0, c - x); }, spec)
            .with_growth(1.0 + std::abs(c));
    }
    if (head == "radial_beta") {
        const auto parts = detail::split(rest, ':');
        require(!rest.empty() && parts.size() <= 2, "radial_beta expects name[:d]");
        const std::size_t d = parts.size() == 2 ? static_cast<std::size_t>(detail::parse_number(parts[1], spec)) : 2;
        require(d >= 1 && d <= 3, "radial_beta dimension must be 1..3");
        return radial_field(beta_profile(parts[0]), d);
    }
    if (head == "potential") {
        const auto parts = detail::split(rest, ':');
        require(!rest.empty() && parts.size() <= 3, "potential expects beta[:W[:d]]");
        const std::string wname = parts.size() >= 2 ? parts[1] : "gauss_bump";
        const std::size_t d = parts.size() == 3 ? static_cast<std::size_t>(detail::parse_number(parts[2], spec)) : 2;
        require(d >= 1 && d <= 3, "potential dimension must be 1..3");
        return potential_field(beta_profile(parts[0]), potential(wname), d);
    }
    if (head == "custom_table") {
        require(!rest.empty(), "custom_table needs a file");
        return table_field(rest);
    }
    throw Error("unknown field '" + spec + "'");
}

}  // namespace contlab
