#pragma once

#include <string>
#include <vector>

#include "contlab/measure_io.hpp"
#include "contlab/pairs.hpp"

namespace contlab {

/// Region of a recipe: "region": [lo, hi] in 1D, or {"lo": [...], "hi": [...]}.
inline Box box_from_json(const Json& j) {
    if (j.is_array() && j.size() == 2 && j[0].is_number()) return Box::interval(j[0].get<double>(), j[1].get<double>());
    require(j.is_object(), "region must be [lo, hi] or {\"lo\": [...], \"hi\": [...]}");
    detail::reject_unknown(j, {"lo", "hi"}, "region");
    Box b{j.at("lo").get<Point>(), j.at("hi").get<Point>()};
    require(b.lo.size() == b.hi.size() && !b.lo.empty(), "region lo/hi dimension mismatch");
    return b;
}

/// Builds one pair per k. Recipes: sqrt_pair, corollary1, corollary2,
/// radial, potential, one_sided; `field` is the target b where needed.
inline std::vector<ApproximationPair> build_pairs(const Json& recipe, const std::string& field,
                                                  const std::vector<double>& ks) {
    require(recipe.is_object() && recipe.contains("name"), "recipe needs a name");
    const std::string name = recipe.at("name").get<std::string>();
    auto region = [&] { return recipe.contains("region") ? box_from_json(recipe.at("region")) : Box::interval(-2, 2); };
    std::vector<ApproximationPair> out;
    if (name == "sqrt_pair") {
        detail::reject_unknown(recipe, {"name", "region"}, "sqrt_pair recipe");
        for (double k : ks) out.push_back(sqrt_pair(k, region()));
    } else if (name == "corollary1") {
        detail::reject_unknown(recipe, {"name", "region"}, "corollary1 recipe");
        const auto b = field_from_name(field);
        for (double k : ks) out.push_back(corollary1_pair(b, k, region()));
    } else if (name == "corollary2") {
        detail::reject_unknown(recipe, {"name", "region", "g", "f", "lambda"}, "corollary2 recipe");
        FieldDecomposition dec{field_from_name(recipe.at("g").get<std::string>()),
                               field_from_name(recipe.at("f").get<std::string>()), recipe.at("lambda").get<double>()};
        for (double k : ks) out.push_back(corollary2_pair(dec, k, region()));
    } else if (name == "radial" || name == "potential") {
        detail::reject_unknown(recipe, {"name", "beta", "N", "d", "W"}, name + " recipe");
        const auto prof = beta_profile(recipe.at("beta").get<std::string>());
        const double N = recipe.value("N", 4.0);
        const std::size_t d = recipe.value("d", std::size_t{2});
        for (double k : ks) {
            if (name == "radial")
                out.push_back(radial_pair(prof, k, N, d));
            else
                out.push_back(radial_pair(prof, k, N, d, RadialVariant::Potential,
                                          potential(recipe.value("W", std::string("gauss_bump")))));
        }
    } else if (name == "one_sided") {
        detail::reject_unknown(recipe, {"name", "region", "C3"}, "one_sided recipe");
        const auto b = field_from_name(field);
        for (double k : ks) out.push_back(one_sided_pair(b, k, region(), recipe.at("C3").get<double>()));
    } else {
        throw Error("unknown recipe '" + name + "'");
    }
    return out;
}

/// Region a certificate integrates over by default: the recipe's own.
inline Box pairs_region(const std::vector<ApproximationPair>& pairs) {
    require(!pairs.empty(), "empty pair schedule");
    return pairs.front().region;
}

}  // namespace contlab
