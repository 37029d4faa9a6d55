#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmfc/experiments.hpp"
#include "rmfc/uncertainty.hpp"

namespace rmfc {

using json = nlohmann::json;

namespace io_detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

inline std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ValidationError(where + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw ValidationError(where + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline SpacePtr parse_space(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"labels", "coords", "metric"}, where);
    if (!j.contains("labels") || !j.contains("coords"))
        throw ValidationError(where + ": needs 'labels' and 'coords'");
    std::vector<std::string> labels;
    for (const auto& l : j.at("labels")) {
        if (!l.is_string()) throw ValidationError(where + ": labels must be strings");
        labels.push_back(l.get<std::string>());
    }
    std::vector<double> coords = number_list(j.at("coords"), where + ".coords");
    if (!j.contains("metric")) return FiniteSpace::line(std::move(labels), std::move(coords));
    const json& m = j.at("metric");
    const std::size_t n = labels.size();
    std::vector<double> metric;
    metric.reserve(n * n);
    if (!m.is_array() || m.size() != n) throw ValidationError(where + ".metric: expected n rows");
    for (const auto& row : m) {
        std::vector<double> r = number_list(row, where + ".metric row");
        if (r.size() != n) throw ValidationError(where + ".metric: ragged row");
        metric.insert(metric.end(), r.begin(), r.end());
    }
    return std::make_shared<const FiniteSpace>(std::move(labels), std::move(coords),
                                               std::move(metric));
}

inline json space_to_json(const FiniteSpace& sp) {
    json j;
    j["labels"] = sp.labels();
    j["coords"] = sp.coords();
    if (!sp.line_metric()) {
        json rows = json::array();
        const int n = sp.size();
        for (int i = 0; i < n; ++i) {
            json row = json::array();
            for (int k = 0; k < n; ++k) row.push_back(sp.dist(i, k));
            rows.push_back(std::move(row));
        }
        j["metric"] = std::move(rows);
    }
    return j;
}

inline RuleParams parse_params(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": params must be an object");
    RuleParams out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_number())
            out[it.key()] = {it.value().get<double>()};
        else
            out[it.key()] = number_list(it.value(), where + "." + it.key());
    }
    return out;
}

inline json params_to_json(const RuleParams& p) {
    json j = json::object();
    for (const auto& [k, v] : p) {
        if (v.size() == 1)
            j[k] = v[0];
        else
            j[k] = v;
    }
    return j;
}

}  // namespace io_detail

/// Parse a model document. Unknown keys are rejected everywhere; the
/// generative uncertainty form is resolved to its explicit finite set.
inline ModelSpec model_from_json(const json& j) {
    using namespace io_detail;
    reject_unknown_keys(j, {"spaces", "transition", "reward", "beta", "lambda_eps", "uncertainty",
                            "initial_mu"},
                        "model");
    for (const char* key : {"spaces", "transition", "reward", "beta", "lambda_eps", "uncertainty",
                            "initial_mu"})
        if (!j.contains(key)) throw ValidationError(std::string("model: missing key '") + key + "'");

    const json& spaces = j.at("spaces");
    reject_unknown_keys(spaces, {"state", "action", "idio", "common"}, "spaces");
    ModelSpec spec;
    for (const char* key : {"state", "action", "idio", "common"})
        if (!spaces.contains(key))
            throw ValidationError(std::string("spaces: missing '") + key + "'");
    spec.state_space = parse_space(spaces.at("state"), "spaces.state");
    spec.action_space = parse_space(spaces.at("action"), "spaces.action");
    spec.idio_space = parse_space(spaces.at("idio"), "spaces.idio");
    spec.common_space = parse_space(spaces.at("common"), "spaces.common");

    if (!j.at("beta").is_number()) throw ValidationError("model.beta: expected a number");
    spec.beta = j.at("beta").get<double>();
    spec.lambda_eps = Dist(spec.idio_space, number_list(j.at("lambda_eps"), "lambda_eps"));
    spec.initial_mu = Dist(spec.state_space, number_list(j.at("initial_mu"), "initial_mu"));

    const json& tj = j.at("transition");
    if (!tj.contains("kind")) throw ValidationError("transition: missing 'kind'");
    const std::string kind = tj.at("kind").get<std::string>();
    if (kind == "table") {
        reject_unknown_keys(tj, {"kind", "table"}, "transition");
        const json& tbl = tj.at("table");
        const int ns = spec.ns(), na = spec.na(), ne = spec.ne(), ne0 = spec.ne0();
        std::vector<int> flat;
        flat.reserve(static_cast<std::size_t>(ns) * na * ne * ne0);
        if (!tbl.is_array() || static_cast<int>(tbl.size()) != ns)
            throw ValidationError("transition.table: expected |S| outer entries");
        for (const auto& ta : tbl) {
            if (!ta.is_array() || static_cast<int>(ta.size()) != na)
                throw ValidationError("transition.table: expected |A| entries per state");
            for (const auto& te : ta) {
                if (!te.is_array() || static_cast<int>(te.size()) != ne)
                    throw ValidationError("transition.table: expected |E| entries per action");
                for (const auto& te0 : te) {
                    if (!te0.is_array() || static_cast<int>(te0.size()) != ne0)
                        throw ValidationError("transition.table: expected |E0| entries per idio value");
                    for (const auto& v : te0) {
                        if (!v.is_number_integer())
                            throw ValidationError("transition.table: entries are state indices");
                        flat.push_back(v.get<int>());
                    }
                }
            }
        }
        spec.transition = TransitionRule::from_table(std::move(flat));
    } else if (kind == "mean_field_fn") {
        reject_unknown_keys(tj, {"kind", "name", "params"}, "transition");
        if (!tj.contains("name")) throw ValidationError("transition: missing 'name'");
        RuleParams params = tj.contains("params") ? parse_params(tj.at("params"), "transition.params")
                                                  : RuleParams{};
        spec.transition = rules::make_transition(tj.at("name").get<std::string>(), spec, params);
    } else {
        throw ValidationError("transition.kind must be 'table' or 'mean_field_fn'");
    }

    const json& rj = j.at("reward");
    reject_unknown_keys(rj, {"name", "params", "sign", "table"}, "reward");
    if (!rj.contains("name")) throw ValidationError("reward: missing 'name'");
    const std::string rname = rj.at("name").get<std::string>();
    if (rname == "tabular") {
        if (!rj.contains("table")) throw ValidationError("reward: tabular needs 'table'");
        if (rj.contains("sign") || rj.contains("params"))
            throw ValidationError("reward: tabular takes no 'sign'/'params'");
        std::vector<double> flat;
        const json& tbl = rj.at("table");
        if (!tbl.is_array() || static_cast<int>(tbl.size()) != spec.ns())
            throw ValidationError("reward.table: expected |S| rows");
        for (const auto& row : tbl) {
            std::vector<double> r = number_list(row, "reward.table row");
            if (static_cast<int>(r.size()) != spec.na())
                throw ValidationError("reward.table: expected |A| columns");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        spec.reward = RewardRule::tabular(std::move(flat));
    } else {
        RuleParams params = rj.contains("params") ? parse_params(rj.at("params"), "reward.params")
                                                  : RuleParams{};
        if (rj.contains("sign")) {
            const std::string sv = rj.at("sign").get<std::string>();
            if (sv == "negative_distance")
                params["sign"] = {-1.0};
            else if (sv == "paper_literal")
                params["sign"] = {1.0};
            else
                throw ValidationError("reward.sign must be 'negative_distance' or 'paper_literal'");
        }
        spec.reward = rules::make_reward(rname, spec, params);
    }

    const json& uj = j.at("uncertainty");
    if (uj.contains("explicit")) {
        reject_unknown_keys(uj, {"explicit"}, "uncertainty");
        std::vector<Dist> set;
        for (const auto& v : uj.at("explicit"))
            set.emplace_back(spec.common_space, io_detail::number_list(v, "uncertainty.explicit"));
        if (set.empty()) throw ValidationError("uncertainty.explicit: empty set");
        spec.uncertainty_set = std::move(set);
    } else {
        reject_unknown_keys(uj, {"v_ref", "delta", "count", "seed"}, "uncertainty");
        for (const char* key : {"v_ref", "delta", "count", "seed"})
            if (!uj.contains(key))
                throw ValidationError(std::string("uncertainty: missing '") + key + "'");
        const Dist v_ref(spec.common_space, number_list(uj.at("v_ref"), "uncertainty.v_ref"));
        spec.uncertainty_set = make_perturbed_uncertainty_set(
            v_ref, uj.at("delta").get<double>(), uj.at("count").get<int>(),
            uj.at("seed").get<std::uint64_t>());
    }
    return validate_model(std::move(spec));
}

/// Canonical serialization: generative uncertainty is materialized, line
/// metrics are implied by coords. This is the form the config hash digests.
inline json model_to_json(const ModelSpec& spec) {
    using namespace io_detail;
    json j;
    j["spaces"]["state"] = space_to_json(*spec.state_space);
    j["spaces"]["action"] = space_to_json(*spec.action_space);
    j["spaces"]["idio"] = space_to_json(*spec.idio_space);
    j["spaces"]["common"] = space_to_json(*spec.common_space);
    j["beta"] = spec.beta;
    j["lambda_eps"] = spec.lambda_eps.weights();
    j["initial_mu"] = spec.initial_mu.weights();

    if (spec.transition.is_table()) {
        const int ns = spec.ns(), na = spec.na(), ne = spec.ne(), ne0 = spec.ne0();
        json tbl = json::array();
        std::size_t idx = 0;
        for (int s = 0; s < ns; ++s) {
            json ja = json::array();
            for (int a = 0; a < na; ++a) {
                json je = json::array();
                for (int e = 0; e < ne; ++e) {
                    json je0 = json::array();
                    for (int e0 = 0; e0 < ne0; ++e0) je0.push_back(spec.transition.table()[idx++]);
                    je.push_back(std::move(je0));
                }
                ja.push_back(std::move(je));
            }
            tbl.push_back(std::move(ja));
        }
        j["transition"] = {{"kind", "table"}, {"table", std::move(tbl)}};
    } else {
        j["transition"] = {{"kind", "mean_field_fn"},
                           {"name", spec.transition.name()},
                           {"params", params_to_json(spec.transition.params())}};
    }

    if (spec.reward.is_tabular()) {
        json tbl = json::array();
        for (int s = 0; s < spec.ns(); ++s) {
            json row = json::array();
            for (int a = 0; a < spec.na(); ++a)
                row.push_back(spec.reward.table()[static_cast<std::size_t>(s) * spec.na() + a]);
            tbl.push_back(std::move(row));
        }
        j["reward"] = {{"name", "tabular"}, {"table", std::move(tbl)}};
    } else {
        RuleParams params = spec.reward.params();
        json rj;
        rj["name"] = spec.reward.name();
        auto it = params.find("sign");
        if (it != params.end()) {
            rj["sign"] = it->second[0] < 0 ? "negative_distance" : "paper_literal";
            params.erase(it);
        }
        rj["params"] = params_to_json(params);
        j["reward"] = std::move(rj);
    }

    json set = json::array();
    for (const Dist& p : spec.uncertainty_set) set.push_back(p.weights());
    j["uncertainty"] = {{"explicit", std::move(set)}};
    return j;
}

inline ModelSpec load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

inline void save_model_file(const ModelSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write model file '" + path + "'");
    out << model_to_json(spec).dump(2) << "\n";
}

}  // namespace rmfc
