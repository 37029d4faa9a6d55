#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "rmfc/model_io.hpp"

namespace rmfc {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

struct SolverConfig {
    int grid_k = 6;
    double tol = 1e-6;
    int max_iter = 10000;
    SearchConfig search;

    json to_json() const {
        json j;
        j["grid_k"] = grid_k;
        j["tol"] = tol;
        j["max_iter"] = max_iter;
        j["search"] = {{"enum_cap", search.enum_cap},
                       {"restarts", search.restarts},
                       {"action_k", search.action_k},
                       {"seed", search.seed},
                       {"norm", search.norm == ProjectionNorm::W1 ? "w1" : "l1"}};
        return j;
    }

    static SolverConfig from_json(const json& j) {
        SolverConfig c;
        c.grid_k = j.at("grid_k").get<int>();
        c.tol = j.at("tol").get<double>();
        c.max_iter = j.at("max_iter").get<int>();
        const json& s = j.at("search");
        c.search.enum_cap = s.at("enum_cap").get<int>();
        c.search.restarts = s.at("restarts").get<int>();
        c.search.action_k = s.at("action_k").get<int>();
        c.search.seed = s.at("seed").get<std::uint64_t>();
        c.search.norm = s.at("norm").get<std::string>() == "l1" ? ProjectionNorm::L1
                                                                : ProjectionNorm::W1;
        return c;
    }
};

/// Digest of the canonical model plus the mathematically relevant solver
/// parameters. Thread counts and cache budgets do not enter.
inline std::string config_hash(const ModelSpec& spec, const SolverConfig& cfg) {
    return hex64(fnv1a64(model_to_json(spec).dump() + "|" + cfg.to_json().dump()));
}

/// Self-contained solve output: model, config, tables, audit, report.
struct SolverArtifact {
    std::string hash;
    ModelSpec spec;
    SolverConfig config;
    ValueTable value;
    PolicyTable policy;
    AdversarySelector adversary;
    SolveReport report;
    AssumptionReport audit;

    PolicyRule policy_rule() const { return policy_rule_from_artifact(policy, config.search.norm); }

    /// Online worst-case selector: argmin over the uncertainty set at an
    /// arbitrary joint, evaluated against the stored value table.
    std::function<int(const JointDist&)> adversary_online() const {
        return [this](const JointDist& joint) {
            return inner_min(joint, value, spec, config.search.norm).second;
        };
    }
};

inline SolverArtifact make_artifact(const ModelSpec& spec, const SolverConfig& cfg,
                                    SolveResult sol) {
    SolverArtifact art;
    art.hash = config_hash(spec, cfg);
    art.spec = spec;
    art.config = cfg;
    art.value = std::move(sol.value);
    art.policy = std::move(sol.policy);
    art.adversary = std::move(sol.adversary);
    art.report = std::move(sol.report);
    art.audit = std::move(sol.audit);
    return art;
}

namespace io_detail {

inline json report_to_json(const SolveReport& r) {
    // wall_time_s intentionally omitted: artifacts must be byte-identical
    // across reruns with equal seeds
    json j;
    j["iterations"] = r.iterations;
    j["final_residual"] = r.final_residual;
    j["residual_history"] = r.residual_history;
    j["contraction_ratio_samples"] = r.contraction_ratio_samples;
    j["search_mode"] = r.search_mode;
    j["aposteriori_bound"] = r.aposteriori_bound;
    j["grid_size"] = r.grid_size;
    return j;
}

inline SolveReport report_from_json(const json& j) {
    SolveReport r;
    r.iterations = j.at("iterations").get<int>();
    r.final_residual = j.at("final_residual").get<double>();
    r.residual_history = j.at("residual_history").get<std::vector<double>>();
    r.contraction_ratio_samples = j.at("contraction_ratio_samples").get<std::vector<double>>();
    r.search_mode = j.at("search_mode").get<std::string>();
    r.aposteriori_bound = j.at("aposteriori_bound").get<double>();
    r.grid_size = j.at("grid_size").get<int>();
    return r;
}

inline json audit_to_json(const AssumptionReport& a) {
    json j;
    j["c_f_hat"] = a.c_f_hat;
    j["c_r_lip"] = a.c_r_lip;
    j["c_r_bound"] = a.c_r_bound;
    j["beta_ok"] = a.beta_ok;
    j["beta"] = a.beta;
    j["worst_f"] = a.worst_f;
    j["worst_r"] = a.worst_r;
    return j;
}

inline AssumptionReport audit_from_json(const json& j) {
    AssumptionReport a;
    a.c_f_hat = j.at("c_f_hat").get<double>();
    a.c_r_lip = j.at("c_r_lip").get<double>();
    a.c_r_bound = j.at("c_r_bound").get<double>();
    a.beta_ok = j.at("beta_ok").get<bool>();
    a.beta = j.at("beta").get<double>();
    a.worst_f = j.at("worst_f").get<std::string>();
    a.worst_r = j.at("worst_r").get<std::string>();
    return a;
}

}  // namespace io_detail

inline json artifact_to_json(const SolverArtifact& art) {
    json j;
    j["format"] = "rmfc-artifact";
    j["version"] = 1;
    j["config_hash"] = art.hash;
    j["model"] = model_to_json(art.spec);
    j["solver"] = art.config.to_json();
    j["grid"] = {{"resolution", art.config.grid_k}, {"size", art.value.grid->size()}};
    j["value"] = art.value.values;
    const bool finite_lip = std::isfinite(art.value.lipschitz_bound);
    j["lipschitz_bound"] = finite_lip ? json(art.value.lipschitz_bound) : json();
    json pol = json::array();
    for (const PolicyEntry& e : art.policy.entries) {
        json rows = json::array();
        for (const Dist& row : e.policy.rows) rows.push_back(row.weights());
        pol.push_back(std::move(rows));
    }
    j["policy"] = std::move(pol);
    j["adversary"] = art.adversary.table;
    j["report"] = io_detail::report_to_json(art.report);
    j["audit"] = io_detail::audit_to_json(art.audit);
    return j;
}

inline SolverArtifact artifact_from_json(const json& j) {
    if (!j.contains("format") || j.at("format").get<std::string>() != "rmfc-artifact")
        throw ArtifactError("not an rmfc artifact");
    if (j.at("version").get<int>() != 1) throw ArtifactError("unsupported artifact version");
    SolverArtifact art;
    art.hash = j.at("config_hash").get<std::string>();
    art.spec = model_from_json(j.at("model"));
    art.config = SolverConfig::from_json(j.at("solver"));
    if (config_hash(art.spec, art.config) != art.hash)
        throw ArtifactError("artifact config hash does not match its own contents");

    GridPtr grid = build_simplex_grid(art.spec.state_space, art.config.grid_k);
    if (j.contains("grid") && j.at("grid").at("size").get<int>() != grid->size())
        throw ArtifactError("artifact grid metadata does not match the model's state space");
    art.value.grid = grid;
    art.value.values = j.at("value").get<std::vector<double>>();
    art.value.lipschitz_bound = j.at("lipschitz_bound").is_null()
                                    ? std::numeric_limits<double>::infinity()
                                    : j.at("lipschitz_bound").get<double>();
    if (static_cast<int>(art.value.values.size()) != grid->size())
        throw ArtifactError("artifact value table does not match grid size");

    const json& pol = j.at("policy");
    if (static_cast<int>(pol.size()) != grid->size())
        throw ArtifactError("artifact policy table does not match grid size");
    art.policy.grid = grid;
    art.policy.entries.reserve(pol.size());
    for (int g = 0; g < grid->size(); ++g) {
        StatePolicy sp;
        for (const auto& row : pol[static_cast<std::size_t>(g)])
            sp.rows.emplace_back(art.spec.action_space, row.get<std::vector<double>>());
        JointDist joint = kernel_to_joint(grid->point(g), sp);
        art.policy.entries.push_back({std::move(sp), std::move(joint)});
    }
    art.adversary.table = j.at("adversary").get<std::vector<int>>();
    for (int idx : art.adversary.table)
        if (idx < 0 || idx >= static_cast<int>(art.spec.uncertainty_set.size()))
            throw ArtifactError("artifact adversary index out of range");
    art.report = io_detail::report_from_json(j.at("report"));
    art.audit = io_detail::audit_from_json(j.at("audit"));
    return art;
}

enum class ArtifactFormat { json_text, cbor_binary };

inline void save_artifact_file(const SolverArtifact& art, const std::string& path,
                               ArtifactFormat fmt = ArtifactFormat::json_text) {
    const json j = artifact_to_json(art);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write artifact '" + path + "'");
    if (fmt == ArtifactFormat::json_text) {
        out << j.dump(2) << "\n";
    } else {
        const std::vector<std::uint8_t> bytes = json::to_cbor(j);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
}

inline SolverArtifact load_artifact_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open artifact '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) throw ArtifactError("empty artifact file '" + path + "'");
    json j;
    try {
        if (bytes[0] == '{')
            j = json::parse(bytes.begin(), bytes.end());
        else
            j = json::from_cbor(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw ArtifactError("artifact '" + path + "': " + e.what());
    }
    return artifact_from_json(j);
}

}  // namespace rmfc
