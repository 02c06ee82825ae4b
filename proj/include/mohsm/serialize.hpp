#pragma once

#include <json.hpp>
#include <fstream>
#include <memory>
#include <string>

#include "mohsm/metrics.hpp"
#include "mohsm/models.hpp"
#include "mohsm/types.hpp"

namespace mohsm {

using nlohmann::json;

inline json to_json(const VectorXd& v) {
    json a = json::array();
    for (int k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

inline VectorXd vector_from_json(const json& a) {
    VectorXd v(a.size());
    for (size_t k = 0; k < a.size(); ++k) v[k] = a[k].get<double>();
    return v;
}

inline json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixXd matrix_from_json(const json& rows) {
    const int R = static_cast<int>(rows.size());
    require(R > 0, "empty matrix in JSON");
    const int C = static_cast<int>(rows[0].size());
    MatrixXd m(R, C);
    for (int r = 0; r < R; ++r) {
        require(static_cast<int>(rows[r].size()) == C, "ragged matrix in JSON");
        for (int c = 0; c < C; ++c) m(r, c) = rows[r][c].get<double>();
    }
    return m;
}

inline json to_json(const KernelSpec& spec) {
    json j;
    j["n_channels"] = spec.n_channels;
    j["input_dim"] = spec.input_dim;
    j["noise"] = to_json(spec.noise);
    j["shifts"] = json::array();
    for (const auto& sh : spec.shifts) {
        json js;
        js["center"] = to_json(sh.center);
        js["ell"] = to_json(sh.ell);
        js["components"] = json::array();
        for (const auto& comp : sh.components) {
            json jc = json::array();
            for (const auto& ch : comp.channels) {
                jc.push_back({{"w", ch.w},
                              {"mu", to_json(ch.mu)},
                              {"sigma_diag", to_json(ch.sigma_diag)},
                              {"theta", to_json(ch.theta)},
                              {"phi", ch.phi}});
            }
            js["components"].push_back({{"channels", std::move(jc)}});
        }
        j["shifts"].push_back(std::move(js));
    }
    return j;
}

inline KernelSpec spec_from_json(const json& j) {
    KernelSpec spec;
    spec.n_channels = j.at("n_channels").get<int>();
    spec.input_dim = j.at("input_dim").get<int>();
    spec.noise = vector_from_json(j.at("noise"));
    for (const auto& js : j.at("shifts")) {
        ShiftGroup sh;
        sh.center = vector_from_json(js.at("center"));
        sh.ell = vector_from_json(js.at("ell"));
        for (const auto& jcomp : js.at("components")) {
            MixtureComponent comp;
            for (const auto& jc : jcomp.at("channels")) {
                ChannelSpectralParams ch;
                ch.w = jc.at("w").get<double>();
                ch.mu = vector_from_json(jc.at("mu"));
                ch.sigma_diag = vector_from_json(jc.at("sigma_diag"));
                ch.theta = vector_from_json(jc.at("theta"));
                ch.phi = jc.at("phi").get<double>();
                comp.channels.push_back(std::move(ch));
            }
            sh.components.push_back(std::move(comp));
        }
        spec.shifts.push_back(std::move(sh));
    }
    spec.validate();
    return spec;
}

inline json to_json(const HsmComponent& c) {
    return {{"w", c.w},
            {"ell", c.ell},
            {"center", to_json(c.center)},
            {"sigma_diag", to_json(c.sigma_diag)},
            {"mu", to_json(c.mu)}};
}

inline HsmComponent hsm_component_from_json(const json& j) {
    HsmComponent c;
    c.w = j.at("w").get<double>();
    c.ell = j.at("ell").get<double>();
    c.center = vector_from_json(j.at("center"));
    c.sigma_diag = vector_from_json(j.at("sigma_diag"));
    c.mu = vector_from_json(j.at("mu"));
    return c;
}

inline json to_json(const HsmParams& p) {
    json comps = json::array();
    for (const auto& c : p.components) comps.push_back(to_json(c));
    return {{"components", std::move(comps)}};
}

inline HsmParams hsm_params_from_json(const json& j) {
    HsmParams p;
    for (const auto& jc : j.at("components")) p.components.push_back(hsm_component_from_json(jc));
    return p;
}

inline json to_json(const Normalization& nz) {
    if (nz.identity()) return nullptr;
    return {{"mean", to_json(nz.mean)}, {"scale", to_json(nz.scale)}};
}

inline Normalization normalization_from_json(const json& j) {
    Normalization nz;
    if (j.is_null()) return nz;
    nz.mean = vector_from_json(j.at("mean"));
    nz.scale = vector_from_json(j.at("scale"));
    return nz;
}

/// Serialized trained model: {"model": name, "params": ..., "normalization": ...}.
inline json model_to_json(const KernelModel& model, const Normalization& nz = {}) {
    json j;
    j["model"] = model.method();
    j["normalization"] = to_json(nz);
    if (const auto* m = dynamic_cast<const MohsmModel*>(&model)) {
        j["params"] = to_json(m->spec());
    } else if (const auto* h = dynamic_cast<const HsmModel*>(&model)) {
        json chans = json::array();
        for (const auto& c : h->channels()) chans.push_back(to_json(c));
        VectorXd noise(h->n_channels());
        for (int i = 0; i < h->n_channels(); ++i) noise[i] = h->noise_sigma(i);
        j["params"] = {{"channels", std::move(chans)},
                       {"noise", to_json(noise)},
                       {"input_dim", h->input_dim()}};
    } else if (const auto* l = dynamic_cast<const LmcModel*>(&model)) {
        json lats = json::array();
        for (const auto& lat : l->latents()) lats.push_back(to_json(lat));
        VectorXd noise(l->n_channels());
        for (int i = 0; i < l->n_channels(); ++i) noise[i] = l->noise_sigma(i);
        j["params"] = {{"mixing", to_json(l->mixing())},
                       {"latents", std::move(lats)},
                       {"noise", to_json(noise)},
                       {"input_dim", l->input_dim()}};
    } else {
        throw IoError("unknown model type: " + model.method());
    }
    return j;
}

struct LoadedModel {
    std::unique_ptr<KernelModel> model;
    Normalization normalization;
};

inline LoadedModel model_from_json(const json& j) {
    LoadedModel out;
    out.normalization = normalization_from_json(j.value("normalization", json(nullptr)));
    const std::string name = j.at("model").get<std::string>();
    const json& p = j.at("params");
    if (name == "mohsm" || name == "mosm") {
        out.model = std::make_unique<MohsmModel>(spec_from_json(p), name == "mosm");
    } else if (name == "hsm") {
        std::vector<HsmParams> chans;
        for (const auto& jc : p.at("channels")) chans.push_back(hsm_params_from_json(jc));
        out.model = std::make_unique<HsmModel>(std::move(chans), vector_from_json(p.at("noise")),
                                               p.at("input_dim").get<int>());
    } else if (name == "hsm-lmc") {
        std::vector<HsmParams> lats;
        for (const auto& jl : p.at("latents")) lats.push_back(hsm_params_from_json(jl));
        out.model = std::make_unique<LmcModel>(matrix_from_json(p.at("mixing")), std::move(lats),
                                               vector_from_json(p.at("noise")),
                                               p.at("input_dim").get<int>());
    } else {
        throw IoError("unknown model type in JSON: " + name);
    }
    return out;
}

inline json to_json(const MetricReport& report) {
    json rows = json::array();
    for (const auto& e : report.entries) {
        json row = {{"method", e.method}, {"metric", e.metric},     {"channel", e.channel},
                    {"mean", e.mean},     {"std", e.std_dev},       {"trials", e.trials},
                    {"values", e.values}};
        rows.push_back(std::move(row));
    }
    json j;
    j["entries"] = std::move(rows);
    j["failures"] = report.failures;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace mohsm
