#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "repufit/common.hpp"
#include "repufit/network.hpp"

namespace repufit {

using nlohmann::json;

inline json to_json(const RepuNetwork& net) {
    json j;
    j["format_version"] = kFormatVersion;
    j["k"] = net.k;
    j["d"] = net.d;
    j["scaling"] = to_string(net.scaling);
    j["a0"] = net.a0;
    json neurons = json::array();
    for (const auto& nr : net.neurons) {
        neurons.push_back({{"a", nr.a}, {"w", nr.w}, {"b", nr.b}});
    }
    j["neurons"] = std::move(neurons);
    if (net.poly_tail) {
        json tail = json::array();
        for (const auto& t : *net.poly_tail) {
            tail.push_back({{"coef", t.coef}, {"alpha", t.alpha.orders}});
        }
        j["poly_tail"] = std::move(tail);
    } else {
        j["poly_tail"] = nullptr;
    }
    return j;
}

inline Scaling scaling_from_string(const std::string& s) {
    if (s == "mean_field") return Scaling::MeanField;
    if (s == "sum") return Scaling::Sum;
    throw ParseError("unknown scaling '" + s + "' (expected mean_field or sum)");
}

inline RepuNetwork network_from_json(const json& j) {
    try {
        if (!j.is_object()) throw ParseError("model: top level is not an object");
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw ParseError("model: unsupported format_version " + std::to_string(version));
        RepuNetwork net;
        net.k = j.at("k").get<int>();
        net.d = j.at("d").get<int>();
        net.scaling = scaling_from_string(j.at("scaling").get<std::string>());
        net.a0 = j.at("a0").get<double>();
        for (const auto& nj : j.at("neurons")) {
            Neuron nr;
            nr.a = nj.at("a").get<double>();
            nr.w = nj.at("w").get<std::vector<double>>();
            nr.b = nj.at("b").get<double>();
            net.neurons.push_back(std::move(nr));
        }
        if (j.contains("poly_tail") && !j.at("poly_tail").is_null()) {
            std::vector<PolyTerm> tail;
            for (const auto& tj : j.at("poly_tail")) {
                PolyTerm t;
                t.coef = tj.at("coef").get<double>();
                t.alpha = MultiIndex(tj.at("alpha").get<std::vector<int>>());
                tail.push_back(std::move(t));
            }
            net.poly_tail = std::move(tail);
        }
        net.validate();
        return net;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    } catch (const InputError& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

inline void save_model(const RepuNetwork& net, const std::filesystem::path& path) {
    write_text_atomic(path, to_json(net).dump(2) + "\n");
}

inline RepuNetwork load_model(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
    return network_from_json(j);
}

}  // namespace repufit
