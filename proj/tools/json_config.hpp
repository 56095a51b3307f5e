#pragma once

#include <istream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

// Lets `--config file.json` feed CLI11. Nested objects name subcommands, so
//   {"threads": 2, "keyrate": {"numerical": {"preset": "bb84"}}}
// sets --threads globally and --preset on `keyrate numerical`. Command-line flags win.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::ordered_json j = dump(app, default_also);
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> out;
        flatten(j, {}, out);
        return out;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto next = parents;
                next.push_back(key);
                flatten(value, next, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
    }

    static nlohmann::ordered_json dump(const CLI::App* app, bool default_also) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
            const std::string& name = opt->get_lnames().front();
            if (opt->count() > 0) {
                const auto& res = opt->results();
                j[name] = res.size() == 1 ? nlohmann::ordered_json(res.front()) : nlohmann::ordered_json(res);
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands({})) {
            auto child = dump(sub, default_also);
            if (!child.empty()) j[sub->get_name()] = child;
        }
        return j;
    }
};
