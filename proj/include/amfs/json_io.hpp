#pragma once

// JSON mapping for the descriptor-level types. Kept out of model.hpp so that
// most translation units do not pull in the JSON header.

#include "amfs/model.hpp"

#include <json.hpp>

namespace amfs {

using Json = nlohmann::json;

Json to_json(const ModuleDescriptor& d);
ModuleDescriptor descriptor_from_json(const Json& j);

Json to_json(const Placement& p);
Json to_json(const Footprint& f);
Json to_json(const ModuleStatus& s);

/// Reads a required member, throwing ParseError naming `path` when missing
/// or of the wrong type.
template <typename T>
T required(const Json& j, const char* key, std::string_view path = {})
{
    auto it = j.find(key);
    std::string where = path.empty() ? std::string(key) : std::string(path) + "." + key;
    if (it == j.end()) throw ParseError("missing required field '" + where + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError("field '" + where + "' has the wrong type");
    }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace amfs
