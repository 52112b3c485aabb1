#pragma once

/// @file catalog.hpp
/// The set of leaf actions/conditions a tree may use, with their port schemas.

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace btkit {

enum class entry_kind { action, condition };

struct port_schema {
    entry_kind kind = entry_kind::action;
    std::set<std::string> required;
    std::set<std::string> optional;

    bool allows(std::string_view port) const {
        return required.count(std::string(port)) > 0 || optional.count(std::string(port)) > 0;
    }
};

struct action_catalog {
    std::map<std::string, port_schema> entries;

    bool contains(std::string_view name) const { return entries.count(std::string(name)) > 0; }

    const port_schema* find(std::string_view name) const {
        auto it = entries.find(std::string(name));
        return it == entries.end() ? nullptr : &it->second;
    }
};

}  // namespace btkit
