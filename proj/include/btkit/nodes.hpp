#pragma once

/// @file nodes.hpp
/// Node status values and the table of node types the dialect recognizes.

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace btkit {

enum class node_status { success, failure, running };

inline std::string_view status_name(node_status st) {
    switch (st) {
        case node_status::success: return "success";
        case node_status::failure: return "failure";
        case node_status::running: return "running";
    }
    return "unknown";
}

inline std::optional<node_status> parse_status(std::string_view text) {
    if (text == "success" || text == "SUCCESS") return node_status::success;
    if (text == "failure" || text == "FAILURE") return node_status::failure;
    if (text == "running" || text == "RUNNING") return node_status::running;
    return std::nullopt;
}

/// Structural role of an element name in the dialect.
enum class node_category {
    control,       // >=1 child, routes ticks (Sequence, Fallback, ...)
    decorator,     // exactly 1 child, transforms its status
    leaf_builtin,  // 0 children, fixed behavior (AlwaysSuccess, AlwaysFailure)
    leaf_ref,      // <Action ID="..."/> or <Condition ID="..."/>
    subtree,       // reference to another tree in the same document
    unknown,       // not a dialect name; may still resolve through a catalog
};

struct param_spec {
    std::string_view name;
    bool required = false;
};

struct node_type_info {
    std::string_view element_name;
    node_category category;
    // Known parameters for controls/decorators. Leaves take their port set
    // from the action catalog instead.
    std::array<param_spec, 1> params{};
    int param_count = 0;
};

namespace detail {

inline constexpr node_type_info k_node_types[] = {
    {"Sequence", node_category::control, {}, 0},
    {"ReactiveSequence", node_category::control, {}, 0},
    {"Fallback", node_category::control, {}, 0},
    {"ReactiveFallback", node_category::control, {}, 0},
    {"Parallel", node_category::control, {{{"success_count", false}}}, 1},
    {"Inverter", node_category::decorator, {}, 0},
    {"RetryUntilSuccessful", node_category::decorator, {{{"num_attempts", true}}}, 1},
    {"Repeat", node_category::decorator, {{{"num_cycles", true}}}, 1},
    {"KeepRunningUntilFailure", node_category::decorator, {}, 0},
    {"ForceSuccess", node_category::decorator, {}, 0},
    {"ForceFailure", node_category::decorator, {}, 0},
    {"Timeout", node_category::decorator, {{{"msec", true}}}, 1},
    {"Action", node_category::leaf_ref, {}, 0},
    {"Condition", node_category::leaf_ref, {}, 0},
    {"AlwaysSuccess", node_category::leaf_builtin, {}, 0},
    {"AlwaysFailure", node_category::leaf_builtin, {}, 0},
    {"SubTree", node_category::subtree, {}, 0},
};

}  // namespace detail

inline const node_type_info* find_node_type(std::string_view element_name) {
    for (const node_type_info& info : detail::k_node_types) {
        if (info.element_name == element_name) {
            return &info;
        }
    }
    return nullptr;
}

inline node_category category_of(std::string_view element_name) {
    const node_type_info* info = find_node_type(element_name);
    return info ? info->category : node_category::unknown;
}

}  // namespace btkit
