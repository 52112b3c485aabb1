#pragma once

/// @file lint.hpp
/// Structural checker for parsed tree models. A model with zero error-level
/// diagnostics is "syntactically correct": every node name is recognized,
/// arities hold, leaf ports match the action catalog, and tree references
/// resolve. This is the reproducible stand-in for an external IDE check.

#include <algorithm>
#include <charconv>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "btkit/catalog.hpp"
#include "btkit/nodes.hpp"
#include "btkit/xml.hpp"

namespace btkit {

enum class severity { error, warning };

enum class lint_code {
    unknown_node_kind,
    unknown_action,
    unknown_port,
    missing_required_port,
    bad_port_value,
    decorator_arity,
    control_no_children,
    leaf_with_children,
    unresolved_subtree,
    ambiguous_main,
    dangling_main,
    duplicate_tree_id,
    empty_tree,
    multiple_roots,
    unused_tree,
    unknown_attribute_on_control,
};

inline std::string_view lint_code_name(lint_code code) {
    switch (code) {
        case lint_code::unknown_node_kind: return "UnknownNodeKind";
        case lint_code::unknown_action: return "UnknownAction";
        case lint_code::unknown_port: return "UnknownPort";
        case lint_code::missing_required_port: return "MissingRequiredPort";
        case lint_code::bad_port_value: return "BadPortValue";
        case lint_code::decorator_arity: return "DecoratorArity";
        case lint_code::control_no_children: return "ControlNoChildren";
        case lint_code::leaf_with_children: return "LeafWithChildren";
        case lint_code::unresolved_subtree: return "UnresolvedSubTree";
        case lint_code::ambiguous_main: return "AmbiguousMain";
        case lint_code::dangling_main: return "DanglingMain";
        case lint_code::duplicate_tree_id: return "DuplicateTreeId";
        case lint_code::empty_tree: return "EmptyTree";
        case lint_code::multiple_roots: return "MultipleRoots";
        case lint_code::unused_tree: return "UnusedTree";
        case lint_code::unknown_attribute_on_control: return "UnknownAttributeOnControl";
    }
    return "unknown";
}

struct diagnostic {
    lint_code code;
    severity sev;
    std::string message;
    source_pos span{};
    std::vector<size_t> node_path;  // {tree, root, child...}; empty = whole document
};

struct lint_options {
    /// Downgrades UnknownAction to a warning, for the reading under which a
    /// structural checker accepts unregistered custom actions as opaque nodes.
    bool lenient_unknown_actions = false;
};

namespace detail {

struct lint_walker {
    const tree_model& model;
    const action_catalog& catalog;
    const lint_options& options;
    std::vector<diagnostic>* out;

    void add(lint_code code, severity sev, std::string message, const source_pos& span,
             std::vector<size_t> path) {
        out->push_back({code, sev, std::move(message), span, std::move(path)});
    }

    static bool parse_int(std::string_view text, int& value) {
        const char* begin = text.data();
        const char* end = begin + text.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        return ec == std::errc() && ptr == end;
    }

    void check_leaf_ports(const raw_node& node, const std::string& action,
                          const port_schema& schema, bool skip_id,
                          const std::vector<size_t>& path) {
        std::set<std::string> seen;
        for (const auto& [name, value] : node.attributes) {
            if (name == "name" || (skip_id && name == "ID")) continue;
            if (!schema.allows(name)) {
                add(lint_code::unknown_port, severity::error,
                    "unknown port '" + name + "' on '" + action + "'", node.span, path);
                continue;
            }
            seen.insert(name);
        }
        for (const std::string& required : schema.required) {
            if (!seen.count(required)) {
                add(lint_code::missing_required_port, severity::error,
                    "missing required port '" + required + "' on '" + action + "'", node.span,
                    path);
            }
        }
    }

    void check_known_params(const raw_node& node, const node_type_info& info,
                            const std::vector<size_t>& path) {
        for (const auto& [name, value] : node.attributes) {
            if (name == "name") continue;
            bool known = false;
            for (int i = 0; i < info.param_count; ++i) {
                if (info.params[static_cast<size_t>(i)].name == name) {
                    known = true;
                    int parsed;
                    if (!parse_int(value, parsed) || parsed < 0) {
                        add(lint_code::bad_port_value, severity::error,
                            "parameter '" + name + "' of <" + node.element_name +
                                "> must be a non-negative integer, got \"" + value + "\"",
                            node.span, path);
                    }
                    break;
                }
            }
            if (!known) {
                add(lint_code::unknown_attribute_on_control, severity::warning,
                    "attribute '" + name + "' on <" + node.element_name + "> is ignored",
                    node.span, path);
            }
        }
        for (int i = 0; i < info.param_count; ++i) {
            const param_spec& param = info.params[static_cast<size_t>(i)];
            if (param.required && node.attribute(param.name) == nullptr) {
                add(lint_code::missing_required_port, severity::error,
                    "missing required parameter '" + std::string(param.name) + "' on <" +
                        node.element_name + ">",
                    node.span, path);
            }
        }
    }

    void walk(const raw_node& node, std::vector<size_t>& path) {
        const node_type_info* info = find_node_type(node.element_name);
        const node_category category = info ? info->category : node_category::unknown;

        switch (category) {
            case node_category::control:
                if (node.children.empty()) {
                    add(lint_code::control_no_children, severity::error,
                        "<" + node.element_name + "> has no children", node.span, path);
                }
                check_known_params(node, *info, path);
                break;

            case node_category::decorator:
                if (node.children.size() != 1) {
                    add(lint_code::decorator_arity, severity::error,
                        "<" + node.element_name + "> must have exactly 1 child, has " +
                            std::to_string(node.children.size()),
                        node.span, path);
                }
                check_known_params(node, *info, path);
                break;

            case node_category::leaf_builtin: {
                if (!node.children.empty()) {
                    add(lint_code::leaf_with_children, severity::error,
                        "<" + node.element_name + "> cannot have children", node.span, path);
                }
                for (const auto& [name, value] : node.attributes) {
                    if (name != "name") {
                        add(lint_code::unknown_port, severity::error,
                            "unknown port '" + name + "' on '" + node.element_name + "'",
                            node.span, path);
                    }
                }
                break;
            }

            case node_category::leaf_ref: {
                if (!node.children.empty()) {
                    add(lint_code::leaf_with_children, severity::error,
                        "<" + node.element_name + "> cannot have children", node.span, path);
                }
                const std::string* id = node.attribute("ID");
                if (id == nullptr) {
                    add(lint_code::unknown_action, severity::error,
                        "<" + node.element_name + "> without an ID attribute", node.span, path);
                    break;
                }
                const port_schema* schema = catalog.find(*id);
                if (schema == nullptr) {
                    add(lint_code::unknown_action,
                        options.lenient_unknown_actions ? severity::warning : severity::error,
                        "action '" + *id + "' is not in the catalog", node.span, path);
                    break;
                }
                check_leaf_ports(node, *id, *schema, /*skip_id=*/true, path);
                break;
            }

            case node_category::subtree: {
                if (!node.children.empty()) {
                    add(lint_code::leaf_with_children, severity::error,
                        "<SubTree> cannot have children", node.span, path);
                }
                const std::string* id = node.attribute("ID");
                if (id == nullptr) {
                    add(lint_code::unresolved_subtree, severity::error,
                        "<SubTree> without an ID attribute", node.span, path);
                } else if (model.find_tree(*id) == nullptr) {
                    add(lint_code::unresolved_subtree, severity::error,
                        "SubTree '" + *id + "' is not defined in this document", node.span, path);
                }
                break;
            }

            case node_category::unknown: {
                const port_schema* schema = catalog.find(node.element_name);
                if (schema != nullptr) {
                    if (!node.children.empty()) {
                        add(lint_code::leaf_with_children, severity::error,
                            "<" + node.element_name + "> cannot have children", node.span, path);
                    }
                    check_leaf_ports(node, node.element_name, *schema, /*skip_id=*/false, path);
                } else if (node.children.empty()) {
                    add(lint_code::unknown_action,
                        options.lenient_unknown_actions ? severity::warning : severity::error,
                        "unknown action '" + node.element_name + "'", node.span, path);
                } else {
                    add(lint_code::unknown_node_kind, severity::error,
                        "unknown node <" + node.element_name + ">", node.span, path);
                }
                break;
            }
        }

        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            walk(node.children[i], path);
            path.pop_back();
        }
    }
};

inline void collect_subtree_refs(const raw_node& node, std::set<std::string>& refs) {
    if (node.element_name == "SubTree") {
        if (const std::string* id = node.attribute("ID")) refs.insert(*id);
    }
    for (const raw_node& child : node.children) collect_subtree_refs(child, refs);
}

}  // namespace detail

/// Returns all findings for a model against a catalog, in document order.
inline std::vector<diagnostic> lint(const tree_model& model, const action_catalog& catalog,
                                    const lint_options& options = {}) {
    std::vector<diagnostic> diags;

    // Document-level checks.
    std::set<std::string> ids;
    for (size_t i = 0; i < model.trees.size(); ++i) {
        if (!ids.insert(model.trees[i].id).second) {
            diags.push_back({lint_code::duplicate_tree_id, severity::error,
                             "duplicate tree id '" + model.trees[i].id + "'", model.trees[i].span,
                             {i}});
        }
    }
    const main_selection main = select_main_tree(model);
    if (main.error == main_select_error::ambiguous) {
        diags.push_back({lint_code::ambiguous_main, severity::error,
                         "multiple trees and no main_tree_to_execute attribute",
                         {1, 1},
                         {}});
    } else if (main.error == main_select_error::dangling) {
        diags.push_back({lint_code::dangling_main, severity::error,
                         "main_tree_to_execute names missing tree '" + main.id + "'",
                         {1, 1},
                         {}});
    }

    detail::lint_walker walker{model, catalog, options, &diags};
    for (size_t t = 0; t < model.trees.size(); ++t) {
        const named_tree& tree = model.trees[t];
        if (tree.roots.empty()) {
            diags.push_back({lint_code::empty_tree, severity::error,
                             "tree '" + tree.id + "' has no root node", tree.span, {t}});
        } else if (tree.roots.size() > 1) {
            diags.push_back({lint_code::multiple_roots, severity::error,
                             "tree '" + tree.id + "' has " + std::to_string(tree.roots.size()) +
                                 " root nodes",
                             tree.span,
                             {t}});
        }
        for (size_t r = 0; r < tree.roots.size(); ++r) {
            std::vector<size_t> path{t, r};
            walker.walk(tree.roots[r], path);
        }
    }

    // Reachability from main, when main is unambiguous.
    if (main.ok() && model.trees.size() > 1) {
        std::set<std::string> reachable{main.id};
        for (bool grew = true; grew;) {
            grew = false;
            for (const named_tree& tree : model.trees) {
                if (!reachable.count(tree.id)) continue;
                std::set<std::string> refs;
                for (const raw_node& root : tree.roots) detail::collect_subtree_refs(root, refs);
                for (const std::string& ref : refs) {
                    if (reachable.insert(ref).second) grew = true;
                }
            }
        }
        for (size_t t = 0; t < model.trees.size(); ++t) {
            if (!reachable.count(model.trees[t].id)) {
                diags.push_back({lint_code::unused_tree, severity::warning,
                                 "tree '" + model.trees[t].id + "' is never referenced",
                                 model.trees[t].span,
                                 {t}});
            }
        }
    }

    std::stable_sort(diags.begin(), diags.end(), [](const diagnostic& a, const diagnostic& b) {
        if (a.node_path != b.node_path) {
            return std::lexicographical_compare(a.node_path.begin(), a.node_path.end(),
                                                b.node_path.begin(), b.node_path.end());
        }
        return static_cast<int>(a.code) < static_cast<int>(b.code);
    });
    return diags;
}

inline bool has_errors(const std::vector<diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const diagnostic& d) { return d.sev == severity::error; });
}

inline bool is_syntactically_correct(const tree_model& model, const action_catalog& catalog,
                                     const lint_options& options = {}) {
    return !has_errors(lint(model, catalog, options));
}

/// Machine-readable report: one record per finding.
inline nlohmann::ordered_json diagnostics_to_json(const std::vector<diagnostic>& diags) {
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const diagnostic& d : diags) {
        nlohmann::ordered_json record;
        record["code"] = std::string(lint_code_name(d.code));
        record["severity"] = d.sev == severity::error ? "error" : "warning";
        record["message"] = d.message;
        record["line"] = d.span.line;
        record["column"] = d.span.column;
        record["node_path"] = d.node_path;
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace btkit
