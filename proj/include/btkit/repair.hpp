#pragma once

/// @file repair.hpp
/// Subtractive static-analysis repair for generated trees. Four passes run
/// to a fixpoint: drop unknown leaf ports, drop unknown leaf nodes, promote
/// the child of unknown single-child wrappers, and prune controls left
/// empty. Repair never adds nodes, never renames, and never invents port
/// values; faults that would need generation (a missing required port) are
/// left for lint to report.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "btkit/catalog.hpp"
#include "btkit/lint.hpp"
#include "btkit/nodes.hpp"
#include "btkit/xml.hpp"

namespace btkit {

enum class edit_kind { drop_port, drop_node, promote_child, prune_empty_control };

inline std::string_view edit_kind_name(edit_kind kind) {
    switch (kind) {
        case edit_kind::drop_port: return "DropPort";
        case edit_kind::drop_node: return "DropNode";
        case edit_kind::promote_child: return "PromoteChild";
        case edit_kind::prune_empty_control: return "PruneEmptyControl";
    }
    return "unknown";
}

struct repair_edit {
    edit_kind kind;
    std::vector<size_t> path;  // valid in the model state at the start of its pass
    std::string detail;        // port name or element name
};

struct repair_options {
    /// Replace an unknown single-child wrapper with its child instead of
    /// leaving it in place. Off reproduces the stricter drop-only behavior.
    bool promote_unknown_wrappers = true;
};

struct repair_outcome {
    tree_model repaired;
    std::vector<repair_edit> edits;
    bool converged = false;
    std::vector<diagnostic> warnings;
};

class non_convergence_error : public std::runtime_error {
public:
    explicit non_convergence_error(size_t budget)
        : std::runtime_error("repair did not converge within " + std::to_string(budget) +
                             " passes") {}
};

namespace detail {

struct planned_edit {
    edit_kind kind;
    std::vector<size_t> path;
    std::string detail;
};

inline bool is_catalog_leaf(const raw_node& node, const action_catalog& catalog,
                            std::string& action_out) {
    const node_category category = category_of(node.element_name);
    if (category == node_category::leaf_ref) {
        const std::string* id = node.attribute("ID");
        if (id != nullptr && catalog.contains(*id)) {
            action_out = *id;
            return true;
        }
        return false;
    }
    if (category == node_category::unknown && node.children.empty() &&
        catalog.contains(node.element_name)) {
        action_out = node.element_name;
        return true;
    }
    return false;
}

struct repair_planner {
    const action_catalog& catalog;
    const repair_options& options;

    void plan_drop_ports(const raw_node& node, std::vector<size_t>& path,
                         std::vector<planned_edit>& edits) {
        const node_category category = category_of(node.element_name);
        std::string action;
        if (is_catalog_leaf(node, catalog, action)) {
            const port_schema& schema = *catalog.find(action);
            const bool is_ref = category == node_category::leaf_ref;
            for (const auto& [name, value] : node.attributes) {
                if (name == "name" || (is_ref && name == "ID")) continue;
                if (!schema.allows(name)) {
                    edits.push_back({edit_kind::drop_port, path, name});
                }
            }
        } else if (category == node_category::leaf_builtin) {
            for (const auto& [name, value] : node.attributes) {
                if (name != "name") edits.push_back({edit_kind::drop_port, path, name});
            }
        }
        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            plan_drop_ports(node.children[i], path, edits);
            path.pop_back();
        }
    }

    void plan_drop_nodes(const raw_node& node, std::vector<size_t>& path,
                         std::vector<planned_edit>& edits) {
        const node_category category = category_of(node.element_name);
        std::string action;
        bool drop = false;
        std::string detail = node.element_name;
        if (category == node_category::leaf_ref && !is_catalog_leaf(node, catalog, action)) {
            const std::string* id = node.attribute("ID");
            if (id != nullptr) detail = *id;
            drop = true;
        } else if (category == node_category::unknown && node.children.empty() &&
                   !catalog.contains(node.element_name)) {
            drop = true;
        }
        if (drop) {
            edits.push_back({edit_kind::drop_node, path, detail});
            return;
        }
        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            plan_drop_nodes(node.children[i], path, edits);
            path.pop_back();
        }
    }

    void plan_promotions(const raw_node& node, std::vector<size_t>& path,
                         std::vector<planned_edit>& edits) {
        if (category_of(node.element_name) == node_category::unknown &&
            node.children.size() == 1 && !catalog.contains(node.element_name)) {
            edits.push_back({edit_kind::promote_child, path, node.element_name});
        }
        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            plan_promotions(node.children[i], path, edits);
            path.pop_back();
        }
    }

    void plan_prunes(const raw_node& node, std::vector<size_t>& path,
                     std::vector<planned_edit>& edits) {
        const node_category category = category_of(node.element_name);
        if ((category == node_category::control || category == node_category::decorator) &&
            node.children.empty()) {
            edits.push_back({edit_kind::prune_empty_control, path, node.element_name});
            return;
        }
        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            plan_prunes(node.children[i], path, edits);
            path.pop_back();
        }
    }
};

inline raw_node* mutable_node_at_path(tree_model& model, const std::vector<size_t>& path) {
    if (path.size() < 2) return nullptr;
    raw_node* node = &model.trees[path[0]].roots[path[1]];
    for (size_t i = 2; i < path.size(); ++i) node = &node->children[path[i]];
    return node;
}

inline void apply_edit(tree_model& model, const planned_edit& edit) {
    switch (edit.kind) {
        case edit_kind::drop_port: {
            raw_node* node = mutable_node_at_path(model, edit.path);
            node->remove_attribute(edit.detail);
            break;
        }
        case edit_kind::drop_node:
        case edit_kind::prune_empty_control: {
            if (edit.path.size() == 2) {
                named_tree& tree = model.trees[edit.path[0]];
                tree.roots.erase(tree.roots.begin() + static_cast<long>(edit.path[1]));
            } else {
                std::vector<size_t> parent_path(edit.path.begin(), edit.path.end() - 1);
                raw_node* parent = mutable_node_at_path(model, parent_path);
                parent->children.erase(parent->children.begin() +
                                       static_cast<long>(edit.path.back()));
            }
            break;
        }
        case edit_kind::promote_child: {
            raw_node* node = mutable_node_at_path(model, edit.path);
            raw_node child = std::move(node->children.front());
            *node = std::move(child);
            break;
        }
    }
}

/// Plans one pass against the current model, then applies the edits in
/// reverse document order so every recorded path stays valid relative to
/// the model state the pass started from.
template <typename PlanFn>
inline size_t run_pass(tree_model& model, PlanFn plan, std::vector<repair_edit>& log) {
    std::vector<planned_edit> edits;
    for (size_t t = 0; t < model.trees.size(); ++t) {
        for (size_t r = 0; r < model.trees[t].roots.size(); ++r) {
            std::vector<size_t> path{t, r};
            plan(model.trees[t].roots[r], path, edits);
        }
    }
    for (const planned_edit& edit : edits) {
        log.push_back({edit.kind, edit.path, edit.detail});
    }
    for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
        apply_edit(model, *it);
    }
    return edits.size();
}

}  // namespace detail

inline repair_outcome repair(const tree_model& model, const action_catalog& catalog,
                             const repair_options& options = {}) {
    repair_outcome outcome;
    outcome.repaired = model;

    detail::repair_planner planner{catalog, options};
    const size_t budget = count_nodes(model) + 1;
    size_t cycles = 0;
    for (;; ++cycles) {
        if (cycles > budget) throw non_convergence_error(budget);
        size_t edits = 0;
        edits += detail::run_pass(
            outcome.repaired,
            [&](const raw_node& n, std::vector<size_t>& p, std::vector<detail::planned_edit>& e) {
                planner.plan_drop_ports(n, p, e);
            },
            outcome.edits);
        edits += detail::run_pass(
            outcome.repaired,
            [&](const raw_node& n, std::vector<size_t>& p, std::vector<detail::planned_edit>& e) {
                planner.plan_drop_nodes(n, p, e);
            },
            outcome.edits);
        if (options.promote_unknown_wrappers) {
            edits += detail::run_pass(
                outcome.repaired,
                [&](const raw_node& n, std::vector<size_t>& p,
                    std::vector<detail::planned_edit>& e) { planner.plan_promotions(n, p, e); },
                outcome.edits);
        }
        edits += detail::run_pass(
            outcome.repaired,
            [&](const raw_node& n, std::vector<size_t>& p, std::vector<detail::planned_edit>& e) {
                planner.plan_prunes(n, p, e);
            },
            outcome.edits);
        if (edits == 0) {
            outcome.converged = true;
            break;
        }
    }

    for (size_t t = 0; t < outcome.repaired.trees.size(); ++t) {
        const named_tree& tree = outcome.repaired.trees[t];
        if (tree.roots.empty()) {
            outcome.warnings.push_back({lint_code::empty_tree, severity::warning,
                                        "tree '" + tree.id + "' is empty after repair", tree.span,
                                        {t}});
        }
    }
    return outcome;
}

/// Unified-diff-style rendering of a repair: canonical serializations of
/// the original and repaired models, line-diffed with 3 lines of context.
inline std::string render_repair_diff(const tree_model& before, const tree_model& after) {
    auto split_lines = [](const std::string& text) {
        std::vector<std::string> lines;
        size_t start = 0;
        while (start <= text.size()) {
            size_t end = text.find('\n', start);
            if (end == std::string::npos) {
                lines.push_back(text.substr(start));
                break;
            }
            lines.push_back(text.substr(start, end - start));
            start = end + 1;
        }
        return lines;
    };
    const std::vector<std::string> a = split_lines(serialize(before));
    const std::vector<std::string> b = split_lines(serialize(after));

    // LCS table; documents are small.
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<size_t>> lcs(n + 1, std::vector<size_t>(m + 1, 0));
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1
                                     : std::max(lcs[i + 1][j], lcs[i][j + 1]);
        }
    }
    struct line_op {
        char tag;  // ' ', '-', '+'
        const std::string* text;
    };
    std::vector<line_op> ops;
    for (size_t i = 0, j = 0;;) {
        if (i < n && j < m && a[i] == b[j]) {
            ops.push_back({' ', &a[i]});
            ++i, ++j;
        } else if (i < n && (j == m || lcs[i + 1][j] >= lcs[i][j + 1])) {
            ops.push_back({'-', &a[i]});
            ++i;
        } else if (j < m) {
            ops.push_back({'+', &b[j]});
            ++j;
        } else {
            break;
        }
    }

    std::string out = "--- original\n+++ repaired\n";
    const size_t context = 3;
    size_t k = 0;
    size_t a_line = 1, b_line = 1;
    while (k < ops.size()) {
        if (ops[k].tag == ' ') {
            ++a_line, ++b_line, ++k;
            continue;
        }
        // Found a change; open a hunk that spans it plus context.
        size_t hunk_begin = k;
        size_t lead = 0;
        while (hunk_begin > 0 && lead < context && ops[hunk_begin - 1].tag == ' ') {
            --hunk_begin;
            ++lead;
        }
        size_t hunk_end = k;
        size_t quiet = 0;
        while (hunk_end < ops.size()) {
            if (ops[hunk_end].tag == ' ') {
                ++quiet;
                if (quiet > context * 2) break;
            } else {
                quiet = 0;
            }
            ++hunk_end;
        }
        while (hunk_end > hunk_begin && quiet > context) {
            --hunk_end;
            --quiet;
        }
        size_t a_start = a_line - lead, b_start = b_line - lead;
        size_t a_count = 0, b_count = 0;
        for (size_t i = hunk_begin; i < hunk_end; ++i) {
            if (ops[i].tag != '+') ++a_count;
            if (ops[i].tag != '-') ++b_count;
        }
        out += "@@ -" + std::to_string(a_start) + "," + std::to_string(a_count) + " +" +
               std::to_string(b_start) + "," + std::to_string(b_count) + " @@\n";
        for (size_t i = hunk_begin; i < hunk_end; ++i) {
            out.push_back(ops[i].tag);
            out += *ops[i].text;
            out.push_back('\n');
        }
        a_line = a_start + a_count;
        b_line = b_start + b_count;
        k = hunk_end;
    }
    return out;
}

}  // namespace btkit
