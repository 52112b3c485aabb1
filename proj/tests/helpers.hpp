#pragma once

// Shared plumbing for the test suites: fixture paths, temp dirs, file IO,
// and tree mutations used by the validation and acceptance suites.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "btkit/task.hpp"
#include "btkit/xml.hpp"

namespace testutil {

inline std::filesystem::path source_dir() { return std::filesystem::path(BTKIT_SOURCE_DIR); }

inline std::filesystem::path tasks_dir() { return source_dir() / "tasks"; }

inline std::filesystem::path golden_tree_path(int task) {
    return tasks_dir() / "golden" / ("task" + std::to_string(task) + ".xml");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::filesystem::path make_temp_dir(const std::string& prefix) {
    static std::atomic<int> counter{0};
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() /
        ("btkit-" + prefix + "-" + std::to_string(::getpid()) + "-" +
         std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline btkit::tree_model parse_file(const std::filesystem::path& path) {
    btkit::parse_result result = btkit::parse(read_file(path));
    if (!result.ok()) {
        throw std::runtime_error("fixture " + path.string() +
                                 " does not parse: " + result.error->message);
    }
    return std::move(*result.model);
}

inline btkit::task_spec load_task(int task) {
    return btkit::load_task_spec(tasks_dir() / ("task" + std::to_string(task) + ".json"));
}

inline btkit::tree_model golden_tree(int task) { return parse_file(golden_tree_path(task)); }

// --- mutations over golden trees -------------------------------------------

inline btkit::raw_node* first_matching(btkit::raw_node& node,
                                       bool (*predicate)(const btkit::raw_node&)) {
    if (predicate(node)) return &node;
    for (btkit::raw_node& child : node.children) {
        if (btkit::raw_node* hit = first_matching(child, predicate)) return hit;
    }
    return nullptr;
}

inline void reverse_children_everywhere(btkit::raw_node& node) {
    if (node.children.size() >= 2) {
        std::reverse(node.children.begin(), node.children.end());
    }
    for (btkit::raw_node& child : node.children) reverse_children_everywhere(child);
}

/// Shuffled-order mutant: every multi-child node gets its children reversed.
inline btkit::tree_model mutant_shuffled(const btkit::tree_model& model) {
    btkit::tree_model out = model;
    for (btkit::named_tree& tree : out.trees) {
        for (btkit::raw_node& root : tree.roots) reverse_children_everywhere(root);
    }
    return out;
}

inline bool is_catalog_leaf_node(const btkit::raw_node& node) {
    using btkit::node_category;
    const node_category category = btkit::category_of(node.element_name);
    if (category == node_category::leaf_ref) return true;
    return category == node_category::unknown && node.children.empty();
}

/// Dropped-action mutant: removes the first catalog leaf in document order.
inline btkit::tree_model mutant_dropped(const btkit::tree_model& model) {
    btkit::tree_model out = model;
    for (btkit::named_tree& tree : out.trees) {
        for (btkit::raw_node& root : tree.roots) {
            std::vector<btkit::raw_node*> stack{&root};
            while (!stack.empty()) {
                btkit::raw_node* node = stack.back();
                stack.pop_back();
                for (size_t i = 0; i < node->children.size(); ++i) {
                    if (is_catalog_leaf_node(node->children[i])) {
                        node->children.erase(node->children.begin() + static_cast<long>(i));
                        return out;
                    }
                }
                for (btkit::raw_node& child : node->children) stack.push_back(&child);
            }
        }
    }
    return out;
}

/// Extra-parameter mutant: first catalog leaf gains an unknown port.
inline btkit::tree_model mutant_extra_param(const btkit::tree_model& model) {
    btkit::tree_model out = model;
    for (btkit::named_tree& tree : out.trees) {
        for (btkit::raw_node& root : tree.roots) {
            if (btkit::raw_node* leaf = first_matching(root, &is_catalog_leaf_node)) {
                leaf->set_attribute("speed", "fast");
                return out;
            }
        }
    }
    return out;
}

/// Wrong-structure mutant: the first control with two or more children has
/// its kind flipped between Sequence and Fallback.
inline btkit::tree_model mutant_wrong_structure(const btkit::tree_model& model) {
    btkit::tree_model out = model;
    auto is_wide_control = [](const btkit::raw_node& node) {
        return (node.element_name == "Sequence" || node.element_name == "Fallback") &&
               node.children.size() >= 2;
    };
    for (btkit::named_tree& tree : out.trees) {
        for (btkit::raw_node& root : tree.roots) {
            if (btkit::raw_node* hit = first_matching(root, +is_wide_control)) {
                hit->element_name = hit->element_name == "Sequence" ? "Fallback" : "Sequence";
                return out;
            }
        }
    }
    return out;
}

// --- random documents for round-trip properties -----------------------------

inline btkit::raw_node random_node(std::mt19937& rng, int depth) {
    static const char* names[] = {"Sequence", "Fallback",  "MoveTo",   "CheckStatus",
                                  "Inverter", "WeirdNode", "SubTree",  "Action",
                                  "GoPoint",  "x-y.z_w",   "Parallel", "AlwaysSuccess"};
    static const char* attr_names[] = {"goal", "ID", "name", "speed", "_weird", "msg"};
    static const char* attr_values[] = {"1,2",         "a & b",       "quote\"inside",
                                        "<tag>",       "multi\nline", "tab\there",
                                        "plain",       "'single'",    "trailing ",
                                        "&#65; literal"};
    std::uniform_int_distribution<size_t> name_of(0, std::size(names) - 1);
    std::uniform_int_distribution<size_t> attr_name_of(0, std::size(attr_names) - 1);
    std::uniform_int_distribution<size_t> attr_value_of(0, std::size(attr_values) - 1);
    std::uniform_int_distribution<int> attr_count(0, 3);
    std::uniform_int_distribution<int> child_count(0, depth > 0 ? 3 : 0);

    btkit::raw_node node;
    node.element_name = names[name_of(rng)];
    const int attrs = attr_count(rng);
    for (int i = 0; i < attrs; ++i) {
        const char* name = attr_names[attr_name_of(rng)];
        if (node.attribute(name) == nullptr) {
            node.attributes.emplace_back(name, attr_values[attr_value_of(rng)]);
        }
    }
    const int children = child_count(rng);
    for (int i = 0; i < children; ++i) node.children.push_back(random_node(rng, depth - 1));
    return node;
}

inline btkit::tree_model random_model(std::mt19937& rng) {
    std::uniform_int_distribution<int> tree_count(1, 3);
    std::uniform_int_distribution<int> flag(0, 1);
    btkit::tree_model model;
    const int trees = tree_count(rng);
    for (int i = 0; i < trees; ++i) {
        btkit::named_tree tree;
        tree.id = "Tree" + std::to_string(i);
        tree.roots.push_back(random_node(rng, 3));
        model.trees.push_back(std::move(tree));
    }
    if (flag(rng)) model.format_version = flag(rng) ? "4" : "3";
    if (trees > 1 || flag(rng)) model.main_tree_id = "Tree0";
    if (flag(rng)) model.extra_root_attributes.emplace_back("_comment", "generated <&>");
    if (flag(rng)) {
        btkit::raw_node extra;
        extra.element_name = "TreeNodesModel";
        model.extras.push_back(std::move(extra));
    }
    return model;
}

}  // namespace testutil
