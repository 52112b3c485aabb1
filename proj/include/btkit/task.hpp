#pragma once

/// @file task.hpp
/// Machine-checkable task specifications: an action catalog, a scripted
/// environment deciding each action invocation, and a trace pattern that
/// encodes what a correct run looks like. Specs load from JSON documents;
/// the schema is documented in tasks/schema.md.

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "btkit/catalog.hpp"
#include "btkit/engine.hpp"
#include "btkit/lint.hpp"
#include "btkit/nodes.hpp"
#include "btkit/prompt.hpp"

namespace btkit {

class schema_error : public std::runtime_error {
public:
    schema_error(std::string field_path, const std::string& message)
        : std::runtime_error(field_path + ": " + message), field_path_(std::move(field_path)) {}

    const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

class unknown_action_in_rule : public schema_error {
public:
    unknown_action_in_rule(std::string field_path, std::string action)
        : schema_error(std::move(field_path),
                       "action '" + action + "' is not in the catalog"),
          action_(std::move(action)) {}

    const std::string& action() const { return action_; }

private:
    std::string action_;
};

/// 1-based invocation indices: "3", "2..", "..4", "2..5", "" (any).
struct invocation_range {
    int lo = 1;
    int hi = std::numeric_limits<int>::max();

    bool contains(int index) const { return index >= lo && index <= hi; }

    static invocation_range parse(std::string_view text, const std::string& field) {
        invocation_range range;
        if (text.empty()) return range;
        const size_t dots = text.find("..");
        auto to_int = [&](std::string_view part) {
            int value = 0;
            if (part.empty()) throw schema_error(field, "empty bound in invocation range");
            for (char c : part) {
                if (c < '0' || c > '9') {
                    throw schema_error(field, "bad invocation range \"" + std::string(text) + "\"");
                }
                value = value * 10 + (c - '0');
            }
            return value;
        };
        if (dots == std::string_view::npos) {
            range.lo = range.hi = to_int(text);
        } else {
            if (dots > 0) range.lo = to_int(text.substr(0, dots));
            if (dots + 2 < text.size()) range.hi = to_int(text.substr(dots + 2));
        }
        if (range.lo > range.hi) throw schema_error(field, "inverted invocation range");
        return range;
    }
};

using port_values = std::vector<std::pair<std::string, std::string>>;

namespace detail {

/// Subset match: every listed port must be present with exactly that value.
inline bool ports_match(const port_values& expected, const port_values& actual) {
    for (const auto& [name, value] : expected) {
        bool found = false;
        for (const auto& [aname, avalue] : actual) {
            if (aname == name) {
                found = avalue == value;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace detail

struct env_rule {
    std::string action;
    port_values ports;  // subset matcher
    invocation_range invocations;
    std::optional<std::string> if_flag;  // rule applies only while this flag is raised
    node_status status = node_status::success;
};

/// Raises `name` once `count` invocations matching (action, ports) happened.
struct flag_def {
    std::string name;
    std::string action;
    port_values ports;
    int count = 1;
};

struct environment_script {
    std::map<std::string, node_status> defaults;  // per action; "*" is the global fallback
    std::vector<env_rule> rules;
    std::vector<flag_def> flags;
};

struct event_matcher {
    std::string action;
    port_values ports;
    std::optional<node_status> status;  // unset = any
    int max_occurrences = 0;            // forbidden-list use only

    bool matches(const trace_event& event) const {
        if (!is_catalog_leaf_kind(event.kind)) return false;
        if (event.action != action) return false;
        if (status && event.status != *status) return false;
        return detail::ports_match(ports, event.ports);
    }

    std::string describe() const {
        std::string out = action;
        for (const auto& [name, value] : ports) out += " " + name + "=\"" + value + "\"";
        if (status) out += " -> " + std::string(status_name(*status));
        return out;
    }
};

struct precedence_constraint {
    std::vector<event_matcher> before;
    std::vector<event_matcher> after;
};

struct trace_pattern {
    std::vector<event_matcher> ordered;    // subsequence, in order
    std::vector<event_matcher> required;   // anywhere, any order
    std::vector<event_matcher> forbidden;  // more than max_occurrences matches fails
    std::vector<precedence_constraint> precedence;
    bool require_root_success = true;
};

struct task_spec {
    int id = 0;
    std::string title;
    std::string description;  // natural-language prompt text
    action_catalog catalog;
    environment_script environment;
    trace_pattern pattern;
    int max_ticks = 100;
    std::optional<example_pair> example;  // one-shot prompt example
};

/// Action host driven by an environment script. Holds per-action invocation
/// counters and flag states; identical invocation histories yield identical
/// statuses.
class scripted_host : public action_host {
public:
    explicit scripted_host(const task_spec& spec)
        : catalog_(spec.catalog), script_(spec.environment) {
        reset();
    }

    const action_catalog& catalog() const override { return catalog_; }

    node_status invoke(const std::string& action, const port_values& ports) override {
        const int index = ++invocations_[action];
        for (const flag_def& flag : script_.flags) {
            if (flag.action == action && detail::ports_match(flag.ports, ports)) {
                if (++flag_counts_[flag.name] >= flag.count) flags_[flag.name] = true;
            }
        }
        for (const env_rule& rule : script_.rules) {
            if (rule.action != action) continue;
            if (!rule.invocations.contains(index)) continue;
            if (!detail::ports_match(rule.ports, ports)) continue;
            if (rule.if_flag && !flag_raised(*rule.if_flag)) continue;
            return rule.status;
        }
        auto it = script_.defaults.find(action);
        if (it != script_.defaults.end()) return it->second;
        it = script_.defaults.find("*");
        return it != script_.defaults.end() ? it->second : node_status::success;
    }

    bool flag_raised(const std::string& name) const {
        auto it = flags_.find(name);
        return it != flags_.end() && it->second;
    }

    int invocation_count(const std::string& action) const {
        auto it = invocations_.find(action);
        return it == invocations_.end() ? 0 : it->second;
    }

    void reset() {
        invocations_.clear();
        flag_counts_.clear();
        flags_.clear();
    }

private:
    action_catalog catalog_;
    environment_script script_;
    std::map<std::string, int> invocations_;
    std::map<std::string, int> flag_counts_;
    std::map<std::string, bool> flags_;
};

namespace detail {

inline const nlohmann::json* get_field(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  const std::string& path) {
    const nlohmann::json* field = get_field(obj, key);
    if (field == nullptr || !field->is_string()) {
        throw schema_error(path + "." + key, "missing or not a string");
    }
    return field->get<std::string>();
}

inline node_status require_status(const nlohmann::json& value, const std::string& path) {
    if (!value.is_string()) throw schema_error(path, "expected a status string");
    std::optional<node_status> status = parse_status(value.get<std::string>());
    if (!status) {
        throw schema_error(path, "bad status \"" + value.get<std::string>() +
                                     "\" (expected success/failure/running)");
    }
    return *status;
}

inline port_values read_ports(const nlohmann::json& obj, const std::string& path) {
    port_values ports;
    if (const nlohmann::json* field = get_field(obj, "ports")) {
        if (!field->is_object()) throw schema_error(path + ".ports", "expected an object");
        for (auto it = field->begin(); it != field->end(); ++it) {
            if (!it.value().is_string()) {
                throw schema_error(path + ".ports." + it.key(), "port values are strings");
            }
            ports.emplace_back(it.key(), it.value().get<std::string>());
        }
    }
    return ports;
}

inline event_matcher read_matcher(const nlohmann::json& obj, const action_catalog& catalog,
                                  const std::string& path) {
    if (!obj.is_object()) throw schema_error(path, "expected an object");
    event_matcher matcher;
    matcher.action = require_string(obj, "action", path);
    if (!catalog.contains(matcher.action)) {
        throw unknown_action_in_rule(path + ".action", matcher.action);
    }
    matcher.ports = read_ports(obj, path);
    if (const nlohmann::json* status = get_field(obj, "status")) {
        if (status->is_string() && status->get<std::string>() == "any") {
            matcher.status = std::nullopt;
        } else {
            matcher.status = require_status(*status, path + ".status");
        }
    }
    if (const nlohmann::json* max = get_field(obj, "max_occurrences")) {
        if (!max->is_number_integer() || max->get<int>() < 0) {
            throw schema_error(path + ".max_occurrences", "expected a non-negative integer");
        }
        matcher.max_occurrences = max->get<int>();
    }
    return matcher;
}

inline std::vector<event_matcher> read_matcher_list(const nlohmann::json& obj, const char* key,
                                                    const action_catalog& catalog,
                                                    const std::string& path) {
    std::vector<event_matcher> matchers;
    const nlohmann::json* field = get_field(obj, key);
    if (field == nullptr) return matchers;
    if (!field->is_array()) throw schema_error(path + "." + key, "expected an array");
    for (size_t i = 0; i < field->size(); ++i) {
        matchers.push_back(
            read_matcher((*field)[i], catalog, path + "." + key + "[" + std::to_string(i) + "]"));
    }
    return matchers;
}

}  // namespace detail

/// Parses a catalog document: { "MoveTo": { "kind": "action",
/// "required": ["goal"], "optional": [] }, ... }.
inline action_catalog catalog_from_json(const nlohmann::json& doc,
                                        const std::string& root_path = "catalog") {
    if (!doc.is_object() || doc.empty()) throw schema_error(root_path, "missing or empty");
    action_catalog catalog;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string path = root_path + "." + it.key();
        if (!it.value().is_object()) throw schema_error(path, "expected an object");
        port_schema schema;
        if (const nlohmann::json* kind = detail::get_field(it.value(), "kind")) {
            const std::string text = kind->get<std::string>();
            if (text == "condition") schema.kind = entry_kind::condition;
            else if (text == "action") schema.kind = entry_kind::action;
            else throw schema_error(path + ".kind", "expected \"action\" or \"condition\"");
        }
        auto read_port_set = [&](const char* key, std::set<std::string>& out) {
            if (const nlohmann::json* list = detail::get_field(it.value(), key)) {
                if (!list->is_array()) throw schema_error(path + "." + key, "expected an array");
                for (const nlohmann::json& port : *list) out.insert(port.get<std::string>());
            }
        };
        read_port_set("required", schema.required);
        read_port_set("optional", schema.optional);
        for (const std::string& port : schema.required) {
            if (schema.optional.count(port)) {
                throw schema_error(path, "port '" + port + "' is both required and optional");
            }
        }
        catalog.entries[it.key()] = std::move(schema);
    }
    return catalog;
}

inline action_catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw schema_error("$", "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error("$", std::string("invalid JSON: ") + e.what());
    }
    return catalog_from_json(doc, "$");
}

/// Builds a task spec from its JSON document. `base_dir` resolves relative
/// example-tree paths.
inline task_spec task_spec_from_json(const nlohmann::json& doc,
                                     const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw schema_error("$", "task spec must be a JSON object");
    task_spec spec;

    const nlohmann::json* id = detail::get_field(doc, "id");
    if (id == nullptr || !id->is_number_integer()) throw schema_error("id", "missing integer id");
    spec.id = id->get<int>();
    if (spec.id < 1 || spec.id > 9) throw schema_error("id", "task id must be in 1..9");

    spec.title = detail::require_string(doc, "title", "$");
    spec.description = detail::require_string(doc, "description", "$");

    if (const nlohmann::json* ticks = detail::get_field(doc, "max_ticks")) {
        if (!ticks->is_number_integer() || ticks->get<int>() < 1) {
            throw schema_error("max_ticks", "expected a positive integer");
        }
        spec.max_ticks = ticks->get<int>();
    }

    const nlohmann::json* catalog = detail::get_field(doc, "catalog");
    if (catalog == nullptr) throw schema_error("catalog", "missing or empty");
    spec.catalog = catalog_from_json(*catalog);

    if (const nlohmann::json* env = detail::get_field(doc, "environment")) {
        if (!env->is_object()) throw schema_error("environment", "expected an object");
        if (const nlohmann::json* defaults = detail::get_field(*env, "defaults")) {
            for (auto it = defaults->begin(); it != defaults->end(); ++it) {
                const std::string path = "environment.defaults." + it.key();
                if (it.key() != "*" && !spec.catalog.contains(it.key())) {
                    throw unknown_action_in_rule(path, it.key());
                }
                spec.environment.defaults[it.key()] = detail::require_status(it.value(), path);
            }
        }
        if (const nlohmann::json* rules = detail::get_field(*env, "rules")) {
            if (!rules->is_array()) throw schema_error("environment.rules", "expected an array");
            for (size_t i = 0; i < rules->size(); ++i) {
                const std::string path = "environment.rules[" + std::to_string(i) + "]";
                const nlohmann::json& obj = (*rules)[i];
                env_rule rule;
                rule.action = detail::require_string(obj, "action", path);
                if (!spec.catalog.contains(rule.action)) {
                    throw unknown_action_in_rule(path + ".action", rule.action);
                }
                rule.ports = detail::read_ports(obj, path);
                if (const nlohmann::json* inv = detail::get_field(obj, "invocations")) {
                    rule.invocations =
                        invocation_range::parse(inv->get<std::string>(), path + ".invocations");
                }
                if (const nlohmann::json* flag = detail::get_field(obj, "if_flag")) {
                    rule.if_flag = flag->get<std::string>();
                }
                const nlohmann::json* status = detail::get_field(obj, "status");
                if (status == nullptr) throw schema_error(path + ".status", "missing");
                rule.status = detail::require_status(*status, path + ".status");
                spec.environment.rules.push_back(std::move(rule));
            }
        }
        if (const nlohmann::json* flags = detail::get_field(*env, "flags")) {
            if (!flags->is_array()) throw schema_error("environment.flags", "expected an array");
            for (size_t i = 0; i < flags->size(); ++i) {
                const std::string path = "environment.flags[" + std::to_string(i) + "]";
                const nlohmann::json& obj = (*flags)[i];
                flag_def flag;
                flag.name = detail::require_string(obj, "name", path);
                flag.action = detail::require_string(obj, "action", path);
                if (!spec.catalog.contains(flag.action)) {
                    throw unknown_action_in_rule(path + ".action", flag.action);
                }
                flag.ports = detail::read_ports(obj, path);
                if (const nlohmann::json* count = detail::get_field(obj, "count")) {
                    if (!count->is_number_integer() || count->get<int>() < 1) {
                        throw schema_error(path + ".count", "expected a positive integer");
                    }
                    flag.count = count->get<int>();
                }
                spec.environment.flags.push_back(std::move(flag));
            }
        }
    }

    const nlohmann::json* pattern = detail::get_field(doc, "pattern");
    if (pattern == nullptr || !pattern->is_object()) throw schema_error("pattern", "missing");
    spec.pattern.ordered = detail::read_matcher_list(*pattern, "ordered", spec.catalog, "pattern");
    spec.pattern.required =
        detail::read_matcher_list(*pattern, "required", spec.catalog, "pattern");
    spec.pattern.forbidden =
        detail::read_matcher_list(*pattern, "forbidden", spec.catalog, "pattern");
    if (const nlohmann::json* precedence = detail::get_field(*pattern, "precedence")) {
        if (!precedence->is_array()) throw schema_error("pattern.precedence", "expected an array");
        for (size_t i = 0; i < precedence->size(); ++i) {
            const std::string path = "pattern.precedence[" + std::to_string(i) + "]";
            precedence_constraint constraint;
            constraint.before =
                detail::read_matcher_list((*precedence)[i], "before", spec.catalog, path);
            constraint.after =
                detail::read_matcher_list((*precedence)[i], "after", spec.catalog, path);
            if (constraint.before.empty() || constraint.after.empty()) {
                throw schema_error(path, "before/after must both be non-empty");
            }
            spec.pattern.precedence.push_back(std::move(constraint));
        }
    }
    if (const nlohmann::json* root = detail::get_field(*pattern, "require_root_success")) {
        if (!root->is_boolean()) {
            throw schema_error("pattern.require_root_success", "expected a boolean");
        }
        spec.pattern.require_root_success = root->get<bool>();
    }

    if (const nlohmann::json* example = detail::get_field(doc, "example")) {
        if (!example->is_object()) throw schema_error("example", "expected an object");
        example_pair pair;
        pair.description = detail::require_string(*example, "description", "example");
        const std::string tree_ref = detail::require_string(*example, "tree", "example");
        const std::filesystem::path tree_path = base_dir / tree_ref;
        std::ifstream in(tree_path);
        if (!in) throw schema_error("example.tree", "cannot open " + tree_path.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        pair.tree_xml = buffer.str();
        // Trim a single trailing newline so the stored XML is the canonical span.
        while (!pair.tree_xml.empty() &&
               (pair.tree_xml.back() == '\n' || pair.tree_xml.back() == '\r')) {
            pair.tree_xml.pop_back();
        }
        parse_result parsed = parse(pair.tree_xml);
        if (!parsed.ok()) {
            throw schema_error("example.tree", "does not parse: " + parsed.error->message);
        }
        if (!is_syntactically_correct(*parsed.model, spec.catalog)) {
            throw schema_error("example.tree", "is not lint-clean against the task catalog");
        }
        spec.example = std::move(pair);
    }

    return spec;
}

inline task_spec load_task_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw schema_error("$", "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error("$", std::string("invalid JSON: ") + e.what());
    }
    return task_spec_from_json(doc, path.parent_path());
}

}  // namespace btkit
