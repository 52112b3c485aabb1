#pragma once

/// @file engine.hpp
/// Deterministic tick engine. A tree_model is compiled into an
/// executable_tree (SubTree references inlined, ports bound against the
/// host catalog), then ticked. Every node tick appends one event to the
/// execution trace. There is no wall clock anywhere: Timeout counts ticks,
/// and action outcomes come from the host, so two runs of the same inputs
/// produce identical traces.

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "btkit/catalog.hpp"
#include "btkit/nodes.hpp"
#include "btkit/xml.hpp"

namespace btkit {

enum class node_kind {
    sequence,
    reactive_sequence,
    fallback,
    reactive_fallback,
    parallel,
    inverter,
    retry,
    repeat,
    keep_running_until_failure,
    force_success,
    force_failure,
    timeout,
    action_leaf,
    condition_leaf,
    always_success,
    always_failure,
};

inline std::string_view node_kind_name(node_kind kind) {
    switch (kind) {
        case node_kind::sequence: return "Sequence";
        case node_kind::reactive_sequence: return "ReactiveSequence";
        case node_kind::fallback: return "Fallback";
        case node_kind::reactive_fallback: return "ReactiveFallback";
        case node_kind::parallel: return "Parallel";
        case node_kind::inverter: return "Inverter";
        case node_kind::retry: return "RetryUntilSuccessful";
        case node_kind::repeat: return "Repeat";
        case node_kind::keep_running_until_failure: return "KeepRunningUntilFailure";
        case node_kind::force_success: return "ForceSuccess";
        case node_kind::force_failure: return "ForceFailure";
        case node_kind::timeout: return "Timeout";
        case node_kind::action_leaf: return "Action";
        case node_kind::condition_leaf: return "Condition";
        case node_kind::always_success: return "AlwaysSuccess";
        case node_kind::always_failure: return "AlwaysFailure";
    }
    return "unknown";
}

inline bool is_leaf_kind(node_kind kind) {
    return kind == node_kind::action_leaf || kind == node_kind::condition_leaf ||
           kind == node_kind::always_success || kind == node_kind::always_failure;
}

/// Leaf kinds bound to a catalog action; only these appear to trace matchers.
inline bool is_catalog_leaf_kind(node_kind kind) {
    return kind == node_kind::action_leaf || kind == node_kind::condition_leaf;
}

/// Supplies leaf behavior. Implementations must be deterministic given
/// their own invocation history; the engine never injects time or
/// randomness.
class action_host {
public:
    virtual ~action_host() = default;
    virtual const action_catalog& catalog() const = 0;
    virtual node_status invoke(const std::string& action,
                               const std::vector<std::pair<std::string, std::string>>& ports) = 0;
};

/// Host backed by a single callback; convenient for tests and tools.
class callback_host : public action_host {
public:
    using behavior_fn = std::function<node_status(
        const std::string&, const std::vector<std::pair<std::string, std::string>>&, int)>;

    callback_host(action_catalog catalog, behavior_fn behavior)
        : catalog_(std::move(catalog)), behavior_(std::move(behavior)) {}

    const action_catalog& catalog() const override { return catalog_; }

    node_status invoke(const std::string& action,
                       const std::vector<std::pair<std::string, std::string>>& ports) override {
        const int index = ++invocations_[action];
        return behavior_(action, ports, index);
    }

    void reset() { invocations_.clear(); }

private:
    action_catalog catalog_;
    behavior_fn behavior_;
    std::map<std::string, int> invocations_;
};

enum class build_error_code {
    unknown_action,
    empty_control,
    decorator_arity,
    unresolved_subtree,
    cyclic_subtree,
    missing_required_port,
    unknown_port,
    bad_parameter,
    unknown_node_kind,
    leaf_with_children,
    ambiguous_main,
    dangling_main,
    empty_tree,
    multiple_roots,
};

inline std::string_view build_error_code_name(build_error_code code) {
    switch (code) {
        case build_error_code::unknown_action: return "UnknownAction";
        case build_error_code::empty_control: return "EmptyControl";
        case build_error_code::decorator_arity: return "DecoratorArity";
        case build_error_code::unresolved_subtree: return "UnresolvedSubTree";
        case build_error_code::cyclic_subtree: return "CyclicSubTree";
        case build_error_code::missing_required_port: return "MissingRequiredPort";
        case build_error_code::unknown_port: return "UnknownPort";
        case build_error_code::bad_parameter: return "BadParameter";
        case build_error_code::unknown_node_kind: return "UnknownNodeKind";
        case build_error_code::leaf_with_children: return "LeafWithChildren";
        case build_error_code::ambiguous_main: return "AmbiguousMain";
        case build_error_code::dangling_main: return "DanglingMain";
        case build_error_code::empty_tree: return "EmptyTree";
        case build_error_code::multiple_roots: return "MultipleRoots";
    }
    return "unknown";
}

class build_error : public std::runtime_error {
public:
    build_error(build_error_code code, const std::string& message)
        : std::runtime_error(std::string(build_error_code_name(code)) + ": " + message),
          code_(code) {}

    build_error_code code() const { return code_; }

private:
    build_error_code code_;
};

/// Raised when a host script violates the leaf contract, e.g. a condition
/// returning RUNNING.
class host_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct trace_event {
    int tick_index = 0;
    int node_id = 0;
    node_kind kind = node_kind::sequence;
    std::string node_name;  // element name or display name
    std::string action;     // leaf action name, empty otherwise
    std::vector<std::pair<std::string, std::string>> ports;  // resolved values
    node_status status = node_status::failure;

    bool operator==(const trace_event&) const = default;
};

struct execution_trace {
    std::vector<trace_event> events;
};

namespace detail {

class tree_builder;

struct exec_node {
    int id = 0;
    node_kind kind = node_kind::sequence;
    std::string name;    // display name: `name` attribute or element name
    std::string action;  // leaf binding
    std::vector<std::pair<std::string, std::string>> ports;
    std::vector<int> children;
    int limit = 0;  // retry attempts / repeat cycles / timeout ticks / parallel success_count

    // runtime state
    int cursor = 0;
    int counter = 0;
    std::vector<int> child_results;  // parallel memory: -1 pending, else node_status
    bool was_running = false;
};

}  // namespace detail

class executable_tree {
public:
    node_status tick_once() {
        ++ticks_;
        const node_status status = tick_node(root_);
        return status;
    }

    const execution_trace& trace() const { return trace_; }
    int ticks_used() const { return ticks_; }
    size_t node_count() const { return nodes_.size(); }

    std::map<std::string, std::string>& blackboard() { return blackboard_; }
    const std::map<std::string, std::string>& blackboard() const { return blackboard_; }

    /// Clears runtime state, the trace and the tick counter. The blackboard
    /// is left alone; the host keeps its own history.
    void reset() {
        for (detail::exec_node& node : nodes_) {
            node.cursor = 0;
            node.counter = 0;
            node.child_results.assign(node.children.size(), -1);
            node.was_running = false;
        }
        trace_.events.clear();
        ticks_ = 0;
    }

private:
    friend class detail::tree_builder;

    std::vector<detail::exec_node> nodes_;
    int root_ = 0;
    action_host* host_ = nullptr;
    std::map<std::string, std::string> blackboard_;
    execution_trace trace_;
    int ticks_ = 0;

    detail::exec_node& node(int id) { return nodes_[static_cast<size_t>(id)]; }

    /// "{key}" port values are read from the blackboard at tick time; a
    /// missing key resolves to the empty string.
    std::vector<std::pair<std::string, std::string>> resolve_ports(const detail::exec_node& n) {
        std::vector<std::pair<std::string, std::string>> resolved = n.ports;
        for (auto& [name, value] : resolved) {
            if (value.size() >= 2 && value.front() == '{' && value.back() == '}') {
                auto it = blackboard_.find(value.substr(1, value.size() - 2));
                value = it == blackboard_.end() ? std::string() : it->second;
            }
        }
        return resolved;
    }

    void record(const detail::exec_node& n, node_status status,
                const std::vector<std::pair<std::string, std::string>>* ports = nullptr) {
        trace_event ev;
        ev.tick_index = ticks_;
        ev.node_id = n.id;
        ev.kind = n.kind;
        ev.node_name = n.name;
        ev.action = n.action;
        if (ports != nullptr) ev.ports = *ports;
        ev.status = status;
        trace_.events.push_back(std::move(ev));
    }

    void halt(int id) {
        detail::exec_node& n = node(id);
        n.cursor = 0;
        n.counter = 0;
        n.child_results.assign(n.children.size(), -1);
        n.was_running = false;
        for (int child : n.children) halt(child);
    }

    node_status finish(detail::exec_node& n, node_status status) {
        n.was_running = status == node_status::running;
        record(n, status);
        return status;
    }

    node_status tick_node(int id) {
        detail::exec_node& n = node(id);
        switch (n.kind) {
            case node_kind::sequence: return finish(n, tick_sequence(n));
            case node_kind::reactive_sequence: return finish(n, tick_reactive(n, true));
            case node_kind::fallback: return finish(n, tick_fallback(n));
            case node_kind::reactive_fallback: return finish(n, tick_reactive(n, false));
            case node_kind::parallel: return finish(n, tick_parallel(n));
            case node_kind::inverter: {
                const node_status child = tick_node(n.children[0]);
                if (child == node_status::running) return finish(n, node_status::running);
                return finish(n, child == node_status::success ? node_status::failure
                                                               : node_status::success);
            }
            case node_kind::retry: return finish(n, tick_retry(n));
            case node_kind::repeat: return finish(n, tick_repeat(n));
            case node_kind::keep_running_until_failure: {
                const node_status child = tick_node(n.children[0]);
                if (child == node_status::failure) return finish(n, node_status::failure);
                return finish(n, node_status::running);
            }
            case node_kind::force_success: {
                const node_status child = tick_node(n.children[0]);
                if (child == node_status::running) return finish(n, node_status::running);
                return finish(n, node_status::success);
            }
            case node_kind::force_failure: {
                const node_status child = tick_node(n.children[0]);
                if (child == node_status::running) return finish(n, node_status::running);
                return finish(n, node_status::failure);
            }
            case node_kind::timeout: return finish(n, tick_timeout(n));
            case node_kind::always_success: return finish(n, node_status::success);
            case node_kind::always_failure: return finish(n, node_status::failure);
            case node_kind::action_leaf:
            case node_kind::condition_leaf: {
                const auto ports = resolve_ports(n);
                const node_status status = host_->invoke(n.action, ports);
                if (n.kind == node_kind::condition_leaf && status == node_status::running) {
                    throw host_error("condition '" + n.action + "' returned RUNNING");
                }
                n.was_running = status == node_status::running;
                record(n, status, &ports);
                return status;
            }
        }
        return node_status::failure;
    }

    // Sequence with memory: resumes from the running child, halts and
    // rewinds on failure.
    node_status tick_sequence(detail::exec_node& n) {
        while (n.cursor < static_cast<int>(n.children.size())) {
            const node_status child = tick_node(n.children[static_cast<size_t>(n.cursor)]);
            if (child == node_status::running) return node_status::running;
            if (child == node_status::failure) {
                rewind(n);
                return node_status::failure;
            }
            ++n.cursor;
        }
        rewind(n);
        return node_status::success;
    }

    node_status tick_fallback(detail::exec_node& n) {
        while (n.cursor < static_cast<int>(n.children.size())) {
            const node_status child = tick_node(n.children[static_cast<size_t>(n.cursor)]);
            if (child == node_status::running) return node_status::running;
            if (child == node_status::success) {
                rewind(n);
                return node_status::success;
            }
            ++n.cursor;
        }
        rewind(n);
        return node_status::failure;
    }

    // Reactive controls restart from the first child on every tick and halt
    // a previously running child that the new pass skips.
    node_status tick_reactive(detail::exec_node& n, bool sequence) {
        const node_status stop_on = sequence ? node_status::failure : node_status::success;
        for (size_t i = 0; i < n.children.size(); ++i) {
            const node_status child = tick_node(n.children[i]);
            if (child == stop_on) {
                for (size_t j = 0; j < n.children.size(); ++j) {
                    if (j != i) halt_if_running(n.children[j]);
                }
                n.cursor = 0;
                return stop_on;
            }
            if (child == node_status::running) {
                for (size_t j = i + 1; j < n.children.size(); ++j) {
                    halt_if_running(n.children[j]);
                }
                return node_status::running;
            }
        }
        n.cursor = 0;
        return sequence ? node_status::success : node_status::failure;
    }

    node_status tick_parallel(detail::exec_node& n) {
        if (n.child_results.size() != n.children.size()) {
            n.child_results.assign(n.children.size(), -1);
        }
        const int total = static_cast<int>(n.children.size());
        const int needed = n.limit > 0 ? n.limit : total;
        for (size_t i = 0; i < n.children.size(); ++i) {
            if (n.child_results[i] != -1) continue;  // finished earlier in this run
            const node_status child = tick_node(n.children[i]);
            if (child != node_status::running) {
                n.child_results[i] = static_cast<int>(child);
            }
        }
        int successes = 0, failures = 0;
        for (int result : n.child_results) {
            if (result == static_cast<int>(node_status::success)) ++successes;
            if (result == static_cast<int>(node_status::failure)) ++failures;
        }
        if (successes >= needed) {
            rewind(n);
            return node_status::success;
        }
        if (failures > total - needed) {
            rewind(n);
            return node_status::failure;
        }
        return node_status::running;
    }

    // Retries a failing child up to `limit` attempts within one tick; a
    // running child yields.
    node_status tick_retry(detail::exec_node& n) {
        for (;;) {
            const node_status child = tick_node(n.children[0]);
            if (child == node_status::running) return node_status::running;
            if (child == node_status::success) {
                n.counter = 0;
                return node_status::success;
            }
            ++n.counter;
            if (n.counter >= n.limit) {
                n.counter = 0;
                return node_status::failure;
            }
            halt(n.children[0]);
        }
    }

    node_status tick_repeat(detail::exec_node& n) {
        while (n.counter < n.limit) {
            const node_status child = tick_node(n.children[0]);
            if (child == node_status::running) return node_status::running;
            if (child == node_status::failure) {
                n.counter = 0;
                return node_status::failure;
            }
            ++n.counter;
            if (n.counter < n.limit) halt(n.children[0]);
        }
        n.counter = 0;
        return node_status::success;
    }

    // Deterministic Timeout: the child may stay RUNNING for `limit` ticks
    // of this node; on expiry it is halted and the node fails.
    node_status tick_timeout(detail::exec_node& n) {
        const node_status child = tick_node(n.children[0]);
        if (child != node_status::running) {
            n.counter = 0;
            return child;
        }
        ++n.counter;
        if (n.counter >= n.limit) {
            halt(n.children[0]);
            n.counter = 0;
            return node_status::failure;
        }
        return node_status::running;
    }

    void rewind(detail::exec_node& n) {
        n.cursor = 0;
        n.child_results.assign(n.children.size(), -1);
        for (int child : n.children) halt_if_running(child);
    }

    void halt_if_running(int id) {
        if (node(id).was_running) halt(id);
    }
};

struct run_result {
    node_status status = node_status::running;
    execution_trace trace;
    int ticks_used = 0;
    bool truncated = false;
};

namespace detail {

class tree_builder {
public:
    tree_builder(const tree_model& model, action_host& host) : model_(model), host_(host) {}

    executable_tree build() {
        const main_selection main = select_main_tree(model_);
        if (main.error == main_select_error::ambiguous) {
            throw build_error(build_error_code::ambiguous_main,
                              "multiple trees and no main_tree_to_execute attribute");
        }
        if (main.error == main_select_error::dangling) {
            throw build_error(build_error_code::dangling_main,
                              "main_tree_to_execute names missing tree '" + main.id + "'");
        }
        executable_tree tree;
        tree.host_ = &host_;
        std::vector<std::string> stack;
        tree.root_ = instantiate_tree(main.id, {}, stack, tree);
        tree.reset();
        return tree;
    }

private:
    using remap_map = std::map<std::string, std::string>;

    const tree_model& model_;
    action_host& host_;

    int instantiate_tree(const std::string& id, const remap_map& remap,
                         std::vector<std::string>& stack, executable_tree& out) {
        for (const std::string& open : stack) {
            if (open == id) {
                throw build_error(build_error_code::cyclic_subtree,
                                  "SubTree '" + id + "' references itself through " +
                                      std::to_string(stack.size()) + " level(s)");
            }
        }
        const named_tree* tree = model_.find_tree(id);
        if (tree == nullptr) {
            throw build_error(build_error_code::unresolved_subtree,
                              "SubTree '" + id + "' is not defined in this document");
        }
        if (tree->roots.empty()) {
            throw build_error(build_error_code::empty_tree, "tree '" + id + "' has no root node");
        }
        if (tree->roots.size() > 1) {
            throw build_error(build_error_code::multiple_roots,
                              "tree '" + id + "' has " + std::to_string(tree->roots.size()) +
                                  " root nodes");
        }
        stack.push_back(id);
        const int root = instantiate_node(tree->roots.front(), remap, stack, out);
        stack.pop_back();
        return root;
    }

    static std::string resolve_remapped(const std::string& value, const remap_map& remap) {
        if (value.size() >= 2 && value.front() == '{' && value.back() == '}') {
            auto it = remap.find(value.substr(1, value.size() - 2));
            if (it != remap.end()) return it->second;
        }
        return value;
    }

    static int parse_positive(const raw_node& node, const std::string& name, bool required,
                              int fallback) {
        const std::string* text = node.attribute(name);
        if (text == nullptr) {
            if (required) {
                throw build_error(build_error_code::missing_required_port,
                                  "missing required parameter '" + name + "' on <" +
                                      node.element_name + ">");
            }
            return fallback;
        }
        int value = 0;
        for (char c : *text) {
            if (c < '0' || c > '9') {
                throw build_error(build_error_code::bad_parameter,
                                  "parameter '" + name + "' of <" + node.element_name +
                                      "> must be a non-negative integer, got \"" + *text + "\"");
            }
            value = value * 10 + (c - '0');
            if (value > 1000000000) break;
        }
        return value;
    }

    int add_node(executable_tree& out, exec_node node) {
        node.id = static_cast<int>(out.nodes_.size());
        out.nodes_.push_back(std::move(node));
        return out.nodes_.back().id;
    }

    int instantiate_node(const raw_node& raw, const remap_map& remap,
                         std::vector<std::string>& stack, executable_tree& out) {
        const node_type_info* info = find_node_type(raw.element_name);
        const node_category category = info ? info->category : node_category::unknown;

        exec_node node;
        const std::string* display = raw.attribute("name");
        node.name = display != nullptr ? *display : raw.element_name;

        switch (category) {
            case node_category::control: {
                if (raw.children.empty()) {
                    throw build_error(build_error_code::empty_control,
                                      "<" + raw.element_name + "> has no children");
                }
                if (raw.element_name == "Sequence") node.kind = node_kind::sequence;
                else if (raw.element_name == "ReactiveSequence") node.kind = node_kind::reactive_sequence;
                else if (raw.element_name == "Fallback") node.kind = node_kind::fallback;
                else if (raw.element_name == "ReactiveFallback") node.kind = node_kind::reactive_fallback;
                else {
                    node.kind = node_kind::parallel;
                    node.limit = parse_positive(raw, "success_count", false, 0);
                }
                break;
            }
            case node_category::decorator: {
                if (raw.children.size() != 1) {
                    throw build_error(build_error_code::decorator_arity,
                                      "<" + raw.element_name + "> must have exactly 1 child, has " +
                                          std::to_string(raw.children.size()));
                }
                if (raw.element_name == "Inverter") node.kind = node_kind::inverter;
                else if (raw.element_name == "ForceSuccess") node.kind = node_kind::force_success;
                else if (raw.element_name == "ForceFailure") node.kind = node_kind::force_failure;
                else if (raw.element_name == "KeepRunningUntilFailure") node.kind = node_kind::keep_running_until_failure;
                else if (raw.element_name == "RetryUntilSuccessful") {
                    node.kind = node_kind::retry;
                    node.limit = parse_positive(raw, "num_attempts", true, 1);
                } else if (raw.element_name == "Repeat") {
                    node.kind = node_kind::repeat;
                    node.limit = parse_positive(raw, "num_cycles", true, 1);
                } else {
                    node.kind = node_kind::timeout;
                    node.limit = parse_positive(raw, "msec", true, 1);
                }
                break;
            }
            case node_category::leaf_builtin: {
                if (!raw.children.empty()) {
                    throw build_error(build_error_code::leaf_with_children,
                                      "<" + raw.element_name + "> cannot have children");
                }
                node.kind = raw.element_name == "AlwaysSuccess" ? node_kind::always_success
                                                                : node_kind::always_failure;
                return add_node(out, std::move(node));
            }
            case node_category::leaf_ref:
            case node_category::unknown: {
                std::string action;
                bool is_ref = category == node_category::leaf_ref;
                if (is_ref) {
                    const std::string* id = raw.attribute("ID");
                    if (id == nullptr) {
                        throw build_error(build_error_code::unknown_action,
                                          "<" + raw.element_name + "> without an ID attribute");
                    }
                    action = *id;
                } else {
                    action = raw.element_name;
                }
                const port_schema* schema = host_.catalog().find(action);
                if (schema == nullptr) {
                    if (!is_ref && !raw.children.empty()) {
                        throw build_error(build_error_code::unknown_node_kind,
                                          "unknown node <" + raw.element_name + ">");
                    }
                    throw build_error(build_error_code::unknown_action,
                                      "action '" + action + "' is not in the catalog");
                }
                if (!raw.children.empty()) {
                    throw build_error(build_error_code::leaf_with_children,
                                      "<" + raw.element_name + "> cannot have children");
                }
                const bool condition_form = raw.element_name == "Condition" ||
                                            schema->kind == entry_kind::condition;
                node.kind = condition_form ? node_kind::condition_leaf : node_kind::action_leaf;
                node.action = action;
                for (const auto& [name, value] : raw.attributes) {
                    if (name == "name" || (is_ref && name == "ID")) continue;
                    if (!schema->allows(name)) {
                        throw build_error(build_error_code::unknown_port,
                                          "unknown port '" + name + "' on '" + action + "'");
                    }
                    node.ports.emplace_back(name, resolve_remapped(value, remap));
                }
                for (const std::string& required : schema->required) {
                    if (raw.attribute(required) == nullptr) {
                        throw build_error(build_error_code::missing_required_port,
                                          "missing required port '" + required + "' on '" +
                                              action + "'");
                    }
                }
                return add_node(out, std::move(node));
            }
            case node_category::subtree: {
                const std::string* id = raw.attribute("ID");
                if (id == nullptr) {
                    throw build_error(build_error_code::unresolved_subtree,
                                      "<SubTree> without an ID attribute");
                }
                remap_map inner;
                for (const auto& [name, value] : raw.attributes) {
                    if (name == "ID" || name == "name" || name == "_autoremap") continue;
                    inner[name] = resolve_remapped(value, remap);
                }
                return instantiate_tree(*id, inner, stack, out);
            }
        }

        // Control or decorator: reserve the slot, then the children.
        const int id = add_node(out, std::move(node));
        std::vector<int> children;
        children.reserve(raw.children.size());
        for (const raw_node& child : raw.children) {
            children.push_back(instantiate_node(child, remap, stack, out));
        }
        out.nodes_[static_cast<size_t>(id)].children = std::move(children);
        return id;
    }
};

}  // namespace detail

/// Compiles the model's main tree, inlining SubTree references. Re-checks
/// everything execution relies on and throws build_error with the first
/// violation; models should be lint-clean before they get here.
inline executable_tree build_tree(const tree_model& model, action_host& host) {
    return detail::tree_builder(model, host).build();
}

inline node_status tick_once(executable_tree& tree) { return tree.tick_once(); }

/// Ticks the root until it stops RUNNING or the budget runs out; exhaustion
/// leaves status RUNNING and marks the result truncated.
inline run_result run_to_completion(executable_tree& tree, int max_ticks) {
    if (max_ticks < 1) throw std::invalid_argument("max_ticks must be >= 1");
    run_result result;
    for (int i = 0; i < max_ticks; ++i) {
        result.status = tree.tick_once();
        result.ticks_used = i + 1;
        if (result.status != node_status::running) break;
    }
    result.truncated = result.status == node_status::running;
    result.trace = tree.trace();
    return result;
}

}  // namespace btkit
