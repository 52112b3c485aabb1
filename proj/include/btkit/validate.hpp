#pragma once

/// @file validate.hpp
/// Decides BT correctness: lint, build, run against the task's scripted
/// environment, then match the execution trace against the task pattern.
/// Every failure becomes a verdict reason; nothing here throws for bad
/// trees, because bad trees are the expected input.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "btkit/engine.hpp"
#include "btkit/lint.hpp"
#include "btkit/task.hpp"
#include "btkit/xml.hpp"

namespace btkit {

struct match_result {
    bool matched = true;
    std::vector<std::string> reasons;
};

/// Ordered matchers must appear as a subsequence of the catalog-leaf
/// events; required matchers anywhere; forbidden matchers at most
/// max_occurrences times; precedence over first occurrences.
inline match_result match_trace(const execution_trace& trace, const trace_pattern& pattern) {
    match_result result;
    std::vector<const trace_event*> events;
    for (const trace_event& event : trace.events) {
        if (is_catalog_leaf_kind(event.kind)) events.push_back(&event);
    }

    size_t position = 0;
    for (size_t i = 0; i < pattern.ordered.size(); ++i) {
        const event_matcher& matcher = pattern.ordered[i];
        bool found = false;
        for (size_t j = position; j < events.size(); ++j) {
            if (matcher.matches(*events[j])) {
                position = j + 1;
                found = true;
                break;
            }
        }
        if (!found) {
            result.matched = false;
            result.reasons.push_back("ordered event " + std::to_string(i + 1) + " (" +
                                     matcher.describe() + ") not found in order");
        }
    }

    for (const event_matcher& matcher : pattern.required) {
        bool found = false;
        for (const trace_event* event : events) {
            if (matcher.matches(*event)) {
                found = true;
                break;
            }
        }
        if (!found) {
            result.matched = false;
            result.reasons.push_back("required event (" + matcher.describe() + ") never occurred");
        }
    }

    for (const event_matcher& matcher : pattern.forbidden) {
        int count = 0;
        for (const trace_event* event : events) {
            if (matcher.matches(*event)) ++count;
        }
        if (count > matcher.max_occurrences) {
            result.matched = false;
            result.reasons.push_back("forbidden event (" + matcher.describe() + ") occurred " +
                                     std::to_string(count) + " time(s), allowed " +
                                     std::to_string(matcher.max_occurrences));
        }
    }

    auto first_match = [&events](const event_matcher& matcher) -> std::optional<size_t> {
        for (size_t i = 0; i < events.size(); ++i) {
            if (matcher.matches(*events[i])) return i;
        }
        return std::nullopt;
    };
    for (size_t c = 0; c < pattern.precedence.size(); ++c) {
        const precedence_constraint& constraint = pattern.precedence[c];
        for (const event_matcher& before : constraint.before) {
            const std::optional<size_t> first_before = first_match(before);
            for (const event_matcher& after : constraint.after) {
                const std::optional<size_t> first_after = first_match(after);
                if (!first_after) continue;  // absence of B is judged by required/ordered
                if (!first_before || *first_before > *first_after) {
                    result.matched = false;
                    result.reasons.push_back("precedence violated: (" + before.describe() +
                                             ") must first occur before (" + after.describe() +
                                             ")");
                }
            }
        }
    }

    return result;
}

struct verdict {
    bool passed = false;
    std::vector<std::string> reasons;
    execution_trace trace;
    bool truncated = false;
};

struct validate_options {
    lint_options lint{};
};

/// Full pipeline: lint (strict by default) -> build -> run -> match.
inline verdict validate(const tree_model& model, const task_spec& spec,
                        const validate_options& options = {}) {
    verdict result;

    const std::vector<diagnostic> diags = lint(model, spec.catalog, options.lint);
    for (const diagnostic& diag : diags) {
        if (diag.sev == severity::error) {
            result.reasons.push_back("lint: " + std::string(lint_code_name(diag.code)) + ": " +
                                     diag.message);
        }
    }
    if (!result.reasons.empty()) return result;

    scripted_host host(spec);
    std::optional<executable_tree> tree;
    try {
        tree = build_tree(model, host);
    } catch (const build_error& error) {
        result.reasons.push_back(std::string("build: ") + error.what());
        return result;
    }

    run_result run;
    try {
        run = run_to_completion(*tree, spec.max_ticks);
    } catch (const host_error& error) {
        result.reasons.push_back(std::string("run: ") + error.what());
        result.trace = tree->trace();
        return result;
    }
    result.trace = run.trace;
    result.truncated = run.truncated;

    const match_result match = match_trace(run.trace, spec.pattern);
    for (const std::string& reason : match.reasons) {
        result.reasons.push_back("trace: " + reason);
    }
    if (spec.pattern.require_root_success && run.status != node_status::success) {
        std::string reason = "root: finished with status ";
        reason += status_name(run.status);
        if (run.truncated) {
            reason += " (truncated at " + std::to_string(run.ticks_used) + " ticks)";
        }
        result.reasons.push_back(std::move(reason));
    }

    result.passed = result.reasons.empty();
    return result;
}

inline nlohmann::ordered_json trace_to_json(const execution_trace& trace) {
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const trace_event& event : trace.events) {
        nlohmann::ordered_json record;
        record["tick"] = event.tick_index;
        record["node_id"] = event.node_id;
        record["kind"] = std::string(node_kind_name(event.kind));
        record["name"] = event.node_name;
        if (!event.action.empty()) {
            record["action"] = event.action;
            nlohmann::ordered_json ports = nlohmann::ordered_json::object();
            for (const auto& [name, value] : event.ports) ports[name] = value;
            record["ports"] = std::move(ports);
        }
        record["status"] = std::string(status_name(event.status));
        events.push_back(std::move(record));
    }
    return events;
}

inline nlohmann::ordered_json verdict_to_json(const verdict& v, bool include_trace = true) {
    nlohmann::ordered_json out;
    out["passed"] = v.passed;
    out["reasons"] = v.reasons;
    out["truncated"] = v.truncated;
    if (include_trace) out["trace"] = trace_to_json(v.trace);
    return out;
}

}  // namespace btkit
