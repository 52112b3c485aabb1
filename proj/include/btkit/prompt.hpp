#pragma once

/// @file prompt.hpp
/// Chat prompt assembly for tree generation and description generation,
/// plus extraction of a tree from a model response. The instruction
/// strings live here and nowhere else; everything that needs them must
/// reference these constants so they stay byte-identical across the
/// dataset, the prompts and the evaluation harness.

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "btkit/xml.hpp"

namespace btkit {

inline constexpr std::string_view generation_system_prompt =
    "You will be provided a summary of a task performed by a robot, and your objective is to "
    "express this task as a behavior tree in XML format.";

inline constexpr std::string_view description_system_prompt =
    "You will be provided a behavior tree in XML format, and your task is to summarize the task "
    "performed by this behavior tree";

enum class chat_role { system, user, assistant };

inline std::string_view chat_role_name(chat_role role) {
    switch (role) {
        case chat_role::system: return "system";
        case chat_role::user: return "user";
        case chat_role::assistant: return "assistant";
    }
    return "unknown";
}

inline std::optional<chat_role> parse_chat_role(std::string_view name) {
    if (name == "system") return chat_role::system;
    if (name == "user") return chat_role::user;
    if (name == "assistant") return chat_role::assistant;
    return std::nullopt;
}

struct chat_message {
    chat_role role;
    std::string content;

    bool operator==(const chat_message&) const = default;
};

/// First message is system; user/assistant alternate afterwards.
using message_list = std::vector<chat_message>;

/// A worked example for one-shot prompting: a task description and the
/// tree that solves it. The tree must parse and be lint-clean against the
/// task's catalog; task-spec loading enforces that.
struct example_pair {
    std::string description;
    std::string tree_xml;
};

class prompt_error : public std::runtime_error {
public:
    enum class kind { empty_description, unparseable_tree };

    prompt_error(kind k, const std::string& message) : std::runtime_error(message), kind_(k) {}

    kind which() const { return kind_; }

private:
    kind kind_;
};

/// Zero-shot: [system, user(task)]. One-shot: [system, user(example
/// description), assistant(example tree), user(task)].
inline message_list build_generation_prompt(const std::string& task_description,
                                            const std::optional<example_pair>& example) {
    if (task_description.empty()) {
        throw prompt_error(prompt_error::kind::empty_description, "task description is empty");
    }
    message_list messages;
    messages.push_back({chat_role::system, std::string(generation_system_prompt)});
    if (example) {
        messages.push_back({chat_role::user, example->description});
        messages.push_back({chat_role::assistant, example->tree_xml});
    }
    messages.push_back({chat_role::user, task_description});
    return messages;
}

struct description_prompt_options {
    int max_words = 120;
    bool mention_library_compatibility = true;
    bool require_overall_summary = true;
};

/// One-shot description prompt: the example tree is shown as the user turn
/// and its description as the assistant turn, then the target tree.
inline message_list build_description_prompt(const std::string& tree_xml,
                                             const example_pair& example,
                                             const description_prompt_options& options = {}) {
    parse_result parsed = parse(tree_xml);
    if (!parsed.ok()) {
        throw prompt_error(prompt_error::kind::unparseable_tree,
                           "input tree does not parse: " + parsed.error->message);
    }
    std::string system(description_system_prompt);
    system += ". Use at most " + std::to_string(options.max_words) + " words.";
    if (options.mention_library_compatibility) {
        system += " The behavior tree is compatible with the BehaviorTree.CPP library.";
    }
    if (options.require_overall_summary) {
        system +=
            " The description must be an overall summary of the task, clearly described in "
            "natural language.";
    }
    message_list messages;
    messages.push_back({chat_role::system, std::move(system)});
    messages.push_back({chat_role::user, example.tree_xml});
    messages.push_back({chat_role::assistant, example.description});
    messages.push_back({chat_role::user, tree_xml});
    return messages;
}

namespace detail {

/// Scans a start tag beginning at `pos` ("<" already seen). Returns the
/// index one past '>' and whether the tag was self-closing, or nullopt on
/// malformed input.
struct tag_scan {
    size_t end;
    bool self_closing;
    bool closing;
    std::string name;
};

inline std::optional<tag_scan> scan_tag(std::string_view text, size_t pos) {
    tag_scan scan{pos, false, false, {}};
    size_t i = pos + 1;
    if (i < text.size() && text[i] == '/') {
        scan.closing = true;
        ++i;
    }
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                               text[i] == '_' || text[i] == '-' || text[i] == ':' ||
                               text[i] == '.')) {
        scan.name.push_back(text[i]);
        ++i;
    }
    char quote = 0;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (quote != 0) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '>') {
            scan.self_closing = true;
            scan.end = i + 2;
            return scan;
        } else if (c == '>') {
            scan.end = i + 1;
            return scan;
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Returns the first substring spanning a balanced <root>...</root>
/// element, verbatim. Code fences and surrounding prose fall away because
/// only the element span is returned. Nullopt when no balanced root
/// element exists.
inline std::optional<std::string> extract_tree(std::string_view response) {
    size_t search = 0;
    while (true) {
        const size_t start = response.find("<root", search);
        if (start == std::string_view::npos) return std::nullopt;
        const size_t after = start + 5;
        if (after < response.size() && response[after] != '>' && response[after] != '/' &&
            !std::isspace(static_cast<unsigned char>(response[after]))) {
            search = start + 1;  // e.g. "<rootnode"
            continue;
        }

        int depth = 0;
        size_t pos = start;
        bool failed = false;
        while (pos < response.size()) {
            if (response[pos] != '<') {
                ++pos;
                continue;
            }
            if (response.compare(pos, 4, "<!--") == 0) {
                const size_t end = response.find("-->", pos + 4);
                if (end == std::string_view::npos) {
                    failed = true;
                    break;
                }
                pos = end + 3;
                continue;
            }
            if (response.compare(pos, 2, "<?") == 0) {
                const size_t end = response.find("?>", pos + 2);
                if (end == std::string_view::npos) {
                    failed = true;
                    break;
                }
                pos = end + 2;
                continue;
            }
            std::optional<detail::tag_scan> tag = detail::scan_tag(response, pos);
            if (!tag) {
                failed = true;
                break;
            }
            if (tag->closing) {
                --depth;
                if (depth == 0) {
                    if (tag->name != "root") {
                        failed = true;
                        break;
                    }
                    return std::string(response.substr(start, tag->end - start));
                }
                if (depth < 0) {
                    failed = true;
                    break;
                }
            } else if (tag->self_closing) {
                if (depth == 0) {
                    // "<root .../>" alone
                    return std::string(response.substr(start, tag->end - start));
                }
            } else {
                ++depth;
            }
            pos = tag->end;
        }
        if (failed || pos >= response.size()) {
            search = start + 1;
            if (search >= response.size()) return std::nullopt;
        }
    }
}

}  // namespace btkit
