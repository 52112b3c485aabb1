#pragma once

/// @file xml.hpp
/// Parser and canonical serializer for the behavior-tree XML dialect.
///
/// The parser is deliberately self-contained: it keeps attribute order,
/// records a source position on every node, treats duplicate attributes as
/// hard errors, and retains elements it does not recognize, so that lint
/// and repair can operate on structurally valid but semantically broken
/// documents. Comments, processing instructions and text content are
/// discarded; the dialect carries no information in them.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace btkit {

struct source_pos {
    int line = 1;
    int column = 1;
};

/// One element of the document, unknown names included.
struct raw_node {
    std::string element_name;
    std::vector<std::pair<std::string, std::string>> attributes;  // document order
    std::vector<raw_node> children;
    source_pos span{};

    const std::string* attribute(std::string_view name) const {
        for (const auto& [key, value] : attributes) {
            if (key == name) return &value;
        }
        return nullptr;
    }

    void set_attribute(std::string_view name, std::string value) {
        for (auto& [key, existing] : attributes) {
            if (key == name) {
                existing = std::move(value);
                return;
            }
        }
        attributes.emplace_back(std::string(name), std::move(value));
    }

    bool remove_attribute(std::string_view name) {
        for (auto it = attributes.begin(); it != attributes.end(); ++it) {
            if (it->first == name) {
                attributes.erase(it);
                return true;
            }
        }
        return false;
    }
};

/// A <BehaviorTree ID="..."> definition. A well-formed tree has exactly one
/// root node; zero or several are representable so that lint can flag them
/// and repair can empty a tree out without losing the model.
struct named_tree {
    std::string id;
    std::vector<raw_node> roots;
    std::vector<std::pair<std::string, std::string>> extra_attributes;  // beyond ID
    source_pos span{};
};

struct tree_model {
    std::vector<named_tree> trees;
    std::vector<raw_node> extras;  // non-BehaviorTree children of <root>, preserved
    std::optional<std::string> main_tree_id;
    std::optional<std::string> format_version;
    std::vector<std::pair<std::string, std::string>> extra_root_attributes;

    const named_tree* find_tree(std::string_view id) const {
        for (const named_tree& tree : trees) {
            if (tree.id == id) return &tree;
        }
        return nullptr;
    }
};

enum class parse_error_code { malformed_xml, no_root_element, no_trees, duplicate_tree_id };

inline std::string_view parse_error_code_name(parse_error_code code) {
    switch (code) {
        case parse_error_code::malformed_xml: return "MalformedXml";
        case parse_error_code::no_root_element: return "NoRootElement";
        case parse_error_code::no_trees: return "NoTrees";
        case parse_error_code::duplicate_tree_id: return "DuplicateTreeId";
    }
    return "unknown";
}

struct parse_error {
    parse_error_code code = parse_error_code::malformed_xml;
    std::string message;
    source_pos pos{};
};

struct parse_result {
    std::optional<tree_model> model;
    std::optional<parse_error> error;

    bool ok() const { return model.has_value(); }
    const tree_model& operator*() const { return *model; }
    const tree_model* operator->() const { return &*model; }
};

namespace detail {

class xml_lexer {
public:
    explicit xml_lexer(std::string_view text) : text_(text) {}

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    source_pos where() const { return {line_, column_}; }

    char take() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    bool starts_with(std::string_view prefix) const {
        return text_.compare(pos_, prefix.size(), prefix) == 0;
    }

    void skip(size_t n) {
        for (size_t i = 0; i < n && !at_end(); ++i) take();
    }

    void skip_whitespace() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    /// Advances past `sentinel`, or to the end of input. Returns false on end.
    bool skip_until(std::string_view sentinel) {
        while (!at_end()) {
            if (starts_with(sentinel)) {
                skip(sentinel.size());
                return true;
            }
            take();
        }
        return false;
    }

private:
    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

inline bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

inline bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' ||
           c == '.';
}

struct xml_error {
    std::string message;
    source_pos pos;
};

class xml_parser {
public:
    explicit xml_parser(std::string_view text) : lex_(text) {}

    /// Parses the single top-level element. Returns nullopt and fills
    /// `error` on malformed input; `saw_element` stays false when the
    /// input holds no element at all.
    std::optional<raw_node> parse_document(xml_error& error, bool& saw_element) {
        saw_element = false;
        if (!skip_misc(error)) return std::nullopt;
        if (lex_.at_end()) return std::nullopt;
        if (lex_.peek() != '<') {
            error = {"expected element", lex_.where()};
            return std::nullopt;
        }
        std::optional<raw_node> root = parse_element(error);
        if (!root) return std::nullopt;
        saw_element = true;
        if (!skip_misc(error)) return std::nullopt;
        if (!lex_.at_end()) {
            error = {"content after top-level element", lex_.where()};
            return std::nullopt;
        }
        return root;
    }

private:
    // Skips whitespace, comments, processing instructions and a UTF-8 BOM.
    bool skip_misc(xml_error& error) {
        for (;;) {
            if (lex_.starts_with("\xEF\xBB\xBF")) {
                lex_.skip(3);
                continue;
            }
            lex_.skip_whitespace();
            if (lex_.starts_with("<!--")) {
                source_pos at = lex_.where();
                lex_.skip(4);
                if (!lex_.skip_until("-->")) {
                    error = {"unterminated comment", at};
                    return false;
                }
                continue;
            }
            if (lex_.starts_with("<?")) {
                source_pos at = lex_.where();
                lex_.skip(2);
                if (!lex_.skip_until("?>")) {
                    error = {"unterminated processing instruction", at};
                    return false;
                }
                continue;
            }
            if (lex_.starts_with("<!")) {
                error = {"unsupported markup declaration", lex_.where()};
                return false;
            }
            return true;
        }
    }

    std::optional<std::string> parse_name(xml_error& error) {
        if (lex_.at_end() || !is_name_start(lex_.peek())) {
            error = {"expected name", lex_.where()};
            return std::nullopt;
        }
        std::string name;
        while (!lex_.at_end() && is_name_char(lex_.peek())) name.push_back(lex_.take());
        return name;
    }

    std::optional<std::string> parse_attribute_value(xml_error& error) {
        if (lex_.at_end() || (lex_.peek() != '"' && lex_.peek() != '\'')) {
            error = {"expected quoted attribute value", lex_.where()};
            return std::nullopt;
        }
        const char quote = lex_.take();
        std::string value;
        for (;;) {
            if (lex_.at_end()) {
                error = {"unterminated attribute value", lex_.where()};
                return std::nullopt;
            }
            char c = lex_.peek();
            if (c == quote) {
                lex_.take();
                return value;
            }
            if (c == '<') {
                error = {"'<' in attribute value", lex_.where()};
                return std::nullopt;
            }
            if (c == '&') {
                std::optional<std::string> decoded = parse_entity(error);
                if (!decoded) return std::nullopt;
                value += *decoded;
                continue;
            }
            value.push_back(lex_.take());
        }
    }

    std::optional<std::string> parse_entity(xml_error& error) {
        source_pos at = lex_.where();
        lex_.take();  // '&'
        std::string entity;
        while (!lex_.at_end() && lex_.peek() != ';' && entity.size() < 12) {
            entity.push_back(lex_.take());
        }
        if (lex_.at_end() || lex_.peek() != ';') {
            error = {"malformed entity reference", at};
            return std::nullopt;
        }
        lex_.take();  // ';'
        if (entity == "lt") return std::string("<");
        if (entity == "gt") return std::string(">");
        if (entity == "amp") return std::string("&");
        if (entity == "quot") return std::string("\"");
        if (entity == "apos") return std::string("'");
        if (entity.size() > 1 && entity[0] == '#') {
            int base = 10;
            size_t start = 1;
            if (entity.size() > 2 && (entity[1] == 'x' || entity[1] == 'X')) {
                base = 16;
                start = 2;
            }
            long code = 0;
            for (size_t i = start; i < entity.size(); ++i) {
                char c = entity[i];
                int digit;
                if (c >= '0' && c <= '9') {
                    digit = c - '0';
                } else if (base == 16 && c >= 'a' && c <= 'f') {
                    digit = c - 'a' + 10;
                } else if (base == 16 && c >= 'A' && c <= 'F') {
                    digit = c - 'A' + 10;
                } else {
                    error = {"malformed character reference", at};
                    return std::nullopt;
                }
                code = code * base + digit;
                if (code > 0x10FFFF) {
                    error = {"character reference out of range", at};
                    return std::nullopt;
                }
            }
            return encode_utf8(static_cast<unsigned>(code));
        }
        error = {"unknown entity '&" + entity + ";'", at};
        return std::nullopt;
    }

    static std::string encode_utf8(unsigned code) {
        std::string out;
        if (code < 0x80) {
            out.push_back(static_cast<char>(code));
        } else if (code < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (code >> 6)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else if (code < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (code >> 12)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (code >> 18)));
            out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        }
        return out;
    }

    std::optional<raw_node> parse_element(xml_error& error) {
        source_pos at = lex_.where();
        lex_.take();  // '<'
        std::optional<std::string> name = parse_name(error);
        if (!name) return std::nullopt;

        raw_node node;
        node.element_name = *name;
        node.span = at;

        for (;;) {
            lex_.skip_whitespace();
            if (lex_.at_end()) {
                error = {"unterminated start tag for <" + node.element_name + ">", at};
                return std::nullopt;
            }
            if (lex_.peek() == '/') {
                lex_.take();
                if (lex_.at_end() || lex_.peek() != '>') {
                    error = {"expected '>' after '/'", lex_.where()};
                    return std::nullopt;
                }
                lex_.take();
                return node;  // self-closing
            }
            if (lex_.peek() == '>') {
                lex_.take();
                break;
            }
            source_pos attr_at = lex_.where();
            std::optional<std::string> attr_name = parse_name(error);
            if (!attr_name) return std::nullopt;
            lex_.skip_whitespace();
            if (lex_.at_end() || lex_.peek() != '=') {
                error = {"expected '=' after attribute '" + *attr_name + "'", lex_.where()};
                return std::nullopt;
            }
            lex_.take();
            lex_.skip_whitespace();
            std::optional<std::string> attr_value = parse_attribute_value(error);
            if (!attr_value) return std::nullopt;
            if (node.attribute(*attr_name) != nullptr) {
                error = {"duplicate attribute '" + *attr_name + "' on <" + node.element_name + ">",
                         attr_at};
                return std::nullopt;
            }
            node.attributes.emplace_back(std::move(*attr_name), std::move(*attr_value));
        }

        // Content until the matching close tag. Text and CDATA are dropped.
        for (;;) {
            if (lex_.at_end()) {
                error = {"missing close tag for <" + node.element_name + ">", at};
                return std::nullopt;
            }
            if (lex_.peek() != '<') {
                if (lex_.peek() == '&') {
                    if (!parse_entity(error)) return std::nullopt;
                } else {
                    lex_.take();
                }
                continue;
            }
            if (lex_.starts_with("<!--")) {
                source_pos comment_at = lex_.where();
                lex_.skip(4);
                if (!lex_.skip_until("-->")) {
                    error = {"unterminated comment", comment_at};
                    return std::nullopt;
                }
                continue;
            }
            if (lex_.starts_with("<![CDATA[")) {
                source_pos cdata_at = lex_.where();
                lex_.skip(9);
                if (!lex_.skip_until("]]>")) {
                    error = {"unterminated CDATA section", cdata_at};
                    return std::nullopt;
                }
                continue;
            }
            if (lex_.starts_with("<?")) {
                source_pos pi_at = lex_.where();
                lex_.skip(2);
                if (!lex_.skip_until("?>")) {
                    error = {"unterminated processing instruction", pi_at};
                    return std::nullopt;
                }
                continue;
            }
            if (lex_.starts_with("</")) {
                source_pos close_at = lex_.where();
                lex_.skip(2);
                std::optional<std::string> close_name = parse_name(error);
                if (!close_name) return std::nullopt;
                lex_.skip_whitespace();
                if (lex_.at_end() || lex_.peek() != '>') {
                    error = {"expected '>' in close tag", lex_.where()};
                    return std::nullopt;
                }
                lex_.take();
                if (*close_name != node.element_name) {
                    error = {"mismatched close tag </" + *close_name + ">, expected </" +
                                 node.element_name + ">",
                             close_at};
                    return std::nullopt;
                }
                return node;
            }
            std::optional<raw_node> child = parse_element(error);
            if (!child) return std::nullopt;
            node.children.push_back(std::move(*child));
        }
    }

    xml_lexer lex_;
};

inline void escape_attribute(std::string_view value, std::string& out) {
    for (char c : value) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\n': out += "&#10;"; break;
            case '\t': out += "&#9;"; break;
            case '\r': out += "&#13;"; break;
            default: out.push_back(c);
        }
    }
}

inline void serialize_node(const raw_node& node, int depth, std::string& out) {
    out.append(static_cast<size_t>(depth) * 4, ' ');
    out.push_back('<');
    out += node.element_name;
    for (const auto& [name, value] : node.attributes) {
        out.push_back(' ');
        out += name;
        out += "=\"";
        escape_attribute(value, out);
        out.push_back('"');
    }
    if (node.children.empty()) {
        out += "/>\n";
        return;
    }
    out += ">\n";
    for (const raw_node& child : node.children) serialize_node(child, depth + 1, out);
    out.append(static_cast<size_t>(depth) * 4, ' ');
    out += "</";
    out += node.element_name;
    out += ">\n";
}

}  // namespace detail

/// Parses a document of the dialect. Total over arbitrary text: returns
/// either a model or a positioned error, never throws.
inline parse_result parse(std::string_view text) {
    detail::xml_error err;
    bool saw_element = false;
    detail::xml_parser parser(text);
    std::optional<raw_node> document = parser.parse_document(err, saw_element);
    if (!document) {
        if (!saw_element && err.message.empty()) {
            return {std::nullopt,
                    parse_error{parse_error_code::no_root_element, "no element in input", {1, 1}}};
        }
        return {std::nullopt,
                parse_error{parse_error_code::malformed_xml, std::move(err.message), err.pos}};
    }

    if (document->element_name != "root") {
        return {std::nullopt, parse_error{parse_error_code::no_root_element,
                                          "top-level element is <" + document->element_name +
                                              ">, expected <root>",
                                          document->span}};
    }

    tree_model model;
    for (auto& [name, value] : document->attributes) {
        if (name == "BTCPP_format") {
            model.format_version = value;
        } else if (name == "main_tree_to_execute") {
            model.main_tree_id = value;
        } else {
            model.extra_root_attributes.emplace_back(name, value);
        }
    }

    for (raw_node& child : document->children) {
        if (child.element_name != "BehaviorTree") {
            model.extras.push_back(std::move(child));
            continue;
        }
        named_tree tree;
        tree.span = child.span;
        for (auto& [name, value] : child.attributes) {
            if (name == "ID") {
                tree.id = value;
            } else {
                tree.extra_attributes.emplace_back(name, value);
            }
        }
        if (model.find_tree(tree.id) != nullptr) {
            return {std::nullopt, parse_error{parse_error_code::duplicate_tree_id,
                                              "duplicate tree id '" + tree.id + "'", child.span}};
        }
        tree.roots = std::move(child.children);
        model.trees.push_back(std::move(tree));
    }

    if (model.trees.empty()) {
        return {std::nullopt, parse_error{parse_error_code::no_trees,
                                          "<root> contains no BehaviorTree definitions",
                                          document->span}};
    }
    return {std::move(model), std::nullopt};
}

enum class main_select_error { none, ambiguous, dangling };

struct main_selection {
    std::string id;
    main_select_error error = main_select_error::none;

    bool ok() const { return error == main_select_error::none; }
};

/// Entry point of a multi-tree document: the main_tree_to_execute attribute
/// if present, else the unique tree.
inline main_selection select_main_tree(const tree_model& model) {
    if (model.main_tree_id) {
        if (model.find_tree(*model.main_tree_id) != nullptr) {
            return {*model.main_tree_id, main_select_error::none};
        }
        return {*model.main_tree_id, main_select_error::dangling};
    }
    if (model.trees.size() == 1) {
        return {model.trees.front().id, main_select_error::none};
    }
    return {"", main_select_error::ambiguous};
}

/// Canonical form: 4-space indent, one element per line, self-closing
/// empties, attribute order preserved. No trailing newline.
inline std::string serialize(const tree_model& model) {
    std::string out = "<root";
    auto append_attr = [&out](std::string_view name, std::string_view value) {
        out.push_back(' ');
        out += name;
        out += "=\"";
        detail::escape_attribute(value, out);
        out.push_back('"');
    };
    if (model.format_version) append_attr("BTCPP_format", *model.format_version);
    if (model.main_tree_id) append_attr("main_tree_to_execute", *model.main_tree_id);
    for (const auto& [name, value] : model.extra_root_attributes) append_attr(name, value);
    out += ">\n";
    for (const named_tree& tree : model.trees) {
        out += "    <BehaviorTree";
        if (!tree.id.empty()) {
            out += " ID=\"";
            detail::escape_attribute(tree.id, out);
            out.push_back('"');
        }
        for (const auto& [name, value] : tree.extra_attributes) append_attr(name, value);
        if (tree.roots.empty()) {
            out += "/>\n";
        } else {
            out += ">\n";
            for (const raw_node& node : tree.roots) detail::serialize_node(node, 2, out);
            out += "    </BehaviorTree>\n";
        }
    }
    for (const raw_node& extra : model.extras) detail::serialize_node(extra, 1, out);
    out += "</root>";
    return out;
}

inline bool structurally_equal(const raw_node& a, const raw_node& b) {
    if (a.element_name != b.element_name || a.attributes != b.attributes ||
        a.children.size() != b.children.size()) {
        return false;
    }
    for (size_t i = 0; i < a.children.size(); ++i) {
        if (!structurally_equal(a.children[i], b.children[i])) return false;
    }
    return true;
}

inline bool structurally_equal(const named_tree& a, const named_tree& b) {
    if (a.id != b.id || a.extra_attributes != b.extra_attributes ||
        a.roots.size() != b.roots.size()) {
        return false;
    }
    for (size_t i = 0; i < a.roots.size(); ++i) {
        if (!structurally_equal(a.roots[i], b.roots[i])) return false;
    }
    return true;
}

/// Equality up to source positions.
inline bool structurally_equal(const tree_model& a, const tree_model& b) {
    if (a.main_tree_id != b.main_tree_id || a.format_version != b.format_version ||
        a.extra_root_attributes != b.extra_root_attributes || a.trees.size() != b.trees.size() ||
        a.extras.size() != b.extras.size()) {
        return false;
    }
    for (size_t i = 0; i < a.trees.size(); ++i) {
        if (!structurally_equal(a.trees[i], b.trees[i])) return false;
    }
    for (size_t i = 0; i < a.extras.size(); ++i) {
        if (!structurally_equal(a.extras[i], b.extras[i])) return false;
    }
    return true;
}

/// Resolves a root-to-node index path: {tree, root, child, child, ...}.
/// The empty path designates the document itself and resolves to nullptr.
inline const raw_node* node_at_path(const tree_model& model, const std::vector<size_t>& path) {
    if (path.empty() || path[0] >= model.trees.size()) return nullptr;
    const named_tree& tree = model.trees[path[0]];
    if (path.size() == 1 || path[1] >= tree.roots.size()) return nullptr;
    const raw_node* node = &tree.roots[path[1]];
    for (size_t i = 2; i < path.size(); ++i) {
        if (path[i] >= node->children.size()) return nullptr;
        node = &node->children[path[i]];
    }
    return node;
}

inline size_t count_nodes(const raw_node& node) {
    size_t count = 1;
    for (const raw_node& child : node.children) count += count_nodes(child);
    return count;
}

inline size_t count_nodes(const tree_model& model) {
    size_t count = 0;
    for (const named_tree& tree : model.trees) {
        for (const raw_node& root : tree.roots) count += count_nodes(root);
    }
    return count;
}

}  // namespace btkit
