#pragma once

/// @file dataset.hpp
/// Instruction-following dataset: line-delimited JSON records with exactly
/// the keys instruction/input/output. The instruction is the shared
/// generation prompt, the input a natural-language task description, the
/// output a behavior tree in the dialect.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "btkit/prompt.hpp"
#include "btkit/xml.hpp"

namespace btkit {

struct dataset_entry {
    std::string instruction;
    std::string input;
    std::string output;

    bool operator==(const dataset_entry&) const = default;
};

class dataset_error : public std::runtime_error {
public:
    enum class kind { invalid_entry, io };

    dataset_error(kind k, const std::string& message) : std::runtime_error(message), kind_(k) {}

    kind which() const { return kind_; }

private:
    kind kind_;
};

/// Builds a valid entry from a description and a tree, stamping the
/// canonical instruction.
inline dataset_entry make_dataset_entry(std::string description, std::string tree_xml) {
    parse_result parsed = parse(tree_xml);
    if (!parsed.ok()) {
        throw dataset_error(dataset_error::kind::invalid_entry,
                            "output tree does not parse: " + parsed.error->message);
    }
    return {std::string(generation_system_prompt), std::move(description), std::move(tree_xml)};
}

inline void check_entry(const dataset_entry& entry, size_t index) {
    if (entry.instruction != generation_system_prompt) {
        throw dataset_error(dataset_error::kind::invalid_entry,
                            "entry " + std::to_string(index) +
                                ": instruction differs from the canonical string");
    }
    parse_result parsed = parse(entry.output);
    if (!parsed.ok()) {
        throw dataset_error(dataset_error::kind::invalid_entry,
                            "entry " + std::to_string(index) +
                                ": output does not parse: " + parsed.error->message);
    }
}

/// One record per line; returns the number of records written.
inline size_t write_dataset(const std::vector<dataset_entry>& entries,
                            const std::filesystem::path& destination) {
    for (size_t i = 0; i < entries.size(); ++i) check_entry(entries[i], i);
    std::ofstream out(destination, std::ios::binary);
    if (!out) {
        throw dataset_error(dataset_error::kind::io, "cannot open " + destination.string());
    }
    for (const dataset_entry& entry : entries) {
        nlohmann::ordered_json record;
        record["instruction"] = entry.instruction;
        record["input"] = entry.input;
        record["output"] = entry.output;
        out << record.dump() << '\n';
    }
    if (!out) {
        throw dataset_error(dataset_error::kind::io, "write failed: " + destination.string());
    }
    return entries.size();
}

inline std::vector<dataset_entry> read_dataset(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw dataset_error(dataset_error::kind::io, "cannot open " + source.string());
    std::vector<dataset_entry> entries;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw dataset_error(dataset_error::kind::invalid_entry,
                                "line " + std::to_string(line_number) + ": " + e.what());
        }
        if (!record.is_object() || !record.contains("instruction") ||
            !record.contains("input") || !record.contains("output")) {
            throw dataset_error(dataset_error::kind::invalid_entry,
                                "line " + std::to_string(line_number) +
                                    ": record must have instruction/input/output");
        }
        entries.push_back({record["instruction"].get<std::string>(),
                           record["input"].get<std::string>(),
                           record["output"].get<std::string>()});
    }
    return entries;
}

/// Deterministic synthetic entries for pipeline exercises: small
/// navigation/manipulation trees with templated descriptions.
inline std::vector<dataset_entry> synthesize_dataset(size_t count, std::uint64_t seed = 42) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coord(0, 19);
    std::uniform_int_distribution<int> leaf_count(2, 4);
    std::uniform_int_distribution<int> shape(0, 3);

    std::vector<dataset_entry> entries;
    entries.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        tree_model model;
        model.format_version = "4";
        model.main_tree_id = "MainTree";
        named_tree tree;
        tree.id = "MainTree";

        raw_node root;
        std::ostringstream description;
        const int n = leaf_count(rng);
        switch (shape(rng)) {
            case 0: {
                root.element_name = "Sequence";
                description << "The behavior tree represents a mobile robot tasked to visit a "
                               "sequence of locations:";
                for (int k = 0; k < n; ++k) {
                    const int x = coord(rng), y = coord(rng);
                    raw_node leaf;
                    leaf.element_name = "MoveTo";
                    leaf.set_attribute("goal", std::to_string(x) + "," + std::to_string(y));
                    root.children.push_back(std::move(leaf));
                    description << (k == 0 ? " (" : ", (") << x << "," << y << ")";
                }
                description << ". The available actions are: \"MoveTo\"";
                break;
            }
            case 1: {
                root.element_name = "Sequence";
                description << "The behavior tree represents a robot that inspects " << n
                            << " stations in order, scanning each one before moving on. The "
                               "available actions are: \"MoveTo\", \"Scan\"";
                for (int k = 0; k < n; ++k) {
                    raw_node move;
                    move.element_name = "MoveTo";
                    move.set_attribute("goal", std::to_string(coord(rng)) + "," +
                                                   std::to_string(coord(rng)));
                    root.children.push_back(std::move(move));
                    raw_node scan;
                    scan.element_name = "Scan";
                    root.children.push_back(std::move(scan));
                }
                break;
            }
            case 2: {
                root.element_name = "Fallback";
                description << "The behavior tree represents a robot that tries " << n
                            << " docking stations and stops at the first one that accepts it. "
                               "The available actions are: \"Dock\"";
                for (int k = 0; k < n; ++k) {
                    raw_node leaf;
                    leaf.element_name = "Dock";
                    leaf.set_attribute("station", std::to_string(k + 1));
                    root.children.push_back(std::move(leaf));
                }
                break;
            }
            default: {
                root.element_name = "RetryUntilSuccessful";
                root.set_attribute("num_attempts", std::to_string(n));
                raw_node grasp;
                grasp.element_name = "Sequence";
                raw_node detect;
                detect.element_name = "DetectObject";
                raw_node pick;
                pick.element_name = "Pick";
                grasp.children.push_back(std::move(detect));
                grasp.children.push_back(std::move(pick));
                root.children.push_back(std::move(grasp));
                description << "The behavior tree represents a manipulator that keeps trying to "
                               "detect and pick an object, giving up after "
                            << n
                            << " attempts. The available actions are: \"DetectObject\", \"Pick\"";
                break;
            }
        }

        tree.roots.push_back(std::move(root));
        model.trees.push_back(std::move(tree));
        entries.push_back(make_dataset_entry(description.str(), serialize(model)));
    }
    return entries;
}

}  // namespace btkit
