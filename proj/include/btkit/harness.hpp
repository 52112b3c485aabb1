#pragma once

/// @file harness.hpp
/// End-to-end evaluation: for every (model, task, prompt mode) cell, build
/// the prompt, query the provider, extract and check the tree, optionally
/// repair it, and validate against the task spec. Every intermediate
/// artifact is persisted under the output directory so each report cell
/// can be re-derived without re-querying any model. Replayed sessions
/// produce byte-identical reports.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "btkit/dataset.hpp"
#include "btkit/modelio.hpp"
#include "btkit/prompt.hpp"
#include "btkit/repair.hpp"
#include "btkit/task.hpp"
#include "btkit/validate.hpp"

namespace btkit {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class prompt_mode { zero_shot, one_shot };

inline std::string_view prompt_mode_label(prompt_mode mode) {
    return mode == prompt_mode::zero_shot ? "ZS" : "OS";
}

struct provider_spec {
    enum class kind { http, replay };
    kind type = kind::http;
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "BTKIT_API_KEY";
    int timeout_sec = 300;
    std::filesystem::path replay_dir;
    std::filesystem::path record_dir;  // optional wrap around a live provider
};

struct model_entry {
    std::string label;
    provider_spec provider;
    gen_params params;
};

struct eval_config {
    std::vector<model_entry> models;
    std::vector<int> tasks;
    std::vector<prompt_mode> modes;
    bool repair_enabled = false;  // adds the OS+SA column
    bool include_zs_sa = false;   // hidden by default: subtractive repair adds nothing zero-shot
    int attempts = 1;             // best-of-N on syntactic pass
    std::filesystem::path tasks_dir = "tasks";
    std::filesystem::path output_dir = "eval-out";
    bool lenient_lint = false;
};

/// Phase 1: preliminary selection on the simpler tasks. Phase 2: all nine
/// tasks with static-analysis repair.
inline void apply_phase_preset(eval_config& config, int phase) {
    if (phase == 1) {
        config.tasks = {1, 2, 3, 4, 5, 6, 7};
        config.modes = {prompt_mode::zero_shot, prompt_mode::one_shot};
        config.repair_enabled = false;
    } else if (phase == 2) {
        config.tasks = {1, 2, 3, 4, 5, 6, 7, 8, 9};
        config.modes = {prompt_mode::zero_shot, prompt_mode::one_shot};
        config.repair_enabled = true;
    } else {
        throw config_error("unknown phase " + std::to_string(phase) + " (expected 1 or 2)");
    }
}

struct cell_result {
    std::string model_label;
    int task = 0;
    std::string column;  // "ZS", "OS", "OS+SA", "ZS+SA"
    bool responded = false;
    finish_reason finish = finish_reason::error;
    std::int64_t latency_ms = 0;
    int attempt_used = 0;
    bool syntactic = false;
    bool passed = false;
    std::vector<std::string> reasons;
    std::map<std::string, std::string> artifacts;  // name -> path relative to output dir
};

struct eval_report {
    std::vector<std::string> model_labels;
    std::vector<int> tasks;
    std::vector<std::string> base_columns;  // syntactic table rows ("ZS"/"OS")
    std::vector<std::string> all_columns;   // validation table columns per model
    int attempts = 1;
    std::vector<cell_result> cells;

    const cell_result* cell(const std::string& model, int task, const std::string& column) const {
        for (const cell_result& c : cells) {
            if (c.model_label == model && c.task == task && c.column == column) return &c;
        }
        return nullptr;
    }
};

/// "n/d" as a percentage with one decimal, round half up, dot separator.
inline std::string format_percent(std::size_t n, std::size_t d) {
    if (d == 0) return "-";
    const std::uint64_t tenths = (static_cast<std::uint64_t>(n) * 2000 + d) / (2 * d);
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

namespace detail {

inline std::string sanitize_component(const std::string& text) {
    std::string out;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') {
            out.push_back(c);
        } else if (c == '+') {
            out.push_back('_');  // "OS+SA" -> "OS_SA"
        } else {
            out.push_back('-');
        }
    }
    return out.empty() ? std::string("x") : out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path.string());
    out << content;
}

struct cell_worker {
    const eval_config& config;
    const std::map<int, task_spec>& specs;
    provider& client;
    const model_entry& model;
    std::vector<cell_result>* out;

    std::filesystem::path cell_dir(int task, const std::string& column) const {
        return config.output_dir / "cells" / sanitize_component(model.label) /
               ("task" + std::to_string(task)) / sanitize_component(column);
    }

    static std::string relative_to_output(const std::filesystem::path& path,
                                          const std::filesystem::path& output_dir) {
        return std::filesystem::relative(path, output_dir).generic_string();
    }

    void record_artifact(cell_result& cell, const std::string& name,
                         const std::filesystem::path& path, const std::string& content) const {
        write_text_file(path, content);
        cell.artifacts[name] = relative_to_output(path, config.output_dir);
    }

    void run_task(int task, prompt_mode mode) {
        const task_spec& spec = specs.at(task);
        const std::string base_column(prompt_mode_label(mode));
        const std::filesystem::path dir = cell_dir(task, base_column);

        cell_result cell;
        cell.model_label = model.label;
        cell.task = task;
        cell.column = base_column;

        std::optional<example_pair> example;
        if (mode == prompt_mode::one_shot) example = spec.example;
        const message_list prompt = build_generation_prompt(spec.description, example);

        // Best-of-N on the syntactic check; the last attempt stands if none pass.
        std::optional<completion> chosen;
        std::optional<std::string> extracted;
        std::optional<tree_model> parsed;
        std::vector<diagnostic> diags;
        std::string parse_failure;
        std::string response_failure;

        for (int attempt = 1; attempt <= config.attempts; ++attempt) {
            cell.attempt_used = attempt;
            completion response;
            try {
                response = client.complete(prompt, model.params);
            } catch (const model_io_error& error) {
                response_failure = error.what();
                record_artifact(cell, "response",
                                dir / ("response-" + std::to_string(attempt) + ".txt"),
                                std::string("<error: ") + error.what() + ">");
                continue;
            }
            record_artifact(cell, "response",
                            dir / ("response-" + std::to_string(attempt) + ".txt"),
                            response.text);
            chosen = response;
            response_failure.clear();

            extracted = extract_tree(response.text);
            parsed.reset();
            diags.clear();
            parse_failure.clear();
            if (extracted) {
                parse_result result = parse(*extracted);
                if (result.ok()) {
                    parsed = std::move(result.model);
                    diags = lint(*parsed, spec.catalog, {config.lenient_lint});
                } else {
                    parse_failure = std::string(parse_error_code_name(result.error->code)) +
                                    " at " + std::to_string(result.error->pos.line) + ":" +
                                    std::to_string(result.error->pos.column) + ": " +
                                    result.error->message;
                }
            }
            const bool attempt_syntactic = response.finish != finish_reason::length &&
                                           parsed.has_value() && !has_errors(diags);
            if (attempt_syntactic) break;
        }

        if (!chosen) {
            cell.reasons.push_back("provider: " + response_failure);
            out->push_back(cell);
            if (sa_column(mode)) push_sa_failure(mode, cell, "no response to repair");
            return;
        }

        cell.responded = true;
        cell.finish = chosen->finish;
        cell.latency_ms = chosen->latency_ms;

        if (extracted) {
            record_artifact(cell, "extracted", dir / "extracted.xml", *extracted);
        }
        record_artifact(cell, "lint", dir / "lint.json", diagnostics_to_json(diags).dump(2));

        if (chosen->finish == finish_reason::length) {
            cell.reasons.push_back("generation hit the token cap (finish=length)");
        } else if (!extracted) {
            cell.reasons.push_back("no behavior tree found in the response");
        } else if (!parsed) {
            cell.reasons.push_back("extracted text does not parse: " + parse_failure);
        }
        cell.syntactic = cell.reasons.empty() && !has_errors(diags);

        verdict v;
        if (parsed && chosen->finish != finish_reason::length) {
            v = validate(*parsed, spec, {{config.lenient_lint}});
            cell.passed = v.passed;
            for (const std::string& reason : v.reasons) cell.reasons.push_back(reason);
        }
        record_artifact(cell, "verdict", dir / "verdict.json", verdict_to_json(v).dump(2));
        out->push_back(cell);

        if (sa_column(mode)) {
            run_sa(task, mode, cell, spec, parsed);
        }
    }

    bool sa_column(prompt_mode mode) const {
        if (!config.repair_enabled) return false;
        return mode == prompt_mode::one_shot || config.include_zs_sa;
    }

    static std::string sa_label(prompt_mode mode) {
        return std::string(prompt_mode_label(mode)) + "+SA";
    }

    void push_sa_failure(prompt_mode mode, const cell_result& base, const std::string& reason) {
        cell_result cell = base;
        cell.column = sa_label(mode);
        cell.syntactic = false;
        cell.passed = false;
        cell.reasons = {reason};
        out->push_back(cell);
    }

    void run_sa(int task, prompt_mode mode, const cell_result& base, const task_spec& spec,
                const std::optional<tree_model>& parsed) {
        if (!parsed || base.finish == finish_reason::length) {
            push_sa_failure(mode, base,
                            "no tree to repair (" +
                                (base.reasons.empty() ? "unusable response" : base.reasons[0]) +
                                ")");
            return;
        }
        cell_result cell = base;
        cell.column = sa_label(mode);
        cell.reasons.clear();
        const std::filesystem::path dir = cell_dir(task, cell.column);

        const repair_outcome outcome = repair(*parsed, spec.catalog);
        record_artifact(cell, "repaired", dir / "repaired.xml", serialize(outcome.repaired));
        nlohmann::ordered_json edits = nlohmann::ordered_json::array();
        for (const repair_edit& edit : outcome.edits) {
            nlohmann::ordered_json record;
            record["kind"] = std::string(edit_kind_name(edit.kind));
            record["path"] = edit.path;
            record["detail"] = edit.detail;
            edits.push_back(std::move(record));
        }
        record_artifact(cell, "edits", dir / "edits.json", edits.dump(2));
        record_artifact(cell, "diff", dir / "repair.diff",
                        render_repair_diff(*parsed, outcome.repaired));

        cell.syntactic = is_syntactically_correct(outcome.repaired, spec.catalog,
                                                  {config.lenient_lint});
        const verdict v = validate(outcome.repaired, spec, {{config.lenient_lint}});
        cell.passed = v.passed;
        cell.reasons = v.reasons;
        record_artifact(cell, "verdict", dir / "verdict.json", verdict_to_json(v).dump(2));
        out->push_back(cell);
    }
};

}  // namespace detail

inline std::unique_ptr<provider> make_provider(const provider_spec& spec) {
    if (spec.type == provider_spec::kind::replay) {
        return std::make_unique<replay_provider>(spec.replay_dir);
    }
    http_endpoint endpoint;
    endpoint.base_url = spec.endpoint;
    endpoint.path = spec.path;
    endpoint.api_key_env = spec.api_key_env;
    endpoint.timeout_sec = spec.timeout_sec;
    return std::make_unique<http_provider>(endpoint);
}

inline eval_report run_eval(const eval_config& config) {
    if (config.models.empty()) throw config_error("no models configured");
    if (config.tasks.empty()) throw config_error("no tasks configured");
    if (config.modes.empty()) throw config_error("no prompt modes configured");
    if (config.attempts < 1) throw config_error("attempts must be >= 1");

    std::map<int, task_spec> specs;
    for (int task : config.tasks) {
        if (task < 1 || task > 9) {
            throw config_error("task id " + std::to_string(task) + " out of range 1..9");
        }
        const std::filesystem::path path =
            config.tasks_dir / ("task" + std::to_string(task) + ".json");
        try {
            specs.emplace(task, load_task_spec(path));
        } catch (const schema_error& error) {
            throw config_error("task spec " + path.string() + ": " + error.what());
        }
    }
    const bool wants_one_shot =
        std::find(config.modes.begin(), config.modes.end(), prompt_mode::one_shot) !=
        config.modes.end();
    if (wants_one_shot) {
        for (const auto& [task, spec] : specs) {
            if (!spec.example) {
                throw config_error("task " + std::to_string(task) +
                                   " has no one-shot example in its spec");
            }
        }
    }

    eval_report report;
    report.tasks = config.tasks;
    report.attempts = config.attempts;
    for (const model_entry& model : config.models) report.model_labels.push_back(model.label);
    for (prompt_mode mode : config.modes) {
        report.base_columns.emplace_back(prompt_mode_label(mode));
        report.all_columns.emplace_back(prompt_mode_label(mode));
        if (config.repair_enabled &&
            (mode == prompt_mode::one_shot || config.include_zs_sa)) {
            report.all_columns.push_back(std::string(prompt_mode_label(mode)) + "+SA");
        }
    }

    for (const model_entry& model : config.models) {
        std::unique_ptr<provider> base = make_provider(model.provider);
        std::unique_ptr<recording_provider> recorder;
        provider* client = base.get();
        if (!model.provider.record_dir.empty() &&
            model.provider.type == provider_spec::kind::http) {
            recorder = std::make_unique<recording_provider>(*base, model.provider.record_dir);
            client = recorder.get();
        }
        detail::cell_worker worker{config, specs, *client, model, &report.cells};
        for (int task : config.tasks) {
            for (prompt_mode mode : config.modes) {
                worker.run_task(task, mode);
            }
        }
    }
    return report;
}

inline std::string render_report_markdown(const eval_report& report) {
    std::string out = "# Evaluation report\n";

    out += "\n## Syntactic correctness\n\n";
    if (report.cells.empty()) {
        out += "(no cells)\n";
    } else {
        out += "| |";
        for (const std::string& model : report.model_labels) out += " " + model + " |";
        out += "\n| --- |";
        for (size_t i = 0; i < report.model_labels.size(); ++i) out += " --- |";
        out += "\n";
        for (const std::string& column : report.base_columns) {
            out += "| ";
            out += column == "ZS" ? "Zero-Shot" : column == "OS" ? "One-Shot" : column;
            out += " |";
            for (const std::string& model : report.model_labels) {
                size_t passes = 0, total = 0;
                for (int task : report.tasks) {
                    if (const cell_result* cell = report.cell(model, task, column)) {
                        ++total;
                        if (cell->syntactic) ++passes;
                    }
                }
                out += " " + format_percent(passes, total) + " |";
            }
            out += "\n";
        }
    }

    out += "\n## Validation\n\n";
    if (report.cells.empty()) {
        out += "(no cells)\n";
    } else {
        out += "| Task |";
        for (const std::string& model : report.model_labels) {
            for (const std::string& column : report.all_columns) {
                out += " " + model + " " + column + " |";
            }
        }
        out += "\n| --- |";
        for (size_t i = 0; i < report.model_labels.size() * report.all_columns.size(); ++i) {
            out += " --- |";
        }
        out += "\n";
        for (int task : report.tasks) {
            out += "| " + std::to_string(task) + " |";
            for (const std::string& model : report.model_labels) {
                for (const std::string& column : report.all_columns) {
                    const cell_result* cell = report.cell(model, task, column);
                    out += cell != nullptr && cell->passed ? " ✓ |" : "  |";
                }
            }
            out += "\n";
        }
    }

    out += "\n## Mean latency (ms)\n\n";
    if (report.cells.empty()) {
        out += "(no cells)\n";
    } else {
        out += "| |";
        for (const std::string& column : report.base_columns) out += " " + column + " |";
        out += "\n| --- |";
        for (size_t i = 0; i < report.base_columns.size(); ++i) out += " --- |";
        out += "\n";
        for (const std::string& model : report.model_labels) {
            out += "| " + model + " |";
            for (const std::string& column : report.base_columns) {
                std::int64_t total = 0;
                std::int64_t count = 0;
                for (int task : report.tasks) {
                    if (const cell_result* cell = report.cell(model, task, column)) {
                        if (cell->responded) {
                            total += cell->latency_ms;
                            ++count;
                        }
                    }
                }
                out += count > 0 ? " " + std::to_string((total + count / 2) / count) + " |"
                                 : " - |";
            }
            out += "\n";
        }
    }
    return out;
}

inline nlohmann::ordered_json report_to_json(const eval_report& report) {
    nlohmann::ordered_json out;
    out["models"] = report.model_labels;
    out["tasks"] = report.tasks;
    out["columns"] = report.all_columns;
    out["attempts"] = report.attempts;

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const cell_result& cell : report.cells) {
        nlohmann::ordered_json record;
        record["model"] = cell.model_label;
        record["task"] = cell.task;
        record["column"] = cell.column;
        record["responded"] = cell.responded;
        record["finish"] = std::string(finish_reason_name(cell.finish));
        record["latency_ms"] = cell.latency_ms;
        record["attempt_used"] = cell.attempt_used;
        record["syntactic"] = cell.syntactic;
        record["passed"] = cell.passed;
        record["reasons"] = cell.reasons;
        nlohmann::ordered_json artifacts = nlohmann::ordered_json::object();
        for (const auto& [name, path] : cell.artifacts) artifacts[name] = path;
        record["artifacts"] = std::move(artifacts);
        cells.push_back(std::move(record));
    }
    out["cells"] = std::move(cells);

    nlohmann::ordered_json aggregates = nlohmann::ordered_json::object();
    for (const std::string& model : report.model_labels) {
        for (const std::string& column : report.base_columns) {
            size_t syntactic = 0, passed = 0, total = 0;
            for (int task : report.tasks) {
                if (const cell_result* cell = report.cell(model, task, column)) {
                    ++total;
                    if (cell->syntactic) ++syntactic;
                    if (cell->passed) ++passed;
                }
            }
            nlohmann::ordered_json entry;
            entry["syntactic"] = format_percent(syntactic, total);
            entry["passed"] = format_percent(passed, total);
            aggregates[model + " " + column] = std::move(entry);
        }
    }
    out["aggregates"] = std::move(aggregates);
    return out;
}

/// Writes report.md and report.json into the output directory.
inline void write_report(const eval_report& report, const std::filesystem::path& output_dir) {
    detail::write_text_file(output_dir / "report.md", render_report_markdown(report));
    detail::write_text_file(output_dir / "report.json", report_to_json(report).dump(2) + "\n");
}

/// Reads an eval config document. Relative paths resolve against
/// `base_dir` (the config file's directory).
inline eval_config eval_config_from_json(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw config_error("config must be a JSON object");
    eval_config config;

    auto resolve = [&base_dir](const std::string& path) {
        std::filesystem::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    };

    if (doc.contains("phase")) apply_phase_preset(config, doc["phase"].get<int>());
    if (doc.contains("tasks")) config.tasks = doc["tasks"].get<std::vector<int>>();
    if (doc.contains("modes")) {
        config.modes.clear();
        for (const nlohmann::json& mode : doc["modes"]) {
            const std::string text = mode.get<std::string>();
            if (text == "ZS") config.modes.push_back(prompt_mode::zero_shot);
            else if (text == "OS") config.modes.push_back(prompt_mode::one_shot);
            else throw config_error("unknown prompt mode \"" + text + "\" (expected ZS or OS)");
        }
    }
    if (doc.contains("repair")) config.repair_enabled = doc["repair"].get<bool>();
    if (doc.contains("include_zs_sa")) config.include_zs_sa = doc["include_zs_sa"].get<bool>();
    if (doc.contains("attempts")) config.attempts = doc["attempts"].get<int>();
    if (doc.contains("lenient_lint")) config.lenient_lint = doc["lenient_lint"].get<bool>();
    if (doc.contains("tasks_dir")) config.tasks_dir = resolve(doc["tasks_dir"].get<std::string>());
    if (doc.contains("output_dir")) {
        config.output_dir = resolve(doc["output_dir"].get<std::string>());
    }

    if (!doc.contains("models") || !doc["models"].is_array()) {
        throw config_error("config needs a \"models\" array");
    }
    for (const nlohmann::json& item : doc["models"]) {
        model_entry entry;
        if (!item.contains("label")) throw config_error("model entry needs a label");
        entry.label = item["label"].get<std::string>();

        if (!item.contains("provider") || !item["provider"].is_object()) {
            throw config_error("model \"" + entry.label + "\" needs a provider object");
        }
        const nlohmann::json& prov = item["provider"];
        const std::string type = prov.value("type", std::string("http"));
        if (type == "replay") {
            entry.provider.type = provider_spec::kind::replay;
            if (!prov.contains("directory")) {
                throw config_error("replay provider for \"" + entry.label +
                                   "\" needs a directory");
            }
            entry.provider.replay_dir = resolve(prov["directory"].get<std::string>());
        } else if (type == "http") {
            entry.provider.type = provider_spec::kind::http;
            if (!prov.contains("endpoint")) {
                throw config_error("http provider for \"" + entry.label +
                                   "\" needs an endpoint");
            }
            entry.provider.endpoint = prov["endpoint"].get<std::string>();
            if (prov.contains("path")) entry.provider.path = prov["path"].get<std::string>();
            if (prov.contains("api_key_env")) {
                entry.provider.api_key_env = prov["api_key_env"].get<std::string>();
            }
            if (prov.contains("timeout_sec")) {
                entry.provider.timeout_sec = prov["timeout_sec"].get<int>();
            }
            if (prov.contains("record_dir")) {
                entry.provider.record_dir = resolve(prov["record_dir"].get<std::string>());
            }
        } else {
            throw config_error("unknown provider type \"" + type + "\"");
        }

        if (item.contains("params") && item["params"].is_object()) {
            const nlohmann::json& params = item["params"];
            if (params.contains("model")) entry.params.model = params["model"].get<std::string>();
            if (params.contains("max_new_tokens")) {
                entry.params.max_new_tokens = params["max_new_tokens"].get<int>();
            }
            if (params.contains("temperature")) {
                entry.params.temperature = params["temperature"].get<double>();
            }
            if (params.contains("stop")) {
                entry.params.stop = params["stop"].get<std::vector<std::string>>();
            }
        }
        if (entry.params.max_new_tokens < 1) {
            throw config_error("model \"" + entry.label + "\": max_new_tokens must be >= 1");
        }
        if (entry.params.temperature < 0) {
            throw config_error("model \"" + entry.label + "\": temperature must be >= 0");
        }
        config.models.push_back(std::move(entry));
    }

    if (config.tasks.empty() || config.modes.empty()) {
        throw config_error("config needs tasks and modes (directly or via a phase preset)");
    }
    return config;
}

inline eval_config load_eval_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return eval_config_from_json(doc, path.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : path.parent_path());
}

}  // namespace btkit
