// btkit command-line tool: parse, lint, repair, validate and evaluate
// behavior-tree XML, assemble prompts, and build datasets.
//
// Exit codes: 0 success, 1 domain failure (lint errors, failed verdict,
// no tree in a response), 2 usage or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "btkit/dataset.hpp"
#include "btkit/harness.hpp"
#include "btkit/lint.hpp"
#include "btkit/modelio.hpp"
#include "btkit/prompt.hpp"
#include "btkit/repair.hpp"
#include "btkit/task.hpp"
#include "btkit/validate.hpp"
#include "btkit/xml.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_domain = 1;
constexpr int exit_usage = 2;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw usage_error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (text.empty() || text.back() != '\n') std::cout << '\n';
        return;
    }
    std::filesystem::path path(out_path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw usage_error("cannot write " + out_path);
    out << text;
}

btkit::tree_model parse_or_fail(const std::string& text, const std::string& origin) {
    btkit::parse_result result = btkit::parse(text);
    if (!result.ok()) {
        std::cerr << origin << ":" << result.error->pos.line << ":" << result.error->pos.column
                  << ": " << btkit::parse_error_code_name(result.error->code) << ": "
                  << result.error->message << "\n";
        std::exit(exit_domain);
    }
    return std::move(*result.model);
}

struct catalog_source {
    int task = 0;
    std::string catalog_file;
    std::string tasks_dir = "tasks";

    void add_options(CLI::App* cmd) {
        auto* task_opt = cmd->add_option("--task", task, "Use the catalog of bundled task 1..9");
        auto* file_opt =
            cmd->add_option("--catalog", catalog_file, "Catalog JSON file (schema: task catalog)");
        cmd->add_option("--tasks-dir", tasks_dir, "Directory with taskN.json specs")
            ->capture_default_str();
        task_opt->excludes(file_opt);
    }

    btkit::action_catalog load() const {
        if (task != 0) {
            return btkit::load_task_spec(std::filesystem::path(tasks_dir) /
                                         ("task" + std::to_string(task) + ".json"))
                .catalog;
        }
        if (!catalog_file.empty()) return btkit::load_catalog(catalog_file);
        throw usage_error("either --task or --catalog is required");
    }
};

btkit::task_spec load_spec(int task, const std::string& tasks_dir) {
    return btkit::load_task_spec(std::filesystem::path(tasks_dir) /
                                 ("task" + std::to_string(task) + ".json"));
}

struct provider_options {
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "BTKIT_API_KEY";
    int timeout_sec = 300;
    std::string replay_dir;
    std::string record_dir;
    std::string model;
    int max_new_tokens = 1000;
    double temperature = 0.0;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--endpoint", endpoint, "Chat-completions endpoint base URL");
        cmd->add_option("--endpoint-path", path, "Endpoint path")->capture_default_str();
        cmd->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")
            ->capture_default_str();
        cmd->add_option("--timeout", timeout_sec, "Request timeout in seconds")
            ->capture_default_str();
        cmd->add_option("--replay", replay_dir, "Replay a recorded session directory");
        cmd->add_option("--record", record_dir, "Record the session into this directory");
        cmd->add_option("--model", model, "Model id sent to the endpoint");
        cmd->add_option("--max-new-tokens", max_new_tokens, "Generation token cap")
            ->capture_default_str();
        cmd->add_option("--temperature", temperature, "Sampling temperature")
            ->capture_default_str();
    }

    std::unique_ptr<btkit::provider> make(std::unique_ptr<btkit::provider>& keep_alive) const {
        if (!replay_dir.empty()) {
            return std::make_unique<btkit::replay_provider>(replay_dir);
        }
        if (endpoint.empty()) {
            throw usage_error("either --endpoint or --replay is required");
        }
        btkit::http_endpoint http;
        http.base_url = endpoint;
        http.path = path;
        http.api_key_env = api_key_env;
        http.timeout_sec = timeout_sec;
        auto live = std::make_unique<btkit::http_provider>(http);
        if (record_dir.empty()) return live;
        keep_alive = std::move(live);
        return std::make_unique<btkit::recording_provider>(*keep_alive, record_dir);
    }

    btkit::gen_params params() const {
        btkit::gen_params out;
        out.model = model;
        out.max_new_tokens = max_new_tokens;
        out.temperature = temperature;
        return out;
    }
};

std::string describe_diagnostic(const btkit::diagnostic& d) {
    std::ostringstream out;
    out << (d.sev == btkit::severity::error ? "error" : "warning") << " "
        << btkit::lint_code_name(d.code) << " at " << d.span.line << ":" << d.span.column << ": "
        << d.message;
    return out.str();
}

// --- subcommand bodies ------------------------------------------------------

int run_parse(const std::string& file, const std::string& out_path) {
    const btkit::tree_model model = parse_or_fail(read_file(file), file);
    write_output(btkit::serialize(model), out_path);
    return exit_ok;
}

int run_lint(const std::string& file, const catalog_source& source, bool lenient, bool as_json) {
    const btkit::action_catalog catalog = source.load();
    const btkit::tree_model model = parse_or_fail(read_file(file), file);
    const std::vector<btkit::diagnostic> diags = btkit::lint(model, catalog, {lenient});
    if (as_json) {
        write_output(btkit::diagnostics_to_json(diags).dump(2), "");
    } else {
        for (const btkit::diagnostic& d : diags) std::cout << describe_diagnostic(d) << "\n";
        if (diags.empty()) std::cout << "clean: no findings\n";
    }
    return btkit::has_errors(diags) ? exit_domain : exit_ok;
}

int run_repair(const std::string& file, const catalog_source& source, bool no_promote,
               bool as_json, const std::string& out_path) {
    const btkit::action_catalog catalog = source.load();
    const btkit::tree_model model = parse_or_fail(read_file(file), file);
    btkit::repair_options options;
    options.promote_unknown_wrappers = !no_promote;
    const btkit::repair_outcome outcome = btkit::repair(model, catalog, options);

    if (as_json) {
        nlohmann::ordered_json doc;
        doc["converged"] = outcome.converged;
        nlohmann::ordered_json edits = nlohmann::ordered_json::array();
        for (const btkit::repair_edit& edit : outcome.edits) {
            nlohmann::ordered_json record;
            record["kind"] = std::string(btkit::edit_kind_name(edit.kind));
            record["path"] = edit.path;
            record["detail"] = edit.detail;
            edits.push_back(std::move(record));
        }
        doc["edits"] = std::move(edits);
        doc["repaired"] = btkit::serialize(outcome.repaired);
        write_output(doc.dump(2), "");
    } else {
        std::cout << btkit::render_repair_diff(model, outcome.repaired);
        for (const btkit::repair_edit& edit : outcome.edits) {
            std::cout << btkit::edit_kind_name(edit.kind) << " " << edit.detail << "\n";
        }
        if (outcome.edits.empty()) std::cout << "no edits needed\n";
        for (const btkit::diagnostic& warning : outcome.warnings) {
            std::cout << describe_diagnostic(warning) << "\n";
        }
    }
    if (!out_path.empty()) write_output(btkit::serialize(outcome.repaired), out_path);
    return exit_ok;
}

int run_validate(const std::string& file, int task, const std::string& tasks_dir, bool lenient,
                 bool as_json, bool with_trace) {
    const btkit::task_spec spec = load_spec(task, tasks_dir);
    const btkit::tree_model model = parse_or_fail(read_file(file), file);
    const btkit::verdict v = btkit::validate(model, spec, {{lenient}});
    if (as_json) {
        write_output(btkit::verdict_to_json(v, with_trace).dump(2), "");
    } else {
        std::cout << (v.passed ? "PASS" : "FAIL") << " task " << task << " (" << spec.title
                  << ")\n";
        for (const std::string& reason : v.reasons) std::cout << "  " << reason << "\n";
    }
    return v.passed ? exit_ok : exit_domain;
}

int run_prompt(int task, bool one_shot, const std::string& describe_file,
               const std::string& tasks_dir, const std::string& out_path) {
    const btkit::task_spec spec = load_spec(task, tasks_dir);
    btkit::message_list messages;
    if (!describe_file.empty()) {
        if (!spec.example) throw usage_error("task spec has no example pair");
        messages = btkit::build_description_prompt(read_file(describe_file), *spec.example);
    } else if (one_shot) {
        if (!spec.example) throw usage_error("task spec has no example pair");
        messages = btkit::build_generation_prompt(spec.description, spec.example);
    } else {
        messages = btkit::build_generation_prompt(spec.description, std::nullopt);
    }
    write_output(btkit::messages_to_json(messages).dump(2), out_path);
    return exit_ok;
}

int run_gen(int task, bool one_shot, const std::string& tasks_dir,
            const provider_options& provider_opts, const std::string& out_path, bool raw) {
    const btkit::task_spec spec = load_spec(task, tasks_dir);
    const btkit::message_list messages = btkit::build_generation_prompt(
        spec.description, one_shot ? spec.example : std::optional<btkit::example_pair>());

    std::unique_ptr<btkit::provider> keep_alive;
    std::unique_ptr<btkit::provider> client = provider_opts.make(keep_alive);
    const btkit::completion response = client->complete(messages, provider_opts.params());

    std::cerr << "finish=" << btkit::finish_reason_name(response.finish)
              << " latency_ms=" << response.latency_ms << "\n";
    if (raw) {
        write_output(response.text, out_path);
        return exit_ok;
    }
    const std::optional<std::string> tree = btkit::extract_tree(response.text);
    if (!tree) {
        std::cerr << "no behavior tree found in the response\n";
        return exit_domain;
    }
    write_output(*tree, out_path);
    return exit_ok;
}

int run_dataset_build(int synthetic, std::uint64_t seed, const std::string& out_path) {
    if (synthetic <= 0) throw usage_error("--synthetic must be positive");
    const std::vector<btkit::dataset_entry> entries =
        btkit::synthesize_dataset(static_cast<size_t>(synthetic), seed);
    const size_t written = btkit::write_dataset(entries, out_path);
    std::cout << "wrote " << written << " entries to " << out_path << "\n";
    return exit_ok;
}

int run_dataset_check(const std::string& file) {
    std::vector<btkit::dataset_entry> entries;
    try {
        entries = btkit::read_dataset(file);
    } catch (const btkit::dataset_error& e) {
        std::cerr << "invalid dataset: " << e.what() << "\n";
        return exit_domain;
    }
    size_t bad = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        const bool instruction_ok = entries[i].instruction == btkit::generation_system_prompt;
        const bool output_ok = btkit::parse(entries[i].output).ok();
        if (!instruction_ok || !output_ok) {
            ++bad;
            std::cout << "entry " << i << ": "
                      << (!instruction_ok ? "non-canonical instruction" : "output does not parse")
                      << "\n";
        }
    }
    std::cout << entries.size() << " entries, " << (entries.size() - bad) << " valid, " << bad
              << " invalid\n";
    return bad == 0 ? exit_ok : exit_domain;
}

int run_dataset_describe(const std::string& trees_dir, int example_task,
                         const std::string& tasks_dir, const provider_options& provider_opts,
                         const std::string& out_path) {
    const btkit::task_spec spec = load_spec(example_task, tasks_dir);
    if (!spec.example) throw usage_error("task spec has no example pair");

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(trees_dir)) {
        if (entry.path().extension() == ".xml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw usage_error("no .xml files in " + trees_dir);

    std::unique_ptr<btkit::provider> keep_alive;
    std::unique_ptr<btkit::provider> client = provider_opts.make(keep_alive);

    std::vector<btkit::dataset_entry> entries;
    for (const std::filesystem::path& file : files) {
        std::string tree = read_file(file);
        while (!tree.empty() && (tree.back() == '\n' || tree.back() == '\r')) tree.pop_back();
        const btkit::message_list messages =
            btkit::build_description_prompt(tree, *spec.example);
        const btkit::completion response = client->complete(messages, provider_opts.params());
        entries.push_back(btkit::make_dataset_entry(response.text, tree));
        std::cerr << file.filename().string() << ": " << response.latency_ms << " ms\n";
    }
    const size_t written = btkit::write_dataset(entries, out_path);
    std::cout << "wrote " << written << " entries to " << out_path << "\n";
    return exit_ok;
}

int run_eval_cmd(const std::string& config_file, int phase, const std::string& tasks_dir,
                 const std::string& out_dir, const provider_options& provider_opts,
                 const std::string& model_label, int attempts, bool zs_sa, bool lenient) {
    btkit::eval_config config;
    if (!config_file.empty()) {
        config = btkit::load_eval_config(config_file);
        if (!out_dir.empty()) config.output_dir = out_dir;
    } else {
        apply_phase_preset(config, phase == 0 ? 2 : phase);
        config.tasks_dir = tasks_dir;
        config.output_dir = out_dir.empty() ? "eval-out" : out_dir;
        config.attempts = attempts;
        config.include_zs_sa = zs_sa;
        config.lenient_lint = lenient;

        btkit::model_entry entry;
        entry.label = model_label.empty()
                          ? (provider_opts.replay_dir.empty() ? provider_opts.model : "replay")
                          : model_label;
        if (entry.label.empty()) entry.label = "model";
        if (!provider_opts.replay_dir.empty()) {
            entry.provider.type = btkit::provider_spec::kind::replay;
            entry.provider.replay_dir = provider_opts.replay_dir;
        } else {
            if (provider_opts.endpoint.empty()) {
                throw usage_error("eval needs --config, --replay or --endpoint");
            }
            entry.provider.type = btkit::provider_spec::kind::http;
            entry.provider.endpoint = provider_opts.endpoint;
            entry.provider.path = provider_opts.path;
            entry.provider.api_key_env = provider_opts.api_key_env;
            entry.provider.timeout_sec = provider_opts.timeout_sec;
            entry.provider.record_dir = provider_opts.record_dir;
        }
        entry.params = provider_opts.params();
        config.models.push_back(std::move(entry));
    }

    const btkit::eval_report report = btkit::run_eval(config);
    btkit::write_report(report, config.output_dir);
    std::cout << btkit::render_report_markdown(report);
    std::cout << "\nreport written to " << (config.output_dir / "report.md").string() << " and "
              << (config.output_dir / "report.json").string() << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavior-tree toolkit: parse, lint, repair, validate and evaluate "
                 "LLM-generated behavior trees"};
    app.require_subcommand(1);

    // parse
    auto* parse_cmd = app.add_subcommand("parse", "Parse a tree and print its canonical form");
    std::string parse_file, parse_out;
    parse_cmd->add_option("file", parse_file, "Behavior-tree XML file")->required();
    parse_cmd->add_option("--out", parse_out, "Write the canonical form here");

    // lint
    auto* lint_cmd = app.add_subcommand("lint", "Check a tree against an action catalog");
    std::string lint_file;
    catalog_source lint_source;
    bool lint_lenient = false, lint_json = false;
    lint_cmd->add_option("file", lint_file, "Behavior-tree XML file")->required();
    lint_source.add_options(lint_cmd);
    lint_cmd->add_flag("--lenient", lint_lenient, "Unknown actions are warnings, not errors");
    lint_cmd->add_flag("--json", lint_json, "Machine-readable findings");

    // repair
    auto* repair_cmd =
        app.add_subcommand("repair", "Subtractively repair a tree against a catalog");
    std::string repair_file, repair_out;
    catalog_source repair_source;
    bool repair_no_promote = false, repair_json = false;
    repair_cmd->add_option("file", repair_file, "Behavior-tree XML file")->required();
    repair_source.add_options(repair_cmd);
    repair_cmd->add_flag("--no-promote", repair_no_promote,
                         "Do not promote children of unknown single-child wrappers");
    repair_cmd->add_flag("--json", repair_json, "Machine-readable outcome");
    repair_cmd->add_option("--out", repair_out, "Write the repaired tree here");

    // validate
    auto* validate_cmd =
        app.add_subcommand("validate", "Execute a tree against a task spec and match its trace");
    std::string validate_file, validate_tasks_dir = "tasks";
    int validate_task = 0;
    bool validate_lenient = false, validate_json = false, validate_trace = false;
    validate_cmd->add_option("file", validate_file, "Behavior-tree XML file")->required();
    validate_cmd->add_option("--task", validate_task, "Task id 1..9")->required();
    validate_cmd->add_option("--tasks-dir", validate_tasks_dir, "Directory with taskN.json")
        ->capture_default_str();
    validate_cmd->add_flag("--lenient", validate_lenient, "Lenient lint stage");
    validate_cmd->add_flag("--json", validate_json, "Machine-readable verdict");
    validate_cmd->add_flag("--trace", validate_trace, "Include the execution trace in --json");

    // prompt
    auto* prompt_cmd = app.add_subcommand("prompt", "Assemble a chat prompt for a task");
    int prompt_task = 0;
    bool prompt_one_shot = false;
    std::string prompt_describe, prompt_tasks_dir = "tasks", prompt_out;
    prompt_cmd->add_option("--task", prompt_task, "Task id 1..9")->required();
    prompt_cmd->add_flag("--one-shot", prompt_one_shot, "Include the task example pair");
    prompt_cmd->add_option("--describe", prompt_describe,
                           "Build a description prompt for this tree file instead");
    prompt_cmd->add_option("--tasks-dir", prompt_tasks_dir, "Directory with taskN.json")
        ->capture_default_str();
    prompt_cmd->add_option("--out", prompt_out, "Write the messages JSON here");

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "Generate a tree for a task via a provider");
    int gen_task = 0;
    bool gen_one_shot = false, gen_raw = false;
    std::string gen_tasks_dir = "tasks", gen_out;
    provider_options gen_provider;
    gen_cmd->add_option("--task", gen_task, "Task id 1..9")->required();
    gen_cmd->add_flag("--one-shot", gen_one_shot, "Use the one-shot prompt");
    gen_cmd->add_option("--tasks-dir", gen_tasks_dir, "Directory with taskN.json")
        ->capture_default_str();
    gen_cmd->add_flag("--raw", gen_raw, "Print the raw response without extraction");
    gen_cmd->add_option("--out", gen_out, "Write the extracted tree here");
    gen_provider.add_options(gen_cmd);

    // dataset
    auto* dataset_cmd = app.add_subcommand("dataset", "Build and check instruction datasets");
    dataset_cmd->require_subcommand(1);
    auto* ds_build = dataset_cmd->add_subcommand("build", "Write synthetic entries");
    int ds_count = 600;
    std::uint64_t ds_seed = 42;
    std::string ds_out = "dataset.jsonl";
    ds_build->add_option("--synthetic", ds_count, "Number of entries")->capture_default_str();
    ds_build->add_option("--seed", ds_seed, "Generator seed")->capture_default_str();
    ds_build->add_option("--out", ds_out, "Output file")->capture_default_str();
    auto* ds_check = dataset_cmd->add_subcommand("check", "Report structural validity");
    std::string ds_check_file;
    ds_check->add_option("file", ds_check_file, "Dataset file")->required();
    auto* ds_describe = dataset_cmd->add_subcommand(
        "describe", "Generate descriptions for a directory of trees via a provider");
    std::string ds_trees, ds_describe_out = "dataset.jsonl", ds_tasks_dir = "tasks";
    int ds_example_task = 1;
    provider_options ds_provider;
    ds_describe->add_option("--trees", ds_trees, "Directory of .xml trees")->required();
    ds_describe->add_option("--out", ds_describe_out, "Output file")->capture_default_str();
    ds_describe->add_option("--example-task", ds_example_task,
                            "Task whose example pair seeds the one-shot prompt")
        ->capture_default_str();
    ds_describe->add_option("--tasks-dir", ds_tasks_dir, "Directory with taskN.json")
        ->capture_default_str();
    ds_provider.add_options(ds_describe);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Run a two-phase evaluation and write reports");
    std::string eval_config_file, eval_tasks_dir = "tasks", eval_out, eval_label;
    int eval_phase = 0, eval_attempts = 1;
    bool eval_zs_sa = false, eval_lenient = false;
    provider_options eval_provider;
    eval_cmd->add_option("--config", eval_config_file, "Eval config JSON file");
    eval_cmd->add_option("--phase", eval_phase, "Preset: 1 (tasks 1-7) or 2 (all tasks + repair)");
    eval_cmd->add_option("--tasks-dir", eval_tasks_dir, "Directory with taskN.json")
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "Output directory");
    eval_cmd->add_option("--model-label", eval_label, "Label for the single configured model");
    eval_cmd->add_option("--attempts", eval_attempts, "Best-of-N attempts per cell")
        ->capture_default_str();
    eval_cmd->add_flag("--zs-sa", eval_zs_sa, "Also compute the ZS+SA column");
    eval_cmd->add_flag("--lenient", eval_lenient, "Lenient lint for the syntactic check");
    eval_provider.add_options(eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*parse_cmd) return run_parse(parse_file, parse_out);
        if (*lint_cmd) return run_lint(lint_file, lint_source, lint_lenient, lint_json);
        if (*repair_cmd) {
            return run_repair(repair_file, repair_source, repair_no_promote, repair_json,
                              repair_out);
        }
        if (*validate_cmd) {
            return run_validate(validate_file, validate_task, validate_tasks_dir,
                                validate_lenient, validate_json, validate_trace);
        }
        if (*prompt_cmd) {
            return run_prompt(prompt_task, prompt_one_shot, prompt_describe, prompt_tasks_dir,
                              prompt_out);
        }
        if (*gen_cmd) {
            return run_gen(gen_task, gen_one_shot, gen_tasks_dir, gen_provider, gen_out, gen_raw);
        }
        if (*ds_build) return run_dataset_build(ds_count, ds_seed, ds_out);
        if (*ds_check) return run_dataset_check(ds_check_file);
        if (*ds_describe) {
            return run_dataset_describe(ds_trees, ds_example_task, ds_tasks_dir, ds_provider,
                                        ds_describe_out);
        }
        if (*eval_cmd) {
            return run_eval_cmd(eval_config_file, eval_phase, eval_tasks_dir, eval_out,
                                eval_provider, eval_label, eval_attempts, eval_zs_sa,
                                eval_lenient);
        }
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const btkit::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const btkit::schema_error& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return exit_usage;
    } catch (const btkit::prompt_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_domain;
    } catch (const btkit::dataset_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_domain;
    } catch (const btkit::model_io_error& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return exit_domain;
    } catch (const btkit::build_error& e) {
        std::cerr << "build error: " << e.what() << "\n";
        return exit_domain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
