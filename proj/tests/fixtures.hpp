#pragma once

// Replay-session fixture builders for the harness tests: write canned
// responses keyed exactly as the harness will request them.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "btkit/harness.hpp"
#include "btkit/modelio.hpp"
#include "btkit/prompt.hpp"
#include "btkit/task.hpp"

#include "helpers.hpp"

namespace testutil {

inline btkit::gen_params fixture_params() {
    btkit::gen_params params;
    params.model = "fixture";
    params.max_new_tokens = 1000;
    params.temperature = 0.0;
    return params;
}

inline void record_response(const std::filesystem::path& dir,
                            const btkit::message_list& messages, const std::string& text,
                            btkit::finish_reason finish, std::int64_t latency_ms,
                            int sequence = 0) {
    nlohmann::ordered_json record;
    record["request"]["messages"] = btkit::messages_to_json(messages);
    record["request"]["params"] = btkit::params_to_json(fixture_params());
    record["response"]["text"] = text;
    record["response"]["latency_ms"] = latency_ms;
    record["response"]["finish"] = std::string(btkit::finish_reason_name(finish));
    std::filesystem::create_directories(dir);
    write_file(dir / (btkit::request_key(messages, fixture_params()) + "-" +
                      std::to_string(sequence) + ".json"),
               record.dump(2));
}

inline btkit::message_list task_prompt(int task, btkit::prompt_mode mode) {
    const btkit::task_spec spec = load_task(task);
    if (mode == btkit::prompt_mode::one_shot) {
        return btkit::build_generation_prompt(spec.description, spec.example);
    }
    return btkit::build_generation_prompt(spec.description, std::nullopt);
}

inline std::string golden_xml(int task) { return btkit::serialize(golden_tree(task)); }

/// Syntactically broken zero-shot style answer: goal split into x/y.
inline std::string zs_mismatch_xml() {
    return "<root><BehaviorTree ID=\"MainTree\"><Sequence>"
           "<MoveTo x=\"0\" y=\"0\"/><MoveTo x=\"2\" y=\"3\"/>"
           "</Sequence></BehaviorTree></root>";
}

/// Golden tree with an invented action appended to the first control; lint
/// rejects it, subtractive repair removes it.
inline std::string golden_with_unknown_action(int task) {
    btkit::tree_model model = golden_tree(task);
    auto* control = first_matching(model.trees[0].roots[0], [](const btkit::raw_node& node) {
        return btkit::category_of(node.element_name) == btkit::node_category::control;
    });
    REQUIRE(control != nullptr);
    btkit::raw_node invented;
    invented.element_name = "HandleFailure";
    control->children.push_back(invented);
    return btkit::serialize(model);
}

inline std::string shuffled_golden_xml(int task) {
    return btkit::serialize(mutant_shuffled(golden_tree(task)));
}

inline btkit::model_entry replay_model(const std::string& label,
                                       const std::filesystem::path& dir) {
    btkit::model_entry entry;
    entry.label = label;
    entry.provider.type = btkit::provider_spec::kind::replay;
    entry.provider.replay_dir = dir;
    entry.params = fixture_params();
    return entry;
}

/// Fixture A: two models, zero-shot over all nine tasks, scripted to 8/9
/// and 6/9 syntactic passes.
inline btkit::eval_config build_syntactic_fixture(const std::filesystem::path& root) {
    const std::filesystem::path dir_a = root / "session-a";
    const std::filesystem::path dir_b = root / "session-b";
    for (int task = 1; task <= 9; ++task) {
        const btkit::message_list prompt = task_prompt(task, btkit::prompt_mode::zero_shot);
        record_response(dir_a, prompt,
                        task <= 8 ? golden_xml(task) : "I am sorry, I cannot help with that.",
                        btkit::finish_reason::stop, 100 + task);
        record_response(dir_b, prompt,
                        task <= 6 ? golden_xml(task) : zs_mismatch_xml(),
                        btkit::finish_reason::stop, 200 + task);
    }
    btkit::eval_config config;
    config.tasks = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    config.modes = {btkit::prompt_mode::zero_shot};
    config.repair_enabled = false;
    config.tasks_dir = tasks_dir();
    config.output_dir = root / "out";
    config.models = {replay_model("model-a", dir_a), replay_model("model-b", dir_b)};
    return config;
}

/// Fixture B: one model, both modes, repair on. One-shot answers pass
/// tasks 1,2,4,5 outright; 3,6,8 carry an invented action that repair
/// removes; 7 and 9 are shuffled beyond repair. Zero-shot answers all
/// carry the parameter-format mismatch.
inline btkit::eval_config build_validation_fixture(const std::filesystem::path& root) {
    const std::filesystem::path dir = root / "session";
    for (int task = 1; task <= 9; ++task) {
        record_response(dir, task_prompt(task, btkit::prompt_mode::zero_shot), zs_mismatch_xml(),
                        btkit::finish_reason::stop, 300 + task);
        std::string os_answer;
        if (task == 3 || task == 6 || task == 8) {
            os_answer = golden_with_unknown_action(task);
        } else if (task == 7 || task == 9) {
            os_answer = shuffled_golden_xml(task);
        } else {
            os_answer = golden_xml(task);
        }
        record_response(dir, task_prompt(task, btkit::prompt_mode::one_shot),
                        "Here is the behavior tree:\n```xml\n" + os_answer + "\n```\n",
                        btkit::finish_reason::stop, 400 + task);
    }
    btkit::eval_config config;
    config.tasks = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    config.modes = {btkit::prompt_mode::zero_shot, btkit::prompt_mode::one_shot};
    config.repair_enabled = true;
    config.tasks_dir = tasks_dir();
    config.output_dir = root / "out";
    config.models = {replay_model("llamachat-ft", dir)};
    return config;
}

}  // namespace testutil
