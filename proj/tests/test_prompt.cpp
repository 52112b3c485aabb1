#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "btkit/prompt.hpp"

#include "helpers.hpp"

using namespace btkit;

TEST_CASE("one-shot generation prompt is the four-message layout") {
    const task_spec spec = testutil::load_task(1);
    REQUIRE(spec.example.has_value());
    const message_list messages = build_generation_prompt(spec.description, spec.example);

    REQUIRE(messages.size() == 4);
    CHECK(messages[0].role == chat_role::system);
    CHECK(messages[0].content ==
          "You will be provided a summary of a task performed by a robot, and your objective is "
          "to express this task as a behavior tree in XML format.");
    CHECK(messages[1].role == chat_role::user);
    CHECK(messages[1].content ==
          "The behavior tree represents a mobile robot tasked to visit two locations: (7,1) and "
          "(4,8). The available actions are: \"MoveTo\"");
    CHECK(messages[2].role == chat_role::assistant);
    CHECK(messages[2].content == spec.example->tree_xml);
    CHECK(messages[3].role == chat_role::user);
    CHECK(messages[3].content ==
          "The behavior tree represents a mobile robot tasked to visit a sequence of locations: "
          "((0,0), (2,3), (4, 7), (5, 11)). The available actions are: \"MoveTo\"");
}

TEST_CASE("zero-shot generation prompt is the two-message layout") {
    const message_list messages = build_generation_prompt("visit the kitchen", std::nullopt);
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].role == chat_role::system);
    CHECK(messages[0].content == generation_system_prompt);
    CHECK(messages[1].role == chat_role::user);
    CHECK(messages[1].content == "visit the kitchen");
}

TEST_CASE("empty task descriptions are rejected") {
    try {
        build_generation_prompt("", std::nullopt);
        FAIL_CHECK("expected prompt_error");
    } catch (const prompt_error& e) {
        CHECK(e.which() == prompt_error::kind::empty_description);
    }
}

TEST_CASE("description prompt carries the canonical sentence and the constraints") {
    const task_spec spec = testutil::load_task(1);
    const std::string target =
        "<root><BehaviorTree ID=\"T\"><MoveTo goal=\"1,1\"/></BehaviorTree></root>";
    const message_list messages = build_description_prompt(target, *spec.example);

    REQUIRE(messages.size() == 4);
    CHECK(messages[0].role == chat_role::system);
    CHECK(messages[0].content.find(
              "You will be provided a behavior tree in XML format, and your task is to summarize "
              "the task performed by this behavior tree") == 0);
    CHECK(messages[0].content.find("at most 120 words") != std::string::npos);
    CHECK(messages[0].content.find("BehaviorTree.CPP") != std::string::npos);
    CHECK(messages[0].content.find("overall summary") != std::string::npos);
    // The example pair is flipped: tree as the user turn, description as the answer.
    CHECK(messages[1].role == chat_role::user);
    CHECK(messages[1].content == spec.example->tree_xml);
    CHECK(messages[2].role == chat_role::assistant);
    CHECK(messages[2].content == spec.example->description);
    CHECK(messages[3].content == target);

    description_prompt_options options;
    options.max_words = 60;
    options.mention_library_compatibility = false;
    const message_list tuned = build_description_prompt(target, *spec.example, options);
    CHECK(tuned[0].content.find("at most 60 words") != std::string::npos);
    CHECK(tuned[0].content.find("BehaviorTree.CPP") == std::string::npos);
}

TEST_CASE("description prompt rejects malformed trees but accepts multi-tree documents") {
    const task_spec spec = testutil::load_task(1);
    try {
        build_description_prompt("<root><BehaviorTree>", *spec.example);
        FAIL_CHECK("expected prompt_error");
    } catch (const prompt_error& e) {
        CHECK(e.which() == prompt_error::kind::unparseable_tree);
    }

    const std::string with_subtree =
        "<root main_tree_to_execute=\"Main\">"
        "<BehaviorTree ID=\"Main\"><SubTree ID=\"Aux\"/></BehaviorTree>"
        "<BehaviorTree ID=\"Aux\"><Explore/></BehaviorTree></root>";
    CHECK(build_description_prompt(with_subtree, *spec.example).size() == 4);
}

TEST_CASE("extract_tree pulls the element out of a fenced response") {
    const std::string response =
        "Here is the tree:\n```xml\n<root BTCPP_format=\"4\">\n    <BehaviorTree ID=\"T\">\n"
        "        <AlwaysSuccess/>\n    </BehaviorTree>\n</root>\n```\nHope this helps!";
    const std::optional<std::string> extracted = extract_tree(response);
    REQUIRE(extracted.has_value());
    CHECK(extracted->rfind("<root", 0) == 0);
    CHECK(extracted->substr(extracted->size() - 7) == "</root>");
    CHECK(parse(*extracted).ok());
}

TEST_CASE("extract_tree is the identity on a pure XML response") {
    const std::string pure =
        "<root>\n    <BehaviorTree ID=\"T\">\n        <AlwaysSuccess/>\n    </BehaviorTree>\n"
        "</root>";
    CHECK(extract_tree(pure) == pure);
}

TEST_CASE("extract_tree composed with serialize is the identity") {
    const tree_model model = testutil::golden_tree(3);
    const std::string canonical = serialize(model);
    CHECK(extract_tree(canonical) == canonical);
}

TEST_CASE("extract_tree returns nothing for a refusal") {
    CHECK(!extract_tree("I cannot help with that.").has_value());
    CHECK(!extract_tree("").has_value());
    CHECK(!extract_tree("<root><BehaviorTree>").has_value());  // unbalanced
}

TEST_CASE("extract_tree takes the first of several trees") {
    const std::string response =
        "First attempt:\n<root><BehaviorTree ID=\"A\"><AlwaysSuccess/></BehaviorTree></root>\n"
        "Or maybe:\n<root><BehaviorTree ID=\"B\"><AlwaysFailure/></BehaviorTree></root>";
    const std::optional<std::string> extracted = extract_tree(response);
    REQUIRE(extracted.has_value());
    CHECK(extracted->find("\"A\"") != std::string::npos);
    CHECK(extracted->find("\"B\"") == std::string::npos);
}

TEST_CASE("extract_tree ignores comments and attribute angle brackets") {
    const std::string tricky =
        "<root><!-- </root> not the end --><BehaviorTree ID=\"T\">"
        "<Say text=\"a > b < c\"/></BehaviorTree></root>";
    const std::optional<std::string> extracted = extract_tree("noise " + tricky + " noise");
    REQUIRE(extracted.has_value());
    CHECK(*extracted == tricky);
}

TEST_CASE("bundled prompt fixtures match freshly built prompts") {
    // prompts/taskN.{zs,os}.json are generated by `btkit prompt`; they must
    // stay in sync with what the builders produce from the task specs.
    for (int task = 1; task <= 9; ++task) {
        const task_spec spec = testutil::load_task(task);
        const std::filesystem::path zs_path =
            testutil::source_dir() / "prompts" / ("task" + std::to_string(task) + ".zs.json");
        const std::filesystem::path os_path =
            testutil::source_dir() / "prompts" / ("task" + std::to_string(task) + ".os.json");
        REQUIRE(std::filesystem::exists(zs_path));
        REQUIRE(std::filesystem::exists(os_path));

        const nlohmann::json zs = nlohmann::json::parse(testutil::read_file(zs_path));
        const message_list zs_built = build_generation_prompt(spec.description, std::nullopt);
        REQUIRE(zs.size() == zs_built.size());
        for (size_t i = 0; i < zs_built.size(); ++i) {
            CHECK(zs[i]["role"] == chat_role_name(zs_built[i].role));
            CHECK(zs[i]["content"] == zs_built[i].content);
        }

        const nlohmann::json os = nlohmann::json::parse(testutil::read_file(os_path));
        const message_list os_built = build_generation_prompt(spec.description, spec.example);
        REQUIRE(os.size() == os_built.size());
        for (size_t i = 0; i < os_built.size(); ++i) {
            CHECK(os[i]["role"] == chat_role_name(os_built[i].role));
            CHECK(os[i]["content"] == os_built[i].content);
        }
    }
}
