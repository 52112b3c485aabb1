#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "btkit/xml.hpp"

#include "fixtures.hpp"
#include "helpers.hpp"

// Exercises the installed binary end to end; the path arrives via the
// BTKIT_BIN environment variable set by CTest.

namespace {

std::string btkit_bin() {
    const char* bin = std::getenv("BTKIT_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "BTKIT_BIN not set; run through ctest");
    return bin;
}

struct command_result {
    int exit_code;
    std::string output;  // stdout + stderr
};

command_result run_cli(const std::string& args) {
    const std::filesystem::path capture =
        testutil::make_temp_dir("cli") / "out.txt";
    const std::string command =
        btkit_bin() + " " + args + " > " + capture.string() + " 2>&1";
    const int raw = std::system(command.c_str());
    command_result result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.output = testutil::read_file(capture);
    return result;
}

std::string quoted(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::string tasks_flag() { return " --tasks-dir " + quoted(testutil::tasks_dir()); }

}  // namespace

TEST_CASE("lint exits 0 on the golden tree and 1 on a mutant with an extra parameter") {
    const command_result clean =
        run_cli("lint " + quoted(testutil::golden_tree_path(1)) + " --task 1" + tasks_flag());
    CHECK(clean.exit_code == 0);
    CHECK(clean.output.find("clean") != std::string::npos);

    const std::filesystem::path dir = testutil::make_temp_dir("cli");
    testutil::write_file(dir / "mutant.xml",
                         btkit::serialize(testutil::mutant_extra_param(testutil::golden_tree(1))));
    const command_result bad =
        run_cli("lint " + quoted(dir / "mutant.xml") + " --task 1" + tasks_flag());
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("UnknownPort") != std::string::npos);
}

TEST_CASE("validate exits 1 and prints the reason for a mutant without the fallback") {
    const std::filesystem::path dir = testutil::make_temp_dir("cli");
    testutil::write_file(dir / "nofallback.xml",
                         "<root><BehaviorTree ID=\"MainTree\"><Sequence>"
                         "<MoveTo goal=\"1,0\"/><MoveTo goal=\"3,5\"/><MoveTo goal=\"6,2\"/>"
                         "<MoveTo goal=\"8,8\"/></Sequence></BehaviorTree></root>");
    const command_result result =
        run_cli("validate " + quoted(dir / "nofallback.xml") + " --task 3" + tasks_flag());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("FAIL") != std::string::npos);
    CHECK(result.output.find("root: finished with status failure") != std::string::npos);

    const command_result pass =
        run_cli("validate " + quoted(testutil::golden_tree_path(3)) + " --task 3" + tasks_flag());
    CHECK(pass.exit_code == 0);
    CHECK(pass.output.find("PASS") != std::string::npos);
}

TEST_CASE("parse canonicalizes to stdout and fails cleanly on bad XML") {
    const command_result good = run_cli("parse " + quoted(testutil::golden_tree_path(1)));
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("<root BTCPP_format=\"4\"") == 0);

    const std::filesystem::path dir = testutil::make_temp_dir("cli");
    testutil::write_file(dir / "broken.xml", "<root><BehaviorTree>");
    const command_result bad = run_cli("parse " + quoted(dir / "broken.xml"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("MalformedXml") != std::string::npos);
}

TEST_CASE("repair prints a diff and writes the repaired tree") {
    const std::filesystem::path dir = testutil::make_temp_dir("cli");
    testutil::write_file(dir / "faulty.xml",
                         "<root><BehaviorTree ID=\"T\"><Sequence>"
                         "<MoveTo goal=\"1,2\" speed=\"fast\"/><CheckWeather/>"
                         "</Sequence></BehaviorTree></root>");
    const command_result result =
        run_cli("repair " + quoted(dir / "faulty.xml") + " --task 1" + tasks_flag() + " --out " +
                quoted(dir / "fixed.xml"));
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("DropPort speed") != std::string::npos);
    CHECK(result.output.find("DropNode CheckWeather") != std::string::npos);
    CHECK(result.output.find("+++ repaired") != std::string::npos);

    const btkit::parse_result repaired = btkit::parse(testutil::read_file(dir / "fixed.xml"));
    REQUIRE(repaired.ok());
    CHECK(btkit::count_nodes(*repaired.model) == 2);
}

TEST_CASE("prompt emits the chat messages as JSON") {
    const command_result result = run_cli("prompt --task 1 --one-shot" + tasks_flag());
    CHECK(result.exit_code == 0);
    const nlohmann::json doc = nlohmann::json::parse(result.output);
    REQUIRE(doc.is_array());
    REQUIRE(doc.size() == 4);
    CHECK(doc[0]["role"] == "system");
    CHECK(doc[2]["role"] == "assistant");
}

TEST_CASE("dataset build and check round-trip through the CLI") {
    const std::filesystem::path dir = testutil::make_temp_dir("cli");
    const command_result build = run_cli("dataset build --synthetic 25 --out " +
                                         quoted(dir / "data.jsonl"));
    CHECK(build.exit_code == 0);
    const command_result check = run_cli("dataset check " + quoted(dir / "data.jsonl"));
    CHECK(check.exit_code == 0);
    CHECK(check.output.find("25 entries, 25 valid, 0 invalid") != std::string::npos);
}

TEST_CASE("gen extracts a tree from a replayed response") {
    const std::filesystem::path root = testutil::make_temp_dir("cli");
    const std::filesystem::path session = root / "session";
    testutil::record_response(session, testutil::task_prompt(1, btkit::prompt_mode::one_shot),
                              "Sure!\n```xml\n" + testutil::golden_xml(1) + "\n```",
                              btkit::finish_reason::stop, 42);
    const command_result result =
        run_cli("gen --task 1 --one-shot --model fixture --replay " + quoted(session) +
                tasks_flag() + " --out " + quoted(root / "gen.xml"));
    CHECK(result.exit_code == 0);
    CHECK(testutil::read_file(root / "gen.xml") == testutil::golden_xml(1));

    // A refusal yields exit 1.
    const std::filesystem::path refusal = root / "refusal";
    testutil::record_response(refusal, testutil::task_prompt(2, btkit::prompt_mode::zero_shot),
                              "I cannot help with that.", btkit::finish_reason::stop, 9);
    const command_result no_tree = run_cli("gen --task 2 --model fixture --replay " +
                                           quoted(refusal) + tasks_flag());
    CHECK(no_tree.exit_code == 1);
}

TEST_CASE("eval over a replayed session writes reports and exits 0") {
    const std::filesystem::path root = testutil::make_temp_dir("cli");
    testutil::build_validation_fixture(root);  // writes root/session
    const std::filesystem::path out = root / "cli-out";
    const command_result result = run_cli(
        "eval --phase 2 --model fixture --model-label llamachat-ft --replay " +
        quoted(root / "session") + tasks_flag() + " --out " + quoted(out));
    CHECK(result.exit_code == 0);
    CHECK(std::filesystem::exists(out / "report.md"));
    CHECK(std::filesystem::exists(out / "report.json"));
    CHECK(result.output.find("## Validation") != std::string::npos);
    CHECK(result.output.find("report written to") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("lint").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("validate missing.xml --task 99" + tasks_flag()).exit_code == 2);
    CHECK(run_cli("eval --phase 3 --endpoint http://localhost:1").exit_code == 2);
    const command_result missing_file = run_cli("lint /nonexistent.xml --task 1" + tasks_flag());
    CHECK(missing_file.exit_code == 2);
}
