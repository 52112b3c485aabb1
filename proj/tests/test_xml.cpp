#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "btkit/xml.hpp"

#include "helpers.hpp"

using namespace btkit;

namespace {

// The dataset-style example: a sequence that first moves to a point and
// then interacts with an object.
const char* k_dataset_example = R"(<root main_tree_to_execute="MainTree">
    <BehaviorTree ID="MainTree">
        <Sequence>
            <GoPoint goal="kitchen"/>
            <GoObject target="cup"/>
        </Sequence>
    </BehaviorTree>
</root>)";

}  // namespace

TEST_CASE("parse accepts the two-leaf sequence example") {
    parse_result result = parse(k_dataset_example);
    REQUIRE(result.ok());
    CHECK(result->trees.size() == 1);
    CHECK(result->trees[0].id == "MainTree");
    CHECK(count_nodes(*result.model) == 3);
    CHECK(result->main_tree_id == "MainTree");
    const main_selection main = select_main_tree(*result.model);
    CHECK(main.ok());
    CHECK(main.id == "MainTree");
}

TEST_CASE("parse accepts a minimal document") {
    parse_result result = parse("<root><BehaviorTree ID=\"T\"><AlwaysSuccess/></BehaviorTree></root>");
    REQUIRE(result.ok());
    CHECK(result->trees.size() == 1);
    const main_selection main = select_main_tree(*result.model);
    CHECK(main.ok());
    CHECK(main.id == "T");
}

TEST_CASE("unbalanced tags are malformed with a position") {
    const char* text = "<root>\n<BehaviorTree ID=\"a\">\n<Sequence>\n</BehaviorTree>\n</root>";
    parse_result result = parse(text);
    REQUIRE(!result.ok());
    CHECK(result.error->code == parse_error_code::malformed_xml);
    CHECK(result.error->pos.line == 4);
}

TEST_CASE("duplicate attributes are a hard parse error") {
    parse_result result =
        parse("<root><BehaviorTree ID=\"t\"><MoveTo goal=\"1,2\" goal=\"3,4\"/></BehaviorTree></root>");
    REQUIRE(!result.ok());
    CHECK(result.error->code == parse_error_code::malformed_xml);
    CHECK(result.error->message.find("duplicate attribute") != std::string::npos);
}

TEST_CASE("error taxonomy for bad documents") {
    CHECK(parse("").error->code == parse_error_code::no_root_element);
    CHECK(parse("just words").error->code == parse_error_code::malformed_xml);
    CHECK(parse("<tree/>").error->code == parse_error_code::no_root_element);
    CHECK(parse("<root></root>").error->code == parse_error_code::no_trees);
    CHECK(parse("<root><TreeNodesModel/></root>").error->code == parse_error_code::no_trees);
    CHECK(parse("<root><BehaviorTree ID=\"a\"><X/></BehaviorTree>"
                "<BehaviorTree ID=\"a\"><Y/></BehaviorTree></root>")
              .error->code == parse_error_code::duplicate_tree_id);
    CHECK(parse("<root><BehaviorTree ID=\"a\"><X/></BehaviorTree></root><root/>").error->code ==
          parse_error_code::malformed_xml);
}

TEST_CASE("comments, declarations and text content are discarded") {
    const char* text =
        "<?xml version=\"1.0\"?>\n"
        "<!-- generated -->\n"
        "<root BTCPP_format=\"4\">\n"
        "  <BehaviorTree ID=\"T\">\n"
        "    <Sequence> some stray text\n"
        "      <!-- first go -->\n"
        "      <MoveTo goal=\"0,0\"/>\n"
        "      <![CDATA[ignore me]]>\n"
        "    </Sequence>\n"
        "  </BehaviorTree>\n"
        "</root>";
    parse_result result = parse(text);
    REQUIRE(result.ok());
    CHECK(result->format_version == "4");
    CHECK(count_nodes(*result.model) == 2);
    CHECK(serialize(*result.model).find("stray") == std::string::npos);
}

TEST_CASE("select_main_tree resolves the three documented cases") {
    parse_result single = parse("<root><BehaviorTree ID=\"only\"><X/></BehaviorTree></root>");
    CHECK(select_main_tree(*single.model).id == "only");

    parse_result named = parse(
        "<root main_tree_to_execute=\"MainTree\">"
        "<BehaviorTree ID=\"MainTree\"><X/></BehaviorTree>"
        "<BehaviorTree ID=\"Sub\"><Y/></BehaviorTree></root>");
    CHECK(select_main_tree(*named.model).id == "MainTree");

    parse_result two = parse(
        "<root><BehaviorTree ID=\"a\"><X/></BehaviorTree>"
        "<BehaviorTree ID=\"b\"><Y/></BehaviorTree></root>");
    CHECK(select_main_tree(*two.model).error == main_select_error::ambiguous);

    parse_result dangling = parse(
        "<root main_tree_to_execute=\"gone\">"
        "<BehaviorTree ID=\"a\"><X/></BehaviorTree></root>");
    CHECK(select_main_tree(*dangling.model).error == main_select_error::dangling);
}

TEST_CASE("round-trip preserves structure") {
    parse_result first = parse(k_dataset_example);
    REQUIRE(first.ok());
    const std::string emitted = serialize(*first.model);
    parse_result second = parse(emitted);
    REQUIRE(second.ok());
    CHECK(structurally_equal(*first.model, *second.model));
    CHECK(serialize(*second.model) == emitted);
}

TEST_CASE("the bundled two-location example tree round-trips to an identical model") {
    const tree_model model =
        testutil::parse_file(testutil::tasks_dir() / "examples" / "task1_example.xml");
    parse_result back = parse(serialize(model));
    REQUIRE(back.ok());
    CHECK(structurally_equal(model, *back.model));
}

TEST_CASE("unknown elements and attributes survive round-trip byte-for-byte") {
    const char* text =
        "<root><BehaviorTree ID=\"T\"><Sequence custom_flag=\"yes\">"
        "<CheckStatus expected=\"ok &amp; ready\"/>"
        "<MoveTo goal=\"1,2\"/></Sequence></BehaviorTree></root>";
    parse_result first = parse(text);
    REQUIRE(first.ok());
    parse_result second = parse(serialize(*first.model));
    REQUIRE(second.ok());
    CHECK(structurally_equal(*first.model, *second.model));
    const raw_node& check = second->trees[0].roots[0].children[0];
    CHECK(check.element_name == "CheckStatus");
    REQUIRE(check.attribute("expected") != nullptr);
    CHECK(*check.attribute("expected") == "ok & ready");
}

TEST_CASE("attribute escaping covers quotes, angle brackets and newlines") {
    tree_model model;
    named_tree tree;
    tree.id = "T";
    raw_node leaf;
    leaf.element_name = "Say";
    leaf.set_attribute("text", "a<b>\"c\"&d'\ne\tf");
    tree.roots.push_back(leaf);
    model.trees.push_back(tree);

    parse_result back = parse(serialize(model));
    REQUIRE(back.ok());
    CHECK(*back->trees[0].roots[0].attribute("text") == "a<b>\"c\"&d'\ne\tf");
}

TEST_CASE("empty tree definitions are representable") {
    parse_result result = parse("<root><BehaviorTree ID=\"T\"/></root>");
    REQUIRE(result.ok());
    CHECK(result->trees[0].roots.empty());
    parse_result back = parse(serialize(*result.model));
    REQUIRE(back.ok());
    CHECK(structurally_equal(*result.model, *back.model));
}

TEST_CASE("node_at_path resolves and rejects") {
    parse_result result = parse(k_dataset_example);
    REQUIRE(result.ok());
    const raw_node* seq = node_at_path(*result.model, {0, 0});
    REQUIRE(seq != nullptr);
    CHECK(seq->element_name == "Sequence");
    const raw_node* leaf = node_at_path(*result.model, {0, 0, 1});
    REQUIRE(leaf != nullptr);
    CHECK(leaf->element_name == "GoObject");
    CHECK(node_at_path(*result.model, {0, 0, 5}) == nullptr);
    CHECK(node_at_path(*result.model, {3}) == nullptr);
}

TEST_CASE("serialize/parse round-trip is a fixpoint over random models") {
    std::mt19937 rng(20240814);
    for (int i = 0; i < 250; ++i) {
        const tree_model model = testutil::random_model(rng);
        const std::string once = serialize(model);
        parse_result parsed = parse(once);
        REQUIRE(parsed.ok());
        CHECK(structurally_equal(model, *parsed.model));
        CHECK(serialize(*parsed.model) == once);
    }
}
