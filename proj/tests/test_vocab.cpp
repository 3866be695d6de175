#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "treelm/error.hpp"
#include "treelm/vocab.hpp"

using namespace treelm;

namespace {

DomTree tree_of(const std::string& html) { return clean(parse_html(html)); }

}  // namespace

TEST_CASE("build_vocab: direct frequency counting") {
  DomTree t = tree_of("<p>Hi, hi</p>");
  Vocab v = build_vocab({&t}, 1);
  CHECK(v.contains("<p>"));
  CHECK(v.contains("hi"));
  CHECK(v.contains(","));
  // "hi" (freq 2) precedes "," (freq 1) in id order among words
  CHECK(v.id("hi") < v.id(","));
}

TEST_CASE("build_vocab: min_freq threshold maps rare words to UNK") {
  DomTree t = tree_of("<p>Hi, hi</p>");
  Vocab v = build_vocab({&t}, 2);
  CHECK_FALSE(v.contains(","));
  CHECK(v.contains("hi"));
  CHECK(v.id(",") == kUnk);
}

TEST_CASE("build_vocab: identical counts give identical id assignment") {
  DomTree a = tree_of("<div class=x>alpha beta beta</div>");
  DomTree b = tree_of("<div class=x>beta alpha beta</div>");
  Vocab va = build_vocab({&a}, 1);
  Vocab vb = build_vocab({&b}, 1);
  REQUIRE(va.size() == vb.size());
  for (TokenId i = 0; i < va.size(); ++i) CHECK(va.token(i) == vb.token(i));
}

TEST_CASE("build_vocab: specials occupy ids 0..5") {
  DomTree t = tree_of("<p>x</p>");
  Vocab v = build_vocab({&t}, 1);
  CHECK(v.token(kPad) == "[PAD]");
  CHECK(v.token(kUnk) == "[UNK]");
  CHECK(v.token(kMask) == "[MASK]");
  CHECK(v.token(kYes) == "[YES]");
  CHECK(v.token(kNo) == "[NO]");
  CHECK(v.token(kQSep) == "[QSEP]");
}

TEST_CASE("build_vocab: empty corpus errors") {
  CHECK_THROWS_AS(build_vocab({}, 1), Error);
}

TEST_CASE("tokenize_node: tag + text spans") {
  DomTree t = tree_of("<h1>Movie Title</h1>");
  Vocab v = build_vocab({&t}, 1);
  const DomNode* h1 = nullptr;
  for (const auto& n : t.nodes)
    if (n.tag == "h1") h1 = &n;
  REQUIRE(h1 != nullptr);
  TokenizedNode tn = tokenize_node(*h1, v);
  REQUIRE(tn.count() == 3);
  CHECK(tn.tokens[0] == v.id("<h1>"));
  CHECK(tn.tokens[1] == v.id("movie"));
  CHECK(tn.tokens[2] == v.id("title"));
  CHECK(tn.attr_begin == 1);
  CHECK(tn.attr_end == 1);  // empty attr span
  CHECK(tn.text_begin == 1);
  CHECK(tn.text_end == 3);
}

TEST_CASE("tokenize_node: attributes without text") {
  DomTree t = tree_of("<div class=\"cast\">x</div><p>filler word</p>");
  Vocab v = build_vocab({&t}, 1);
  DomNode div;
  div.tag = "div";
  div.attrs = {{"class", "cast"}};
  TokenizedNode tn = tokenize_node(div, v);
  REQUIRE(tn.count() == 3);
  CHECK(tn.tokens[0] == v.id("<div>"));
  CHECK(tn.tokens[1] == v.id("class"));
  CHECK(tn.tokens[2] == v.id("cast"));
  CHECK(tn.text_begin == tn.text_end);
}

TEST_CASE("tokenize_node: OOV words map to UNK") {
  DomTree t = tree_of("<p>known</p>");
  Vocab v = build_vocab({&t}, 1);
  DomNode p;
  p.tag = "p";
  p.text = "unseen known";
  TokenizedNode tn = tokenize_node(p, v);
  CHECK(tn.tokens[1] == kUnk);
  CHECK(tn.tokens[2] == v.id("known"));
}

TEST_CASE("tokenize determinism and count identity") {
  DomTree t = tree_of(
      "<body><div class=\"a b\" id=\"z\">some text, with punct!</div><p>more</p></body>");
  Vocab v = build_vocab({&t}, 1);
  for (const auto& n : t.nodes) {
    TokenizedNode a = tokenize_node(n, v);
    TokenizedNode b = tokenize_node(n, v);
    CHECK(a.tokens == b.tokens);
    CHECK(a.count() == 1 + (a.attr_end - a.attr_begin) + (a.text_end - a.text_begin));
  }
}

TEST_CASE("vocab save/load round trip preserves ids and tags") {
  DomTree t = tree_of("<body><h1>A title</h1><p class=\"x\">text &amp; words</p></body>");
  Vocab v = build_vocab({&t}, 1);
  const std::string path = std::filesystem::temp_directory_path() / "treelm_vocab_test.txt";
  v.save(path);
  Vocab w = Vocab::load(path);
  REQUIRE(v.size() == w.size());
  for (TokenId i = 0; i < v.size(); ++i) CHECK(v.token(i) == w.token(i));
  CHECK(v.num_tag_ids() == w.num_tag_ids());
  CHECK(v.tag_position_id("p") == w.tag_position_id("p"));
  std::filesystem::remove(path);
}

TEST_CASE("decode then re-encode is the identity for non-special ids") {
  DomTree t = tree_of("<body><p>alpha beta gamma; delta</p><div class=nav>menu</div></body>");
  Vocab v = build_vocab({&t}, 1);
  for (TokenId i = kNumSpecials; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
}

TEST_CASE("tag position ids: sentinel 0, lexicographic assignment, separate space") {
  DomTree t = tree_of("<body><p>x</p><div>y</div><a>z</a></body>");
  Vocab v = build_vocab({&t}, 1);
  CHECK(v.tag_position_id("nonexistent") == 0);
  // observed tags: a, body, div, html, p -> ids 1..5 in lexicographic order
  CHECK(v.tag_position_id("a") == 1);
  CHECK(v.tag_position_id("body") == 2);
  CHECK(v.tag_position_id("div") == 3);
  CHECK(v.tag_position_id("html") == 4);
  CHECK(v.tag_position_id("p") == 5);
  CHECK(v.num_tag_ids() == 6);
}
