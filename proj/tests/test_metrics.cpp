#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "treelm/metrics.hpp"

using namespace treelm;

namespace {

AttrTriple t(const std::string& doc, NodeId node, int attr) {
  AttrTriple x;
  x.doc_id = doc;
  x.node_id = node;
  x.attribute = attr;
  return x;
}

PairPred pp(const std::string& doc, NodeId pred, NodeId obj, const std::string& surface) {
  PairPred x;
  x.doc_id = doc;
  x.pred_node = pred;
  x.obj_node = obj;
  x.pred_surface = surface;
  return x;
}

PairGold pg(const std::string& doc, NodeId pred, NodeId obj, std::vector<std::string> forms) {
  PairGold x;
  x.doc_id = doc;
  x.pred_node = pred;
  x.obj_node = obj;
  x.acceptable = std::move(forms);
  return x;
}

}  // namespace

TEST_CASE("value_f1: perfect predictions") {
  std::vector<AttrTriple> gold = {t("a", 1, 1), t("a", 2, 2), t("b", 3, 1)};
  PRF prf = value_f1(gold, gold);
  CHECK(prf.precision == 1.0);
  CHECK(prf.recall == 1.0);
  CHECK(prf.f1 == 1.0);
}

TEST_CASE("value_f1: one extra wrong prediction over four gold") {
  std::vector<AttrTriple> gold = {t("a", 1, 1), t("a", 2, 2), t("b", 3, 1), t("b", 4, 2)};
  std::vector<AttrTriple> preds = gold;
  preds.push_back(t("b", 9, 1));
  PRF prf = value_f1(preds, gold);
  CHECK(prf.precision == doctest::Approx(0.8));
  CHECK(prf.recall == doctest::Approx(1.0));
  CHECK(prf.f1 == doctest::Approx(2.0 * 0.8 / 1.8));
}

TEST_CASE("value_f1: disjoint nonempty sets score zero") {
  PRF prf = value_f1({t("a", 1, 1)}, {t("a", 2, 1)});
  CHECK(prf.precision == 0.0);
  CHECK(prf.recall == 0.0);
  CHECK(prf.f1 == 0.0);
}

TEST_CASE("value_f1: empty conventions") {
  PRF both = value_f1({}, {});
  CHECK(both.f1 == 1.0);
  PRF no_pred = value_f1({}, {t("a", 1, 1)});
  CHECK(no_pred.f1 == 0.0);
  PRF no_gold = value_f1({t("a", 1, 1)}, {});
  CHECK(no_gold.f1 == 0.0);
}

TEST_CASE("value_f1: duplicates are deduplicated before scoring") {
  std::vector<AttrTriple> preds = {t("a", 1, 1), t("a", 1, 1), t("a", 1, 1)};
  std::vector<AttrTriple> gold = {t("a", 1, 1)};
  PRF prf = value_f1(preds, gold);
  CHECK(prf.precision == 1.0);
  CHECK(prf.recall == 1.0);
}

TEST_CASE("page_f1: one correct among five predictions still hits the page") {
  std::vector<AttrTriple> preds;
  for (NodeId n = 1; n <= 5; ++n) preds.push_back(t("page", n, 1));
  std::vector<AttrTriple> gold = {t("page", 3, 1)};
  PageF1Report rep = page_f1(preds, gold);
  CHECK(rep.per_attribute.at(1).precision == 1.0);
  CHECK(rep.per_attribute.at(1).recall == 1.0);
  // while value-level F1 penalizes the false positives
  PRF value = value_f1(preds, gold);
  CHECK(value.precision == doctest::Approx(0.2));
}

TEST_CASE("page_f1: no predictions means zero recall") {
  std::vector<AttrTriple> gold = {t("p1", 1, 1), t("p2", 2, 1)};
  PageF1Report rep = page_f1({}, gold);
  CHECK(rep.per_attribute.at(1).recall == 0.0);
}

// 3 docs x 2 attributes, hand computation:
//   attr 1: gold on d1(n1), d2(n2), d3(n3); predictions hit d1 correctly,
//           d2 wrongly, nothing on d3 -> P(pages) = 1/2, R = 1/3,
//           F1 = 2*(1/2)(1/3)/(1/2+1/3) = 0.4
//   attr 2: gold on d1(n5); prediction d1(n5) -> P = R = F1 = 1
//   macro F1 = (0.4 + 1)/2 = 0.7
TEST_CASE("page_f1: three-doc two-attribute fixture") {
  std::vector<AttrTriple> gold = {t("d1", 1, 1), t("d2", 2, 1), t("d3", 3, 1), t("d1", 5, 2)};
  std::vector<AttrTriple> preds = {t("d1", 1, 1), t("d2", 9, 1), t("d1", 5, 2)};
  PageF1Report rep = page_f1(preds, gold);
  CHECK(rep.per_attribute.at(1).precision == doctest::Approx(0.5));
  CHECK(rep.per_attribute.at(1).recall == doctest::Approx(1.0 / 3.0));
  CHECK(rep.per_attribute.at(1).f1 == doctest::Approx(0.4));
  CHECK(rep.per_attribute.at(2).f1 == doctest::Approx(1.0));
  CHECK(rep.macro.f1 == doctest::Approx(0.7));
}

TEST_CASE("page_f1 recall is never below value_f1 recall") {
  std::vector<AttrTriple> gold = {t("d1", 1, 1), t("d1", 2, 1), t("d2", 3, 1)};
  std::vector<AttrTriple> preds = {t("d1", 1, 1), t("d2", 9, 1)};
  PRF value = value_f1(preds, gold);
  PageF1Report page = page_f1(preds, gold);
  CHECK(page.per_attribute.at(1).recall >= value.recall);
}

TEST_CASE("pair_f1_lenient: exact canonical forms") {
  std::vector<PairGold> gold = {pg("d", 1, 2, {"director"}), pg("d", 3, 4, {"year"})};
  std::vector<PairPred> preds = {pp("d", 1, 2, "director"), pp("d", 3, 4, "year")};
  PRF prf = pair_f1_lenient(preds, gold);
  CHECK(prf.f1 == doctest::Approx(1.0));
}

TEST_CASE("pair_f1_lenient: correct object with unlisted predicate form is a false positive") {
  std::vector<PairGold> gold = {pg("d", 1, 2, {"director"})};
  std::vector<PairPred> preds = {pp("d", 7, 2, "helmed by")};
  PRF prf = pair_f1_lenient(preds, gold);
  CHECK(prf.precision == 0.0);
  CHECK(prf.recall == 0.0);
}

TEST_CASE("pair_f1_lenient: synonym form in the acceptable list is a true positive") {
  std::vector<PairGold> gold = {pg("d", 1, 2, {"director", "directed by"})};
  std::vector<PairPred> preds = {pp("d", 9, 2, "Directed   BY")};  // case/space lenient
  PRF prf = pair_f1_lenient(preds, gold);
  CHECK(prf.precision == 1.0);
  CHECK(prf.recall == 1.0);
}

TEST_CASE("pair_f1_lenient: empty conventions") {
  CHECK(pair_f1_lenient({}, {}).f1 == 1.0);
  CHECK(pair_f1_lenient({}, {pg("d", 1, 2, {"x"})}).f1 == 0.0);
  CHECK(pair_f1_lenient({pp("d", 1, 2, "x")}, {}).f1 == 0.0);
}

TEST_CASE("qa_em_f1: exact match") {
  QAScore s = qa_em_f1("The Matrix", {"the matrix"});
  CHECK(s.em == 1.0);
  CHECK(s.f1 == 1.0);
}

TEST_CASE("qa_em_f1: article kept, partial overlap") {
  QAScore s = qa_em_f1("the matrix", {"matrix"});
  CHECK(s.em == 0.0);
  CHECK(s.f1 == doctest::Approx(2.0 * 1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("qa_em_f1: empty prediction with nonempty gold") {
  QAScore s = qa_em_f1("", {"something"});
  CHECK(s.em == 0.0);
  CHECK(s.f1 == 0.0);
}

TEST_CASE("qa_em_f1: punctuation stripped, best gold taken") {
  QAScore s = qa_em_f1("the matrix!", {"wrong answer", "The Matrix"});
  CHECK(s.em == 1.0);
  CHECK(s.f1 == 1.0);
  // punctuation removal does not insert spaces: "a-b" collapses to "ab"
  QAScore glued = qa_em_f1("a-b", {"ab"});
  CHECK(glued.em == 1.0);
}

TEST_CASE("metrics stay within [0,1] and ignore prediction order") {
  std::vector<AttrTriple> gold = {t("a", 1, 1), t("b", 2, 2)};
  std::vector<AttrTriple> p1 = {t("a", 1, 1), t("b", 9, 2)};
  std::vector<AttrTriple> p2 = {t("b", 9, 2), t("a", 1, 1)};
  PRF f1 = value_f1(p1, gold);
  PRF f2 = value_f1(p2, gold);
  CHECK(f1.f1 == f2.f1);
  CHECK(f1.f1 >= 0.0);
  CHECK(f1.f1 <= 1.0);
}
