#include "treelm/html.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "treelm/error.hpp"

namespace treelm {

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::unordered_set<std::string>& void_elements() {
  static const std::unordered_set<std::string> s = {
      "area", "base", "br", "col", "embed", "hr", "img", "input",
      "link", "meta", "param", "source", "track", "wbr"};
  return s;
}

const std::unordered_set<std::string>& raw_text_elements() {
  static const std::unordered_set<std::string> s = {"script", "style", "textarea", "title", "xmp"};
  return s;
}

const std::unordered_set<std::string>& head_elements() {
  static const std::unordered_set<std::string> s = {
      "title", "meta", "link", "base", "basefont", "style", "noscript", "script"};
  return s;
}

// Start tags that implicitly close an open <p>.
const std::unordered_set<std::string>& closes_p() {
  static const std::unordered_set<std::string> s = {
      "address", "article", "aside", "blockquote", "center", "details", "dialog",
      "dir", "div", "dl", "fieldset", "figcaption", "figure", "footer", "form",
      "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup", "hr", "li",
      "listing", "main", "menu", "nav", "ol", "p", "pre", "section", "summary",
      "table", "ul"};
  return s;
}

bool is_heading(const std::string& t) {
  return t.size() == 2 && t[0] == 'h' && t[1] >= '1' && t[1] <= '6';
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp <= 0x7F) {
    out.push_back(static_cast<char>(cp));
  } else if (cp <= 0x7FF) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0xFFFF) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0x10FFFF) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string decode_entities(const std::string& in) {
  static const std::unordered_map<std::string, std::string> named = {
      {"amp", "&"},   {"lt", "<"},    {"gt", ">"},     {"quot", "\""},
      {"apos", "'"},  {"nbsp", " "},  {"copy", "\xC2\xA9"}, {"reg", "\xC2\xAE"},
      {"mdash", "\xE2\x80\x94"}, {"ndash", "\xE2\x80\x93"}, {"hellip", "\xE2\x80\xA6"},
      {"laquo", "\xC2\xAB"}, {"raquo", "\xC2\xBB"}, {"trade", "\xE2\x84\xA2"}};
  std::string out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    if (in[i] != '&') {
      out.push_back(in[i++]);
      continue;
    }
    size_t semi = in.find(';', i + 1);
    if (semi == std::string::npos || semi - i > 12) {
      out.push_back(in[i++]);
      continue;
    }
    std::string body = in.substr(i + 1, semi - i - 1);
    if (!body.empty() && body[0] == '#') {
      uint32_t cp = 0;
      bool ok = body.size() > 1;
      if (body.size() > 2 && (body[1] == 'x' || body[1] == 'X')) {
        for (size_t k = 2; k < body.size() && ok; ++k) {
          char c = body[k];
          if (!std::isxdigit(static_cast<unsigned char>(c))) ok = false;
          else cp = cp * 16 + (std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                               : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
        }
      } else {
        for (size_t k = 1; k < body.size() && ok; ++k) {
          if (!std::isdigit(static_cast<unsigned char>(body[k]))) ok = false;
          else cp = cp * 10 + (body[k] - '0');
        }
      }
      if (ok && cp > 0 && cp <= 0x10FFFF) {
        append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
    } else {
      auto it = named.find(body);
      if (it != named.end()) {
        out += it->second;
        i = semi + 1;
        continue;
      }
    }
    out.push_back(in[i++]);
  }
  return out;
}

void validate_utf8(const std::string& s) {
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int extra;
    if (c < 0x80) extra = 0;
    else if ((c >> 5) == 0x6) extra = 1;
    else if ((c >> 4) == 0xE) extra = 2;
    else if ((c >> 3) == 0x1E) extra = 3;
    else throw Error::encoding("invalid UTF-8 lead byte at offset " + std::to_string(i));
    if (i + extra >= s.size() && extra > 0)
      throw Error::encoding("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (int k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2)
        throw Error::encoding("invalid UTF-8 continuation at offset " + std::to_string(i + k));
    }
    i += 1 + extra;
  }
}

// ---------------------------------------------------------------------------
// Tree builder
// ---------------------------------------------------------------------------

struct Builder {
  RawDom dom;
  std::vector<int> stack;  // open element indices; stack[0] == html
  int html = -1, head = -1, body = -1;
  bool in_body = false;

  int make(RawKind kind, const std::string& tag) {
    RawNode n;
    n.kind = kind;
    n.tag = tag;
    dom.nodes.push_back(std::move(n));
    return static_cast<int>(dom.nodes.size()) - 1;
  }

  void attach(int child, int parent) {
    dom.nodes[child].parent = parent;
    dom.nodes[parent].children.push_back(child);
  }

  void ensure_html() {
    if (html >= 0) return;
    html = make(RawKind::Element, "html");
    dom.root = html;
    stack.push_back(html);
  }

  void ensure_head() {
    ensure_html();
    if (head >= 0) return;
    head = make(RawKind::Element, "head");
    attach(head, html);
  }

  void ensure_body() {
    ensure_head();
    if (body >= 0) return;
    // Close anything still open inside head.
    while (stack.size() > 1) stack.pop_back();
    body = make(RawKind::Element, "body");
    attach(body, html);
    stack.push_back(body);
    in_body = true;
  }

  int current() { return stack.back(); }

  void merge_attrs(int node, const std::vector<std::pair<std::string, std::string>>& attrs) {
    for (const auto& a : attrs) {
      bool present = false;
      for (const auto& existing : dom.nodes[node].attrs)
        if (existing.first == a.first) { present = true; break; }
      if (!present) dom.nodes[node].attrs.push_back(a);
    }
  }

  bool stack_has(const std::string& tag) {
    for (size_t i = stack.size(); i-- > 1;)
      if (dom.nodes[stack[i]].tag == tag) return true;
    return false;
  }

  void pop_until_incl(const std::string& tag) {
    while (stack.size() > 1) {
      bool hit = dom.nodes[stack.back()].tag == tag;
      stack.pop_back();
      if (hit) break;
    }
  }

  // Implied end tags triggered by a new start tag.
  void generate_implied_closes(const std::string& tag) {
    const std::string& cur = dom.nodes[current()].tag;
    if (closes_p().count(tag) && stack_has("p")) pop_until_incl("p");
    if (tag == "li" && stack_has("li")) pop_until_incl("li");
    if ((tag == "dt" || tag == "dd") && (cur == "dt" || cur == "dd"))
      stack.pop_back();
    if (tag == "option" && cur == "option") stack.pop_back();
    if ((tag == "td" || tag == "th")) {
      const std::string& c = dom.nodes[current()].tag;
      if (c == "td" || c == "th") stack.pop_back();
    }
    if (tag == "tr") {
      while (stack.size() > 1) {
        const std::string& c = dom.nodes[current()].tag;
        if (c == "td" || c == "th" || c == "tr") stack.pop_back();
        else break;
      }
    }
    if (tag == "thead" || tag == "tbody" || tag == "tfoot") {
      while (stack.size() > 1) {
        const std::string& c = dom.nodes[current()].tag;
        if (c == "td" || c == "th" || c == "tr" || c == "thead" || c == "tbody" || c == "tfoot")
          stack.pop_back();
        else break;
      }
    }
    if (is_heading(tag) && is_heading(dom.nodes[current()].tag)) stack.pop_back();
  }

  void start_tag(const std::string& tag,
                 std::vector<std::pair<std::string, std::string>> attrs) {
    if (tag == "html") {
      ensure_html();
      merge_attrs(html, attrs);
      return;
    }
    if (tag == "head") {
      ensure_head();
      merge_attrs(head, attrs);
      if (!in_body) {
        while (stack.size() > 1) stack.pop_back();
        stack.push_back(head);
      }
      return;
    }
    if (tag == "body") {
      ensure_body();
      merge_attrs(body, attrs);
      return;
    }
    if (!in_body) {
      if (head_elements().count(tag)) {
        ensure_head();
        if (current() != head && stack.size() == 1) stack.push_back(head);
        if (stack.back() == html) stack.push_back(head);
        int n = make(RawKind::Element, tag);
        dom.nodes[n].attrs = std::move(attrs);
        attach(n, head);
        if (!void_elements().count(tag)) {
          stack.push_back(n);
        }
        return;
      }
      ensure_body();
    }
    generate_implied_closes(tag);
    int n = make(RawKind::Element, tag);
    dom.nodes[n].attrs = std::move(attrs);
    attach(n, current());
    if (!void_elements().count(tag)) stack.push_back(n);
  }

  void end_tag(const std::string& tag) {
    if (tag == "html" || tag == "body") return;  // closed at EOF
    if (tag == "head") {
      if (!in_body) while (stack.size() > 1) stack.pop_back();
      return;
    }
    if (stack_has(tag)) pop_until_incl(tag);
    // otherwise: stray end tag, ignored
  }

  void text(const std::string& decoded) {
    if (decoded.empty()) return;
    bool only_ws = std::all_of(decoded.begin(), decoded.end(), [](char c) { return is_ws(c); });
    if (!in_body) {
      bool inside_head_element =
          head >= 0 && !stack.empty() && current() != html && current() != head;
      if (!inside_head_element) {
        if (only_ws) return;
        ensure_body();
      }
    }
    int n = make(RawKind::Text, "");
    dom.nodes[n].text = decoded;
    attach(n, current());
  }

  void comment(const std::string& payload) {
    ensure_html();
    int n = make(RawKind::Comment, "");
    dom.nodes[n].text = payload;
    attach(n, current());
  }

  void finish() {
    ensure_body();  // guarantees html/head/body exist even for empty input
    stack.clear();
  }
};

struct Tokenizer {
  const std::string& src;
  size_t pos = 0;
  Builder& b;

  Tokenizer(const std::string& s, Builder& builder) : src(s), b(builder) {}

  bool eof() const { return pos >= src.size(); }

  void run() {
    while (!eof()) {
      size_t lt = src.find('<', pos);
      if (lt == std::string::npos) {
        b.text(decode_entities(src.substr(pos)));
        pos = src.size();
        break;
      }
      if (lt > pos) b.text(decode_entities(src.substr(pos, lt - pos)));
      pos = lt;
      if (!consume_markup()) {
        // lone '<' treated as text
        b.text("<");
        ++pos;
      }
    }
    b.finish();
  }

  bool consume_markup() {
    if (pos + 1 >= src.size()) return false;
    char c = src[pos + 1];
    if (c == '!') {
      if (src.compare(pos, 4, "<!--") == 0) {
        size_t end = src.find("-->", pos + 4);
        std::string payload = end == std::string::npos ? src.substr(pos + 4)
                                                       : src.substr(pos + 4, end - pos - 4);
        b.comment(payload);
        pos = end == std::string::npos ? src.size() : end + 3;
      } else {
        size_t end = src.find('>', pos);  // doctype / bogus declaration
        pos = end == std::string::npos ? src.size() : end + 1;
      }
      return true;
    }
    if (c == '?') {
      size_t end = src.find('>', pos);  // processing instruction, dropped
      pos = end == std::string::npos ? src.size() : end + 1;
      return true;
    }
    if (c == '/') {
      size_t p = pos + 2;
      if (p >= src.size() || !std::isalpha(static_cast<unsigned char>(src[p]))) {
        size_t end = src.find('>', pos);
        pos = end == std::string::npos ? src.size() : end + 1;
        return true;
      }
      size_t start = p;
      while (p < src.size() && src[p] != '>' && !is_ws(src[p])) ++p;
      std::string tag = to_lower(src.substr(start, p - start));
      size_t end = src.find('>', p);
      pos = end == std::string::npos ? src.size() : end + 1;
      b.end_tag(tag);
      return true;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
    return consume_start_tag();
  }

  bool consume_start_tag() {
    size_t p = pos + 1;
    size_t start = p;
    while (p < src.size() && (std::isalnum(static_cast<unsigned char>(src[p])) || src[p] == '-'))
      ++p;
    std::string tag = to_lower(src.substr(start, p - start));
    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (p < src.size() && src[p] != '>') {
      if (is_ws(src[p])) { ++p; continue; }
      if (src[p] == '/') {
        self_closing = true;
        ++p;
        continue;
      }
      size_t name_start = p;
      while (p < src.size() && !is_ws(src[p]) && src[p] != '=' && src[p] != '>' && src[p] != '/')
        ++p;
      std::string name = to_lower(src.substr(name_start, p - name_start));
      std::string value;
      while (p < src.size() && is_ws(src[p])) ++p;
      if (p < src.size() && src[p] == '=') {
        ++p;
        while (p < src.size() && is_ws(src[p])) ++p;
        if (p < src.size() && (src[p] == '"' || src[p] == '\'')) {
          char quote = src[p++];
          size_t vstart = p;
          while (p < src.size() && src[p] != quote) ++p;
          value = decode_entities(src.substr(vstart, p - vstart));
          if (p < src.size()) ++p;
        } else {
          size_t vstart = p;
          while (p < src.size() && !is_ws(src[p]) && src[p] != '>') ++p;
          value = decode_entities(src.substr(vstart, p - vstart));
        }
      }
      if (!name.empty()) {
        bool dup = false;
        for (const auto& a : attrs)
          if (a.first == name) { dup = true; break; }
        if (!dup) attrs.emplace_back(name, value);
      }
    }
    pos = p < src.size() ? p + 1 : src.size();
    b.start_tag(tag, std::move(attrs));
    if (raw_text_elements().count(tag) && !void_elements().count(tag)) {
      if (self_closing)
        b.end_tag(tag);
      else
        consume_raw_text(tag);
    }
    return true;
  }

  // Content of script/style/title/textarea runs to the matching end tag.
  void consume_raw_text(const std::string& tag) {
    std::string needle = "</" + tag;
    size_t p = pos;
    size_t end = std::string::npos;
    while (p + needle.size() <= src.size()) {
      size_t cand = src.find('<', p);
      if (cand == std::string::npos) break;
      bool match = true;
      for (size_t k = 0; k < needle.size(); ++k) {
        if (std::tolower(static_cast<unsigned char>(src[cand + k])) != needle[k]) {
          match = false;
          break;
        }
      }
      if (match) {
        end = cand;
        break;
      }
      p = cand + 1;
    }
    std::string content = end == std::string::npos ? src.substr(pos) : src.substr(pos, end - pos);
    if (!content.empty()) {
      bool decode = tag == "title" || tag == "textarea";
      int n = b.make(RawKind::Text, "");
      b.dom.nodes[n].text = decode ? decode_entities(content) : content;
      b.attach(n, b.current());
    }
    if (end == std::string::npos) {
      pos = src.size();
      b.end_tag(tag);
    } else {
      size_t close = src.find('>', end);
      pos = close == std::string::npos ? src.size() : close + 1;
      b.end_tag(tag);
    }
  }
};

}  // namespace

RawDom parse_html(const std::string& raw) {
  validate_utf8(raw);
  Builder b;
  Tokenizer tok(raw, b);
  tok.run();
  return std::move(b.dom);
}

RawDom parse_html_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::io("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw Error::io("read failure on " + path);
  return parse_html(ss.str());
}

std::string normalize_ws(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_ws(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

namespace {

std::string truncate_attr_value(const std::string& value, int max_words) {
  std::string norm = normalize_ws(value);
  int words = 0;
  for (size_t i = 0; i < norm.size(); ++i) {
    if (norm[i] == ' ') {
      if (++words >= max_words) return norm.substr(0, i);
    }
  }
  return norm;
}

struct CleanBuild {
  const RawDom& raw;
  const CleanConfig& cfg;
  std::unordered_set<std::string> removed;
  std::vector<DomNode> out;

  CleanBuild(const RawDom& r, const CleanConfig& c) : raw(r), cfg(c) {
    removed.insert(c.removed_tags.begin(), c.removed_tags.end());
  }

  // Returns the new node id, or kNoNode when the subtree was pruned.
  NodeId visit(int raw_idx, NodeId parent) {
    const RawNode& rn = raw.nodes[raw_idx];
    if (rn.kind != RawKind::Element) return kNoNode;
    if (removed.count(rn.tag)) return kNoNode;

    NodeId id = static_cast<NodeId>(out.size());
    out.emplace_back();
    {
      DomNode& n = out.back();
      n.node_id = id;
      n.tag = rn.tag;
      n.parent = parent;
      for (const std::string& keep : cfg.kept_attrs) {
        for (const auto& a : rn.attrs) {
          if (a.first == keep)
            n.attrs.emplace_back(a.first, truncate_attr_value(a.second, cfg.max_attr_words));
        }
      }
    }

    std::string own_text;
    std::vector<NodeId> kids;
    for (int child : rn.children) {
      const RawNode& cn = raw.nodes[child];
      if (cn.kind == RawKind::Text) {
        if (!own_text.empty()) own_text.push_back(' ');
        own_text += cn.text;
      } else if (cn.kind == RawKind::Element) {
        NodeId cid = visit(child, id);
        if (cid != kNoNode) kids.push_back(cid);
      }
      // comments dropped
    }

    DomNode& n = out[static_cast<size_t>(id)];
    n.text = normalize_ws(own_text);
    n.children = std::move(kids);

    if (n.children.empty() && n.text.empty() && n.attrs.empty()) {
      out.pop_back();  // contentless leaf; ids above it have not been handed out
      return kNoNode;
    }
    return id;
  }
};

}  // namespace

int DomTree::depth(NodeId id) const {
  int d = 0;
  for (NodeId cur = id; nodes[static_cast<size_t>(cur)].parent != kNoNode;
       cur = nodes[static_cast<size_t>(cur)].parent)
    ++d;
  return d;
}

std::string DomTree::tag_path(NodeId id) const {
  std::vector<std::string> parts;
  NodeId cur = id;
  while (cur != kNoNode) {
    const DomNode& n = nodes[static_cast<size_t>(cur)];
    std::string seg = n.tag;
    if (n.parent != kNoNode) {
      const DomNode& p = nodes[static_cast<size_t>(n.parent)];
      int same_tag = 0, rank = 0;
      for (NodeId sib : p.children) {
        if (nodes[static_cast<size_t>(sib)].tag == n.tag) {
          ++same_tag;
          if (sib == cur) rank = same_tag;
        }
      }
      if (same_tag > 1) seg += "[" + std::to_string(rank) + "]";
    }
    parts.push_back(seg);
    cur = n.parent;
  }
  std::string path;
  for (size_t i = parts.size(); i-- > 0;) path += "/" + parts[i];
  return path;
}

DomTree clean(const RawDom& raw, const CleanConfig& cfg) {
  if (raw.nodes.empty()) throw Error::empty_document("empty parse tree");
  CleanBuild cb(raw, cfg);

  // visit() assigns ids in output preorder. A node is popped right after its
  // own subtree turned out contentless, and by then every descendant has
  // already been popped, so out is always a preorder-consistent prefix.
  NodeId root = cb.visit(raw.root, kNoNode);
  if (root == kNoNode) throw Error::empty_document("nothing left after cleaning");

  DomTree tree;
  tree.nodes = std::move(cb.out);
  tree.root = root;

  tree.preorder.resize(tree.nodes.size());
  for (size_t i = 0; i < tree.nodes.size(); ++i) tree.preorder[i] = static_cast<NodeId>(i);
  tree.postorder.reserve(tree.nodes.size());
  {
    // Iterative postorder.
    std::vector<std::pair<NodeId, size_t>> st = {{tree.root, 0}};
    while (!st.empty()) {
      auto& [id, next_child] = st.back();
      const DomNode& n = tree.nodes[static_cast<size_t>(id)];
      if (next_child < n.children.size()) {
        NodeId c = n.children[next_child++];
        st.emplace_back(c, 0);
      } else {
        tree.postorder.push_back(id);
        st.pop_back();
      }
    }
  }
  return tree;
}

namespace {

std::string escape_html(const std::string& s, bool in_attr) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += in_attr ? "&quot;" : "\""; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string serialize(const DomTree& tree) {
  std::string out;
  // Depth-first emit; text printed before children (own text is a prefix).
  struct Frame {
    NodeId id;
    bool closed;
  };
  std::vector<Frame> st = {{tree.root, false}};
  while (!st.empty()) {
    Frame f = st.back();
    st.pop_back();
    const DomNode& n = tree.node(f.id);
    if (f.closed) {
      out += "</" + n.tag + ">";
      continue;
    }
    out += "<" + n.tag;
    for (const auto& a : n.attrs) out += " " + a.first + "=\"" + escape_html(a.second, true) + "\"";
    out += ">";
    if (!n.text.empty()) out += escape_html(n.text, false);
    if (!void_elements().count(n.tag)) {
      st.push_back({f.id, true});
    }
    for (size_t k = n.children.size(); k-- > 0;) st.push_back({n.children[k], false});
  }
  return out;
}

}  // namespace treelm
