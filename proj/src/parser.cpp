#include "ubdb/parser.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace ubdb {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
  Ident,
  Keyword,
  Symbol,
  End,  // end of input
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
};

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> kw = {
      "context", "extends", "sets", "constants", "axioms", "machine", "refines",
      "sees", "layer", "class", "kind", "supertype", "invariant", "event",
      "constructor", "destructor", "normal", "query", "of", "any", "where",
      "then", "end", "injective", "attribute", "association", "primary",
      "secondary", "historical", "drops", "dom", "ran", "POW", "not", "or",
      "true", "false"};
  return kw;
}

// Multi-character symbols, longest first.
const char* const kSymbols[] = {
    ":=", "/:", "/\\", "\\/", "<->", "<-|", "<+", "<:", "<|", "-->", "+->",
    "|->", "=>", "**", "(", ")", "{", "}", "[", "]", ",", ".", ":", "=",
    "&", ";", "~", "!", "#", "\\"};

class Lexer {
 public:
  Lexer(const std::string& text, std::string file) : text_(text), file_(std::move(file)) {}

  std::vector<Token> run(std::vector<Diagnostic>& diags) {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      if (pos_ >= text_.size()) break;
      SourceSpan span{file_, line_, col_, 1};
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          advance();
        std::string word = text_.substr(start, pos_ - start);
        span.length = static_cast<int>(word.size());
        out.push_back({keywords().count(word) ? Tok::Keyword : Tok::Ident, word, span});
        continue;
      }
      bool matched = false;
      for (const char* sym : kSymbols) {
        size_t n = std::strlen(sym);
        if (text_.compare(pos_, n, sym) == 0) {
          span.length = static_cast<int>(n);
          out.push_back({Tok::Symbol, sym, span});
          for (size_t i = 0; i < n; ++i) advance();
          matched = true;
          break;
        }
      }
      if (!matched) {
        diags.push_back({span, Severity::Error,
                         std::string("unexpected character '") + c + "'"});
        advance();
      }
    }
    out.push_back({Tok::End, "", {file_, line_, col_, 0}});
    return out;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  std::string file_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct ParseAbort {};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  RefinementChain parse_file(RefinementChain chain) {
    while (!at_end()) {
      try {
        if (at_kw("context")) {
          chain.contexts.push_back(parse_context());
        } else if (at_kw("machine")) {
          chain.machines.push_back(parse_machine());
        } else {
          error(peek().span, "expected 'context' or 'machine'");
          throw ParseAbort{};
        }
      } catch (const ParseAbort&) {
        recover_to_top_level();
      }
    }
    return chain;
  }

  ExprPtr parse_expr_entry() { return parse_expr(); }
  PredPtr parse_pred_entry() { return parse_pred(); }
  bool at_end() const { return peek().kind == Tok::End; }

 private:
  const Token& peek(int k = 0) const {
    size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_kw(const char* k) const { return peek().kind == Tok::Keyword && peek().text == k; }
  bool at_sym(const char* s) const { return peek().kind == Tok::Symbol && peek().text == s; }
  bool eat_kw(const char* k) {
    if (at_kw(k)) {
      next();
      return true;
    }
    return false;
  }
  bool eat_sym(const char* s) {
    if (at_sym(s)) {
      next();
      return true;
    }
    return false;
  }
  void expect_kw(const char* k) {
    if (!eat_kw(k)) {
      error(peek().span, std::string("expected '") + k + "', found '" + describe(peek()) + "'");
      throw ParseAbort{};
    }
  }
  void expect_sym(const char* s) {
    if (!eat_sym(s)) {
      error(peek().span, std::string("expected '") + s + "', found '" + describe(peek()) + "'");
      throw ParseAbort{};
    }
  }
  std::string expect_ident() {
    if (peek().kind == Tok::Ident) return next().text;
    if (peek().kind == Tok::Keyword) {
      error(peek().span, "'" + peek().text + "' is a reserved keyword and cannot be used as an identifier");
      throw ParseAbort{};
    }
    error(peek().span, "expected identifier, found '" + describe(peek()) + "'");
    throw ParseAbort{};
  }

  static std::string describe(const Token& t) {
    return t.kind == Tok::End ? "end of input" : t.text;
  }

  void error(const SourceSpan& span, const std::string& msg) {
    diags_.push_back({span, Severity::Error, msg});
  }

  void recover_to_top_level() {
    int depth = 0;
    while (!at_end()) {
      if (at_kw("context") || at_kw("machine")) {
        if (depth <= 0) return;
      }
      if (at_kw("event")) ++depth;
      if (at_kw("end")) --depth;
      next();
    }
  }

  // -- contexts -------------------------------------------------------------

  Context parse_context() {
    Context ctx;
    ctx.span = peek().span;
    expect_kw("context");
    ctx.name = expect_ident();
    if (eat_kw("extends")) ctx.extends = expect_ident();
    while (!at_kw("end")) {
      if (eat_kw("sets")) {
        while (peek().kind == Tok::Ident) ctx.carrier_sets.push_back(next().text);
      } else if (eat_kw("constants")) {
        while (peek().kind == Tok::Ident && peek(1).kind == Tok::Symbol && peek(1).text == "=") {
          std::string name = next().text;
          next();  // '='
          ctx.constants.emplace_back(name, parse_expr());
        }
      } else if (eat_kw("axioms")) {
        while (peek().kind == Tok::Ident && at_sym_at(1, ":")) {
          LabeledPred ax;
          ax.span = peek().span;
          ax.label = next().text;
          next();  // ':'
          ax.pred = parse_pred();
          ctx.axioms.push_back(ax);
        }
      } else {
        error(peek().span, "expected 'sets', 'constants', 'axioms' or 'end' in context");
        throw ParseAbort{};
      }
    }
    expect_kw("end");
    return ctx;
  }

  bool at_sym_at(int k, const char* s) const {
    return peek(k).kind == Tok::Symbol && peek(k).text == s;
  }

  // -- machines -------------------------------------------------------------

  Layer parse_layer_label() {
    std::string w;
    if (peek().kind == Tok::Ident || peek().kind == Tok::Keyword) {
      w = next().text;
    } else {
      error(peek().span, "expected layer label");
      throw ParseAbort{};
    }
    if (w == "structure") return Layer::Structure;
    if (w == "attributes") return Layer::Attributes;
    if (w == "secondary") return Layer::Secondary;
    if (w == "attribute" && eat_sym("-")) return Layer::AttributeClasses;  // unreachable
    if (w == "attribute_classes") return Layer::AttributeClasses;
    if (w == "historical") return Layer::Historical;
    if (w == "queries") return Layer::Queries;
    if (w == "other") return Layer::Other;
    error(peek().span, "unknown layer label '" + w + "'");
    return Layer::Other;
  }

  RelationKind parse_arrow() {
    RelationKind rk;
    if (eat_sym("-->"))
      rk.arrow = RelArrow::TotalFn;
    else if (eat_sym("+->"))
      rk.arrow = RelArrow::PartialFn;
    else if (eat_sym("<->"))
      rk.arrow = RelArrow::Relation;
    else {
      error(peek().span, "expected '-->', '+->' or '<->'");
      throw ParseAbort{};
    }
    if (eat_kw("injective")) rk.injective = true;
    return rk;
  }

  Machine parse_machine() {
    Machine m;
    m.span = peek().span;
    expect_kw("machine");
    m.name = expect_ident();
    if (eat_kw("refines")) m.refines = expect_ident();
    if (eat_kw("sees")) {
      m.sees.push_back(expect_ident());
      while (eat_sym(",")) m.sees.push_back(expect_ident());
    }
    if (eat_kw("layer")) m.layer = parse_layer_label();
    while (!at_kw("end")) {
      if (at_kw("class")) {
        parse_class_decl(m);
      } else if (at_kw("attribute") || at_kw("association")) {
        parse_relation_decl(m);
      } else if (eat_kw("drops")) {
        m.drops.push_back(expect_ident());
        while (eat_sym(",")) m.drops.push_back(expect_ident());
      } else if (eat_kw("invariant")) {
        LabeledPred inv;
        inv.span = peek().span;
        inv.label = expect_ident();
        expect_sym(":");
        inv.pred = parse_pred();
        m.invariants.push_back(inv);
      } else if (at_kw("event")) {
        m.events.push_back(parse_event());
      } else {
        error(peek().span,
              "expected 'class', 'attribute', 'association', 'invariant', 'event' or 'end' in machine");
        throw ParseAbort{};
      }
    }
    expect_kw("end");
    return m;
  }

  void parse_class_decl(Machine& m) {
    ClassAnnotation ca;
    ca.span = peek().span;
    expect_kw("class");
    ca.class_name = expect_ident();
    expect_kw("kind");
    if (eat_kw("primary"))
      ca.kind = ClassKind::Primary;
    else if (eat_kw("secondary"))
      ca.kind = ClassKind::Secondary;
    else if (eat_kw("attribute"))
      ca.kind = ClassKind::Attribute;
    else if (eat_kw("historical"))
      ca.kind = ClassKind::Historical;
    else {
      error(peek().span, "expected class kind (primary, secondary, attribute, historical)");
      throw ParseAbort{};
    }
    expect_sym(":");
    ca.carrier = expect_ident();
    if (eat_kw("supertype")) ca.supertype = expect_ident();
    m.classes.push_back(ca);

    VariableDecl v;
    v.span = ca.span;
    v.name = ca.class_name;
    v.role = VarRole::ClassInstanceSet;
    v.source = ca.carrier;
    v.typing = SetType::set_of(SetType::atom(ca.carrier));
    m.variables.push_back(v);
  }

  void parse_relation_decl(Machine& m) {
    VariableDecl v;
    v.span = peek().span;
    bool is_attr = at_kw("attribute");
    next();  // 'attribute' | 'association'
    v.role = is_attr ? VarRole::Attribute : VarRole::Association;
    v.name = expect_ident();
    expect_sym(":");
    v.source = expect_ident();
    v.rel = parse_arrow();
    v.target = expect_ident();
    // Typing is completed during resolution (source class carrier is looked up
    // there); record the raw names here.
    m.variables.push_back(v);
  }

  Event parse_event() {
    Event ev;
    ev.span = peek().span;
    expect_kw("event");
    ev.name = expect_ident();
    if (eat_kw("constructor"))
      ev.kind = EventKind::Constructor;
    else if (eat_kw("destructor"))
      ev.kind = EventKind::Destructor;
    else if (eat_kw("query"))
      ev.kind = EventKind::Query;
    else if (eat_kw("normal"))
      ev.kind = EventKind::Normal;
    if (eat_kw("of")) ev.class_owner = expect_ident();
    if (eat_kw("extends")) ev.extends = expect_ident();
    if (eat_kw("any")) {
      do {
        Param p;
        p.name = expect_ident();
        expect_sym(":");
        p.typing = parse_expr();
        ev.params.push_back(p);
      } while (eat_sym(","));
    }
    if (eat_kw("where")) {
      while (peek().kind == Tok::Ident && at_sym_at(1, ":")) {
        Guard g;
        g.label = next().text;
        next();  // ':'
        g.pred = parse_pred();
        ev.guards.push_back(g);
      }
    }
    if (eat_kw("then")) {
      while (peek().kind == Tok::Ident && at_sym_at(1, ":")) {
        Action a;
        a.span = peek().span;
        a.label = next().text;
        next();  // ':'
        a.target = expect_ident();
        expect_sym(":=");
        a.value = parse_expr();
        ev.actions.push_back(a);
      }
    }
    expect_kw("end");
    return ev;
  }

  // -- predicates -----------------------------------------------------------

  PredPtr parse_pred() { return parse_implies(); }

  PredPtr parse_implies() {
    PredPtr lhs = parse_or();
    if (eat_sym("=>")) {
      auto p = Pred::make(Pred::Kind::Implies);
      p->preds = {lhs, parse_implies()};  // right-associative
      return p;
    }
    return lhs;
  }

  PredPtr parse_or() {
    PredPtr lhs = parse_and();
    while (at_kw("or")) {
      next();
      auto p = Pred::make(Pred::Kind::Or);
      p->preds = {lhs, parse_and()};
      lhs = p;
    }
    return lhs;
  }

  PredPtr parse_and() {
    PredPtr lhs = parse_pred_atom();
    while (at_sym("&")) {
      next();
      auto p = Pred::make(Pred::Kind::And);
      p->preds = {lhs, parse_pred_atom()};
      lhs = p;
    }
    return lhs;
  }

  PredPtr parse_quantifier(Pred::Kind kind) {
    auto p = Pred::make(kind);
    p->span = peek().span;
    next();  // '!' or '#'
    do {
      Binder b;
      b.name = expect_ident();
      expect_sym(":");
      b.typing = parse_expr();
      p->binders.push_back(b);
    } while (eat_sym(","));
    expect_sym(".");
    p->preds = {parse_pred()};
    return p;
  }

  PredPtr parse_pred_atom() {
    if (at_sym("!")) return parse_quantifier(Pred::Kind::Forall);
    if (at_sym("#")) return parse_quantifier(Pred::Kind::Exists);
    if (at_kw("not")) {
      auto span = peek().span;
      next();
      auto p = Pred::make(Pred::Kind::Not);
      p->span = span;
      p->preds = {parse_pred_atom()};
      return p;
    }
    if (at_kw("true")) {
      auto p = Pred::make(Pred::Kind::True);
      p->span = peek().span;
      next();
      return p;
    }
    if (at_kw("false")) {
      auto p = Pred::make(Pred::Kind::False);
      p->span = peek().span;
      next();
      return p;
    }
    if (at_sym("(") && starts_pred_paren()) {
      next();
      PredPtr p = parse_pred();
      expect_sym(")");
      return p;
    }
    return parse_rel_pred();
  }

  // Decide whether '(' opens a parenthesised predicate or an expression.
  // Scan forward to the matching ')' and look at the next meaningful token:
  // a comparison operator means the parenthesis belonged to an expression.
  bool starts_pred_paren() const {
    int depth = 0;
    size_t i = pos_;
    for (; i < toks_.size() && toks_[i].kind != Tok::End; ++i) {
      const Token& t = toks_[i];
      if (t.kind != Tok::Symbol) {
        // Predicate-level keywords/symbols inside the parens at depth 1 imply
        // a predicate.
        if (depth == 1 && toks_[i].kind == Tok::Keyword &&
            (t.text == "or" || t.text == "not" || t.text == "true" || t.text == "false"))
          return true;
        continue;
      }
      if (t.text == "(") ++depth;
      if (t.text == "[") ++depth;
      if (t.text == "{") ++depth;
      if (t.text == "]" || t.text == "}") --depth;
      if (depth == 1 &&
          (t.text == "&" || t.text == "=>" || t.text == ":" || t.text == "/:" ||
           t.text == "<:" || t.text == "=" || t.text == "!" || t.text == "#"))
        return true;
      if (t.text == ")") {
        --depth;
        if (depth == 0) {
          // Token after the matching close paren.
          const Token& nxt = toks_[i + 1];
          if (nxt.kind == Tok::Symbol &&
              (nxt.text == ":" || nxt.text == "/:" || nxt.text == "<:" || nxt.text == "=" ||
               nxt.text == "|->" || nxt.text == "~" || nxt.text == "[" || nxt.text == "(" ||
               nxt.text == "\\/" || nxt.text == "\\" || nxt.text == "/\\" ||
               nxt.text == "<-|" || nxt.text == "<|" || nxt.text == "<+" || nxt.text == ";" ||
               nxt.text == "**"))
            return false;
          return true;
        }
      }
    }
    return false;
  }

  PredPtr parse_rel_pred() {
    SourceSpan span = peek().span;
    ExprPtr lhs = parse_expr();
    if (eat_sym(":")) {
      ExprPtr rhs = parse_expr();
      if (at_sym("-->") || at_sym("+->") || at_sym("<->")) {
        auto p = Pred::make(Pred::Kind::RelAssert);
        p->span = span;
        p->rel = parse_arrow();
        ExprPtr rhs2 = parse_expr();
        p->exprs = {lhs, rhs, rhs2};
        return p;
      }
      auto p = Pred::make(Pred::Kind::In);
      p->span = span;
      p->exprs = {lhs, rhs};
      return p;
    }
    Pred::Kind k;
    if (eat_sym("/:"))
      k = Pred::Kind::NotIn;
    else if (eat_sym("<:"))
      k = Pred::Kind::Subset;
    else if (eat_sym("="))
      k = Pred::Kind::Eq;
    else {
      error(peek().span, "expected ':', '/:', '<:' or '=' in predicate, found '" +
                             describe(peek()) + "'");
      throw ParseAbort{};
    }
    auto p = Pred::make(k);
    p->span = span;
    p->exprs = {lhs, parse_expr()};
    return p;
  }

  // -- expressions ----------------------------------------------------------
  // Precedence, loosest first: \/ and \ | /\ | <-| <| | <+ | ; | |-> | ** |
  // postfix (~, [..], (..)).

  ExprPtr parse_expr() { return parse_union(); }

  ExprPtr parse_union() {
    ExprPtr lhs = parse_inter();
    while (at_sym("\\/") || at_sym("\\")) {
      bool is_union = peek().text == "\\/";
      next();
      auto e = Expr::make(is_union ? Expr::Kind::Union : Expr::Kind::Minus, {lhs, parse_inter()});
      lhs = e;
    }
    return lhs;
  }

  ExprPtr parse_inter() {
    ExprPtr lhs = parse_domop();
    while (eat_sym("/\\")) lhs = Expr::make(Expr::Kind::Inter, {lhs, parse_domop()});
    return lhs;
  }

  ExprPtr parse_domop() {
    ExprPtr lhs = parse_override();
    while (at_sym("<-|") || at_sym("<|")) {
      bool sub = peek().text == "<-|";
      next();
      lhs = Expr::make(sub ? Expr::Kind::DomSub : Expr::Kind::DomRes, {lhs, parse_override()});
    }
    return lhs;
  }

  ExprPtr parse_override() {
    ExprPtr lhs = parse_comp();
    while (eat_sym("<+")) lhs = Expr::make(Expr::Kind::Override, {lhs, parse_comp()});
    return lhs;
  }

  ExprPtr parse_comp() {
    ExprPtr lhs = parse_maplet();
    while (eat_sym(";")) lhs = Expr::make(Expr::Kind::Comp, {lhs, parse_maplet()});
    return lhs;
  }

  ExprPtr parse_maplet() {
    ExprPtr lhs = parse_cross();
    while (eat_sym("|->")) lhs = Expr::make(Expr::Kind::Maplet, {lhs, parse_cross()});
    return lhs;
  }

  ExprPtr parse_cross() {
    ExprPtr lhs = parse_postfix();
    while (eat_sym("**")) lhs = Expr::make(Expr::Kind::Cross, {lhs, parse_postfix()});
    return lhs;
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (true) {
      if (eat_sym("~")) {
        e = Expr::make(Expr::Kind::Inverse, {e});
      } else if (at_sym("[")) {
        next();
        ExprPtr arg = parse_expr();
        expect_sym("]");
        e = Expr::make(Expr::Kind::Image, {e, arg});
      } else if (at_sym("(") && (e->kind == Expr::Kind::Ident || e->kind == Expr::Kind::Apply)) {
        next();
        ExprPtr arg = parse_expr();
        expect_sym(")");
        e = Expr::make(Expr::Kind::Apply, {e, arg});
      } else {
        break;
      }
    }
    return e;
  }

  ExprPtr parse_primary() {
    SourceSpan span = peek().span;
    if (eat_sym("(")) {
      ExprPtr e = parse_expr();
      expect_sym(")");
      return e;
    }
    if (eat_sym("{")) {
      auto e = Expr::make(Expr::Kind::EnumSet);
      e->span = span;
      if (!at_sym("}")) {
        e->kids.push_back(parse_expr());
        while (eat_sym(",")) e->kids.push_back(parse_expr());
      }
      expect_sym("}");
      return e;
    }
    if (at_kw("dom") || at_kw("ran") || at_kw("POW")) {
      std::string fn = next().text;
      expect_sym("(");
      ExprPtr arg = parse_expr();
      expect_sym(")");
      auto e = Expr::make(fn == "dom"   ? Expr::Kind::Dom
                          : fn == "ran" ? Expr::Kind::Ran
                                        : Expr::Kind::Pow,
                          {arg});
      e->span = span;
      return e;
    }
    if (peek().kind == Tok::Ident) {
      auto e = Expr::ident(next().text);
      e->span = span;
      return e;
    }
    error(span, "expected expression, found '" + describe(peek()) + "'");
    throw ParseAbort{};
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::vector<Diagnostic>& diags_;
};

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

void print_expr(const Expr& e, std::string& out);

void print_child(const Expr& e, std::string& out) {
  bool atomic = e.kind == Expr::Kind::Ident || e.kind == Expr::Kind::Var ||
                e.kind == Expr::Kind::Carrier || e.kind == Expr::Kind::ConstRef ||
                e.kind == Expr::Kind::Bound || e.kind == Expr::Kind::EnumSet ||
                e.kind == Expr::Kind::Dom || e.kind == Expr::Kind::Ran ||
                e.kind == Expr::Kind::Pow || e.kind == Expr::Kind::Inverse ||
                e.kind == Expr::Kind::Image || e.kind == Expr::Kind::Apply;
  if (atomic) {
    print_expr(e, out);
  } else {
    out += "(";
    print_expr(e, out);
    out += ")";
  }
}

void print_expr(const Expr& e, std::string& out) {
  auto binop = [&](const char* op) {
    print_child(*e.kids[0], out);
    out += " ";
    out += op;
    out += " ";
    print_child(*e.kids[1], out);
  };
  switch (e.kind) {
    case Expr::Kind::Ident:
    case Expr::Kind::Var:
    case Expr::Kind::Carrier:
    case Expr::Kind::ConstRef:
    case Expr::Kind::Bound:
      out += e.name;
      break;
    case Expr::Kind::EnumSet:
      out += "{";
      for (size_t i = 0; i < e.kids.size(); ++i) {
        if (i) out += ", ";
        print_expr(*e.kids[i], out);
      }
      out += "}";
      break;
    case Expr::Kind::Maplet: binop("|->"); break;
    case Expr::Kind::Union: binop("\\/"); break;
    case Expr::Kind::Minus: binop("\\"); break;
    case Expr::Kind::Inter: binop("/\\"); break;
    case Expr::Kind::Cross: binop("**"); break;
    case Expr::Kind::DomSub: binop("<-|"); break;
    case Expr::Kind::DomRes: binop("<|"); break;
    case Expr::Kind::Override: binop("<+"); break;
    case Expr::Kind::Comp: binop(";"); break;
    case Expr::Kind::Dom:
      out += "dom(";
      print_expr(*e.kids[0], out);
      out += ")";
      break;
    case Expr::Kind::Ran:
      out += "ran(";
      print_expr(*e.kids[0], out);
      out += ")";
      break;
    case Expr::Kind::Pow:
      out += "POW(";
      print_expr(*e.kids[0], out);
      out += ")";
      break;
    case Expr::Kind::Inverse:
      print_child(*e.kids[0], out);
      out += "~";
      break;
    case Expr::Kind::Image:
      print_child(*e.kids[0], out);
      out += "[";
      print_expr(*e.kids[1], out);
      out += "]";
      break;
    case Expr::Kind::Apply:
      print_child(*e.kids[0], out);
      out += "(";
      print_expr(*e.kids[1], out);
      out += ")";
      break;
  }
}

const char* arrow_text(RelArrow a) {
  switch (a) {
    case RelArrow::TotalFn: return "-->";
    case RelArrow::PartialFn: return "+->";
    case RelArrow::Relation: return "<->";
  }
  return "<->";
}

void print_pred(const Pred& p, std::string& out);

void print_pred_child(const Pred& p, std::string& out) {
  bool atomic = p.kind == Pred::Kind::True || p.kind == Pred::Kind::False ||
                p.kind == Pred::Kind::In || p.kind == Pred::Kind::NotIn ||
                p.kind == Pred::Kind::Subset || p.kind == Pred::Kind::Eq ||
                p.kind == Pred::Kind::RelAssert || p.kind == Pred::Kind::Not;
  if (atomic) {
    print_pred(p, out);
  } else {
    out += "(";
    print_pred(p, out);
    out += ")";
  }
}

void print_pred(const Pred& p, std::string& out) {
  switch (p.kind) {
    case Pred::Kind::True: out += "true"; break;
    case Pred::Kind::False: out += "false"; break;
    case Pred::Kind::In:
      print_expr(*p.exprs[0], out);
      out += " : ";
      print_expr(*p.exprs[1], out);
      break;
    case Pred::Kind::NotIn:
      print_expr(*p.exprs[0], out);
      out += " /: ";
      print_expr(*p.exprs[1], out);
      break;
    case Pred::Kind::Subset:
      print_expr(*p.exprs[0], out);
      out += " <: ";
      print_expr(*p.exprs[1], out);
      break;
    case Pred::Kind::Eq:
      print_expr(*p.exprs[0], out);
      out += " = ";
      print_expr(*p.exprs[1], out);
      break;
    case Pred::Kind::And:
      print_pred_child(*p.preds[0], out);
      out += " & ";
      print_pred_child(*p.preds[1], out);
      break;
    case Pred::Kind::Or:
      print_pred_child(*p.preds[0], out);
      out += " or ";
      print_pred_child(*p.preds[1], out);
      break;
    case Pred::Kind::Implies:
      print_pred_child(*p.preds[0], out);
      out += " => ";
      print_pred_child(*p.preds[1], out);
      break;
    case Pred::Kind::Not:
      out += "not ";
      print_pred_child(*p.preds[0], out);
      break;
    case Pred::Kind::Forall:
    case Pred::Kind::Exists:
      out += p.kind == Pred::Kind::Forall ? "! " : "# ";
      for (size_t i = 0; i < p.binders.size(); ++i) {
        if (i) out += ", ";
        out += p.binders[i].name;
        out += " : ";
        print_expr(*p.binders[i].typing, out);
      }
      out += " . ";
      print_pred_child(*p.preds[0], out);
      break;
    case Pred::Kind::RelAssert:
      print_expr(*p.exprs[0], out);
      out += " : ";
      print_expr(*p.exprs[1], out);
      out += " ";
      out += arrow_text(p.rel.arrow);
      out += " ";
      print_expr(*p.exprs[2], out);
      if (p.rel.injective) out += " injective";
      break;
  }
}

const char* class_kind_text(ClassKind k) {
  switch (k) {
    case ClassKind::Primary: return "primary";
    case ClassKind::Secondary: return "secondary";
    case ClassKind::Attribute: return "attribute";
    case ClassKind::Historical: return "historical";
  }
  return "primary";
}

void print_event(const Event& ev, std::string& out) {
  out += "  event ";
  out += ev.name;
  switch (ev.kind) {
    case EventKind::Constructor: out += " constructor"; break;
    case EventKind::Destructor: out += " destructor"; break;
    case EventKind::Query: out += " query"; break;
    case EventKind::Normal: break;
  }
  if (ev.class_owner) {
    out += " of ";
    out += *ev.class_owner;
  }
  if (ev.extends) {
    out += " extends ";
    out += *ev.extends;
  }
  out += "\n";
  if (!ev.params.empty()) {
    out += "    any ";
    for (size_t i = 0; i < ev.params.size(); ++i) {
      if (i) out += ", ";
      out += ev.params[i].name;
      out += " : ";
      print_expr(*ev.params[i].typing, out);
    }
    out += "\n";
  }
  if (!ev.guards.empty()) {
    out += "    where\n";
    for (const auto& g : ev.guards) {
      out += "      ";
      out += g.label;
      out += " : ";
      print_pred(*g.pred, out);
      out += "\n";
    }
  }
  if (!ev.actions.empty()) {
    out += "    then\n";
    for (const auto& a : ev.actions) {
      out += "      ";
      out += a.label;
      out += " : ";
      out += a.target;
      out += " := ";
      print_expr(*a.value, out);
      out += "\n";
    }
  }
  out += "  end\n";
}

}  // namespace

std::string pretty_print(const Expr& e) {
  std::string out;
  print_expr(e, out);
  return out;
}

std::string pretty_print(const Pred& p) {
  std::string out;
  print_pred(p, out);
  return out;
}

std::string pretty_print(const RefinementChain& chain) {
  std::string out;
  for (const auto& ctx : chain.contexts) {
    out += "context ";
    out += ctx.name;
    if (ctx.extends) {
      out += " extends ";
      out += *ctx.extends;
    }
    out += "\n";
    if (!ctx.carrier_sets.empty()) {
      out += "  sets";
      for (const auto& s : ctx.carrier_sets) {
        out += " ";
        out += s;
      }
      out += "\n";
    }
    if (!ctx.constants.empty()) {
      out += "  constants";
      for (const auto& [name, value] : ctx.constants) {
        out += " ";
        out += name;
        out += " = ";
        print_expr(*value, out);
      }
      out += "\n";
    }
    if (!ctx.axioms.empty()) {
      out += "  axioms\n";
      for (const auto& ax : ctx.axioms) {
        out += "    ";
        out += ax.label;
        out += " : ";
        print_pred(*ax.pred, out);
        out += "\n";
      }
    }
    out += "end\n\n";
  }
  for (const auto& m : chain.machines) {
    out += "machine ";
    out += m.name;
    if (m.refines) {
      out += " refines ";
      out += *m.refines;
    }
    if (!m.sees.empty()) {
      out += " sees ";
      for (size_t i = 0; i < m.sees.size(); ++i) {
        if (i) out += ", ";
        out += m.sees[i];
      }
    }
    out += "\n";
    if (m.layer != Layer::Other) {
      out += "  layer ";
      std::string ln = layer_name(m.layer);
      // The DSL spells the attribute-classes label with an underscore.
      if (m.layer == Layer::AttributeClasses) ln = "attribute_classes";
      out += ln;
      out += "\n";
    }
    if (!m.drops.empty()) {
      out += "  drops ";
      for (size_t i = 0; i < m.drops.size(); ++i) {
        if (i) out += ", ";
        out += m.drops[i];
      }
      out += "\n";
    }
    for (const auto& c : m.classes) {
      out += "  class ";
      out += c.class_name;
      out += " kind ";
      out += class_kind_text(c.kind);
      out += " : ";
      out += c.carrier;
      if (c.supertype) {
        out += " supertype ";
        out += *c.supertype;
      }
      out += "\n";
    }
    for (const auto& v : m.variables) {
      if (v.role == VarRole::ClassInstanceSet) continue;  // implied by class decl
      out += v.role == VarRole::Attribute ? "  attribute " : "  association ";
      out += v.name;
      out += " : ";
      out += v.source;
      out += " ";
      out += arrow_text(v.rel.arrow);
      if (v.rel.injective) out += " injective";
      out += " ";
      out += v.target;
      out += "\n";
    }
    for (const auto& inv : m.invariants) {
      out += "  invariant ";
      out += inv.label;
      out += " : ";
      print_pred(*inv.pred, out);
      out += "\n";
    }
    for (const auto& ev : m.events) print_event(ev, out);
    out += "end\n\n";
  }
  return out;
}

ParseResult parse_chain(const std::string& text, const std::string& filename) {
  ParseResult res;
  Lexer lex(text, filename);
  auto toks = lex.run(res.diagnostics);
  if (toks.size() == 1) {
    res.diagnostics.push_back(
        {{filename, 1, 1, 0}, Severity::Error, "expected 'context' or 'machine'"});
    return res;
  }
  Parser parser(std::move(toks), res.diagnostics);
  RefinementChain chain = parser.parse_file({});
  if (!has_errors(res.diagnostics)) res.chain = std::move(chain);
  return res;
}

ParseResult parse_chain_files(const std::vector<std::string>& paths) {
  ParseResult res;
  RefinementChain chain;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      res.diagnostics.push_back({{path, 1, 1, 0}, Severity::Error, "cannot open file"});
      continue;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    Lexer lex(text, path);
    auto toks = lex.run(res.diagnostics);
    Parser parser(std::move(toks), res.diagnostics);
    chain = parser.parse_file(std::move(chain));
  }
  if (paths.empty())
    res.diagnostics.push_back({{"<none>", 1, 1, 0}, Severity::Error, "no input files"});
  if (!has_errors(res.diagnostics)) res.chain = std::move(chain);
  return res;
}

ExprPtr parse_expression(const std::string& text, std::vector<Diagnostic>& diags) {
  Lexer lex(text, "<expr>");
  auto toks = lex.run(diags);
  Parser parser(std::move(toks), diags);
  try {
    auto e = parser.parse_expr_entry();
    if (!parser.at_end())
      diags.push_back({{"<expr>", 1, 1, 0}, Severity::Error, "trailing input after expression"});
    return has_errors(diags) ? nullptr : e;
  } catch (const ParseAbort&) {
    return nullptr;
  }
}

PredPtr parse_predicate(const std::string& text, std::vector<Diagnostic>& diags) {
  Lexer lex(text, "<pred>");
  auto toks = lex.run(diags);
  Parser parser(std::move(toks), diags);
  try {
    auto p = parser.parse_pred_entry();
    if (!parser.at_end())
      diags.push_back({{"<pred>", 1, 1, 0}, Severity::Error, "trailing input after predicate"});
    return has_errors(diags) ? nullptr : p;
  } catch (const ParseAbort&) {
    return nullptr;
  }
}

std::string format_diagnostic(const Diagnostic& d) {
  std::ostringstream ss;
  ss << d.span.file << ":" << d.span.line << ":" << d.span.column << ": "
     << (d.severity == Severity::Error ? "error: " : "warning: ") << d.message;
  return ss.str();
}

}  // namespace ubdb
