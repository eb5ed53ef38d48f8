#include <fstream>
#include <sstream>

#include "kmelia/parser.hpp"
#include "lexer.hpp"

namespace kmelia {

using detail::Token;
using detail::TokenStream;

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : ts_(detail::tokenize(text)) {}

  std::vector<Component> parse_file() {
    std::vector<Component> out;
    std::optional<std::size_t> implicit;
    if (ts_.at_end()) ts_.fail("COMPONENT or SERVICE");
    while (!ts_.at_end()) {
      if (ts_.is_keyword("component")) {
        out.push_back(parse_component());
      } else if (ts_.is_keyword("service")) {
        if (!implicit) {
          implicit = out.size();
          Component main;
          main.name = std::string(kImplicitComponent);
          out.push_back(std::move(main));
        }
        Component& main = out[*implicit];
        ServiceSpec s = parse_service(main);
        main.provided.insert(s.name());
        main.services.emplace(s.name(), std::move(s));
      } else {
        ts_.fail("COMPONENT or SERVICE");
      }
    }
    return out;
  }

  Expr parse_standalone_expr() {
    Expr e = detail::parse_expr(ts_);
    if (!ts_.at_end()) ts_.fail("end of expression");
    return e;
  }

 private:
  std::vector<std::string> parse_id_list(std::string_view what) {
    std::vector<std::string> ids{ts_.expect_identifier(what)};
    while (ts_.accept_symbol(",")) ids.push_back(ts_.expect_identifier(what));
    return ids;
  }

  Type parse_type() {
    const Token& t = ts_.peek();
    if (t.kind == Token::Kind::Ident) {
      if (auto type = type_from_name(t.text)) {
        ts_.next();
        return *type;
      }
    }
    ts_.fail("type (int or bool)");
  }

  Component parse_component() {
    ts_.expect_keyword("component");
    Component c;
    c.name = ts_.expect_identifier("component name");
    if (ts_.accept_keyword("provides")) {
      for (auto& n : parse_id_list("service name")) c.provided.insert(n);
    }
    if (ts_.accept_keyword("requires")) {
      for (auto& n : parse_id_list("service name")) c.required.insert(n);
    }
    while (ts_.is_keyword("service")) {
      ServiceSpec s = parse_service(c);
      std::string name = s.name();
      s.kind = c.provided.count(name) || !c.required.count(name)
                   ? ServiceKind::Provided
                   : ServiceKind::Required;
      c.services.emplace(name, std::move(s));
    }
    ts_.expect_keyword("end");
    return c;
  }

  ServiceSpec parse_service(const Component& owner) {
    ts_.expect_keyword("service");
    ServiceSpec s;
    const Token name_tok = ts_.peek();
    s.signature.name = ts_.expect_identifier("service name");
    if (owner.services.count(s.signature.name)) {
      throw ParseError(name_tok.line, name_tok.column, "unique service name",
                       "'" + name_tok.text + "'");
    }
    if (ts_.accept_symbol("(")) {
      if (!ts_.is_symbol(")")) {
        do {
          Param p;
          p.name = ts_.expect_identifier("parameter name");
          ts_.expect_symbol(":");
          p.type = parse_type();
          s.signature.params.push_back(std::move(p));
        } while (ts_.accept_symbol(","));
      }
      ts_.expect_symbol(")");
    }
    if (ts_.accept_symbol(":")) s.signature.result = parse_type();

    if (ts_.accept_keyword("interface")) parse_dependency(s.dependency);
    if (ts_.accept_keyword("properties")) s.properties = parse_id_list("property name");
    if (ts_.accept_keyword("pre")) s.precondition = detail::parse_expr(ts_);
    if (ts_.accept_keyword("post")) s.postcondition = detail::parse_expr(ts_);
    if (ts_.accept_keyword("variables")) {
      do {
        VarDecl v;
        v.name = ts_.expect_identifier("variable name");
        ts_.expect_symbol(":");
        v.type = parse_type();
        if (ts_.accept_symbol(":=")) v.init = detail::parse_expr(ts_);
        s.locals.push_back(std::move(v));
      } while (ts_.accept_symbol(";") || ts_.accept_symbol(","));
    }
    if (ts_.accept_keyword("behaviour") || ts_.accept_keyword("behavior")) {
      s.behavior = parse_behavior();
    }
    ts_.expect_keyword("end");
    return s;
  }

  void parse_dependency(Dependency& d) {
    for (;;) {
      std::set<std::string>* target = nullptr;
      if (ts_.is_symbol(":", 1)) {
        if (ts_.is_keyword("subs")) target = &d.sub;
        if (ts_.is_keyword("cals")) target = &d.cal;
        if (ts_.is_keyword("reqs")) target = &d.req;
        if (ts_.is_keyword("ints")) target = &d.intern;
      }
      if (!target) return;
      ts_.next();
      ts_.expect_symbol(":");
      ts_.expect_symbol("{");
      if (!ts_.is_symbol("}")) {
        for (auto& n : parse_id_list("service name")) target->insert(n);
      }
      ts_.expect_symbol("}");
    }
  }

  bool marker_line(std::string_view kw) const {
    return ts_.is_keyword(kw) && !ts_.is_symbol("---", 1);
  }

  BehaviorELTS parse_behavior() {
    BehaviorELTS b;
    bool has_init = false;
    bool any_line = false;
    for (;;) {
      if (marker_line("end")) break;
      any_line = true;
      if (marker_line("init")) {
        if (has_init) ts_.fail("a single INIT");
        ts_.next();
        b.initial = ts_.expect_identifier("state name");
        b.states.insert(b.initial);
        has_init = true;
      } else if (marker_line("final")) {
        ts_.next();
        for (auto& s : parse_id_list("state name")) {
          b.states.insert(s);
          b.finals.insert(s);
        }
      } else if (marker_line("states")) {
        ts_.next();
        for (auto& s : parse_id_list("state name")) b.states.insert(s);
      } else if (marker_line("annotate")) {
        ts_.next();
        std::string state = ts_.expect_identifier("state name");
        ts_.expect_symbol(":");
        b.states.insert(state);
        for (auto& p : parse_id_list("sub-service name")) b.annotations[state].insert(p);
      } else {
        Transition t;
        t.source = ts_.expect_identifier("state name or END");
        ts_.expect_symbol("---");
        t.label = parse_label();
        ts_.expect_symbol("--->");
        t.target = ts_.expect_identifier("state name");
        b.states.insert(t.source);
        b.states.insert(t.target);
        b.transitions.push_back(std::move(t));
      }
    }
    if (!any_line) return BehaviorELTS::single_state();
    if (!has_init) ts_.fail("INIT");
    return b;
  }

  Label parse_label() {
    Label l;
    for (auto [kw, kind] : {std::pair{"enter", ScopeMarker::Kind::Enter},
                            std::pair{"exit", ScopeMarker::Kind::Exit}}) {
      if (ts_.is_keyword(kw) && ts_.peek(1).kind == Token::Kind::Ident &&
          ts_.is_symbol("--->", 2)) {
        ts_.next();
        l.marker = ScopeMarker{kind, ts_.next().text};
        return l;
      }
    }
    if (ts_.accept_symbol("[")) {
      l.guard = detail::parse_expr(ts_);
      ts_.expect_symbol("]");
    }
    if (ts_.is_symbol("--->")) return l;
    do {
      l.actions.push_back(parse_action());
    } while (ts_.accept_symbol(";"));
    return l;
  }

  Action parse_action() {
    if (ts_.peek().kind == Token::Kind::Ident && ts_.is_symbol(":=", 1) &&
        !detail::is_reserved(ts_.peek().text)) {
      Assignment a;
      a.target = ts_.next().text;
      ts_.next();
      a.value = detail::parse_expr(ts_);
      return a;
    }
    Communication c;
    if (ts_.accept_keyword("caller")) {
      c.channel = ChannelRef::caller();
    } else if (ts_.accept_keyword("self")) {
      c.channel = ChannelRef::self();
    } else {
      c.channel = ChannelRef::named(ts_.expect_identifier("action"));
    }
    if (ts_.accept_symbol("!!")) {
      c.direction = Direction::Call;
    } else if (ts_.accept_symbol("??")) {
      c.direction = Direction::Await;
    } else if (ts_.accept_symbol("!")) {
      c.direction = Direction::Send;
    } else if (ts_.accept_symbol("?")) {
      c.direction = Direction::Receive;
    } else {
      ts_.fail("':=' or a communication (! ? !! or ?""?)");
    }
    c.message = ts_.expect_identifier("message name");
    if (ts_.accept_symbol("(")) {
      if (!ts_.is_symbol(")")) {
        if (is_output(c.direction)) {
          do {
            c.args.push_back(detail::parse_expr(ts_));
          } while (ts_.accept_symbol(","));
        } else {
          c.binders = parse_id_list("binder variable");
        }
      }
      ts_.expect_symbol(")");
    }
    return c;
  }

  TokenStream ts_;
};

}  // namespace

std::vector<Component> parse_component_file(std::string_view text) {
  return Parser(text).parse_file();
}

Expr parse_expression(std::string_view text) {
  return Parser(text).parse_standalone_expr();
}

SourceFile load_source_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  SourceFile f;
  f.path = path.string();
  f.text = ss.str();
  f.components = parse_component_file(f.text);
  return f;
}

}  // namespace kmelia
