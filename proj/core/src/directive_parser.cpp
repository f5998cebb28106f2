#include <algorithm>
#include <map>
#include <set>

#include "directive_lexer.hpp"
#include "smlrt/directive.hpp"
#include "smlrt/error.hpp"

namespace smlrt {

using detail::Lexer;
using detail::Tok;
using detail::Token;

std::int64_t SymRange::count() const noexcept {
  const std::int64_t span = stop.offset - start.offset;
  return span <= 0 ? 0 : (span + step - 1) / step;
}

std::int64_t ConcreteSlice::count() const noexcept {
  const std::int64_t span = stop - start;
  return span <= 0 ? 0 : (span + step - 1) / step;
}

std::vector<std::string> FunctorDecl::symbols() const {
  std::vector<std::string> out;
  for (const auto& dim : lhs.dims) {
    if (const auto* p = std::get_if<SymPoint>(&dim); p && !p->at.is_constant()) {
      out.push_back(p->at.symbol);
    }
  }
  return out;
}

std::vector<std::int64_t> FunctorDecl::feature_shape() const {
  std::vector<std::int64_t> out;
  for (const auto& dim : lhs.dims) {
    if (const auto* r = std::get_if<SymRange>(&dim)) out.push_back(r->count());
  }
  return out;
}

std::int64_t FunctorDecl::feature_size() const {
  std::int64_t n = 1;
  for (auto extent : feature_shape()) n *= extent;
  return n;
}

std::string_view to_string(Direction direction) noexcept {
  return direction == Direction::To ? "to" : "from";
}

std::string_view to_string(MlMode mode) noexcept {
  switch (mode) {
    case MlMode::Infer: return "infer";
    case MlMode::Collect: return "collect";
    case MlMode::Predicated: return "predicated";
  }
  return "infer";
}

namespace {

// Linear combination of symbols plus a constant, used while folding s-exprs.
struct Affine {
  std::map<std::string, std::int64_t> coef;
  std::int64_t constant = 0;

  bool is_constant() const {
    return std::all_of(coef.begin(), coef.end(), [](const auto& kv) { return kv.second == 0; });
  }
};

Affine add(Affine a, const Affine& b, std::int64_t sign) {
  for (const auto& [name, c] : b.coef) a.coef[name] += sign * c;
  a.constant += sign * b.constant;
  return a;
}

class Parser {
 public:
  Parser(std::string_view text, const Environment* env) : lex_(text), env_(env) {}

  Directive directive() {
    skip_prefix();
    const Token& head = lex_.peek();
    if (head.kind != Tok::Ident) fail(head, "expected directive keyword");
    if (head.text == "tensor") {
      lex_.next();
      const Token& kw = lex_.peek();
      if (is_ident(kw, "functor")) return functor_wrapped();
      if (is_ident(kw, "map")) return map_wrapped();
      fail(kw, "expected 'functor' or 'map' after 'tensor'");
    }
    if (lex_.peek(1).kind == Tok::Colon) return functor_body_then_end();
    if (head.text == "functor" && lex_.peek(1).kind == Tok::LParen) return functor_wrapped();
    if (head.text == "map" && lex_.peek(1).kind == Tok::LParen) return map_wrapped();
    if (head.text == "ml" && lex_.peek(1).kind == Tok::LParen) return ml_clause();
    fail(head, "expected 'tensor functor', 'tensor map', 'ml' or a bare functor declaration");
  }

  FunctorDecl functor_only() {
    skip_prefix();
    if (is_ident(lex_.peek(), "tensor")) {
      lex_.next();
      if (!is_ident(lex_.peek(), "functor")) fail(lex_.peek(), "expected 'functor'");
      return functor_wrapped();
    }
    if (is_ident(lex_.peek(), "functor") && lex_.peek(1).kind == Tok::LParen) {
      return functor_wrapped();
    }
    return functor_body_then_end();
  }

  MapDirective map_only() {
    skip_prefix();
    if (is_ident(lex_.peek(), "tensor")) lex_.next();
    if (!is_ident(lex_.peek(), "map")) fail(lex_.peek(), "expected 'map'");
    return map_wrapped();
  }

  MlDirective ml_only() {
    skip_prefix();
    if (!is_ident(lex_.peek(), "ml")) fail(lex_.peek(), "expected 'ml'");
    return ml_clause();
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& message) {
    std::string found = at.kind == Tok::End ? "end of directive"
                                             : "'" + std::string(at.text) + "'";
    throw SyntaxError(at.offset, message + ", found " + found);
  }

  static bool is_ident(const Token& t, std::string_view word) {
    return t.kind == Tok::Ident && t.text == word;
  }

  Token expect(Tok kind, std::string_view context) {
    const Token& t = lex_.peek();
    if (t.kind != kind) {
      fail(t, "expected " + std::string(detail::describe(kind)) + " " + std::string(context));
    }
    return lex_.next();
  }

  Token expect_ident(std::string_view context) { return expect(Tok::Ident, context); }

  void expect_end() {
    const Token& t = lex_.peek();
    if (t.kind != Tok::End) fail(t, "unexpected trailing input");
  }

  void skip_prefix() {
    if (lex_.peek().kind != Tok::Hash) return;
    lex_.next();
    if (!is_ident(lex_.peek(), "pragma")) fail(lex_.peek(), "expected 'pragma' after '#'");
    lex_.next();
    if (!is_ident(lex_.peek(), "approx")) fail(lex_.peek(), "expected 'approx' after '#pragma'");
    lex_.next();
  }

  // ---- tensor functor ------------------------------------------------------

  FunctorDecl functor_wrapped() {
    lex_.next();  // functor
    expect(Tok::LParen, "after 'functor'");
    FunctorDecl decl = functor_body();
    // A directive that ends right where the wrapper's ')' belongs is accepted:
    // published listings sometimes drop that final parenthesis.
    if (lex_.peek().kind == Tok::RParen) lex_.next();
    expect_end();
    return decl;
  }

  FunctorDecl functor_body_then_end() {
    FunctorDecl decl = functor_body();
    expect_end();
    return decl;
  }

  FunctorDecl functor_body() {
    FunctorDecl decl;
    decl.name = std::string(expect_ident("naming the functor").text);
    expect(Tok::Colon, "after functor name");
    const std::size_t lhs_offset = lex_.peek().offset;
    decl.lhs = ss_specifier();
    expect(Tok::Equals, "between functor LHS and RHS");

    std::size_t groups = 0;
    while (lex_.peek().kind == Tok::LParen) {
      lex_.next();
      ++groups;
    }
    if (groups == 0) fail(lex_.peek(), "expected '(' opening the functor RHS");
    decl.rhs.push_back(ss_specifier());
    while (lex_.peek().kind == Tok::Comma) {
      lex_.next();
      decl.rhs.push_back(ss_specifier());
    }
    for (std::size_t g = 0; g < groups; ++g) expect(Tok::RParen, "closing the functor RHS");
    validate_functor(decl, lhs_offset);
    return decl;
  }

  SymbolicSlice ss_specifier() {
    SymbolicSlice slice;
    expect(Tok::LBracket, "opening a slice specifier");
    slice.dims.push_back(s_slice());
    while (lex_.peek().kind == Tok::Comma) {
      lex_.next();
      slice.dims.push_back(s_slice());
    }
    expect(Tok::RBracket, "closing a slice specifier");
    return slice;
  }

  SymDim s_slice() {
    const Token& first = lex_.peek();
    const std::size_t offset = first.offset;
    SymExpr start = s_expr();
    if (lex_.peek().kind != Tok::Colon) return SymPoint{start};
    lex_.next();
    if (lex_.peek().kind == Tok::Colon || lex_.peek().kind == Tok::Comma ||
        lex_.peek().kind == Tok::RBracket) {
      throw Error(ErrorCode::UnsupportedConstruct,
                  "open-ended symbolic slice at byte " + std::to_string(offset));
    }
    SymRange range{start, s_expr(), 1};
    if (lex_.peek().kind == Tok::Colon) {
      lex_.next();
      if (lex_.peek().kind != Tok::Comma && lex_.peek().kind != Tok::RBracket) {
        const std::size_t step_offset = lex_.peek().offset;
        SymExpr step = s_expr();
        if (!step.is_constant() || step.offset < 1) {
          throw Error(ErrorCode::SemanticError, "slice step must be a positive integer (byte " +
                                                    std::to_string(step_offset) + ")");
        }
        range.step = step.offset;
      }
    }
    check_range(range, offset);
    return range;
  }

  static void check_range(const SymRange& r, std::size_t offset) {
    const std::string where = " (byte " + std::to_string(offset) + ")";
    if (r.start.is_constant() != r.stop.is_constant()) {
      throw Error(ErrorCode::SemanticError,
                  "slice mixes a symbolic and a constant bound" + where);
    }
    if (!r.start.is_constant() && r.start.symbol != r.stop.symbol) {
      throw Error(ErrorCode::SemanticError, "slice bounds reference different symbols '" +
                                                r.start.symbol + "' and '" + r.stop.symbol +
                                                "'" + where);
    }
    if (r.start.offset >= r.stop.offset) {
      throw Error(ErrorCode::SemanticError, "slice start must be below its stop" + where);
    }
  }

  SymExpr s_expr() {
    const std::size_t offset = lex_.peek().offset;
    Affine a = affine_sum();
    std::string symbol;
    for (const auto& [name, c] : a.coef) {
      if (c == 0) continue;
      if (c != 1 || !symbol.empty()) {
        throw Error(ErrorCode::SemanticError,
                    "symbolic expression must have the form 'symbol +/- integer' (byte " +
                        std::to_string(offset) + ")");
      }
      symbol = name;
    }
    return SymExpr{symbol, a.constant};
  }

  Affine affine_sum() {
    Affine acc = affine_product();
    while (lex_.peek().kind == Tok::Plus || lex_.peek().kind == Tok::Minus) {
      const std::int64_t sign = lex_.next().kind == Tok::Plus ? 1 : -1;
      acc = add(std::move(acc), affine_product(), sign);
    }
    return acc;
  }

  Affine affine_product() {
    const std::size_t offset = lex_.peek().offset;
    Affine acc = affine_factor();
    while (lex_.peek().kind == Tok::Star) {
      lex_.next();
      Affine rhs = affine_factor();
      if (!acc.is_constant() && !rhs.is_constant()) {
        throw Error(ErrorCode::SemanticError,
                    "product of symbols is not an affine offset (byte " + std::to_string(offset) +
                        ")");
      }
      const Affine& scale = acc.is_constant() ? acc : rhs;
      Affine scaled = acc.is_constant() ? rhs : acc;
      for (auto& [name, c] : scaled.coef) c *= scale.constant;
      scaled.constant *= scale.constant;
      acc = std::move(scaled);
    }
    return acc;
  }

  Affine affine_factor() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::Int: {
        Affine a;
        a.constant = lex_.next().int_value;
        return a;
      }
      case Tok::Ident: {
        Affine a;
        a.coef[std::string(lex_.next().text)] = 1;
        return a;
      }
      case Tok::Minus: {
        lex_.next();
        return add(Affine{}, affine_factor(), -1);
      }
      case Tok::LParen: {
        lex_.next();
        Affine a = affine_sum();
        expect(Tok::RParen, "closing a parenthesized expression");
        return a;
      }
      default:
        fail(t, "expected an integer or symbol");
    }
  }

  static void validate_functor(const FunctorDecl& decl, std::size_t offset) {
    const std::string where = " in functor '" + decl.name + "'";
    std::set<std::string> lhs_symbols;
    std::size_t symbolic = 0;
    std::size_t features = 0;
    for (const auto& dim : decl.lhs.dims) {
      if (const auto* p = std::get_if<SymPoint>(&dim)) {
        if (p->at.is_constant() || p->at.offset != 0) {
          throw Error(ErrorCode::SemanticError,
                      "LHS point dimensions must be bare symbols" + where);
        }
        if (!lhs_symbols.insert(p->at.symbol).second) {
          throw Error(ErrorCode::SemanticError,
                      "symbol '" + p->at.symbol + "' repeated on the LHS" + where);
        }
        ++symbolic;
      } else {
        const auto& r = std::get<SymRange>(dim);
        if (!r.start.is_constant()) {
          throw Error(ErrorCode::SemanticError,
                      "LHS feature ranges must have constant bounds" + where);
        }
        ++features;
      }
    }
    if (symbolic == 0) {
      throw Error(ErrorCode::SemanticError, "LHS declares no symbolic dimension" + where);
    }
    if (features == 0) {
      throw Error(ErrorCode::SemanticError, "LHS declares no feature dimension" + where);
    }
    const std::size_t rank = decl.rhs.front().dims.size();
    for (const auto& slice : decl.rhs) {
      if (slice.dims.size() != rank) {
        throw Error(ErrorCode::SemanticError, "RHS slices differ in rank" + where);
      }
      for (const auto& dim : slice.dims) {
        const std::string* sym = nullptr;
        if (const auto* p = std::get_if<SymPoint>(&dim)) {
          if (!p->at.is_constant()) sym = &p->at.symbol;
        } else if (const auto& r = std::get<SymRange>(dim); !r.start.is_constant()) {
          sym = &r.start.symbol;
        }
        if (sym && !lhs_symbols.contains(*sym)) {
          throw Error(ErrorCode::SemanticError, "symbol '" + *sym +
                                                    "' is not declared on the LHS" + where +
                                                    " (byte " + std::to_string(offset) + ")");
        }
      }
    }
  }

  // ---- tensor map ----------------------------------------------------------

  MapDirective map_wrapped() {
    lex_.next();  // map
    expect(Tok::LParen, "after 'map'");
    MapDirective map;
    const Token dir = expect_ident("naming the map direction");
    if (dir.text == "to") {
      map.direction = Direction::To;
    } else if (dir.text == "from") {
      map.direction = Direction::From;
    } else {
      fail(dir, "expected direction 'to' or 'from'");
    }
    expect(Tok::Colon, "after the map direction");
    map.functor = std::string(expect_ident("naming the applied functor").text);
    expect(Tok::LParen, "opening the map target list");
    map.targets.push_back(map_target());
    while (lex_.peek().kind == Tok::Comma) {
      lex_.next();
      map.targets.push_back(map_target());
    }
    expect(Tok::RParen, "closing the map target list");
    expect(Tok::RParen, "closing 'map('");
    expect_end();
    return map;
  }

  MapTarget map_target() {
    MapTarget target;
    target.array = std::string(expect_ident("naming the mapped array").text);
    expect(Tok::LBracket, "opening the concrete slice list");
    target.slices.push_back(c_slice());
    while (lex_.peek().kind == Tok::Comma) {
      lex_.next();
      target.slices.push_back(c_slice());
    }
    expect(Tok::RBracket, "closing the concrete slice list");
    return target;
  }

  ConcreteSlice c_slice() {
    const Token& first = lex_.peek();
    if (first.kind == Tok::Ident && lex_.peek(1).kind == Tok::LBracket) {
      throw Error(ErrorCode::UnsupportedConstruct,
                  "nested map targets are not supported (byte " + std::to_string(first.offset) +
                      ")");
    }
    const std::size_t offset = first.offset;
    ConcreteSlice slice;
    slice.start = c_expr();
    if (lex_.peek().kind != Tok::Colon) {
      slice.stop = slice.start + 1;
      return slice;
    }
    lex_.next();
    if (lex_.peek().kind == Tok::Colon || lex_.peek().kind == Tok::Comma ||
        lex_.peek().kind == Tok::RBracket) {
      throw Error(ErrorCode::UnsupportedConstruct,
                  "open-ended concrete slice at byte " + std::to_string(offset));
    }
    slice.stop = c_expr();
    if (lex_.peek().kind == Tok::Colon) {
      lex_.next();
      if (lex_.peek().kind != Tok::Comma && lex_.peek().kind != Tok::RBracket) {
        const std::size_t step_offset = lex_.peek().offset;
        slice.step = c_expr();
        if (slice.step < 1) {
          throw Error(ErrorCode::SemanticError, "slice step must be a positive integer (byte " +
                                                    std::to_string(step_offset) + ")");
        }
      }
    }
    if (slice.start >= slice.stop) {
      throw Error(ErrorCode::EmptyRange, "slice [" + std::to_string(slice.start) + ":" +
                                             std::to_string(slice.stop) +
                                             "] is empty (byte " + std::to_string(offset) + ")");
    }
    return slice;
  }

  std::int64_t c_expr() {
    std::int64_t acc = c_term();
    while (lex_.peek().kind == Tok::Plus || lex_.peek().kind == Tok::Minus) {
      const bool plus = lex_.next().kind == Tok::Plus;
      const std::int64_t rhs = c_term();
      acc = plus ? acc + rhs : acc - rhs;
    }
    return acc;
  }

  std::int64_t c_term() {
    std::int64_t acc = c_factor();
    while (lex_.peek().kind == Tok::Star) {
      lex_.next();
      acc *= c_factor();
    }
    return acc;
  }

  std::int64_t c_factor() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::Int:
        return lex_.next().int_value;
      case Tok::Ident: {
        const Token id = lex_.next();
        if (env_) {
          if (auto it = env_->find(id.text); it != env_->end()) return it->second;
        }
        throw Error(ErrorCode::UnboundVariable, "identifier '" + std::string(id.text) +
                                                    "' has no value in the environment (byte " +
                                                    std::to_string(id.offset) + ")");
      }
      case Tok::Minus:
        lex_.next();
        return -c_factor();
      case Tok::LParen: {
        lex_.next();
        const std::int64_t v = c_expr();
        expect(Tok::RParen, "closing a parenthesized expression");
        return v;
      }
      default:
        fail(t, "expected an integer expression");
    }
  }

  // ---- approx ml -----------------------------------------------------------

  MlDirective ml_clause() {
    lex_.next();  // ml
    expect(Tok::LParen, "after 'ml'");
    MlDirective ml;
    const Token mode = expect_ident("naming the ml mode");
    if (mode.text == "infer") {
      ml.mode = MlMode::Infer;
    } else if (mode.text == "collect") {
      ml.mode = MlMode::Collect;
    } else if (mode.text == "predicated") {
      ml.mode = MlMode::Predicated;
    } else {
      fail(mode, "expected ml mode 'infer', 'collect' or 'predicated'");
    }
    if (lex_.peek().kind == Tok::Colon) {
      lex_.next();
      std::size_t at = 0;
      ml.predicate = lex_.capture_balanced(at);
      if (ml.mode != MlMode::Predicated) {
        throw Error(ErrorCode::SemanticError, "only 'predicated' mode takes a condition (byte " +
                                                  std::to_string(at) + ")");
      }
    }
    expect(Tok::RParen, "closing 'ml('");

    std::set<std::string> seen;
    while (lex_.peek().kind != Tok::End) {
      const Token clause = expect_ident("naming an ml clause");
      std::string name(clause.text);
      if (name == "database") name = "db";
      if (!seen.insert(name).second) {
        throw Error(ErrorCode::SemanticError, "clause '" + name + "' given twice (byte " +
                                                  std::to_string(clause.offset) + ")");
      }
      expect(Tok::LParen, "after clause name");
      if (name == "in") {
        ml.in_refs = ref_list();
      } else if (name == "out") {
        ml.out_refs = ref_list();
      } else if (name == "inout") {
        ml.inout_refs = ref_list();
      } else if (name == "model") {
        ml.model_path = expect(Tok::String, "as the model path").string_value;
      } else if (name == "db") {
        ml.db_path = expect(Tok::String, "as the database path").string_value;
      } else if (name == "if") {
        std::size_t at = 0;
        ml.if_cond = lex_.capture_balanced(at);
      } else {
        fail(clause, "unknown ml clause");
      }
      expect(Tok::RParen, "closing the clause");
    }
    validate_ml(ml);
    return ml;
  }

  std::vector<std::string> ref_list() {
    std::vector<std::string> refs;
    do {
      if (!refs.empty()) lex_.next();  // ,
      const Token id = expect_ident("naming a mapped array");
      if (lex_.peek().kind == Tok::LParen) {
        throw Error(ErrorCode::UnsupportedConstruct,
                    "functor applications inside ml clauses are not supported; declare a "
                    "tensor map instead (byte " +
                        std::to_string(id.offset) + ")");
      }
      refs.emplace_back(id.text);
    } while (lex_.peek().kind == Tok::Comma);
    return refs;
  }

  static void validate_ml(const MlDirective& ml) {
    if ((ml.mode == MlMode::Infer || ml.mode == MlMode::Predicated) && !ml.model_path) {
      throw Error(ErrorCode::MissingClause,
                  std::string("'") + std::string(to_string(ml.mode)) + "' requires model(...)");
    }
    if ((ml.mode == MlMode::Collect || ml.mode == MlMode::Predicated) && !ml.db_path) {
      throw Error(ErrorCode::MissingClause,
                  std::string("'") + std::string(to_string(ml.mode)) + "' requires db(...)");
    }
    if (ml.in_refs.empty() && ml.inout_refs.empty()) {
      throw Error(ErrorCode::MissingClause, "ml directive needs in(...) or inout(...)");
    }
    if (ml.out_refs.empty() && ml.inout_refs.empty()) {
      throw Error(ErrorCode::MissingClause, "ml directive needs out(...) or inout(...)");
    }
    std::set<std::string> all;
    for (const auto* list : {&ml.in_refs, &ml.out_refs, &ml.inout_refs}) {
      for (const auto& ref : *list) {
        if (!all.insert(ref).second) {
          throw Error(ErrorCode::SemanticError,
                      "array '" + ref + "' listed more than once in the ml directive");
        }
      }
    }
  }

  Lexer lex_;
  const Environment* env_;
};

}  // namespace

FunctorDecl parse_functor_decl(std::string_view text) { return Parser(text, nullptr).functor_only(); }

MapDirective parse_tensor_map(std::string_view text, const Environment& env) {
  return Parser(text, &env).map_only();
}

MlDirective parse_ml_clause(std::string_view text) { return Parser(text, nullptr).ml_only(); }

Directive parse_directive(std::string_view text, const Environment& env) {
  return Parser(text, &env).directive();
}

}  // namespace smlrt
