#pragma once

// Directive language: tensor functor declarations, tensor maps and the
// `approx ml` region clause.
//
//   #pragma approx tensor functor(ifnctr: [i, j, 0:5] = ([i-1, j], [i+1, j], [i, j-1:j+2]))
//   #pragma approx tensor map(to: ifnctr(t[1:N-1, 1:M-1]))
//   #pragma approx ml(predicated:true) in(t) out(tnew) db("data") model("model")
//
// The `#pragma approx` prefix and the `tensor` keyword are optional. Symbolic
// expressions are restricted to `int`, `sym` and `sym +/- int`.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace smlrt {

/// Integer environment used to resolve identifiers in concrete slice bounds.
using Environment = std::map<std::string, std::int64_t, std::less<>>;

/// `symbol + offset`, or a plain integer constant when `symbol` is empty.
struct SymExpr {
  std::string symbol;
  std::int64_t offset = 0;

  static SymExpr constant(std::int64_t value) { return {{}, value}; }
  static SymExpr sym(std::string name, std::int64_t offset = 0) {
    return {std::move(name), offset};
  }

  bool is_constant() const noexcept { return symbol.empty(); }
  friend bool operator==(const SymExpr&, const SymExpr&) = default;
};

struct SymPoint {
  SymExpr at;
  friend bool operator==(const SymPoint&, const SymPoint&) = default;
};

/// Half-open `start:stop:step`; bounds are both constant or share one symbol.
struct SymRange {
  SymExpr start;
  SymExpr stop;
  std::int64_t step = 1;

  /// Elements accessed per sweep point: ceil((stop - start) / step).
  std::int64_t count() const noexcept;
  friend bool operator==(const SymRange&, const SymRange&) = default;
};

using SymDim = std::variant<SymPoint, SymRange>;

struct SymbolicSlice {
  std::vector<SymDim> dims;
  friend bool operator==(const SymbolicSlice&, const SymbolicSlice&) = default;
};

struct FunctorDecl {
  std::string name;
  SymbolicSlice lhs;
  std::vector<SymbolicSlice> rhs;

  /// LHS symbols in declaration order; the k-th binds to the k-th map slice.
  std::vector<std::string> symbols() const;
  /// Extents of the LHS constant ranges, in declaration order.
  std::vector<std::int64_t> feature_shape() const;
  std::int64_t feature_size() const;

  friend bool operator==(const FunctorDecl&, const FunctorDecl&) = default;
};

struct ConcreteSlice {
  std::int64_t start = 0;
  std::int64_t stop = 0;
  std::int64_t step = 1;

  std::int64_t count() const noexcept;
  friend bool operator==(const ConcreteSlice&, const ConcreteSlice&) = default;
};

struct MapTarget {
  std::string array;
  std::vector<ConcreteSlice> slices;
  friend bool operator==(const MapTarget&, const MapTarget&) = default;
};

enum class Direction { To, From };

struct MapDirective {
  Direction direction = Direction::To;
  std::string functor;
  std::vector<MapTarget> targets;
  friend bool operator==(const MapDirective&, const MapDirective&) = default;
};

enum class MlMode { Infer, Collect, Predicated };

/// Host expressions (`predicated:<expr>`, `if(<expr>)`) are kept as opaque,
/// whitespace-normalized text; the host supplies their values per invocation.
struct MlDirective {
  MlMode mode = MlMode::Infer;
  std::optional<std::string> predicate;
  std::vector<std::string> in_refs;
  std::vector<std::string> out_refs;
  std::vector<std::string> inout_refs;
  std::optional<std::string> model_path;
  std::optional<std::string> db_path;
  std::optional<std::string> if_cond;
  friend bool operator==(const MlDirective&, const MlDirective&) = default;
};

using Directive = std::variant<FunctorDecl, MapDirective, MlDirective>;

std::string_view to_string(Direction direction) noexcept;
std::string_view to_string(MlMode mode) noexcept;

FunctorDecl parse_functor_decl(std::string_view text);
MapDirective parse_tensor_map(std::string_view text, const Environment& env = {});
MlDirective parse_ml_clause(std::string_view text);

/// Dispatches on the directive keyword (`tensor functor`, `tensor map`, `ml`).
/// A bare `name: [..] = (..)` is read as a functor declaration.
Directive parse_directive(std::string_view text, const Environment& env = {});

std::string pretty_print(const FunctorDecl& functor);
std::string pretty_print(const MapDirective& map);
std::string pretty_print(const MlDirective& ml);
std::string pretty_print(const Directive& directive);

/// One directive from a directive file, with its position in the file.
struct DirectiveEntry {
  Directive directive;
  std::size_t offset = 0;
  std::size_t line = 1;
};

/// Location of a byte offset inside a multi-line text (1-based).
struct TextPosition {
  std::size_t line = 1;
  std::size_t column = 1;
};
TextPosition locate(std::string_view text, std::size_t offset);

/// Splits a directive file into logical lines (backslash continuation,
/// `//` comments) and parses each one. Syntax error offsets refer to the
/// whole file.
std::vector<DirectiveEntry> parse_directive_file(std::string_view text,
                                                 const Environment& env = {});

}  // namespace smlrt
