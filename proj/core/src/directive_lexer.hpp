#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>

namespace smlrt::detail {

enum class Tok {
  Ident,
  Int,
  String,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Colon,
  Comma,
  Equals,
  Plus,
  Minus,
  Star,
  Hash,
  End,
};

std::string_view describe(Tok kind) noexcept;

struct Token {
  Tok kind = Tok::End;
  std::size_t offset = 0;
  std::string_view text;
  std::int64_t int_value = 0;
  std::string string_value;
};

/// On-demand tokenizer. Whitespace includes newlines, backslash line
/// continuations and `//` comments.
class Lexer {
 public:
  explicit Lexer(std::string_view source) : source_(source) {}

  const Token& peek(std::size_t ahead = 0);
  Token next();

  /// Captures raw text up to (not including) the `)` that closes the
  /// current parenthesis level, skipping string literals. Whitespace is
  /// collapsed. Pending lookahead is discarded and rescanned.
  std::string capture_balanced(std::size_t& begin_offset);

  std::string_view source() const noexcept { return source_; }

 private:
  Token scan();
  void skip_trivia();

  std::string_view source_;
  std::size_t pos_ = 0;
  std::deque<Token> lookahead_;
};

/// Collapses whitespace runs (and line continuations) to single spaces and trims.
std::string normalize_space(std::string_view text);

}  // namespace smlrt::detail
