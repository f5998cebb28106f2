#include "directive_lexer.hpp"

#include <cctype>
#include <limits>

#include "smlrt/error.hpp"

namespace smlrt::detail {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

// Length of a backslash line continuation starting at `pos`, or 0.
std::size_t continuation_length(std::string_view s, std::size_t pos) {
  if (pos >= s.size() || s[pos] != '\\') return 0;
  std::size_t p = pos + 1;
  while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
  if (p < s.size() && s[p] == '\r') ++p;
  if (p < s.size() && s[p] == '\n') return p + 1 - pos;
  if (p == s.size()) return p - pos;
  return 0;
}

}  // namespace

std::string_view describe(Tok kind) noexcept {
  switch (kind) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::String: return "string literal";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Colon: return "':'";
    case Tok::Comma: return "','";
    case Tok::Equals: return "'='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Hash: return "'#'";
    case Tok::End: return "end of directive";
  }
  return "token";
}

const Token& Lexer::peek(std::size_t ahead) {
  while (lookahead_.size() <= ahead) lookahead_.push_back(scan());
  return lookahead_[ahead];
}

Token Lexer::next() {
  if (lookahead_.empty()) return scan();
  Token t = std::move(lookahead_.front());
  lookahead_.pop_front();
  return t;
}

void Lexer::skip_trivia() {
  while (pos_ < source_.size()) {
    const char c = source_[pos_];
    if (is_blank(c)) {
      ++pos_;
    } else if (auto n = continuation_length(source_, pos_)) {
      pos_ += n;
    } else if (c == '/' && pos_ + 1 < source_.size() && source_[pos_ + 1] == '/') {
      while (pos_ < source_.size() && source_[pos_] != '\n') ++pos_;
    } else {
      break;
    }
  }
}

Token Lexer::scan() {
  skip_trivia();
  Token t;
  t.offset = pos_;
  if (pos_ >= source_.size()) {
    t.kind = Tok::End;
    return t;
  }
  const char c = source_[pos_];
  const std::size_t begin = pos_;

  if (is_ident_start(c)) {
    while (pos_ < source_.size() && is_ident_char(source_[pos_])) ++pos_;
    t.kind = Tok::Ident;
    t.text = source_.substr(begin, pos_ - begin);
    return t;
  }
  if (std::isdigit(static_cast<unsigned char>(c))) {
    std::int64_t value = 0;
    while (pos_ < source_.size() && std::isdigit(static_cast<unsigned char>(source_[pos_]))) {
      const int digit = source_[pos_] - '0';
      if (value > (std::numeric_limits<std::int64_t>::max() - digit) / 10) {
        throw SyntaxError(begin, "integer literal out of range");
      }
      value = value * 10 + digit;
      ++pos_;
    }
    if (pos_ < source_.size() && is_ident_start(source_[pos_])) {
      throw SyntaxError(begin, "malformed integer literal");
    }
    t.kind = Tok::Int;
    t.int_value = value;
    t.text = source_.substr(begin, pos_ - begin);
    return t;
  }
  if (c == '"') {
    ++pos_;
    std::string value;
    while (true) {
      if (pos_ >= source_.size() || source_[pos_] == '\n') {
        throw SyntaxError(begin, "unterminated string literal");
      }
      const char d = source_[pos_++];
      if (d == '"') break;
      if (d == '\\') {
        if (pos_ >= source_.size()) throw SyntaxError(begin, "unterminated string literal");
        const char e = source_[pos_++];
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '"': value += '"'; break;
          case '\\': value += '\\'; break;
          default: throw SyntaxError(pos_ - 2, "unknown escape sequence in string literal");
        }
      } else {
        value += d;
      }
    }
    t.kind = Tok::String;
    t.text = source_.substr(begin, pos_ - begin);
    t.string_value = std::move(value);
    return t;
  }

  ++pos_;
  t.text = source_.substr(begin, 1);
  switch (c) {
    case '(': t.kind = Tok::LParen; break;
    case ')': t.kind = Tok::RParen; break;
    case '[': t.kind = Tok::LBracket; break;
    case ']': t.kind = Tok::RBracket; break;
    case ':': t.kind = Tok::Colon; break;
    case ',': t.kind = Tok::Comma; break;
    case '=': t.kind = Tok::Equals; break;
    case '+': t.kind = Tok::Plus; break;
    case '-': t.kind = Tok::Minus; break;
    case '*': t.kind = Tok::Star; break;
    case '#': t.kind = Tok::Hash; break;
    default:
      throw SyntaxError(begin, std::string("unexpected character '") + c + "'");
  }
  return t;
}

std::string Lexer::capture_balanced(std::size_t& begin_offset) {
  if (!lookahead_.empty()) {
    pos_ = lookahead_.front().offset;
    lookahead_.clear();
  }
  skip_trivia();
  begin_offset = pos_;
  int depth = 0;
  std::size_t p = pos_;
  while (p < source_.size()) {
    const char c = source_[p];
    if (c == '"') {
      ++p;
      while (p < source_.size() && source_[p] != '"') p += (source_[p] == '\\') ? 2 : 1;
      if (p >= source_.size()) throw SyntaxError(begin_offset, "unterminated string literal");
      ++p;
      continue;
    }
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (depth == 0) break;
      --depth;
    }
    ++p;
  }
  if (p >= source_.size()) throw SyntaxError(source_.size(), "expected ')' closing expression");
  std::string text = normalize_space(source_.substr(pos_, p - pos_));
  pos_ = p;
  if (text.empty()) throw SyntaxError(begin_offset, "expected expression");
  return text;
}

std::string normalize_space(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size();) {
    if (auto n = continuation_length(text, i)) {
      pending_space = true;
      i += n;
      continue;
    }
    const char c = text[i++];
    if (is_blank(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

}  // namespace smlrt::detail
