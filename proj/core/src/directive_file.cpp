#include "smlrt/directive.hpp"
#include "smlrt/error.hpp"

namespace smlrt {

TextPosition locate(std::string_view text, std::size_t offset) {
  TextPosition pos;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

namespace {

// True when the physical line [begin, end) ends in a backslash continuation,
// ignoring trailing blanks and any `//` comment outside string literals.
bool continues(std::string_view line) {
  bool in_string = false;
  std::size_t content_end = line.size();
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') {
      content_end = i;
      break;
    }
  }
  while (content_end > 0 && (line[content_end - 1] == ' ' || line[content_end - 1] == '\t' ||
                             line[content_end - 1] == '\r')) {
    --content_end;
  }
  return content_end > 0 && line[content_end - 1] == '\\';
}

bool blank_or_comment(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r' ||
                             text[i] == '\n' || text[i] == '\\')) {
    ++i;
  }
  return i == text.size() || text.substr(i, 2) == "//";
}

}  // namespace

std::vector<DirectiveEntry> parse_directive_file(std::string_view text, const Environment& env) {
  std::vector<DirectiveEntry> entries;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t begin = pos;
    std::size_t end = pos;
    while (true) {
      std::size_t eol = text.find('\n', end);
      if (eol == std::string_view::npos) eol = text.size();
      const bool more = continues(text.substr(end, eol - end));
      end = eol < text.size() ? eol + 1 : eol;
      if (!more || end >= text.size()) break;
    }
    pos = end;
    const std::string_view logical = text.substr(begin, end - begin);
    if (blank_or_comment(logical)) continue;
    try {
      entries.push_back({parse_directive(logical, env), begin, locate(text, begin).line});
    } catch (const SyntaxError& e) {
      // Rebase the offset onto the whole file; the message keeps the local one.
      std::string msg = e.what();
      const std::string prefix = "SyntaxError: ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      const auto at = msg.rfind(" (at byte ");
      if (at != std::string::npos) msg.erase(at);
      throw SyntaxError(begin + e.offset(), msg);
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string prefix = std::string(to_string(e.code())) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      throw Error(e.code(), "line " + std::to_string(locate(text, begin).line) + ": " + msg);
    }
  }
  return entries;
}

}  // namespace smlrt
