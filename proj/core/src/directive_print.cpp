#include <string>

#include "smlrt/directive.hpp"

namespace smlrt {

namespace {

std::string print_expr(const SymExpr& e) {
  if (e.is_constant()) return std::to_string(e.offset);
  if (e.offset == 0) return e.symbol;
  return e.symbol + (e.offset > 0 ? "+" : "-") +
         std::to_string(e.offset > 0 ? e.offset : -e.offset);
}

std::string print_slice(const SymbolicSlice& slice) {
  std::string out = "[";
  for (std::size_t d = 0; d < slice.dims.size(); ++d) {
    if (d) out += ", ";
    if (const auto* p = std::get_if<SymPoint>(&slice.dims[d])) {
      out += print_expr(p->at);
    } else {
      const auto& r = std::get<SymRange>(slice.dims[d]);
      out += print_expr(r.start) + ":" + print_expr(r.stop);
      if (r.step != 1) out += ":" + std::to_string(r.step);
    }
  }
  return out + "]";
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string print_refs(const char* clause, const std::vector<std::string>& refs) {
  if (refs.empty()) return {};
  std::string out = std::string(" ") + clause + "(";
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i) out += ", ";
    out += refs[i];
  }
  return out + ")";
}

}  // namespace

std::string pretty_print(const FunctorDecl& functor) {
  std::string out = "#pragma approx tensor functor(" + functor.name + ": " +
                    print_slice(functor.lhs) + " = (";
  for (std::size_t i = 0; i < functor.rhs.size(); ++i) {
    if (i) out += ", ";
    out += print_slice(functor.rhs[i]);
  }
  return out + "))";
}

std::string pretty_print(const MapDirective& map) {
  std::string out = "#pragma approx tensor map(" + std::string(to_string(map.direction)) + ": " +
                    map.functor + "(";
  for (std::size_t t = 0; t < map.targets.size(); ++t) {
    const auto& target = map.targets[t];
    if (t) out += ", ";
    out += target.array + "[";
    for (std::size_t d = 0; d < target.slices.size(); ++d) {
      const auto& s = target.slices[d];
      if (d) out += ", ";
      out += std::to_string(s.start) + ":" + std::to_string(s.stop);
      if (s.step != 1) out += ":" + std::to_string(s.step);
    }
    out += "]";
  }
  return out + "))";
}

std::string pretty_print(const MlDirective& ml) {
  std::string out = "#pragma approx ml(" + std::string(to_string(ml.mode));
  if (ml.predicate) out += ":" + *ml.predicate;
  out += ")";
  out += print_refs("in", ml.in_refs);
  out += print_refs("out", ml.out_refs);
  out += print_refs("inout", ml.inout_refs);
  if (ml.model_path) out += " model(" + quote(*ml.model_path) + ")";
  if (ml.db_path) out += " db(" + quote(*ml.db_path) + ")";
  if (ml.if_cond) out += " if(" + *ml.if_cond + ")";
  return out;
}

std::string pretty_print(const Directive& directive) {
  return std::visit([](const auto& d) { return pretty_print(d); }, directive);
}

}  // namespace smlrt
