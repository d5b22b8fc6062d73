#include "ratecert/parser.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace ratecert {

namespace {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const std::vector<std::string>& vars, std::size_t base)
      : text_(text), vars_(vars), base_(base) {}

  SignedPowerExpr ParseAll() {
    SignedPowerExpr e = ParseExpr();
    SkipSpace();
    if (pos_ != text_.size()) Fail(fmt::format("unexpected '{}'", text_[pos_]));
    return e;
  }

 private:
  int nvars() const { return static_cast<int>(vars_.size()); }

  [[noreturn]] void Fail(const std::string& message) const { throw ParseError(message, base_ + pos_); }
  [[noreturn]] void FailAt(const std::string& message, std::size_t at) const {
    throw ParseError(message, base_ + at);
  }

  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool Accept(char c) {
    SkipSpace();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void Expect(char c) {
    if (!Accept(c)) {
      if (pos_ < text_.size()) Fail(fmt::format("expected '{}' but found '{}'", c, text_[pos_]));
      Fail(fmt::format("expected '{}' at end of input", c));
    }
  }

  SignedPowerExpr ParseExpr() {
    SignedPowerExpr e = ParseTerm();
    while (true) {
      if (Accept('+')) {
        e += ParseTerm();
      } else if (Accept('-')) {
        e -= ParseTerm();
      } else {
        return e;
      }
    }
  }

  SignedPowerExpr ParseTerm() {
    SignedPowerExpr e = ParseUnary();
    while (Accept('*')) e *= ParseUnary();
    return e;
  }

  SignedPowerExpr ParseUnary() {
    if (Accept('-')) return -ParseUnary();
    if (Accept('+')) return ParseUnary();
    return ParsePower();
  }

  SignedPowerExpr ParsePower() {
    SkipSpace();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      SignedPowerExpr e(nvars(), ParseNumber());
      if (Accept('^')) e = e.Pow(ParseInteger());
      return e;
    }
    if (Accept('(')) {
      SignedPowerExpr e = ParseExpr();
      Expect(')');
      if (Accept('^')) e = e.Pow(ParseInteger());
      return e;
    }
    const std::string ident = ParseIdentifier();
    if (ident == "sign" || ident == "abs") {
      Expect('(');
      SkipSpace();
      const std::size_t var_at = pos_;
      const int var = LookupVariable(ParseIdentifier(), var_at);
      Expect(')');
      if (ident == "sign") {
        if (Accept('^')) {
          const int p = ParseInteger();
          return p % 2 == 0 ? SignedPowerExpr(nvars(), 1.0) : SignedPowerExpr::Sign(nvars(), var);
        }
        return SignedPowerExpr::Sign(nvars(), var);
      }
      Rational exponent(1);
      if (Accept('^')) exponent = ParseRational();
      return SignedPowerExpr::AbsPower(nvars(), var, exponent);
    }
    const int var = LookupVariable(ident, start);
    SignedPowerExpr e = SignedPowerExpr::Variable(nvars(), var);
    if (Accept('^')) {
      SkipSpace();
      const std::size_t at = pos_;
      const Rational q = ParseRational();
      if (q.denominator() != 1 || q.numerator() < 0) {
        FailAt(fmt::format("exponent {} on plain variable '{}' must be a non-negative integer; "
                           "use abs({})^q or sign({})*abs({})^q",
                           ToString(q), ident, ident, ident, ident),
               at);
      }
      e = e.Pow(static_cast<int>(q.numerator()));
    }
    return e;
  }

  std::string ParseIdentifier() {
    SkipSpace();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ == text_.size()) Fail("unexpected end of input");
      Fail(fmt::format("unexpected '{}'", text_[pos_]));
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  int LookupVariable(const std::string& name, std::size_t at) const {
    const auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it == vars_.end()) FailAt(fmt::format("unknown identifier '{}'", name), at);
    return static_cast<int>(it - vars_.begin());
  }

  double ParseNumber() {
    SkipSpace();
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) Fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  long long ParseSignedLong() {
    SkipSpace();
    const bool negative = pos_ < text_.size() && text_[pos_] == '-';
    if (negative) ++pos_;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) Fail("expected an integer");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return negative ? -value : value;
  }

  int ParseInteger() {
    SkipSpace();
    const std::size_t at = pos_;
    const Rational q = Accept('(') ? ParseRationalBody(true) : ParseRationalBody(false);
    if (q.denominator() != 1 || q.numerator() < 0) {
      FailAt(fmt::format("exponent {} must be a non-negative integer", ToString(q)), at);
    }
    return static_cast<int>(q.numerator());
  }

  Rational ParseRational() {
    if (Accept('(')) return ParseRationalBody(true);
    return ParseRationalBody(false);
  }

  Rational ParseRationalBody(bool parenthesised) {
    const long long num = ParseSignedLong();
    long long den = 1;
    // Without parentheses, "abs(x)^1/3" is read as the exponent 1/3.
    if (Accept('/')) {
      SkipSpace();
      const std::size_t at = pos_;
      den = ParseSignedLong();
      if (den == 0) FailAt("zero denominator in exponent", at);
    }
    if (parenthesised) Expect(')');
    return Rational(num, den);
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

struct Statement {
  std::string name;
  std::string_view body;
  std::size_t body_offset;
  std::size_t name_offset;
};

bool ParseIndexedName(const std::string& name, char prefix, int* index) {
  if (name.size() < 2 || name[0] != prefix) return false;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size() || value < 1) return false;
  *index = value;
  return true;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(fmt::format("parse error at byte {}: {}", offset, message)),
      message_(message),
      offset_(offset) {}

SignedPowerExpr ParseExpression(std::string_view text, const std::vector<std::string>& vars) {
  return ExpressionParser(text, vars, 0).ParseAll();
}

Polynomial ParsePolynomial(std::string_view text, const std::vector<std::string>& vars) {
  const SignedPowerExpr e = ParseExpression(text, vars);
  try {
    return ToPolynomial(e);
  } catch (const NotPolynomial& err) {
    throw ParseError("expression is not a polynomial: " + err.term(), 0);
  }
}

bool ParsedSystem::field_is_polynomial() const {
  return std::all_of(field.begin(), field.end(), [](const auto& e) { return e.IsPolynomial(); });
}

PolyVectorField ParsedSystem::PolynomialField() const {
  std::vector<Polynomial> comps;
  for (const auto& e : field) comps.push_back(ToPolynomial(e));
  return PolyVectorField(std::move(comps));
}

SemialgebraicSet ParsedSystem::Domain() const {
  std::vector<Polynomial> g;
  for (const auto& e : constraints) g.push_back(ToPolynomial(e));
  return SemialgebraicSet(nvars, std::move(g));
}

ParsedSystem ParseSystem(std::string_view text) {
  // Blank out comments in place so byte offsets stay valid.
  std::string cleaned(text);
  bool in_comment = false;
  for (char& c : cleaned) {
    if (c == '#') in_comment = true;
    if (c == '\n') in_comment = false;
    if (in_comment) c = ' ';
  }
  const std::string_view view(cleaned);

  std::vector<Statement> statements;
  std::size_t pos = 0;
  while (true) {
    while (pos < view.size() && std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
    if (pos >= view.size()) break;
    const std::size_t semi = view.find(';', pos);
    if (semi == std::string_view::npos) throw ParseError("statement is missing its terminating ';'", pos);
    const std::size_t eq = view.find('=', pos);
    if (eq == std::string_view::npos || eq > semi) throw ParseError("expected 'name = expression;'", pos);
    std::string_view name = view.substr(pos, eq - pos);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.remove_suffix(1);
    statements.push_back({std::string(name), view.substr(eq + 1, semi - eq - 1), eq + 1, pos});
    pos = semi + 1;
  }

  std::map<int, const Statement*> f_statements;
  std::map<int, const Statement*> g_statements;
  for (const auto& s : statements) {
    int index = 0;
    if (ParseIndexedName(s.name, 'f', &index)) {
      if (!f_statements.emplace(index, &s).second) throw ParseError("duplicate statement " + s.name, s.name_offset);
    } else if (ParseIndexedName(s.name, 'g', &index)) {
      if (!g_statements.emplace(index, &s).second) throw ParseError("duplicate statement " + s.name, s.name_offset);
    } else {
      throw ParseError(fmt::format("unknown statement name '{}' (expected f<i> or g<i>)", s.name), s.name_offset);
    }
  }
  if (f_statements.empty()) throw ParseError("system defines no vector-field components f1..fn", 0);
  const int n = static_cast<int>(f_statements.size());
  if (f_statements.rbegin()->first != n) {
    throw ParseError("vector-field components must be numbered f1..fn without gaps", 0);
  }
  if (!g_statements.empty() && g_statements.rbegin()->first != static_cast<int>(g_statements.size())) {
    throw ParseError("domain constraints must be numbered g1..gm without gaps", 0);
  }

  ParsedSystem sys;
  sys.nvars = n;
  const auto vars = DefaultVariableNames(n);
  for (const auto& [i, s] : f_statements) {
    sys.field.push_back(ExpressionParser(s->body, vars, s->body_offset).ParseAll());
  }
  for (const auto& [i, s] : g_statements) {
    SignedPowerExpr g = ExpressionParser(s->body, vars, s->body_offset).ParseAll();
    if (!g.IsPolynomial()) throw ParseError("domain constraint " + s->name + " must be polynomial", s->body_offset);
    sys.constraints.push_back(std::move(g));
  }
  return sys;
}

ParsedSystem LoadSystemFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open system file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseSystem(buf.str());
}

}  // namespace ratecert
