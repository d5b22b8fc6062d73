#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ratecert/polynomial.h"
#include "ratecert/signed_power.h"

namespace ratecert {

/// Syntax or semantic error in system/polynomial text; `offset` is a byte
/// offset into the parsed text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t offset_;
};

/// Parses an expression over the named variables. Grammar:
///   expr   := term (("+"|"-") term)*
///   term   := unary ("*" unary)*
///   unary  := "-" unary | power
///   power  := atom ("^" exponent)?
///   atom   := number | var | "(" expr ")" | "sign(" var ")" | "abs(" var ")"
/// Plain variables and parenthesised expressions take non-negative integer
/// exponents; abs(var) takes a rational exponent written p, p/q or (p/q).
SignedPowerExpr ParseExpression(std::string_view text, const std::vector<std::string>& vars);

/// As ParseExpression but the result must be polynomial.
Polynomial ParsePolynomial(std::string_view text, const std::vector<std::string>& vars);

/// A system file: statements f1 = ...; ... fn = ...; g1 = ...; ...
/// Variables are x1..xn where n is the number of f statements. Lines may carry
/// '#' comments.
struct ParsedSystem {
  int nvars = 0;
  std::vector<SignedPowerExpr> field;
  std::vector<SignedPowerExpr> constraints;

  bool field_is_polynomial() const;
  PolyVectorField PolynomialField() const;
  SemialgebraicSet Domain() const;
};

ParsedSystem ParseSystem(std::string_view text);
ParsedSystem LoadSystemFile(const std::string& path);

}  // namespace ratecert
