#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "sipcq/expr.hpp"

using namespace sipcq;

namespace {

double at(const std::string& src, std::vector<double> x, std::vector<double> t = {}) {
  const SymbolTable sym = SymbolTable::standard(static_cast<int>(x.size()), t.empty() ? std::vector<std::string>{}
                                                                                        : std::vector<std::string>{"t"});
  return eval(parse(src, sym), Bindings{x, t});
}

}  // namespace

TEST_CASE("precedence and associativity") {
  CHECK(at("1 + 2*3", {0}) == 7);
  CHECK(at("2^3^2", {0}) == 512);
  CHECK(at("-2^2", {0}) == -4);
  CHECK(at("(x1+1)^2 + x2", {-1, 0}) == 0);
  CHECK(at("x1^3/(3*t) - x2", {-1, 0}, {2}) == doctest::Approx(-1.0 / 6));
  CHECK(at("10 - 4 - 3", {0}) == 3);
  CHECK(at("8 / 4 / 2", {0}) == 1);
}

TEST_CASE("functions") {
  CHECK(at("sin(0) + cos(0)", {0}) == 1);
  CHECK(at("exp(log(3))", {0}) == doctest::Approx(3));
  CHECK(at("sqrt(16)", {0}) == 4);
}

TEST_CASE("print then parse is the identity") {
  const SymbolTable sym = SymbolTable::standard(3, {"t"});
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const Expr e = oracle::random_expr(rng, 3, 3);
    const std::string text = print(e, sym);
    CHECK_MESSAGE(parse(text, sym) == e, text);
  }
  for (const char* src : {"-(x1)", "x1 - (-2)", "t*x1^2 - x2", "(-3)^2", "1e-3*x1"}) {
    const Expr e = parse(src, sym);
    CHECK(parse(print(e, sym), sym) == e);
  }
}

TEST_CASE("parse errors carry positions") {
  const SymbolTable sym = SymbolTable::standard(2);
  try {
    parse("x1 + * x2", sym);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.where().column == 6);
  }
  CHECK_THROWS_AS(parse("x3", sym), ParseError);
  CHECK_THROWS_AS(parse("sin(x1, x2)", sym), ParseError);
  CHECK_THROWS_AS(parse("(x1", sym), ParseError);
  CHECK_THROWS_AS(parse("", sym), ParseError);
  CHECK_THROWS_AS(parse("foo(x1)", sym), ParseError);
}

TEST_CASE("domain errors name the subexpression") {
  CHECK_THROWS_AS(at("log(x1)", {0}), DomainError);
  CHECK_THROWS_AS(at("1/x1", {0}), DomainError);
  CHECK_THROWS_AS(at("sqrt(x1)", {-1}), DomainError);
  CHECK_THROWS_AS(at("x1^0.5", {-1}), DomainError);
  CHECK(at("x1^2", {-3}) == 9);
  CHECK(at("x1^(-1)", {-2}) == -0.5);
  try {
    at("2 + log(x1 - 1)", {1});
  } catch (const DomainError& e) {
    CHECK(e.subexpression().find("log") != std::string::npos);
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const int n = 3;
  for (int k = 0; k < 40; ++k) {
    const Expr e = oracle::random_expr(rng, n, 3);
    for (int p = 0; p < 5; ++p) {
      std::vector<double> x(n);
      for (auto& v : x) v = u(rng);
      const auto g = grad_x(e, Bindings{x, {}});
      auto f = [&](const std::vector<double>& y) { return eval(e, Bindings{y, {}}); };
      for (int i = 0; i < n; ++i) {
        const double fd = oracle::central_difference(f, x, i);
        CHECK(std::fabs(g[i] - fd) <= std::max(1e-6 * std::fabs(fd), 1e-9));
      }
    }
  }
}

TEST_CASE("index variables are not differentiated") {
  const SymbolTable sym = SymbolTable::standard(2, {"t"});
  const Expr e = parse("t^2*x1 + sin(t)", sym);
  const double t[1] = {3};
  const double x[2] = {1, 2};
  const auto vg = eval_with_gradient(e, Bindings{x, t});
  CHECK(vg.gradient[0] == 9);
  CHECK(vg.gradient[1] == 0);
}

TEST_CASE("structural queries") {
  const SymbolTable sym = SymbolTable::standard(3, {"t"});
  CHECK(is_affine_in_x(parse("2*x1 - t^2*x2 + sin(t)", sym)));
  CHECK(is_affine_in_x(parse("x1/(1+t)", sym)));
  CHECK_FALSE(is_affine_in_x(parse("x1*x2", sym)));
  CHECK_FALSE(is_affine_in_x(parse("x1^2", sym)));
  CHECK_FALSE(is_affine_in_x(parse("1/x1", sym)));
  CHECK(required_dimension(parse("x3 + x1", sym)) == 3);
  CHECK(required_slots(parse("t*x1", sym)) == 1);
  CHECK_FALSE(depends_on_x(parse("t + 1", sym)));
}
