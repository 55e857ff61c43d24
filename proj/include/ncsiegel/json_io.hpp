#pragma once

// JSON formats for scalars, series, tuples, representations and run reports.
// Parse failures carry the JSON path and the byte offset of the offending
// value.

#include <gmpxx.h>
#include <json.hpp>

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "endo.hpp"
#include "errors.hpp"
#include "lognorm.hpp"
#include "rep_bridge.hpp"
#include "scalar.hpp"
#include "series.hpp"
#include "siegel.hpp"
#include "small_divisors.hpp"

namespace ncsiegel::io {

using json = nlohmann::json;
using pointer = json::json_pointer;

class ParseFailure : public Error {
 public:
  ParseFailure(std::string source, std::string path, std::size_t offset, const std::string& what)
      : Error(ErrorCode::ParseError, source + ":" + (path.empty() ? "/" : path) + " (byte " + std::to_string(offset) + "): " + what),
        source_(std::move(source)),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& source() const { return source_; }
  const std::string& path() const { return path_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string source_;
  std::string path_;
  std::size_t offset_;
};

namespace detail {

// Minimal scanner over JSON text, used only to map a JSON pointer back to the
// byte where its value starts.
class Skimmer {
 public:
  explicit Skimmer(const std::string& text) : s_(text) {}

  std::size_t find(const std::vector<std::string>& tokens) {
    pos_ = 0;
    return descend(tokens, 0);
  }

 private:
  std::size_t descend(const std::vector<std::string>& tokens, std::size_t depth) {
    ws();
    if (depth == tokens.size() || pos_ >= s_.size()) return pos_;
    const std::string& tok = tokens[depth];
    if (s_[pos_] == '{') {
      ++pos_;
      while (true) {
        ws();
        if (pos_ >= s_.size() || s_[pos_] == '}') return std::string::npos;
        std::string key = string();
        ws();
        if (pos_ < s_.size() && s_[pos_] == ':') ++pos_;
        if (key == tok) return descend(tokens, depth + 1);
        value();
        ws();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
    }
    if (s_[pos_] == '[') {
      ++pos_;
      std::size_t index = std::stoul(tok);
      for (std::size_t i = 0;; ++i) {
        ws();
        if (pos_ >= s_.size() || s_[pos_] == ']') return std::string::npos;
        if (i == index) return descend(tokens, depth + 1);
        value();
        ws();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
    }
    return pos_;
  }

  void ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\n' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }

  std::string string() {
    std::string out;
    if (pos_ >= s_.size() || s_[pos_] != '"') return out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    ++pos_;
    return out;
  }

  void value() {
    ws();
    if (pos_ >= s_.size()) return;
    char c = s_[pos_];
    if (c == '"') {
      string();
    } else if (c == '{' || c == '[') {
      char close = c == '{' ? '}' : ']';
      ++pos_;
      while (true) {
        ws();
        if (pos_ >= s_.size()) return;
        if (s_[pos_] == close) {
          ++pos_;
          return;
        }
        if (c == '{') {
          string();
          ws();
          ++pos_;  // ':'
        }
        value();
        ws();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
    } else {
      while (pos_ < s_.size() && std::string_view(",]} \n\t\r").find(s_[pos_]) == std::string_view::npos) ++pos_;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

inline std::vector<std::string> tokens_of(pointer p) {
  std::vector<std::string> out;
  while (!p.empty()) {
    out.insert(out.begin(), p.back());
    p.pop_back();
  }
  return out;
}

}  // namespace detail

// Parsed JSON together with its source text, for error locations.
class Document {
 public:
  static Document parse(std::string text, std::string source = "<input>") {
    Document d;
    d.text_ = std::move(text);
    d.source_ = std::move(source);
    try {
      d.root_ = json::parse(d.text_);
    } catch (const json::parse_error& e) {
      throw ParseFailure(d.source_, "", e.byte > 0 ? e.byte - 1 : 0, e.what());
    }
    return d;
  }
  static Document load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseFailure(path, "", 0, "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  const json& root() const { return root_; }
  const std::string& source() const { return source_; }

  std::size_t offset_of(const pointer& p) const {
    detail::Skimmer sk(text_);
    std::size_t at = sk.find(detail::tokens_of(p));
    return at == std::string::npos ? 0 : at;
  }

  [[noreturn]] void fail(const pointer& p, const std::string& what) const {
    throw ParseFailure(source_, p.to_string(), offset_of(p), what);
  }

  const json& at(const pointer& p) const {
    if (!root_.contains(p)) {
      pointer parent = p.parent_pointer();
      fail(root_.contains(parent) ? parent : pointer(), "missing field " + p.to_string());
    }
    return root_.at(p);
  }

  mpz_class integer(const pointer& p) const {
    const json& v = at(p);
    try {
      if (v.is_number_integer()) return mpz_class(v.dump());
      if (v.is_string()) return mpz_class(v.get<std::string>());
    } catch (const std::invalid_argument&) {
    }
    fail(p, "expected an integer");
  }
  long small_integer(const pointer& p) const {
    mpz_class z = integer(p);
    if (!z.fits_slong_p()) fail(p, "integer out of range");
    return z.get_si();
  }
  // Rational from an integer, a decimal-free "a/b" string, or a finite number.
  mpq_class rational(const pointer& p) const {
    const json& v = at(p);
    try {
      if (v.is_number_integer()) return mpq_class(mpz_class(v.dump()));
      if (v.is_number_float()) return mpq_class(v.get<double>());
      if (v.is_string()) {
        mpq_class q(v.get<std::string>());
        if (q.get_den() == 0) fail(p, "zero denominator");
        q.canonicalize();
        return q;
      }
    } catch (const std::invalid_argument&) {
    }
    fail(p, "expected a rational");
  }

 private:
  json root_;
  std::string text_;
  std::string source_;
};

// ---------------------------------------------------------------------------
// Writing.

inline json integer_json(const mpz_class& z) {
  if (z.fits_slong_p()) return json(z.get_si());
  return json(z.get_str());
}

inline std::string rational_str(const mpq_class& q) { return q.get_str(); }

inline json to_json(const Rational& x) {
  return json{{"mode", "exact"}, {"num", integer_json(x.value().get_num())}, {"den", integer_json(x.value().get_den())}};
}

// Indistinguishable zeros carry unit 0 and prec 0 with v the absolute
// precision; an exact zero has v = null.
inline json to_json(const Capped& x) {
  json out{{"mode", "capped"}, {"ell", x.ell()}, {"cap", x.cap()}};
  if (x.is_exact_zero()) {
    out["v"] = nullptr;
    out["unit"] = 0;
    out["prec"] = 0;
  } else if (x.indistinguishable_zero()) {
    out["v"] = *x.absolute_precision();
    out["unit"] = 0;
    out["prec"] = 0;
  } else {
    out["v"] = x.valuation().value;
    out["unit"] = integer_json(x.unit());
    out["prec"] = x.relative_precision();
  }
  return out;
}

inline json word_json(const Word& w) { return json(w.letters()); }

template <LadicScalar K>
json to_json(const Series<K>& s) {
  json coeffs = json::array();
  for (const auto& [w, c] : s.terms()) coeffs.push_back(json{{"word", word_json(w)}, {"c", to_json(c)}});
  return json{{"n", s.variables()}, {"D", s.degree()}, {"ell", s.context().ell}, {"coeffs", coeffs}};
}

template <LadicScalar K>
json to_json(const EndoTuple<K>& f) {
  json comps = json::array();
  for (const auto& c : f.components()) comps.push_back(to_json(c));
  return json{{"n", f.variables()}, {"D", f.degree()}, {"ell", f.context().ell}, {"components", comps}};
}

template <LadicScalar K>
json to_json(const Matrix<K>& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.push_back(to_json(m(i, j)));
  return out;
}

template <LadicScalar K>
json to_json(const ReprSpec<K>& rho) {
  json images = json::array();
  for (const auto& x : rho.images) images.push_back(to_json(x));
  return json{{"ell", rho.ell}, {"N", rational_str(rho.N)}, {"m", rho.m}, {"images", images}};
}

inline json to_json(const WeightTable& t) {
  json e = json::array(), c = json::array();
  for (const auto& w : t.eigen_weights) e.push_back(rational_str(w));
  for (const auto& w : t.conj_weights) c.push_back(rational_str(w));
  return json{{"eigen_weights", e}, {"conj_weights", c}};
}

// A magnitude l^{-s}: exponent as an exact rational string, an enclosing
// [lo, hi] pair, or "inf" for zero.
inline json to_json(const LogValue& v) {
  json out;
  if (v.is_infinite()) out["exponent"] = "inf";
  else if (v.exact_value()) out["exponent"] = rational_str(*v.exact_value());
  else out["exponent"] = json::array({v.box().lo, v.box().hi});
  if (v.upper_bound_only()) out["upper_bound_only"] = true;
  return out;
}

inline json to_json(const Interval& i) { return json::array({i.lo, i.hi}); }

inline json to_json(const SiegelParams& p) {
  return json{{"c", rational_str(p.c)}, {"mu", rational_str(p.mu)}, {"C_sigma", rational_str(p.c_sigma())}};
}

inline json to_json(const Divisor& d) {
  return json{{"exponents", d.exponents}, {"j", d.j}, {"degree", d.degree}, {"valuation", d.valuation}, {"log_slack", d.log_slack}};
}

inline json to_json(const SiegelCertificate& c) {
  json lambdas = json::array(), wit = json::array();
  for (const auto& l : c.lambdas) lambdas.push_back(to_json(l));
  for (const auto& w : c.witnesses) wit.push_back(to_json(w));
  json out{{"lambdas", lambdas},
           {"params", to_json(c.params)},
           {"n_max", c.n_max},
           {"verdict", to_string(c.verdict)},
           {"checked", c.checked},
           {"resonant", c.resonant},
           {"witnesses", wit},
           {"exponent_reading", "c (N/2)^(-mu)"}};
  out["failing"] = c.failing ? to_json(*c.failing) : json(nullptr);
  return out;
}

inline json to_json(const SiegelFit& f) {
  json per = json::array();
  for (const auto& [mu, c] : f.per_mu) per.push_back(json{{"mu", rational_str(mu)}, {"c", rational_str(c)}});
  json scatter = json::array();
  for (const auto& [degree, v] : f.scatter) scatter.push_back(json{{"degree", degree}, {"valuation", v}});
  return json{{"params", to_json(f.params)}, {"per_mu", per}, {"worst_valuation_by_degree", scatter}};
}

template <LadicScalar K>
json to_json(const std::vector<ResonanceViolation<K>>& vs) {
  json out = json::array();
  for (const auto& v : vs) {
    json e{{"word", word_json(v.word)}, {"j", v.component}, {"coefficient", to_json(v.coefficient)}};
    if (v.undecidable) e["undecidable"] = true;
    out.push_back(e);
  }
  return out;
}

inline json to_json(const PrecisionLedger& l) {
  json out{{"divisions", l.divisions}};
  out["worst_divisor_valuation"] = l.worst_divisor_valuation ? json(*l.worst_divisor_valuation) : json(nullptr);
  if (l.min_absolute_precision) out["min_absolute_precision"] = *l.min_absolute_precision;
  return out;
}

inline json to_json(const SiegelSchedule& s) {
  json steps = json::array();
  for (const auto& st : s.steps)
    steps.push_back(json{{"n", st.n},
                         {"r", to_json(st.r)},
                         {"eta", st.eta},
                         {"delta", to_json(st.delta)},
                         {"delta_next", to_json(st.delta_next)},
                         {"delta_bound", to_json(st.delta_bound)},
                         {"psi_norm", to_json(st.psi_norm)},
                         {"psi_bound", to_json(st.psi_bound)}});
  return json{{"B", s.B},
              {"c_prime", s.c_prime},
              {"mu", s.mu},
              {"scale_exponent", s.scale_exponent},
              {"r1", to_json(s.r1)},
              {"eta1_predicted", to_json(s.u)},
              {"b_rhs", to_json(s.b_rhs)},
              {"steps", steps},
              {"termination", s.termination}};
}

template <LadicScalar K>
json to_json(const LinearizationResult<K>& r) {
  json lambdas = json::array();
  for (const auto& l : r.lambdas) lambdas.push_back(to_json(l));
  json out{{"lambdas", lambdas},
           {"params", to_json(r.params)},
           {"siegel_certificate_verdict", to_string(r.certificate.verdict)},
           {"siegel_certified_to", r.certificate.n_max},
           {"semisimple", r.semisimple_degree > 0 ? json{{"certified_to_weight", r.semisimple_degree}} : json{{"asserted", true}}},
           {"schedule", to_json(r.schedule)},
           {"r_prime", to_json(r.r_prime.log())},
           {"r_prime_working", to_json(r.r_prime_working.log())},
           {"N_threshold", to_json(n_threshold(r.r_prime))},
           {"residual", to_json(r.residual)},
           {"residual_zero", r.residual_zero},
           {"precision_ledger", to_json(r.ledger)},
           {"Psi", to_json(r.Psi)},
           {"PsiInv", to_json(r.PsiInv)}};
  out["worst_divisor_valuation"] = r.ledger.worst_divisor_valuation ? json(*r.ledger.worst_divisor_valuation) : json(nullptr);
  return out;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Reading.

template <LadicScalar K>
K read_scalar(const Document& d, const pointer& p, const ScalarContext& ctx) {
  const json& v = d.at(p);
  if (!v.is_object()) d.fail(p, "scalar must be an object");
  std::string mode = v.contains("mode") && v["mode"].is_string() ? v["mode"].get<std::string>() : "";
  if (mode == "exact") {
    mpz_class num = d.integer(p / "num"), den = d.integer(p / "den");
    if (den == 0) d.fail(p / "den", "zero denominator");
    mpq_class q(num, den);
    q.canonicalize();
    return K::from_rational(ctx, q);
  }
  if (mode == "capped") {
    if constexpr (K::is_exact_backend) {
      d.fail(p / "mode", "capped scalar given to the exact backend");
    } else {
      long ell = d.small_integer(p / "ell");
      if (ell != ctx.ell) d.fail(p / "ell", "prime differs from the enclosing object");
      long cap = v.contains("cap") ? d.small_integer(p / "cap") : ctx.precision;
      if (v.at("v").is_null()) return Capped::exact_zero(ell, cap);
      long val = d.small_integer(p / "v");
      long prec = d.small_integer(p / "prec");
      mpz_class unit = d.integer(p / "unit");
      if (unit == 0 && prec == 0) return Capped::indistinguishable(ell, cap, val);
      if (prec < 1 || prec > cap) d.fail(p / "prec", "relative precision must lie in [1, cap]");
      if (unit % ell == 0) d.fail(p / "unit", "unit must be prime to ell");
      return Capped::from_digits(ell, cap, val, unit, prec);
    }
  }
  d.fail(p / "mode", "mode must be \"exact\" or \"capped\"");
}

inline Word read_word(const Document& d, const pointer& p, int n) {
  const json& v = d.at(p);
  if (!v.is_array()) d.fail(p, "word must be an array of letters");
  std::vector<int> letters;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) d.fail(p / i, "letter must be an integer");
    long a = v[i].get<long>();
    if (a < 1 || a > n) d.fail(p / i, "letter " + std::to_string(a) + " outside 1.." + std::to_string(n));
    letters.push_back(static_cast<int>(a));
  }
  return Word(std::move(letters));
}

template <LadicScalar K>
Series<K> read_series(const Document& d, const pointer& p, long precision) {
  long n = d.small_integer(p / "n");
  long degree = d.small_integer(p / "D");
  long ell = d.small_integer(p / "ell");
  if (n < 1) d.fail(p / "n", "n must be >= 1");
  if (degree < 0) d.fail(p / "D", "D must be >= 0");
  if (!ncsiegel::detail::is_prime(ell)) d.fail(p / "ell", "ell must be prime");
  ScalarContext ctx{ell, K::is_exact_backend ? 0 : precision};
  Series<K> s(static_cast<int>(n), static_cast<int>(degree), ctx);
  const json& coeffs = d.at(p / "coeffs");
  if (!coeffs.is_array()) d.fail(p / "coeffs", "coeffs must be an array");
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    pointer at = p / "coeffs" / i;
    Word w = read_word(d, at / "word", static_cast<int>(n));
    if (static_cast<long>(w.weight()) > degree) d.fail(at / "word", "word weight exceeds D");
    if (s.terms().count(w)) d.fail(at / "word", "duplicate word");
    K c = read_scalar<K>(d, at / "c", ctx);
    s.set(w, c);
  }
  return s;
}

template <LadicScalar K>
EndoTuple<K> read_endo(const Document& d, const pointer& p, long precision) {
  long n = d.small_integer(p / "n");
  long degree = d.small_integer(p / "D");
  long ell = d.small_integer(p / "ell");
  const json& comps = d.at(p / "components");
  if (!comps.is_array()) d.fail(p / "components", "components must be an array");
  if (static_cast<long>(comps.size()) != n) d.fail(p / "components", "need exactly n components");
  std::vector<Series<K>> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    pointer at = p / "components" / i;
    Series<K> s = read_series<K>(d, at, precision);
    if (s.variables() != n || s.degree() != degree || s.context().ell != ell) d.fail(at, "component disagrees on n, D or ell");
    if (!s.constant_term().is_zero()) d.fail(at, "component has a nonzero constant term");
    out.push_back(std::move(s));
  }
  return EndoTuple<K>(std::move(out));
}

template <LadicScalar K>
ReprSpec<K> read_repr(const Document& d, const pointer& p, long precision) {
  ReprSpec<K> rho;
  rho.ell = d.small_integer(p / "ell");
  if (!ncsiegel::detail::is_prime(rho.ell)) d.fail(p / "ell", "ell must be prime");
  rho.N = d.rational(p / "N");
  long m = d.small_integer(p / "m");
  if (m < 1) d.fail(p / "m", "m must be >= 1");
  rho.m = static_cast<std::size_t>(m);
  ScalarContext ctx{rho.ell, K::is_exact_backend ? 0 : precision};
  const json& images = d.at(p / "images");
  if (!images.is_array()) d.fail(p / "images", "images must be an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    pointer at = p / "images" / i;
    const json& flat = d.at(at);
    if (!flat.is_array() || flat.size() != rho.m * rho.m) d.fail(at, "matrix must be a row-major array of m*m scalars");
    Matrix<K> x(rho.m, rho.m, K::zero(ctx));
    for (std::size_t k = 0; k < flat.size(); ++k) x(k / rho.m, k % rho.m) = read_scalar<K>(d, at / k, ctx);
    rho.images.push_back(std::move(x));
  }
  return rho;
}

inline WeightTable read_weights(const Document& d, const pointer& p) {
  WeightTable t;
  for (const char* key : {"eigen_weights", "conj_weights"}) {
    const json& arr = d.at(p / key);
    if (!arr.is_array()) d.fail(p / key, "expected an array");
    auto& dst = std::string(key) == "eigen_weights" ? t.eigen_weights : t.conj_weights;
    for (std::size_t i = 0; i < arr.size(); ++i) dst.push_back(d.rational(p / key / i));
  }
  return t;
}

}  // namespace ncsiegel::io
