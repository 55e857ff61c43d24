#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncsiegel/calculus.hpp"
#include "ncsiegel/endo.hpp"
#include "ncsiegel/json_io.hpp"
#include "ncsiegel/rep_bridge.hpp"
#include "ncsiegel/sampling.hpp"
#include "ncsiegel/siegel.hpp"
#include "ncsiegel/small_divisors.hpp"

using namespace ncsiegel;
using io::json;
using io::pointer;

namespace {

constexpr const char* kReportDirEnv = "NCSIEGEL_REPORT_DIR";

struct Config {
  std::string command;
  long ell = 5;
  bool ell_given = false;
  int n = 2;
  int degree = 6;
  long precision = 40;
  std::string backend = "exact";
  std::string radius_log = "2";
  std::string in, with, weights, out;
  std::string c, mu;
  std::optional<std::string> c_prime;
  std::vector<std::string> lambdas;
  std::vector<long> ells;
  long nmax = 10000;
  int m = 0;
  double eta = 0.5;
  bool assume_semisimple = false;
  bool semisimple = false;
  std::optional<int> semisimple_degree;
  std::uint64_t seed = 1;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return 3;
    case ErrorCode::PrecisionExhausted:
    case ErrorCode::DivisionByIndistinguishableZero:
    case ErrorCode::Undecidable: return 4;
    case ErrorCode::ScheduleViolation:
    case ErrorCode::ScheduleDivergence:
    case ErrorCode::NoFeasibleB: return 5;
    default: return 2;
  }
}

mpq_class parse_rational(const std::string& text, const char* what) {
  try {
    mpq_class q(text);
    if (q.get_den() == 0) throw std::invalid_argument("zero denominator");
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    throw io::ParseFailure("--" + std::string(what), "", 0, "not a rational: " + text);
  }
}

Radius radius(const Config& cfg) { return Radius::exact(parse_rational(cfg.radius_log, "radius-log")); }

json config_json(const Config& cfg) {
  json j{{"ell", cfg.ell}, {"backend", cfg.backend}, {"radius_log", cfg.radius_log}};
  if (cfg.backend == "capped") j["precision"] = cfg.precision;
  return j;
}

void emit(const Config& cfg, const json& j) {
  std::string text = io::dump(j);
  if (cfg.out.empty()) std::cout << text;
  else std::ofstream(cfg.out, std::ios::binary) << text;
  if (const char* dir = std::getenv(kReportDirEnv); dir && *dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(std::filesystem::path(dir) / (cfg.command + ".json"), std::ios::binary) << text;
  }
}

json report(const Config& cfg, json result) {
  return json{{"command", cfg.command}, {"config", config_json(cfg)}, {"result", std::move(result)}};
}

io::Document load(const std::string& path, const char* flag) {
  if (path.empty()) throw io::ParseFailure(std::string("--") + flag, "", 0, "input file required");
  return io::Document::load(path);
}

void check_ell(const Config& cfg, const io::Document& d, long file_ell) {
  if (cfg.ell_given && file_ell != cfg.ell) d.fail(pointer("/ell"), "file has ell = " + std::to_string(file_ell) + " but --ell " + std::to_string(cfg.ell));
}

template <LadicScalar K>
EndoTuple<K> load_endo(const Config& cfg, const std::string& path, const char* flag = "in") {
  io::Document d = load(path, flag);
  EndoTuple<K> f = io::read_endo<K>(d, pointer(), cfg.precision);
  check_ell(cfg, d, f.context().ell);
  return f;
}

SiegelParams params_for(const Config& cfg, const std::vector<Rational>& lambdas, int degree, json& note) {
  if (!cfg.c.empty() && !cfg.mu.empty()) return SiegelParams{parse_rational(cfg.c, "c"), parse_rational(cfg.mu, "mu")};
  SiegelFit fit = fit_siegel(lambdas, std::max(degree, 2), default_mu_grid());
  SiegelParams p = fit.params;
  if (!cfg.c.empty()) p.c = parse_rational(cfg.c, "c");
  if (!cfg.mu.empty()) p.mu = parse_rational(cfg.mu, "mu");
  note = io::to_json(fit);
  return p;
}

template <LadicScalar K>
std::vector<Rational> exact_eigenvalues(const EndoTuple<K>& f) {
  auto lambdas = f.diagonal_eigenvalues();
  if (!lambdas) raise(ErrorCode::NotDiagonal, "linear part is not diagonal");
  return detail::rational_eigenvalues(*lambdas);
}

template <LadicScalar K>
int run_backend(const Config& cfg) {
  const std::string& cmd = cfg.command;
  if (cmd == "norm") {
    io::Document d = load(cfg.in, "in");
    Radius r = radius(cfg);
    LogNorm nrm;
    if (d.root().contains("components")) {
      EndoTuple<K> f = io::read_endo<K>(d, pointer(), cfg.precision);
      check_ell(cfg, d, f.context().ell);
      nrm = f.norm(r);
    } else {
      Series<K> s = io::read_series<K>(d, pointer(), cfg.precision);
      check_ell(cfg, d, s.context().ell);
      nrm = s.norm(r);
    }
    emit(cfg, report(cfg, json{{"norm", io::to_json(nrm)}}));
    return 0;
  }
  if (cmd == "compose") {
    EndoTuple<K> f = load_endo<K>(cfg, cfg.in), g = load_endo<K>(cfg, cfg.with, "with");
    emit(cfg, io::to_json(compose(f, g)));
    return 0;
  }
  if (cmd == "invert") {
    EndoTuple<K> psi = load_endo<K>(cfg, cfg.in);
    emit(cfg, io::to_json(invert(psi, radius(cfg))));
    return 0;
  }
  if (cmd == "jet" || cmd == "semisimple") {
    EndoTuple<K> f = load_endo<K>(cfg, cfg.in);
    int m = cfg.m > 0 ? cfg.m : f.degree();
    if (cmd == "semisimple") {
      emit(cfg, report(cfg, json{{"m", m}, {"semisimple", is_semisimple_jet(f, m)}}));
      return 0;
    }
    JetOperator<K> jet = jet_matrix(f, m);
    json basis = json::array(), rows = json::array();
    for (const auto& w : jet.basis) basis.push_back(io::word_json(w));
    for (std::size_t i = 0; i < jet.matrix.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < jet.matrix.cols(); ++j) row.push_back(io::to_json(jet.matrix(i, j)));
      rows.push_back(row);
    }
    emit(cfg, report(cfg, json{{"m", m}, {"basis", basis}, {"matrix", rows}}));
    return 0;
  }
  if (cmd == "homological") {
    EndoTuple<K> f = load_endo<K>(cfg, cfg.in);
    auto lambdas = f.diagonal_eigenvalues();
    if (!lambdas) raise(ErrorCode::NotDiagonal, "linear part is not diagonal");
    EndoTuple<K> fhat = f - EndoTuple<K>::diagonal(f.degree(), *lambdas);
    HomologicalSolution<K> sol = solve_homological(fhat, *lambdas);
    emit(cfg, report(cfg, json{{"psi_hat", io::to_json(sol.psi_hat)}, {"precision_ledger", io::to_json(sol.ledger)}}));
    return 0;
  }
  if (cmd == "siegel-step") {
    EndoTuple<K> f = load_endo<K>(cfg, cfg.in);
    json fit = nullptr;
    SiegelParams p = params_for(cfg, exact_eigenvalues(f), f.degree(), fit);
    std::optional<double> cp;
    if (cfg.c_prime) cp = parse_rational(*cfg.c_prime, "c-prime").get_d();
    StepResult<K> st = siegel_step(f, radius(cfg), cfg.eta, p, cp);
    json j{{"params", io::to_json(p)},
           {"eta", cfg.eta},
           {"delta", io::to_json(st.delta)},
           {"delta_next", io::to_json(st.delta_next)},
           {"delta_bound", io::to_json(st.delta_bound)},
           {"psi_norm", io::to_json(st.psi_norm)},
           {"psi_inv_norm", io::to_json(st.psi_inv_norm)},
           {"psi_bound", io::to_json(st.psi_bound)},
           {"r_next", io::to_json(st.r_next.log())},
           {"precision_ledger", io::to_json(st.ledger)},
           {"psi", io::to_json(st.psi)},
           {"f_next", io::to_json(st.f_next)}};
    if (!fit.is_null()) j["fit"] = fit;
    emit(cfg, report(cfg, j));
    return 0;
  }
  if (cmd == "linearize" || cmd == "eigencoords") {
    EndoTuple<K> f = load_endo<K>(cfg, cfg.in);
    if constexpr (!K::is_exact_backend) {
      if (!cfg.assume_semisimple)
        raise(ErrorCode::BackendUnsupported, "the capped backend cannot certify semisimplicity; pass --assume-semisimple");
    }
    LinearizeOptions opts;
    opts.semisimple_degree = cfg.semisimple_degree;
    json fit = nullptr;
    if (cmd == "linearize") {
      SiegelParams p = params_for(cfg, exact_eigenvalues(f), f.degree(), fit);
      LinearizationResult<K> res = linearize(f, radius(cfg), p, opts);
      json j = io::to_json(res);
      if (!fit.is_null()) j["fit"] = fit;
      if (!K::is_exact_backend) j["semisimple"] = json{{"asserted", true}, {"flag", "--assume-semisimple"}};
      emit(cfg, report(cfg, j));
      return 0;
    }
    std::vector<Rational> lambdas;
    if (auto diag = f.diagonal_eigenvalues()) lambdas = detail::rational_eigenvalues(*diag);
    else if constexpr (K::is_exact_backend) {
      auto change = rational_diagonalization(f.linear_part());
      if (!change) raise(ErrorCode::NotDiagonal, "linear part is not diagonalizable over Q");
      for (const auto& q : change->eigenvalues) lambdas.push_back(Rational::from_rational(f.context(), q));
    } else {
      raise(ErrorCode::NotDiagonal, "linear part is not diagonal");
    }
    SiegelParams p = params_for(cfg, lambdas, f.degree(), fit);
    EigenCoordinates<K> ec = eigen_coordinates(f, radius(cfg), p, opts);
    json ys = json::array(), lam = json::array(), blocks = json::array();
    for (const auto& y : ec.y) ys.push_back(io::to_json(y));
    for (const auto& l : ec.lambdas) lam.push_back(io::to_json(l));
    for (bool b : ec.unit_blocks) blocks.push_back(b);
    json j{{"lambdas", lam},
           {"y", io::to_json(EndoTuple<K>(ec.y))},
           {"eigen_relation", ec.eigen_relation},
           {"unit_blocks", blocks},
           {"invertible", ec.invertible},
           {"diagonalized", ec.change.has_value()},
           {"linearization", io::to_json(ec.linearization)}};
    if (!fit.is_null()) j["fit"] = fit;
    emit(cfg, report(cfg, j));
    return ec.eigen_relation && ec.invertible ? 0 : 2;
  }
  if (cmd == "extend-rep") {
    io::Document d = load(cfg.in, "in");
    ReprSpec<K> rho = io::read_repr<K>(d, pointer(), cfg.precision);
    check_ell(cfg, d, rho.ell);
    io::Document fd = load(cfg.with, "with");
    Series<K> f = io::read_series<K>(fd, pointer(), cfg.precision);
    if (f.context().ell != rho.ell) fd.fail(pointer("/ell"), "series and representation disagree on ell");
    Extension<K> ext = extend_representation(rho, f, radius(cfg));
    emit(cfg, report(cfg, json{{"value", io::to_json(ext.value)},
                               {"value_norm", io::to_json(ext.value_norm)},
                               {"sharp_bound", io::to_json(ext.sharp_bound)},
                               {"norm_bound", io::to_json(ext.norm_bound)},
                               {"C", io::to_json(rho.bound_log())},
                               {"holds", ext.holds}}));
    return ext.holds ? 0 : 2;
  }
  if (cmd == "unipotence-check") {
    io::Document d = load(cfg.in, "in");
    ReprSpec<K> rho = io::read_repr<K>(d, pointer(), cfg.precision);
    check_ell(cfg, d, rho.ell);
    EndoTuple<K> ys = load_endo<K>(cfg, cfg.with, "with");
    WeightTable table = io::read_weights(load(cfg.weights, "weights"), pointer());
    UnipotenceReport<K> rep = forced_unipotence_check(rho, ys.components(), table, radius(cfg), cfg.semisimple);
    json j{{"verdict", to_string(rep.verdict)},
           {"cutoff", rep.cutoff},
           {"degree", rep.degree},
           {"checked", rep.checked},
           {"weights", io::to_json(table)}};
    j["witness"] = rep.witness ? io::word_json(*rep.witness) : json(nullptr);
    j["witness_image"] = rep.witness_image ? io::to_json(*rep.witness_image) : json(nullptr);
    emit(cfg, report(cfg, j));
    return 0;
  }
  raise(ErrorCode::InvalidArgument, "unknown command " + cmd);
}

std::vector<Rational> lambda_list(const Config& cfg, long ell) {
  ScalarContext ctx{ell, 0};
  std::vector<Rational> out;
  for (const auto& s : cfg.lambdas) out.push_back(Rational::from_rational(ctx, parse_rational(s, "lambda")));
  if (out.empty()) out.push_back(Rational::from_rational(ctx, mpq_class(1 + ell)));
  return out;
}

int siegel_check(const Config& cfg) {
  std::vector<Rational> lambdas = lambda_list(cfg, cfg.ell);
  json fit = nullptr;
  SiegelParams p = params_for(cfg, lambdas, static_cast<int>(cfg.nmax), fit);
  SiegelCertificate cert = check_siegel(lambdas, p, cfg.nmax);
  json j = io::to_json(cert);
  if (!fit.is_null()) j["fit"] = fit;
  emit(cfg, report(cfg, j));
  return cert.verdict == Verdict::Holds ? 0 : 2;
}

int siegel_fit(const Config& cfg) {
  std::vector<long> ells = cfg.ells.empty() ? std::vector<long>{cfg.ell} : cfg.ells;
  json fits = json::array();
  for (long ell : ells) {
    if (!detail::is_prime(ell)) raise(ErrorCode::InvalidArgument, std::to_string(ell) + " is not prime");
    std::vector<Rational> lambdas = lambda_list(cfg, ell);
    std::vector<mpq_class> grid = default_mu_grid();
    if (!cfg.mu.empty()) grid = {parse_rational(cfg.mu, "mu")};
    SiegelFit fit = fit_siegel(lambdas, cfg.nmax, grid);
    json lam = json::array();
    for (const auto& l : lambdas) lam.push_back(io::to_json(l));
    json entry = io::to_json(fit);
    entry["ell"] = ell;
    entry["lambdas"] = lam;
    fits.push_back(entry);
  }
  emit(cfg, report(cfg, json{{"n_max", cfg.nmax}, {"fits", fits}}));
  return 0;
}

// ---------------------------------------------------------------------------
// selftest

struct Row {
  std::string name;
  long cases = 0;
  long failures = 0;
  double seconds = 0;
};

template <class F>
Row timed(const std::string& name, F&& body) {
  auto t0 = std::chrono::steady_clock::now();
  Row row{name};
  try {
    body(row);
  } catch (const std::exception& e) {
    ++row.failures;
    std::cerr << name << ": " << e.what() << "\n";
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

int selftest(const Config& cfg) {
  using E = EndoTuple<Rational>;
  ScalarContext ctx{cfg.ell, 0};
  ScalarContext cctx{cfg.ell, cfg.precision};
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.n, D = cfg.degree;
  std::vector<Row> rows;

  rows.push_back(timed("inversion", [&](Row& row) {
    Radius r = Radius::exact(1);
    for (int t = 0; t < 40; ++t, ++row.cases) {
      auto hat = sampling::random_endo<Capped>(rng, n, D, cctx, 2, 0.3, 3, -1);
      auto id = EndoTuple<Capped>::identity(n, D, cctx);
      auto psi = id + hat;
      auto g = invert(psi, r);
      bool ok = (compose(g, psi) - id).is_zero() && (compose(psi, g) - id).is_zero() && certainly_le((g - id).norm(r), hat.norm(r));
      if (!ok) ++row.failures;
    }
  }));

  rows.push_back(timed("taylor", [&](Row& row) {
    Radius r = Radius::exact(1);
    for (int t = 0; t < 40; ++t, ++row.cases) {
      E f = sampling::random_endo<Rational>(rng, n, D, ctx, 1, 0.3);
      E eps = sampling::random_endo<Rational>(rng, n, D, ctx, 1, 0.3, 2, 0);
      std::vector<Rational> lambdas;
      for (int i = 0; i < n; ++i) lambdas.push_back(sampling::random_scalar<Rational>(rng, ctx, 0, 2));
      if (!certainly_le(taylor_gap(f, lambdas, eps, r), taylor_bound(f, eps, r))) ++row.failures;
    }
  }));

  rows.push_back(timed("linearize", [&](Row& row) {
    for (int t = 0; t < 5; ++t, ++row.cases) {
      auto inst = sampling::random_siegel_instance(rng, n, D, ctx);
      auto res = linearize(inst.f, Radius::exact(2), inst.params);
      E a = E::diagonal(D, *inst.f.diagonal_eigenvalues());
      E formal = formal_linearize(inst.f);
      bool ok = res.residual_zero && compose(res.PsiInv, compose(inst.f, res.Psi)) == a &&
                compose(invert(formal), compose(inst.f, formal)) == a;
      for (std::size_t k = 0; ok && k < res.schedule.steps.size(); ++k)
        if (!certainly_le(res.schedule.steps[k].delta_next, res.schedule.steps[k].delta_bound)) ok = false;
      if (!ok) ++row.failures;
    }
  }));

  rows.push_back(timed("calculus", [&](Row& row) {
    for (int i = 1; i <= 9; ++i)
      for (double mu : {0.5, 1.0, 2.0, 5.0}) {
        ++row.cases;
        if (!verify_calculus_sup(i / 10.0, mu).holds) ++row.failures;
      }
    for (int i = 1; i <= 9; ++i)
      for (double alpha : {1.5, 2.0, 4.0}) {
        ++row.cases;
        if (!verify_calculus_product(i * 0.05, alpha).holds) ++row.failures;
      }
  }));

  rows.push_back(timed("siegel-check", [&](Row& row) {
    ++row.cases;
    std::vector<Rational> lambdas{Rational::from_rational(ctx, mpq_class(1 + cfg.ell))};
    SiegelFit fit = fit_siegel(lambdas, 1000, {mpq_class(1)});
    if (check_siegel(lambdas, fit.params, 1000).verdict != Verdict::Holds) ++row.failures;
  }));

  rows.push_back(timed("extension", [&](Row& row) {
    ReprSpec<Rational> rho;
    rho.ell = cfg.ell;
    rho.m = 2;
    rho.N = 2;
    Radius r = Radius::exact(mpq_class(3, 2));
    for (int t = 0; t < 20; ++t, ++row.cases) {
      rho.images.clear();
      for (int i = 0; i < n; ++i) {
        Matrix<Rational> x(2, 2, Rational::zero(ctx));
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b) x(a, b) = sampling::random_scalar<Rational>(rng, ctx, 2, 4);
        rho.images.push_back(x);
      }
      Series<Rational> f = sampling::random_series<Rational>(rng, n, D, ctx, 0, 0.3, -1, 0);
      if (!extend_representation(rho, f, r).holds) ++row.failures;
    }
  }));

  bool ok = true;
  json table = json::array();
  std::cout << std::left << std::setw(14) << "property" << std::right << std::setw(7) << "cases" << std::setw(10) << "failures"
            << std::setw(10) << "seconds" << "  result\n";
  for (const auto& row : rows) {
    ok = ok && row.failures == 0;
    std::cout << std::left << std::setw(14) << row.name << std::right << std::setw(7) << row.cases << std::setw(10) << row.failures
              << std::setw(10) << std::fixed << std::setprecision(3) << row.seconds << "  " << (row.failures ? "FAIL" : "PASS") << "\n";
    table.push_back(json{{"property", row.name}, {"cases", row.cases}, {"failures", row.failures}});
  }
  std::cout << "seed " << cfg.seed << ": " << (ok ? "all properties hold" : "FAILURES") << "\n";
  if (const char* dir = std::getenv(kReportDirEnv); dir && *dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(std::filesystem::path(dir) / "selftest.json", std::ios::binary)
        << io::dump(json{{"command", "selftest"}, {"seed", cfg.seed}, {"n", n}, {"D", D}, {"ell", cfg.ell}, {"properties", table}, {"ok", ok}});
  }
  return ok ? 0 : 2;
}

int run(const Config& cfg) {
  if (cfg.command == "siegel-check") return siegel_check(cfg);
  if (cfg.command == "siegel-fit") return siegel_fit(cfg);
  if (cfg.command == "selftest") return selftest(cfg);
  if (cfg.backend == "capped") return run_backend<Capped>(cfg);
  return run_backend<Rational>(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  Config cfg;
  CLI::App app{"Non-commutative l-adic Siegel linearization toolkit"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--ell", cfg.ell, "prime l")->check(CLI::PositiveNumber)->each([&](const std::string&) { cfg.ell_given = true; });
    sub->add_option("--backend", cfg.backend, "exact | capped")->check(CLI::IsMember({"exact", "capped"}));
    sub->add_option("--precision", cfg.precision, "capped precision P")->check(CLI::PositiveNumber);
    sub->add_option("--radius-log", cfg.radius_log, "s with r = l^{-s}");
    sub->add_option("--out", cfg.out, "write the report here instead of stdout");
  };
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    sub->callback([&cfg, name] { cfg.command = name; });
    return sub;
  };
  auto in = [&](CLI::App* sub) { sub->add_option("--in", cfg.in, "input JSON")->required(); };
  auto siegel_params = [&](CLI::App* sub) {
    sub->add_option("--c", cfg.c, "Siegel constant c (rational); fitted when omitted");
    sub->add_option("--mu", cfg.mu, "Siegel exponent mu (rational); fitted when omitted");
  };

  in(add("norm", "||f||_r of a series or tuple"));
  {
    auto* s = add("compose", "f o g");
    in(s);
    s->add_option("--with", cfg.with, "g")->required();
  }
  in(add("invert", "compositional inverse"));
  for (const char* name : {"jet", "semisimple"}) {
    auto* s = add(name, name == std::string("jet") ? "jet operator on I/I^{m+1}" : "semisimplicity of the m-jet");
    in(s);
    s->add_option("--m", cfg.m, "jet order (default D)");
  }
  in(add("homological", "solve the homological equation for f - Ax"));
  {
    auto* s = add("siegel-step", "one conjugation step");
    in(s);
    siegel_params(s);
    s->add_option("--eta", cfg.eta, "radius loss");
    s->add_option("--c-prime", cfg.c_prime, "adjusted constant");
  }
  for (const char* name : {"linearize", "eigencoords"}) {
    auto* s = add(name, name == std::string("linearize") ? "full linearization with schedule report" : "eigen-coordinates y_i o f = lambda_i y_i");
    in(s);
    siegel_params(s);
    s->add_flag("--assume-semisimple", cfg.assume_semisimple, "required with the capped backend");
    s->add_option("--semisimple-degree", cfg.semisimple_degree, "certify jets up to this weight");
  }
  {
    auto* s = add("siegel-check", "certify the l-Siegel condition up to N_max");
    siegel_params(s);
    s->add_option("--lambda", cfg.lambdas, "eigenvalue (repeatable); default 1 + l");
    s->add_option("--nmax", cfg.nmax, "largest total degree");
  }
  {
    auto* s = add("siegel-fit", "fit (c, mu) over one or more primes");
    s->add_option("--lambda", cfg.lambdas, "eigenvalue (repeatable); default 1 + l");
    s->add_option("--ells", cfg.ells, "primes to fit (default --ell)")->delimiter(',');
    s->add_option("--mu", cfg.mu, "fix mu instead of scanning the grid");
    s->add_option("--nmax", cfg.nmax, "largest total degree");
  }
  {
    auto* s = add("extend-rep", "evaluate f at rho(x)");
    in(s);
    s->add_option("--with", cfg.with, "series f")->required();
  }
  {
    auto* s = add("unipotence-check", "forced unipotence by weights");
    in(s);
    s->add_option("--with", cfg.with, "eigen-coordinates y as a tuple")->required();
    s->add_option("--weights", cfg.weights, "weight table")->required();
    s->add_flag("--semisimple", cfg.semisimple, "rho is known semisimple");
  }
  {
    auto* s = add("selftest", "seeded property suite");
    s->add_option("--seed", cfg.seed, "RNG seed");
    s->add_option("--n", cfg.n, "variables")->check(CLI::PositiveNumber);
    s->add_option("--D", cfg.degree, "truncation degree")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (!detail::is_prime(cfg.ell)) throw io::ParseFailure("--ell", "", 0, std::to_string(cfg.ell) + " is not prime");
    return run(cfg);
  } catch (const io::ParseFailure& e) {
    std::cerr << io::dump(json{{"error", "ParseError"}, {"source", e.source()}, {"path", e.path()}, {"offset", e.offset()}, {"message", e.what()}});
    return 3;
  } catch (const Error& e) {
    std::cerr << io::dump(json{{"error", to_string(e.code())}, {"message", e.what()}});
    return exit_code(e.code());
  }
}
