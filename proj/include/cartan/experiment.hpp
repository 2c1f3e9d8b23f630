#pragma once

// Experiment runners behind the command line tool. Each runner returns a
// Table of typed cells plus the list of verification failures; the caller
// decides where to write it.
//
// Output schemas (the first CSV line carries the schema tag and version):
//   moments/1    item,pattern,family,n,input,analytic_re,analytic_im,mc_mean_re,
//                mc_mean_im,mc_stderr_re,mc_stderr_im,z_score
//   lyap/1       p,gamma_mc,stderr,gamma_formula,z
//   dirac/1      p,gamma_mc,stderr,gamma_formula,z,membership_residual
//   table1/1     h_class,g_class,group,n,m,samples,relation,max_residual,mu,zero_count
//   acceptance/1 criterion,pass,title,summary
//
// Streams: replica r of a QR run uses Rng(seed).split(r); moment inputs for
// the formula use Rng(seed).split(2^32); membership sampling uses
// Rng(seed).split(2^32 + 1); moment items use Rng(seed).split(2^33 + k).

#include "cartan/acceptance.hpp"
#include "cartan/matrix_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace cartan {

struct ExperimentConfig {
  std::string experiment;  // moments, lyap, dirac, table1, acceptance
  std::string cls = "AIII";
  std::string family = "unitary";
  int n = 2;
  int m = 0;
  double lambda = 0.1;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;  // 0: class default
  long steps = 100000;
  long burn_in = -1;
  int replicas = 1;
  long samples = 0;  // 0: per-experiment default
  int inputs = 3;
  std::uint64_t seed = 42;
  std::string output;
  std::string format = "csv";
  int workers = 0;
  std::string checkpoint;
  std::string resume;
  long checkpoint_every = 100000;
  double scale = 1.0;
  std::vector<int> only;
};

struct Table {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  std::vector<std::string> failures;  // verification failures, each naming the check

  void add(std::vector<json> row) {
    if (row.size() != columns.size()) throw std::logic_error("row width does not match the " + schema + " schema");
    rows.push_back(std::move(row));
  }
};

inline const std::vector<std::string>& schema_columns(const std::string& kind) {
  static const std::map<std::string, std::vector<std::string>> cols{
      {"moments",
       {"item", "pattern", "family", "n", "input", "analytic_re", "analytic_im", "mc_mean_re", "mc_mean_im",
        "mc_stderr_re", "mc_stderr_im", "z_score"}},
      {"lyap", {"p", "gamma_mc", "stderr", "gamma_formula", "z"}},
      {"dirac", {"p", "gamma_mc", "stderr", "gamma_formula", "z", "membership_residual"}},
      {"table1", {"h_class", "g_class", "group", "n", "m", "samples", "relation", "max_residual", "mu", "zero_count"}},
      {"acceptance", {"criterion", "pass", "title", "summary"}},
  };
  auto it = cols.find(kind);
  if (it == cols.end()) throw ParameterError("unknown experiment '" + kind + "'");
  return it->second;
}

inline constexpr int schema_version = 1;

inline std::string schema_tag(const std::string& kind) { return kind + "/" + std::to_string(schema_version); }

inline Table make_table(const std::string& kind) {
  Table t;
  t.schema = schema_tag(kind);
  t.columns = schema_columns(kind);
  return t;
}

// ---- writers ------------------------------------------------------------------------

namespace detail {

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    const double x = v.get<double>();
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
  }
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// NaN is not representable in JSON; it is written as null.
inline json json_cell(const json& v) {
  if (v.is_number_float() && !std::isfinite(v.get<double>())) return nullptr;
  return v;
}

}  // namespace detail

inline void write_csv(const Table& t, std::ostream& out) {
  out << "# schema: " << t.schema << '\n';
  for (size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << detail::csv_cell(r[i]);
    out << '\n';
  }
}

inline void write_json(const Table& t, std::ostream& out) {
  json rows = json::array();
  for (auto& r : t.rows) {
    json o = json::object();
    for (size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = detail::json_cell(r[i]);
    rows.push_back(std::move(o));
  }
  out << json{{"schema", t.schema}, {"rows", std::move(rows)}}.dump(1) << '\n';
}

// Reads the schema line and header of a CSV and checks them against the
// current schema for `kind`. Returns an empty string when they match.
inline std::string check_csv_schema(std::istream& in, const std::string& kind) {
  std::string tag, header;
  if (!std::getline(in, tag) || !std::getline(in, header)) return "missing schema or header line";
  if (tag != "# schema: " + schema_tag(kind)) return "schema line '" + tag + "', expected " + schema_tag(kind);
  std::string want;
  for (auto& c : schema_columns(kind)) want += (want.empty() ? "" : ",") + c;
  if (header != want) return "header '" + header + "', expected '" + want + "'";
  return "";
}

// Output destination: explicit path, "-" for stdout, or
// $CARTAN_OUTPUT_DIR/<experiment>.<format> when no path is given and the
// variable is set. Empty return means stdout.
inline std::string resolve_output(const ExperimentConfig& c) {
  if (c.output == "-") return "";
  if (!c.output.empty()) return c.output;
  if (const char* dir = std::getenv("CARTAN_OUTPUT_DIR"); dir && *dir)
    return (std::filesystem::path(dir) / (c.experiment + "." + c.format)).string();
  return "";
}

inline void write_table(const Table& t, const ExperimentConfig& c) {
  if (c.format != "csv" && c.format != "json") throw ParameterError("format must be csv or json");
  const std::string path = resolve_output(c);
  auto emit = [&](std::ostream& os) { c.format == "csv" ? write_csv(t, os) : write_json(t, os); };
  if (path.empty()) {
    emit(std::cout);
    std::cout.flush();
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  emit(out);
  if (!out) throw DataError("write failed for " + path);
}

// ---- runners ------------------------------------------------------------------------

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline std::uint64_t moment_stream() { return 1ull << 32; }

inline QrOptions qr_options_for(const ExperimentConfig& c) {
  QrOptions q;
  q.burn_in = c.burn_in;
  if (c.burn_in < 0) q.burn_in = std::max<long>(10, std::min(default_burn_in(c.steps), c.steps / 10));
  return q;
}

inline void check_common(const ExperimentConfig& c) {
  if (c.n < 1) throw ParameterError("n must be positive");
  if (c.m < 0) throw ParameterError("m must be non-negative");
  if (c.replicas < 1) throw ParameterError("replicas must be positive");
  if (c.steps < 100) throw ParameterError("steps must be at least 100");
  if (c.samples < 0) throw ParameterError("samples must be non-negative");
}

// gamma_formula is an RPP prediction; a DomainError (N too small) or a
// missing formula gives NaN.
inline RVec formula_or_nan(Cartan g, int n, int m, double lambda, const MomentInputs& mom, int d) {
  try {
    return perturbative_spectrum(g, n, m, lambda, mom);
  } catch (const DomainError&) {
    return RVec::Constant(d, nan());
  }
}

inline LyapunovEstimate run_qr(const MatrixSampler& s, const ExperimentConfig& c) {
  QrOptions opt = qr_options_for(c);
  opt.checkpoint_every = c.checkpoint_every;
  if ((!c.checkpoint.empty() || !c.resume.empty()) && c.replicas != 1)
    throw ParameterError("checkpointing needs replicas = 1");
  if (c.replicas == 1) {
    Rng rng = Rng(c.seed).split(0);
    QrState resumed;
    if (!c.resume.empty()) {
      resumed = checkpoint_from_json(load_json(c.resume));
      opt.resume = &resumed;
    }
    if (!c.checkpoint.empty()) {
      const std::string path = c.checkpoint;
      opt.checkpoint = [path](const QrState& st) { save_json(checkpoint_to_json(st), path); };
    }
    LyapunovEstimate e = qr_lyapunov(s, c.steps, rng, opt);
    e.seed = c.seed;
    return e;
  }
  return qr_lyapunov_replicas(s, c.steps, c.replicas, c.seed, opt, c.workers);
}

inline void spectrum_rows(Table& t, const LyapunovEstimate& e, const RVec& formula, const json* extra,
                          bool check_formula) {
  for (int i = 0; i < e.dim(); ++i) {
    const double f = formula(i);
    const double z = std::isfinite(f) ? (e.gamma(i) - f) / std::max(e.stderr_(i), 1e-300) : nan();
    std::vector<json> row{i + 1, e.gamma(i), e.stderr_(i), f, z};
    if (extra) row.push_back(*extra);
    t.add(std::move(row));
    if (check_formula && std::isfinite(f)) {
      const double tol = std::max(acceptance::rpp_sigmas * e.stderr_(i), acceptance::rpp_relative * std::abs(f));
      if (std::abs(e.gamma(i) - f) > tol)
        t.failures.push_back("gamma_" + std::to_string(i + 1) + " = " + std::to_string(e.gamma(i)) +
                             " deviates from the formula " + std::to_string(f) + " by more than max(4 se, 10%)");
    }
  }
}

}  // namespace detail

inline Table run_moments(const ExperimentConfig& c) {
  if (c.n < 1) throw ParameterError("n must be positive");
  if (c.inputs < 1) throw ParameterError("inputs must be positive");
  const AnalyticFamily fam = parse_analytic_family(c.family);
  const long samples = c.samples > 0 ? c.samples : 100000;
  Table t = make_table("moments");
  const CompactGroupSpec g = compact_of(fam, c.n);
  std::uint64_t k = 0;
  for (const auto& item : lemma_items()) {
    if (item.family != fam) continue;
    Rng rng = Rng(c.seed).split((1ull << 33) + k++);
    std::vector<MatrixSlots> inputs;
    std::vector<cplx> exact;
    try {
      for (int i = 0; i < c.inputs; ++i) {
        inputs.push_back(random_lemma_inputs(item.id, c.n, rng));
        exact.push_back(analytic_moment_item(item.id, inputs.back(), c.n));
      }
    } catch (const DomainError& e) {
      std::cerr << item.id << ": " << e.what() << ", skipped\n";
      continue;
    }
    const MomentPattern pat = MomentPattern::parse(item.pattern);
    auto est = mc_moment_batch(g, pat, inputs, samples, rng);
    for (size_t i = 0; i < inputs.size(); ++i) {
      const double z = z_score(exact[i], est[i]);
      t.add({item.id, item.pattern, c.family, c.n, static_cast<int>(i), exact[i].real(), exact[i].imag(),
             est[i].mean.real(), est[i].mean.imag(), est[i].stderr_.real(), est[i].stderr_.imag(), z});
      if (z > acceptance::moment_z_max)
        t.failures.push_back(std::string(item.id) + " input " + std::to_string(i) + ": z = " + std::to_string(z));
    }
  }
  return t;
}

inline Table run_lyap(const ExperimentConfig& c) {
  detail::check_common(c);
  const Cartan cls = parse_cartan(c.cls);
  const GroupSpec g = make_group(cls, c.n, c.m);
  if (c.sigma < 0.0) throw ParameterError("sigma must be non-negative");
  const MatrixSampler s = rpp_toy(g, c.lambda, c.sigma);
  Rng mrng = Rng(c.seed).split(detail::moment_stream());
  const MomentInputs mom = moment_inputs_mc(s.draw_p, c.samples > 0 ? c.samples : 100000, mrng);
  const LyapunovEstimate e = detail::run_qr(s, c);
  Table t = make_table("lyap");
  detail::spectrum_rows(t, e, detail::formula_or_nan(cls, c.n, g.m, c.lambda, mom, e.dim()), nullptr, true);
  return t;
}

inline Table run_dirac(const ExperimentConfig& c) {
  detail::check_common(c);
  PotentialDist dist;
  if (c.sigma > 0.0) dist.sigma = c.sigma;
  const DiracModelSpec spec = make_dirac_model(parse_cartan(c.cls), c.n, c.m, c.lambda, c.energy, dist);
  const TransferGroup tg = transfer_group_of(spec);
  const MatrixSampler s = dirac_sampler(spec);

  Rng vrng = Rng(c.seed).split(detail::moment_stream() + 1);
  double residual = 0.0;
  std::string failure;
  try {
    residual = verify_table1(spec, acceptance::table1_samples, vrng).max_residual();
  } catch (const VerificationError& e) {
    residual = INFINITY;
    failure = e.what();
  }

  // RPP prediction from the transfer-group formula, using the moments of the
  // model's own increments; block classes predict the block and its mirror.
  Rng mrng = Rng(c.seed).split(detail::moment_stream());
  const long msamples = c.samples > 0 ? c.samples : 100000;
  RVec formula;
  if (tg.block) {
    const MomentInputs mom = moment_inputs_mc(dirac_block_sampler(spec).draw_p, msamples, mrng);
    const RVec half = detail::formula_or_nan(tg.g_class, c.n, c.n, c.lambda, mom, tg.block_size);
    formula.resize(tg.full_dim);
    formula << half, -half;
    std::sort(formula.data(), formula.data() + formula.size(), [](double a, double b) {
      if (std::isnan(a) || std::isnan(b)) return false;
      return a > b;
    });
  } else {
    const MomentInputs mom = moment_inputs_mc(s.draw_p, msamples, mrng);
    formula = detail::formula_or_nan(tg.g_class, c.n, tg.group.m, c.lambda, mom, tg.full_dim);
  }
  const LyapunovEstimate e = detail::run_qr(s, c);
  Table t = make_table("dirac");
  const json extra = residual;
  detail::spectrum_rows(t, e, formula, &extra, false);
  if (!failure.empty()) t.failures.push_back(failure);
  return t;
}

inline Table run_table1(const ExperimentConfig& c) {
  if (c.n < 1) throw ParameterError("n must be positive");
  std::vector<Cartan> classes;
  if (c.cls == "all")
    classes.assign(all_classes.begin(), all_classes.end());
  else
    classes.push_back(parse_cartan(c.cls));
  const int samples = c.samples > 0 ? static_cast<int>(c.samples) : acceptance::table1_samples;
  Table t = make_table("table1");
  Rng rng = Rng(c.seed).split(detail::moment_stream() + 1);
  for (Cartan h : classes) {
    const int m = (c.m > c.n && allows_chiral_edge(h)) ? c.m : c.n;
    const DiracModelSpec spec = make_dirac_model(h, c.n, m, c.lambda, detail::nan());
    const TransferGroup tg = transfer_group_of(spec);
    std::vector<json> head{std::string(to_string(h)), std::string(to_string(tg.g_class)), tg.group_name, c.n, m,
                           samples};
    const Multiplicity mu = expected_multiplicity(h);
    try {
      const Table1Report rep = verify_table1(spec, samples, rng);
      for (auto& r : rep.max_residuals) {
        auto row = head;
        row.insert(row.end(), {r.relation, r.residual, mu.exact, rep.zero_count});
        t.add(std::move(row));
      }
    } catch (const VerificationError& e) {
      auto row = head;
      row.insert(row.end(), {std::string("failed"), INFINITY, mu.exact, expected_zero_count(tg)});
      t.add(std::move(row));
      t.failures.push_back(e.what());
    }
  }
  return t;
}

inline Table run_acceptance(const ExperimentConfig& c, std::ostream& progress) {
  acceptance::Options opt;
  opt.seed = c.seed;
  opt.scale = c.scale;
  opt.workers = c.workers;
  std::vector<int> ids = c.only;
  if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8};
  Table t = make_table("acceptance");
  for (int id : ids) {
    acceptance::Result r;
    try {
      r = acceptance::run_criterion(id, opt);
    } catch (const ParameterError&) {
      throw;
    } catch (const std::exception& e) {
      r = {id, false, "error", e.what()};
    }
    progress << acceptance::format_line(r) << std::endl;
    t.add({r.id, r.pass, r.title, r.summary});
    if (!r.pass) t.failures.push_back("criterion " + std::to_string(r.id) + ": " + r.summary);
  }
  return t;
}

inline Table run_experiment(const ExperimentConfig& c, std::ostream& progress = std::cerr) {
  if (c.experiment == "moments") return run_moments(c);
  if (c.experiment == "lyap") return run_lyap(c);
  if (c.experiment == "dirac") return run_dirac(c);
  if (c.experiment == "table1") return run_table1(c);
  if (c.experiment == "acceptance") return run_acceptance(c, progress);
  throw ParameterError("unknown experiment '" + c.experiment + "'");
}

}  // namespace cartan
