#pragma once

// Serialization of condition, bound and identity reports: JSON with every
// float written to 17 significant digits, a CSV tail table, and plain text.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gconc/bounds.hpp"
#include "gconc/conditions.hpp"
#include "gconc/interpolation.hpp"

namespace gconc {

using Json = nlohmann::ordered_json;

// One lambda row of a verify-lemma run; skipped rows carry no report.
struct LemmaRow {
  double lambda = 0.0;
  bool skipped = false;
  std::string skip_reason;
  std::optional<IdentityReport> report;
};

struct LemmaReport {
  std::vector<LemmaRow> rows;
  std::optional<IdentityReport> mean_t_variance;
  std::string mean_t_variance_skip_reason;  // set when the E[T] = Var f row did not run

  bool all_pass() const {
    for (const auto& r : rows) {
      if (!r.skipped && !r.report->pass) return false;
    }
    return !mean_t_variance || mean_t_variance->pass;
  }
};

inline std::string format_double(double v);

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number_or(const Json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

template <typename T>
Json optional_number(const std::optional<T>& v) {
  return v ? number(*v) : Json(nullptr);
}

inline void write_json(const Json& j, std::ostream& os, int indent) {
  const std::string pad(indent + 2, ' ');
  const std::string close(indent, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        write_json(it.value(), os, indent + 2);
      }
      os << "\n" << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json(j[i], os, indent + 2);
      }
      os << "\n" << close << "]";
      return;
    }
    case Json::value_t::number_float: os << format_double(j.get<double>()); return;
    default: os << j.dump(); return;
  }
}

}  // namespace detail

// %.17g, always recognisable as a float.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string dump_json(const Json& j) {
  std::ostringstream os;
  detail::write_json(j, os, 0);
  os << "\n";
  return os.str();
}

// ---- to_json --------------------------------------------------------------

inline Json to_json(const ConditionReport& r) {
  Json c1;
  c1["verdict"] = to_string(r.condition_i.verdict);
  c1["evidence"] = r.condition_i.evidence;
  c1["growth"] = r.condition_i.growth;
  c1["lambda_limit"] = detail::number(r.condition_i.lambda_limit);
  c1["derivatives_subexponential"] = r.condition_i.derivatives_subexponential;
  c1["derivative_evidence"] = r.condition_i.derivative_evidence;
  c1["diagnostics"] = Json::array();
  for (const auto& d : r.condition_i.diagnostics) {
    c1["diagnostics"].push_back({{"lambda", detail::number(d.lambda)},
                                 {"log_mean", detail::number(d.log_mean)},
                                 {"top_share", detail::number(d.top_share)},
                                 {"divergent", d.divergent}});
  }
  Json c2;
  c2["verdict"] = to_string(r.condition_ii.verdict);
  c2["evidence"] = r.condition_ii.evidence;
  c2["gradient_signs"] = Json::array();
  for (Sign s : r.condition_ii.gradient_signs) c2["gradient_signs"].push_back(to_string(s));
  c2["points_checked"] = r.condition_ii.points_checked;
  c2["points_skipped"] = r.condition_ii.points_skipped;
  if (const auto& w = r.condition_ii.witness) {
    Json jw;
    jw["x"] = w->x;
    jw["y"] = w->y;
    jw["z"] = w->z;
    jw["i"] = w->i;
    jw["j"] = w->j;
    jw["product"] = detail::number(w->product);
    c2["witness"] = jw;
  } else {
    c2["witness"] = nullptr;
  }
  Json j;
  j["condition_i"] = c1;
  j["condition_ii"] = c2;
  j["sample_box_radius"] = detail::number(r.sample_box_radius);
  j["sample_count"] = r.sample_count;
  j["any_rejected"] = r.any_rejected();
  return j;
}

inline Json to_json(const Estimate& e) {
  return {{"value", detail::number(e.value)},
          {"uncertainty", detail::number(e.uncertainty)},
          {"method", e.method},
          {"evaluations", e.evaluations}};
}

inline Json to_json(const BoundReport& r) {
  Json j;
  j["expression"] = r.expression;
  j["dimension"] = r.dimension;
  j["K"] = {{"value", detail::number(r.K.value)},
            {"method", r.K.method},
            {"argmax", r.K.argmax},
            {"analytic", r.K_analytic}};
  j["mean"] = to_json(r.mean);
  j["variance"] = to_json(r.variance);
  Json mgf;
  mgf["method"] = r.mgf_curve.method;
  mgf["lambda_cap"] = detail::number(r.mgf_curve.lambda_cap);
  mgf["points"] = Json::array();
  for (const auto& p : r.mgf_curve.points) {
    mgf["points"].push_back({{"lambda", detail::number(p.lambda)},
                             {"phi", detail::number(p.phi)},
                             {"standard_error", detail::number(p.standard_error)},
                             {"bound", detail::number(p.bound)},
                             {"dominated", p.dominated},
                             {"heavy_tail", p.heavy_tail},
                             {"skipped", p.skipped},
                             {"skip_reason", p.skip_reason}});
  }
  j["mgf_curve"] = mgf;
  j["tail_samples"] = r.tail_samples;
  j["confidence"] = detail::number(r.confidence);
  j["tail_table"] = Json::array();
  for (const auto& t : r.tail_table) {
    j["tail_table"].push_back({{"x", detail::number(t.x)},
                               {"count", t.count},
                               {"empirical", detail::number(t.empirical)},
                               {"ci_lo", detail::number(t.ci_lo)},
                               {"ci_hi", detail::number(t.ci_hi)},
                               {"classical", detail::number(t.classical)},
                               {"improved", detail::number(t.improved)},
                               {"improved_example", detail::optional_number(t.improved_example)},
                               {"resolvable", t.resolvable},
                               {"violation", t.violation}});
  }
  j["improved_certified"] = r.improved_certified;
  j["sigma_sup"] = detail::optional_number(r.sigma_sup);
  j["warnings"] = r.warnings;
  j["condition_report"] = to_json(r.condition_report);
  return j;
}

inline Json to_json(const IdentityReport& r) {
  return {{"identity", r.identity},
          {"lambda", detail::number(r.lambda)},
          {"lhs", detail::number(r.lhs)},
          {"rhs", detail::number(r.rhs)},
          {"lhs_uncertainty", detail::number(r.lhs_uncertainty)},
          {"rhs_uncertainty", detail::number(r.rhs_uncertainty)},
          {"residual", detail::number(r.residual)},
          {"combined_uncertainty", detail::number(r.combined_uncertainty)},
          {"pass", r.pass},
          {"lhs_method", r.lhs_method},
          {"rhs_method", r.rhs_method}};
}

inline Json to_json(const LemmaReport& r) {
  Json j;
  j["rows"] = Json::array();
  for (const auto& row : r.rows) {
    Json jr;
    jr["lambda"] = detail::number(row.lambda);
    jr["status"] = row.skipped ? "skipped" : (row.report->pass ? "pass" : "fail");
    jr["skip_reason"] = row.skip_reason;
    jr["report"] = row.report ? to_json(*row.report) : Json(nullptr);
    j["rows"].push_back(jr);
  }
  j["mean_t_variance"] = r.mean_t_variance ? to_json(*r.mean_t_variance) : Json(nullptr);
  j["mean_t_variance_skip_reason"] = r.mean_t_variance_skip_reason;
  j["all_pass"] = r.all_pass();
  return j;
}

// ---- from_json ------------------------------------------------------------

namespace detail {

inline ConditionIVerdict condition_i_verdict(const std::string& s) {
  for (auto v : {ConditionIVerdict::VerifiedStructural, ConditionIVerdict::PlausibleEmpirical,
                 ConditionIVerdict::Rejected}) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown condition (i) verdict '" + s + "'");
}

inline Sign sign_from(const std::string& s) {
  for (auto v : {Sign::Zero, Sign::Positive, Sign::Negative, Sign::Mixed}) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown sign '" + s + "'");
}

inline Estimate estimate_from(const Json& j) {
  return {number_or(j.at("value"), std::numeric_limits<double>::quiet_NaN()),
          number_or(j.at("uncertainty"), std::numeric_limits<double>::infinity()),
          j.at("method").get<std::string>(), j.at("evaluations").get<std::uint64_t>()};
}

}  // namespace detail

inline ConditionReport condition_report_from_json(const Json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  ConditionReport r;
  const Json& c1 = j.at("condition_i");
  r.condition_i.verdict = detail::condition_i_verdict(c1.at("verdict").get<std::string>());
  r.condition_i.evidence = c1.at("evidence").get<std::string>();
  r.condition_i.growth = c1.at("growth").get<std::string>();
  r.condition_i.lambda_limit = detail::number_or(c1.at("lambda_limit"), inf);
  r.condition_i.derivatives_subexponential = c1.at("derivatives_subexponential").get<bool>();
  r.condition_i.derivative_evidence = c1.at("derivative_evidence").get<std::string>();
  for (const auto& d : c1.at("diagnostics")) {
    r.condition_i.diagnostics.push_back({detail::number_or(d.at("lambda"), inf),
                                         detail::number_or(d.at("log_mean"), inf),
                                         detail::number_or(d.at("top_share"), inf),
                                         d.at("divergent").get<bool>()});
  }
  const Json& c2 = j.at("condition_ii");
  r.condition_ii.verdict = c2.at("verdict").get<std::string>() == "rejected"
                               ? ConditionIIVerdict::Rejected
                               : ConditionIIVerdict::VerifiedOnSample;
  r.condition_ii.evidence = c2.at("evidence").get<std::string>();
  for (const auto& s : c2.at("gradient_signs")) {
    r.condition_ii.gradient_signs.push_back(detail::sign_from(s.get<std::string>()));
  }
  r.condition_ii.points_checked = c2.at("points_checked").get<std::uint64_t>();
  r.condition_ii.points_skipped = c2.at("points_skipped").get<std::uint64_t>();
  if (const Json& w = c2.at("witness"); !w.is_null()) {
    ConditionWitness cw;
    cw.x = w.at("x").get<std::vector<double>>();
    cw.y = w.at("y").get<std::vector<double>>();
    cw.z = w.at("z").get<std::vector<double>>();
    cw.i = w.at("i").get<int>();
    cw.j = w.at("j").get<int>();
    cw.product = detail::number_or(w.at("product"), inf);
    r.condition_ii.witness = cw;
  }
  r.sample_box_radius = detail::number_or(j.at("sample_box_radius"), inf);
  r.sample_count = j.at("sample_count").get<std::uint64_t>();
  return r;
}

inline BoundReport bound_report_from_json(const Json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  BoundReport r;
  r.expression = j.at("expression").get<std::string>();
  r.dimension = j.at("dimension").get<int>();
  const Json& k = j.at("K");
  r.K.value = detail::number_or(k.at("value"), inf);
  r.K.method = k.at("method").get<std::string>();
  r.K.argmax = k.at("argmax").get<std::vector<double>>();
  r.K_analytic = k.at("analytic").get<bool>();
  r.mean = detail::estimate_from(j.at("mean"));
  r.variance = detail::estimate_from(j.at("variance"));
  const Json& mgf = j.at("mgf_curve");
  r.mgf_curve.method = mgf.at("method").get<std::string>();
  r.mgf_curve.lambda_cap = detail::number_or(mgf.at("lambda_cap"), inf);
  for (const auto& p : mgf.at("points")) {
    MgfPoint m;
    m.lambda = detail::number_or(p.at("lambda"), nan);
    m.phi = detail::number_or(p.at("phi"), nan);
    m.standard_error = detail::number_or(p.at("standard_error"), inf);
    m.bound = detail::number_or(p.at("bound"), inf);
    m.dominated = p.at("dominated").get<bool>();
    m.heavy_tail = p.at("heavy_tail").get<bool>();
    m.skipped = p.at("skipped").get<bool>();
    m.skip_reason = p.at("skip_reason").get<std::string>();
    r.mgf_curve.points.push_back(m);
  }
  r.tail_samples = j.at("tail_samples").get<std::uint64_t>();
  r.confidence = detail::number_or(j.at("confidence"), nan);
  for (const auto& t : j.at("tail_table")) {
    TailRow row;
    row.x = detail::number_or(t.at("x"), nan);
    row.count = t.at("count").get<std::uint64_t>();
    row.empirical = detail::number_or(t.at("empirical"), nan);
    row.ci_lo = detail::number_or(t.at("ci_lo"), nan);
    row.ci_hi = detail::number_or(t.at("ci_hi"), nan);
    row.classical = detail::number_or(t.at("classical"), nan);
    row.improved = detail::number_or(t.at("improved"), nan);
    if (!t.at("improved_example").is_null()) row.improved_example = t.at("improved_example").get<double>();
    row.resolvable = t.at("resolvable").get<bool>();
    row.violation = t.at("violation").get<bool>();
    r.tail_table.push_back(row);
  }
  r.improved_certified = j.at("improved_certified").get<bool>();
  if (!j.at("sigma_sup").is_null()) r.sigma_sup = j.at("sigma_sup").get<double>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.condition_report = condition_report_from_json(j.at("condition_report"));
  return r;
}

inline IdentityReport identity_report_from_json(const Json& j) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  IdentityReport r;
  r.identity = j.at("identity").get<std::string>();
  r.lambda = detail::number_or(j.at("lambda"), nan);
  r.lhs = detail::number_or(j.at("lhs"), nan);
  r.rhs = detail::number_or(j.at("rhs"), nan);
  r.lhs_uncertainty = detail::number_or(j.at("lhs_uncertainty"), nan);
  r.rhs_uncertainty = detail::number_or(j.at("rhs_uncertainty"), nan);
  r.residual = detail::number_or(j.at("residual"), nan);
  r.combined_uncertainty = detail::number_or(j.at("combined_uncertainty"), nan);
  r.pass = j.at("pass").get<bool>();
  r.lhs_method = j.at("lhs_method").get<std::string>();
  r.rhs_method = j.at("rhs_method").get<std::string>();
  return r;
}

inline LemmaReport lemma_report_from_json(const Json& j) {
  LemmaReport r;
  for (const auto& jr : j.at("rows")) {
    LemmaRow row;
    row.lambda = detail::number_or(jr.at("lambda"), std::numeric_limits<double>::quiet_NaN());
    row.skipped = jr.at("status").get<std::string>() == "skipped";
    row.skip_reason = jr.at("skip_reason").get<std::string>();
    if (!jr.at("report").is_null()) row.report = identity_report_from_json(jr.at("report"));
    r.rows.push_back(row);
  }
  if (!j.at("mean_t_variance").is_null()) {
    r.mean_t_variance = identity_report_from_json(j.at("mean_t_variance"));
  }
  r.mean_t_variance_skip_reason = j.at("mean_t_variance_skip_reason").get<std::string>();
  return r;
}

// ---- CSV and text ---------------------------------------------------------

inline void write_tail_csv(const BoundReport& r, std::ostream& os) {
  os << "x,empirical,ci_lo,ci_hi,classical,improved,improved_example\n";
  for (const auto& t : r.tail_table) {
    os << format_double(t.x) << ',' << format_double(t.empirical) << ','
       << format_double(t.ci_lo) << ',' << format_double(t.ci_hi) << ','
       << format_double(t.classical) << ',' << format_double(t.improved) << ','
       << (t.improved_example ? format_double(*t.improved_example) : std::string()) << '\n';
  }
}

namespace detail {

inline std::string fixed(double v, int digits = 6) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

inline void write_text(const ConditionReport& r, std::ostream& os) {
  os << "condition (i): " << to_string(r.condition_i.verdict) << "\n"
     << "  " << r.condition_i.evidence << "\n"
     << "  growth: " << r.condition_i.growth << "\n"
     << "  lambda limit: " << detail::fixed(r.condition_i.lambda_limit) << "\n"
     << "  derivatives: " << r.condition_i.derivative_evidence << "\n";
  for (const auto& d : r.condition_i.diagnostics) {
    os << "  E[exp(" << detail::fixed(d.lambda) << "|f|)]: top-sample share "
       << detail::fixed(d.top_share) << (d.divergent ? " (divergent)" : "") << "\n";
  }
  os << "condition (ii): " << to_string(r.condition_ii.verdict) << "\n"
     << "  " << r.condition_ii.evidence << "\n";
  if (const auto& w = r.condition_ii.witness) {
    auto vec = [](const std::vector<double>& v) {
      std::string s = "(";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
      return s + ")";
    };
    os << "  witness: i = " << w->i + 1 << ", j = " << w->j + 1 << ", product "
       << format_double(w->product) << "\n"
       << "    x = " << vec(w->x) << "\n"
       << "    y = " << vec(w->y) << "\n"
       << "    z = " << vec(w->z) << "\n";
  }
}

inline void write_text(const BoundReport& r, std::ostream& os) {
  os << "f = " << r.expression << " (n = " << r.dimension << ")\n"
     << "K = " << detail::fixed(r.K.value, 10) << " [" << r.K.method << "]\n"
     << "mean = " << detail::fixed(r.mean.value, 10) << " +- " << detail::fixed(r.mean.uncertainty, 3)
     << "\n"
     << "variance = " << detail::fixed(r.variance.value, 10) << " +- "
     << detail::fixed(r.variance.uncertainty, 3) << "\n"
     << "improved bound " << (r.improved_certified ? "certified" : "not certified") << "\n\n"
     << "lambda  phi  se  exp(V l^2/2)  dominated\n";
  for (const auto& p : r.mgf_curve.points) {
    if (p.skipped) {
      os << detail::fixed(p.lambda) << "  skipped: " << p.skip_reason << "\n";
      continue;
    }
    os << detail::fixed(p.lambda) << "  " << detail::fixed(p.phi, 8) << "  "
       << detail::fixed(p.standard_error, 3) << "  " << detail::fixed(p.bound, 8) << "  "
       << (p.dominated ? "yes" : "no") << (p.heavy_tail ? " (heavy tail)" : "") << "\n";
  }
  os << "\nx  empirical  ci_lo  ci_hi  classical  improved"
     << (r.sigma_sup ? "  improved_example" : "") << "\n";
  for (const auto& t : r.tail_table) {
    os << detail::fixed(t.x) << "  " << detail::fixed(t.empirical) << "  "
       << detail::fixed(t.ci_lo) << "  " << detail::fixed(t.ci_hi) << "  "
       << detail::fixed(t.classical) << "  " << detail::fixed(t.improved);
    if (t.improved_example) os << "  " << detail::fixed(*t.improved_example);
    if (!t.resolvable) os << "  (unresolved)";
    if (t.violation) os << "  VIOLATION";
    os << "\n";
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  os << "\n";
  write_text(r.condition_report, os);
}

inline void write_text(const IdentityReport& r, std::ostream& os) {
  os << r.identity;
  if (std::isfinite(r.lambda)) os << "  lambda = " << detail::fixed(r.lambda);
  os << "\n  lhs = " << detail::fixed(r.lhs, 12) << " +- " << detail::fixed(r.lhs_uncertainty, 3)
     << "\n  rhs = " << detail::fixed(r.rhs, 12) << " +- " << detail::fixed(r.rhs_uncertainty, 3)
     << "\n  residual = " << detail::fixed(r.residual, 3) << " (limit "
     << detail::fixed(IdentityReport::kPassFactor * r.combined_uncertainty, 3) << ") "
     << (r.pass ? "pass" : "FAIL") << "\n";
}

inline void write_text(const LemmaReport& r, std::ostream& os) {
  for (const auto& row : r.rows) {
    if (row.skipped) {
      os << "lambda = " << detail::fixed(row.lambda) << "  skipped: " << row.skip_reason << "\n";
    } else {
      write_text(*row.report, os);
    }
  }
  if (r.mean_t_variance) {
    write_text(*r.mean_t_variance, os);
  } else {
    os << "E[T] = Var f  skipped: " << r.mean_t_variance_skip_reason << "\n";
  }
}

}  // namespace gconc
