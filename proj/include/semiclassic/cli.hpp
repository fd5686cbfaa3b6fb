#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "semiclassic/cartan.hpp"
#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/lefschetz.hpp"
#include "semiclassic/mapping_torus.hpp"
#include "semiclassic/spectral.hpp"
#include "semiclassic/version.hpp"

namespace semiclassic {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Command {
  Classify,
  Determinant,
  Eta,
  SpectralFlow,
  Lefschetz,
  MappingTorus,
  WittenSum,
};

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Classify: return "classify";
    case Command::Determinant: return "determinant";
    case Command::Eta: return "eta";
    case Command::SpectralFlow: return "spectral_flow";
    case Command::Lefschetz: return "lefschetz";
    case Command::MappingTorus: return "mapping_torus";
    default: return "witten_sum";
  }
}

inline Command command_from_string(const std::string& s) {
  for (Command c : {Command::Classify, Command::Determinant, Command::Eta, Command::SpectralFlow,
                    Command::Lefschetz, Command::MappingTorus, Command::WittenSum}) {
    if (s == to_string(c)) return c;
  }
  throw SchemaError("command");
}

enum class OutputFormat { Json, Csv };

struct OutputSpec {
  OutputFormat format = OutputFormat::Json;
  std::string path = "-";  // "-" writes to stdout
};

struct RunConfig {
  Command command = Command::Classify;
  json payload;
  OutputSpec output;
};

struct Report {
  json doc;              // version, command, config_echo, results, diagnostics
  std::string plot_csv;  // companion eigenvalue table (spectral_flow only)
  bool has_plot = false;
};

// ---------------------------------------------------------------------------
// Schema helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& obj, const std::string& ctx, const std::set<std::string>& allowed,
                       const std::set<std::string>& required) {
  if (!obj.is_object()) throw SchemaError(ctx);
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw SchemaError(ctx.empty() ? item.key() : ctx + "." + item.key());
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) throw SchemaError(ctx.empty() ? key : ctx + "." + key);
  }
}

inline double get_num(const json& o, const std::string& field, const std::string& ctx) {
  if (!o.contains(field) || !o[field].is_number()) throw SchemaError(ctx + "." + field);
  return o[field].get<double>();
}

inline double get_num_or(const json& o, const std::string& field, const std::string& ctx,
                         double fallback) {
  if (!o.contains(field)) return fallback;
  if (!o[field].is_number()) throw SchemaError(ctx + "." + field);
  return o[field].get<double>();
}

inline long long get_int(const json& o, const std::string& field, const std::string& ctx) {
  if (!o.contains(field) || !o[field].is_number_integer()) throw SchemaError(ctx + "." + field);
  return o[field].get<long long>();
}

inline long long get_int_or(const json& o, const std::string& field, const std::string& ctx,
                            long long fallback) {
  if (!o.contains(field)) return fallback;
  if (!o[field].is_number_integer()) throw SchemaError(ctx + "." + field);
  return o[field].get<long long>();
}

inline std::string get_str(const json& o, const std::string& field, const std::string& ctx) {
  if (!o.contains(field) || !o[field].is_string()) throw SchemaError(ctx + "." + field);
  return o[field].get<std::string>();
}

inline Mat get_matrix(const json& o, const std::string& field, const std::string& ctx) {
  if (!o.contains(field)) throw SchemaError(ctx + "." + field);
  const json& m = o[field];
  if (!m.is_array() || m.empty()) throw SchemaError(ctx + "." + field);
  const size_t rows = m.size();
  Mat out(rows, rows);
  for (size_t i = 0; i < rows; ++i) {
    if (!m[i].is_array() || m[i].size() != rows) throw SchemaError(ctx + "." + field);
    for (size_t j = 0; j < rows; ++j) {
      if (!m[i][j].is_number()) throw SchemaError(ctx + "." + field);
      out(i, j) = m[i][j].get<double>();
    }
  }
  return out;
}

inline Eigen::Matrix<long long, 2, 2> get_int_matrix2(const json& o, const std::string& field,
                                                      const std::string& ctx) {
  if (!o.contains(field)) throw SchemaError(ctx + "." + field);
  const json& m = o[field];
  if (!m.is_array() || m.size() != 2) throw SchemaError(ctx + "." + field);
  Eigen::Matrix<long long, 2, 2> out;
  for (int i = 0; i < 2; ++i) {
    if (!m[i].is_array() || m[i].size() != 2) throw SchemaError(ctx + "." + field);
    for (int j = 0; j < 2; ++j) {
      if (!m[i][j].is_number_integer()) throw SchemaError(ctx + "." + field);
      out(i, j) = m[i][j].get<long long>();
    }
  }
  return out;
}

inline std::array<double, 3> get_triple(const json& o, const std::string& field,
                                        const std::string& ctx) {
  if (!o.contains(field)) throw SchemaError(ctx + "." + field);
  const json& a = o[field];
  if (!a.is_array() || a.size() != 3) throw SchemaError(ctx + "." + field);
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!a[i].is_number()) throw SchemaError(ctx + "." + field);
    out[i] = a[i].get<double>();
  }
  return out;
}

inline void validate_payload(Command cmd, const json& p) {
  const std::string ctx = "payload";
  switch (cmd) {
    case Command::Classify:
      check_keys(p, ctx, {"matrix", "tol_symp"}, {"matrix"});
      break;
    case Command::Determinant:
      check_keys(p, ctx, {"matrix", "m_max"}, {"matrix"});
      break;
    case Command::Eta:
      check_keys(p, ctx, {"matrix", "sigma", "m_range"}, {});
      if (p.contains("matrix") == p.contains("sigma")) {
        throw SchemaError("payload.matrix");  // exactly one input form
      }
      break;
    case Command::SpectralFlow:
      check_keys(p, ctx, {"sigma0", "sigma1", "steps", "m_range", "tol_kernel"},
                 {"sigma0", "sigma1"});
      break;
    case Command::Lefschetz:
      check_keys(p, ctx, {"model", "level", "theta", "matrix", "translation"},
                 {"model", "level"});
      break;
    case Command::MappingTorus:
      check_keys(p, ctx, {"beta", "level", "omega_scale", "mu_power", "steps", "m_range"},
                 {"beta", "level"});
      break;
    case Command::WittenSum:
      check_keys(p, ctx, {"connections", "level", "group", "group_n", "b1"},
                 {"connections", "level", "group", "b1"});
      break;
  }
}

}  // namespace detail

// Parses and schema-checks a config document. Syntax errors carry line and
// column; unknown or missing fields name the offending field.
inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1, col = 1;
    const size_t stop = e.byte > 0 ? e.byte - 1 : 0;
    for (size_t i = 0; i < stop && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(e.what(), line, col);
  }
  detail::check_keys(doc, "", {"command", "payload", "output"}, {"command", "payload"});
  RunConfig cfg;
  if (!doc["command"].is_string()) throw SchemaError("command");
  cfg.command = command_from_string(doc["command"].get<std::string>());
  if (!doc["payload"].is_object()) throw SchemaError("payload");
  cfg.payload = doc["payload"];
  if (doc.contains("output")) {
    detail::check_keys(doc["output"], "output", {"format", "path"}, {});
    if (doc["output"].contains("format")) {
      const std::string f = detail::get_str(doc["output"], "format", "output");
      if (f == "json") {
        cfg.output.format = OutputFormat::Json;
      } else if (f == "csv") {
        cfg.output.format = OutputFormat::Csv;
      } else {
        throw SchemaError("output.format");
      }
    }
    if (doc["output"].contains("path")) {
      cfg.output.path = detail::get_str(doc["output"], "path", "output");
    }
  }
  detail::validate_payload(cfg.command, cfg.payload);
  return cfg;
}

// ---------------------------------------------------------------------------
// Deterministic serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void dump_value(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& item : j.items()) {
        if (!first) out += ',';
        first = false;
        out += json(item.key()).dump();
        out += ':';
        dump_value(item.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ',';
        dump_value(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    default:
      out += j.dump();  // strings (escaped), integers, booleans, null
      break;
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

// Floats render with 17 significant digits and object keys keep insertion
// order, so equal reports serialize to identical bytes.
inline std::string dump_report_json(const json& doc) {
  std::string out;
  detail::dump_value(doc, out);
  out += '\n';
  return out;
}

namespace detail {

inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

// Tabular view of the results section: a header plus one row per block,
// crossing, fixed point, or connection.
inline std::string report_csv(const json& doc, Command cmd) {
  std::string out;
  const json& res = doc["results"];
  auto num = [](const json& v) { return v.is_number_float() ? format_double(v.get<double>())
                                                            : v.dump(); };
  switch (cmd) {
    case Command::Classify: {
      out = "block,kind,param_h,param_z_re,param_z_im\n";
      if (res.contains("blocks")) {
        int idx = 0;
        for (const auto& b : res["blocks"]) {
          out += std::to_string(idx++);
          out += ',' + csv_field(b["kind"].get<std::string>());
          if (b.contains("param_h")) {
            out += ',' + num(b["param_h"]) + ",,";
          } else {
            out += ",," + num(b["param_z"][0]) + ',' + num(b["param_z"][1]);
          }
          out += '\n';
        }
      }
      break;
    }
    case Command::Determinant:
      out = "abs_det,oracle,rel_deviation,m_max\n";
      out += num(res["abs_det"]) + ',' + num(res["oracle"]) + ',' + num(res["rel_deviation"]) +
             ',' + num(res["m_max"]) + '\n';
      break;
    case Command::Eta:
      out = "eta,eta_trace_formula,deviation_mod2\n";
      out += num(res["eta"]) + ',' + num(res["eta_trace_formula"]) + ',' +
             num(res["deviation_mod2"]) + '\n';
      break;
    case Command::SpectralFlow:
      out = "param,index,direction\n";
      for (const auto& c : res["crossings"]) {
        out += num(c["param"]) + ',' + num(c["index"]) + ',' + num(c["direction"]) + '\n';
      }
      break;
    case Command::Lefschetz:
      out = "label,weight_re,weight_im\n";
      if (res.contains("per_point")) {
        for (const auto& p : res["per_point"]) {
          out += csv_field(p["label"].get<std::string>()) + ',' + num(p["weight"][0]) + ',' +
                 num(p["weight"][1]) + '\n';
        }
      } else {
        out += "cohomology_trace," + num(res["cohomology_trace"][0]) + ',' +
               num(res["cohomology_trace"][1]) + '\n';
      }
      break;
    case Command::MappingTorus:
      out = "label,weyl_sign,stabilizer,abs_det,eta,action,flow_index,contribution_re,"
            "contribution_im\n";
      for (const auto& p : res["points"]) {
        out += csv_field(p["label"].get<std::string>()) + ',' + num(p["weyl_sign"]) + ',' +
               p["stabilizer"].get<std::string>() + ',';
        if (p["stabilizer"].get<std::string>() == "central") {
          out += ",,,,,\n";
        } else {
          out += num(p["abs_det"]) + ',' + num(p["eta"]) + ',' + num(p["action"]) + ',' +
                 num(p["flow_index"]) + ',' + num(p["contribution"][0]) + ',' +
                 num(p["contribution"][1]) + '\n';
        }
      }
      break;
    case Command::WittenSum:
      out = "label,term_re,term_im\n";
      for (const auto& c : res["per_connection"]) {
        out += csv_field(c["label"].get<std::string>()) + ',' + num(c["term"][0]) + ',' +
               num(c["term"][1]) + '\n';
      }
      break;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline json echo_config(const RunConfig& cfg) {
  json echo;
  echo["command"] = to_string(cfg.command);
  echo["payload"] = cfg.payload;
  echo["output"] = json{{"format", cfg.output.format == OutputFormat::Json ? "json" : "csv"},
                        {"path", cfg.output.path}};
  return echo;
}

inline double mod2_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0);
  return std::min(d, 2.0 - d);
}

inline void run_classify(const RunConfig& cfg, json& results, std::vector<std::string>& diags) {
  const Mat m = get_matrix(cfg.payload, "matrix", "payload");
  const double tol = get_num_or(cfg.payload, "tol_symp", "payload", defaults::tol_symp);
  const bool symp = check_symplectic(m, tol);
  results["symplectic"] = symp;
  if (!symp) {
    diags.push_back("matrix is not symplectic at tolerance " + format_double(tol));
    return;
  }
  results["n"] = static_cast<long long>(m.rows() / 2);
  if (m.rows() == 2) {
    const Sl2Class cls = classify_sl2(make_symplectic(m));
    results["sl2_class"] = to_string(cls);
    if (cls == Sl2Class::Parabolic) {
      diags.push_back("parabolic class has no block decomposition");
      return;
    }
  }
  const CartanDecomposition dec = cartan_decompose(make_symplectic(m));
  json blocks = json::array();
  for (const auto& b : dec.blocks) {
    json jb;
    jb["kind"] = to_string(b.kind);
    if (b.kind == CartanBlockKind::ComplexQuad) {
      jb["param_z"] = complex_json(b.param_z);
    } else {
      jb["param_h"] = b.param_h;
    }
    blocks.push_back(jb);
  }
  results["blocks"] = blocks;
  results["abs_det"] = abs_det(dec);
  double eta = 0.0;
  for (const auto& b : dec.blocks) eta += block_eta(b);
  results["eta"] = eta;
}

inline void run_determinant(const RunConfig& cfg, json& results, std::vector<std::string>& diags) {
  const Mat m = get_matrix(cfg.payload, "matrix", "payload");
  const long long m_max = get_int_or(cfg.payload, "m_max", "payload", defaults::oracle_m_max);
  const CartanDecomposition dec = cartan_decompose(make_symplectic(m));
  const double closed = abs_det(dec);
  const double oracle = truncated_det_oracle(dec.source, m_max);
  const double dev = std::abs(closed - oracle) / std::max(std::abs(closed), 1e-300);
  results["abs_det"] = closed;
  results["oracle"] = oracle;
  results["rel_deviation"] = dev;
  results["m_max"] = m_max;
  diags.push_back("oracle truncated at mode " + std::to_string(m_max));
  if (dev > defaults::oracle_rtol) {
    throw OracleMismatchError("truncated determinant deviates from the closed form by " +
                              format_double(dev) + " (limit " +
                              format_double(defaults::oracle_rtol) + ")");
  }
}

inline void run_eta(const RunConfig& cfg, json& results, std::vector<std::string>& diags) {
  if (cfg.payload.contains("matrix")) {
    const Mat m = get_matrix(cfg.payload, "matrix", "payload");
    const CartanDecomposition dec = cartan_decompose(make_symplectic(m));
    double eta = 0.0;
    for (const auto& b : dec.blocks) eta += block_eta(b);
    const double tf = eta_trace_formula(dec.source);
    const double dev = mod2_distance(eta, tf);
    results["eta"] = eta;
    results["eta_trace_formula"] = tf;
    results["deviation_mod2"] = dev;
    if (dev > 1e-6) {
      throw OracleMismatchError("block eta disagrees with the trace formula mod 2 by " +
                                format_double(dev));
    }
    return;
  }
  const auto s = get_triple(cfg.payload, "sigma", "payload");
  const long long m_range = get_int_or(cfg.payload, "m_range", "payload", defaults::m_range);
  const Sl2Coefficients coeff{s[0], s[1], s[2]};
  const OperatorSpec spec = sl2_operator_spec(coeff);
  const double eta =
      eta_regularized_sum(flatten(sl2_eigenvalues(coeff, static_cast<int>(m_range))));
  const double tf = eta_trace_formula(spec);
  const double dev = mod2_distance(eta, tf);
  results["eta"] = eta;
  results["eta_trace_formula"] = tf;
  results["deviation_mod2"] = dev;
  results["m_range"] = m_range;
  diags.push_back("regularized sum over modes |m| <= " + std::to_string(m_range));
  if (dev > 5e-2) {
    throw OracleMismatchError("regularized eta disagrees with the trace formula mod 2 by " +
                              format_double(dev));
  }
}

inline void run_spectral_flow(const RunConfig& cfg, json& results, std::vector<std::string>& diags,
                              Report& report, bool stdout_output) {
  const auto s0 = get_triple(cfg.payload, "sigma0", "payload");
  const auto s1 = get_triple(cfg.payload, "sigma1", "payload");
  const long long steps = get_int_or(cfg.payload, "steps", "payload", defaults::steps);
  const long long m_range = get_int_or(cfg.payload, "m_range", "payload", 400);
  const double tol_kernel =
      get_num_or(cfg.payload, "tol_kernel", "payload", defaults::tol_kernel);
  const Sl2Coefficients c0{s0[0], s0[1], s0[2]};
  const Sl2Coefficients c1{s1[0], s1[1], s1[2]};
  FlowTrace trace;
  const SpectralFlowResult flow =
      spectral_flow_linear(sl2_operator_spec(c0), sl2_operator_spec(c1), static_cast<int>(steps),
                           static_cast<int>(m_range), tol_kernel, &trace);
  const double eta0 =
      eta_regularized_sum(flatten(sl2_eigenvalues(c0, static_cast<int>(m_range))));
  const double eta1 =
      eta_regularized_sum(flatten(sl2_eigenvalues(c1, static_cast<int>(m_range))));
  results["flow"] = flow.flow;
  json crossings = json::array();
  for (const auto& c : flow.crossings) {
    crossings.push_back(json{{"param", c.param}, {"index", c.index}, {"direction", c.direction}});
  }
  results["crossings"] = crossings;
  results["kernel_hits"] = static_cast<long long>(flow.kernel_hits.size());
  results["eta_start"] = eta0;
  results["eta_end"] = eta1;
  results["eta_jump"] = eta1 - eta0;
  const double residual = std::abs((eta1 - eta0) - 2.0 * flow.flow);
  results["jump_residual"] = residual;
  results["steps"] = steps;
  results["m_range"] = m_range;

  // Companion table of the low modes along the path.
  std::string plot = "tau";
  if (!trace.rows.empty()) {
    for (size_t i = 0; i < trace.rows.front().second.size(); ++i) {
      plot += ",lambda_" + std::to_string(i);
    }
    plot += '\n';
    for (const auto& [tau, values] : trace.rows) {
      plot += format_double(tau);
      for (double v : values) plot += ',' + format_double(v);
      plot += '\n';
    }
  }
  if (stdout_output) {
    diags.push_back("eigenvalue plot table skipped (stdout output)");
  } else {
    report.plot_csv = plot;
    report.has_plot = true;
  }
  if (residual > 1e-1) {
    throw OracleMismatchError("eta jump " + format_double(eta1 - eta0) +
                              " is inconsistent with twice the flow " +
                              std::to_string(flow.flow));
  }
}

inline void run_lefschetz(const RunConfig& cfg, json& results, std::vector<std::string>& diags) {
  const std::string model = get_str(cfg.payload, "model", "payload");
  const long long level = get_int(cfg.payload, "level", "payload");
  if (model == "projective_line") {
    const double theta = get_num(cfg.payload, "theta", "payload");
    const auto pts = projective_line_fixed_points(static_cast<int>(level), theta);
    const Complex sum = lefschetz_sum(pts, static_cast<int>(level));
    ToyModelSpec spec;
    spec.kind = ToyModelKind::ProjectiveLine;
    spec.level = static_cast<int>(level);
    spec.rotation = theta;
    const Complex oracle = cohomology_trace_oracle(spec);
    json per_point = json::array();
    for (const auto& p : pts) {
      per_point.push_back(json{{"label", p.label},
                               {"weight", complex_json(fixed_point_weight(p.df, p.lift_trace))}});
    }
    results["fixed_point_sum"] = complex_json(sum);
    results["cohomology_trace"] = complex_json(oracle);
    const double dev = std::abs(sum - oracle);
    results["abs_deviation"] = dev;
    results["per_point"] = per_point;
    if (dev > 1e-6) {
      throw OracleMismatchError("fixed point sum deviates from the cohomology trace by " +
                                format_double(dev));
    }
    return;
  }
  if (model == "flat_torus") {
    const Eigen::Matrix<long long, 2, 2> m64 = get_int_matrix2(cfg.payload, "matrix", "payload");
    ToyModelSpec spec;
    spec.kind = ToyModelKind::FlatTorus;
    spec.level = static_cast<int>(level);
    spec.torus_matrix << static_cast<int>(m64(0, 0)), static_cast<int>(m64(0, 1)),
        static_cast<int>(m64(1, 0)), static_cast<int>(m64(1, 1));
    if (cfg.payload.contains("translation")) {
      const json& tr = cfg.payload["translation"];
      if (!tr.is_array() || tr.size() != 2) throw SchemaError("payload.translation");
      std::array<Rational, 2> r{};
      for (int i = 0; i < 2; ++i) {
        if (!tr[i].is_array() || tr[i].size() != 2 || !tr[i][0].is_number_integer() ||
            !tr[i][1].is_number_integer() || tr[i][1].get<long long>() == 0) {
          throw SchemaError("payload.translation");
        }
        r[i] = Rational(tr[i][0].get<long long>(), tr[i][1].get<long long>());
      }
      spec.translation_x = r[0];
      spec.translation_y = r[1];
    }
    results["cohomology_trace"] = complex_json(cohomology_trace_oracle(spec));
    diags.push_back("flat torus reports the cohomology trace only");
    return;
  }
  throw SchemaError("payload.model");
}

inline void run_mapping_torus(const RunConfig& cfg, json& results,
                              std::vector<std::string>& diags) {
  const MappingClass mc = make_mapping_class(get_int_matrix2(cfg.payload, "beta", "payload"));
  const long long level = get_int(cfg.payload, "level", "payload");
  MappingTorusOptions opt;
  opt.omega_scale = get_num_or(cfg.payload, "omega_scale", "payload", 4.0 * kPi);
  opt.mu_power = static_cast<int>(get_int_or(cfg.payload, "mu_power", "payload", 0));
  opt.flow_steps = static_cast<int>(get_int_or(cfg.payload, "steps", "payload", 100));
  opt.flow_m_range = static_cast<int>(get_int_or(cfg.payload, "m_range", "payload", 200));
  const MappingTorusReport rep = assemble_mapping_torus(mc, static_cast<int>(level), opt);

  results["value"] = complex_json(rep.partition.value);
  results["level"] = level;
  results["shifted_level"] = rep.shifted_level;
  results["torus_count_plus"] = rep.torus_count_plus;
  results["torus_count_minus"] = rep.torus_count_minus;

  json points = json::array();
  double worst_torsion_dev = 0.0;
  size_t generic_idx = 0;
  for (const auto& p : rep.points) {
    json jp;
    jp["label"] = to_string(p);
    jp["weyl_sign"] = p.weyl_sign;
    jp["stabilizer"] = std::string(to_string(p.stabilizer_class));
    if (p.stabilizer_class == StabilizerClass::GenericAbelian) {
      const FixedPointDatum& d = rep.generic_data[generic_idx];
      ++generic_idx;
      // per_point is label-sorted, which need not match enumeration order.
      Complex contrib(0.0, 0.0);
      for (const auto& [label, term] : rep.partition.per_point) {
        if (label == d.label) contrib = term;
      }
      const Mat df = h1_action_matrix(mc, p);
      const double torsion = torsion_sqrt_contribution(df);
      const double identity_dev = std::abs(torsion - 1.0 / std::sqrt(d.abs_det));
      worst_torsion_dev = std::max(worst_torsion_dev, identity_dev);
      jp["abs_det"] = d.abs_det;
      jp["torsion_sqrt"] = torsion;
      jp["torsion_identity_deviation"] = identity_dev;
      jp["eta"] = d.eta;
      jp["action"] = d.action;
      jp["flow_index"] = d.flow_index;
      jp["contribution"] = complex_json(contrib);
    }
    points.push_back(jp);
  }
  results["points"] = points;
  json flags = json::array();
  for (const auto& [key, value] : rep.partition.convention_flags) {
    flags.push_back(json{{"flag", key}, {"value", value}});
  }
  results["convention_flags"] = flags;
  for (const auto& w : rep.warnings) diags.push_back(w);
  if (worst_torsion_dev > 1e-6) {
    throw OracleMismatchError("torsion normalization deviates from the determinant rule by " +
                              format_double(worst_torsion_dev));
  }
}

inline void run_witten_sum(const RunConfig& cfg, json& results, std::vector<std::string>& diags) {
  const json& p = cfg.payload;
  if (!p["connections"].is_array() || p["connections"].empty()) {
    throw SchemaError("payload.connections");
  }
  std::vector<FlatConnectionDatum> conns;
  for (const auto& jc : p["connections"]) {
    check_keys(jc, "payload.connections",
               {"label", "cs", "torsion_sqrt", "dim_h0", "dim_h1", "spectral_flow"},
               {"label", "cs", "torsion_sqrt", "dim_h0", "dim_h1", "spectral_flow"});
    FlatConnectionDatum c;
    c.label = get_str(jc, "label", "payload.connections");
    c.cs_value = get_num(jc, "cs", "payload.connections");
    c.torsion_sqrt = get_num(jc, "torsion_sqrt", "payload.connections");
    c.dim_h0 = static_cast<int>(get_int(jc, "dim_h0", "payload.connections"));
    c.dim_h1 = static_cast<int>(get_int(jc, "dim_h1", "payload.connections"));
    c.spectral_flow = get_int(jc, "spectral_flow", "payload.connections");
    conns.push_back(c);
  }
  const long long level = get_int(p, "level", "payload");
  const std::string group = get_str(p, "group", "payload");
  GaugeGroup gg = GaugeGroup::su2();
  if (group == "sun") {
    gg = GaugeGroup::sun(static_cast<int>(get_int(p, "group_n", "payload")));
  } else if (group != "su2") {
    throw SchemaError("payload.group");
  }
  const long long b1 = get_int(p, "b1", "payload");
  const WittenSum ws =
      witten_stationary_phase(conns, static_cast<int>(level), gg, static_cast<int>(b1));
  results["value"] = complex_json(ws.value);
  results["shifted_level"] = level_shift(static_cast<int>(level), gg);
  json per = json::array();
  for (const auto& [label, term] : ws.per_connection) {
    per.push_back(json{{"label", label}, {"term", complex_json(term)}});
  }
  results["per_connection"] = per;
  diags.push_back("summed " + std::to_string(conns.size()) + " flat connection(s)");
}

}  // namespace detail

// Runs one command; domain failures propagate as typed errors for the caller
// to fold into an error report and exit code.
inline Report run(const RunConfig& cfg) {
  Report report;
  json results;
  std::vector<std::string> diags;
  switch (cfg.command) {
    case Command::Classify: detail::run_classify(cfg, results, diags); break;
    case Command::Determinant: detail::run_determinant(cfg, results, diags); break;
    case Command::Eta: detail::run_eta(cfg, results, diags); break;
    case Command::SpectralFlow:
      detail::run_spectral_flow(cfg, results, diags, report, cfg.output.path == "-");
      break;
    case Command::Lefschetz: detail::run_lefschetz(cfg, results, diags); break;
    case Command::MappingTorus: detail::run_mapping_torus(cfg, results, diags); break;
    case Command::WittenSum: detail::run_witten_sum(cfg, results, diags); break;
  }
  report.doc["version"] = kVersion;
  report.doc["command"] = to_string(cfg.command);
  report.doc["config_echo"] = detail::echo_config(cfg);
  report.doc["results"] = results;
  report.doc["diagnostics"] = diags;
  return report;
}

inline Report make_error_report(const json& echo, const std::string& error_class,
                                const std::string& message) {
  Report report;
  report.doc["version"] = kVersion;
  report.doc["command"] = echo.is_object() && echo.contains("command") ? echo["command"]
                                                                       : json(nullptr);
  report.doc["config_echo"] = echo;
  report.doc["results"] = json::object();
  report.doc["diagnostics"] = json::array({error_class + ": " + message});
  return report;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace detail {

inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open output path " + tmp);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move report into place at " + path);
  }
}

}  // namespace detail

inline void emit_report(const Report& report, const OutputSpec& output, Command cmd) {
  const std::string body = output.format == OutputFormat::Json
                               ? dump_report_json(report.doc)
                               : detail::report_csv(report.doc, cmd);
  if (output.path == "-") {
    std::cout << body;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing report to stdout");
    return;
  }
  detail::write_file_atomic(output.path, body);
  if (report.has_plot) {
    detail::write_file_atomic(output.path + ".plot.csv", report.plot_csv);
  }
}

// ---------------------------------------------------------------------------
// Error classification (process exit codes)
// ---------------------------------------------------------------------------

inline const char* error_class_name(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const UnsupportedPathError*>(&e)) return "UnsupportedPathError";
  if (dynamic_cast<const UnsupportedError*>(&e)) return "UnsupportedError";
  if (dynamic_cast<const DegenerateFixedPointError*>(&e)) return "DegenerateFixedPointError";
  if (dynamic_cast<const ParabolicError*>(&e)) return "ParabolicError";
  if (dynamic_cast<const NonIsolatedError*>(&e)) return "NonIsolatedError";
  if (dynamic_cast<const CentralPointError*>(&e)) return "CentralPointError";
  if (dynamic_cast<const KernelError*>(&e)) return "KernelError";
  if (dynamic_cast<const OracleMismatchError*>(&e)) return "OracleMismatchError";
  if (dynamic_cast<const MatchingError*>(&e)) return "MatchingError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "InternalError";
}

inline int exit_code_for_error(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 6;
  if (dynamic_cast<const OracleMismatchError*>(&e) || dynamic_cast<const MatchingError*>(&e)) {
    return 5;
  }
  if (dynamic_cast<const KernelError*>(&e)) return 4;
  if (dynamic_cast<const DegenerateFixedPointError*>(&e) ||
      dynamic_cast<const ParabolicError*>(&e) || dynamic_cast<const NonIsolatedError*>(&e) ||
      dynamic_cast<const CentralPointError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const Error*>(&e)) return 2;  // parse, schema, config, dimension, unsupported
  return 1;
}

}  // namespace semiclassic
