#pragma once

// JSON round-trip for model definitions (the on-disk experiment format) and
// JSON/CSV emission for estimate reports. CSV is RFC 4180: CRLF records,
// quote doubling, fields quoted when they contain separators.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carnot_gibbs/lattice.hpp"
#include "carnot_gibbs/presets.hpp"
#include "carnot_gibbs/report.hpp"

namespace carnot_gibbs {

using nlohmann::json;

// -- norms -------------------------------------------------------------------

inline json norm_to_json(const HomogeneousNorm& n) {
  json j;
  switch (n.kind()) {
    case NormKind::Kaplan: j["kind"] = "kaplan"; break;
    case NormKind::CarnotCaratheodory: j["kind"] = "cc"; break;
    case NormKind::Horizontal: j["kind"] = "horizontal"; break;
    case NormKind::Euclidean: j["kind"] = "euclidean"; break;
    case NormKind::PowerProduct: {
      j["kind"] = "power_product";
      json factors = json::array();
      for (const auto& [child, e] : n.children())
        factors.push_back({{"norm", norm_to_json(*child)}, {"exponent", e}});
      j["factors"] = factors;
      break;
    }
    case NormKind::LinearCombination: {
      j["kind"] = "linear_combination";
      json terms = json::array();
      for (const auto& [child, c] : n.children())
        terms.push_back({{"coefficient", c}, {"norm", norm_to_json(*child)}});
      j["terms"] = terms;
      break;
    }
  }
  if (!n.mode().analytic) {
    j["gradient_mode"] = {{"mode", "finite_difference"},
                          {"step", n.mode().fd_step}};
  }
  return j;
}

inline HomogeneousNorm norm_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  HomogeneousNorm n;
  if (kind == "kaplan") {
    n = HomogeneousNorm::kaplan();
  } else if (kind == "cc") {
    n = HomogeneousNorm::carnot_caratheodory();
  } else if (kind == "horizontal") {
    n = HomogeneousNorm::horizontal();
  } else if (kind == "euclidean") {
    n = HomogeneousNorm::euclidean();
  } else if (kind == "power_product") {
    std::vector<std::pair<HomogeneousNorm, double>> factors;
    for (const auto& f : j.at("factors"))
      factors.emplace_back(norm_from_json(f.at("norm")),
                           f.at("exponent").get<double>());
    n = HomogeneousNorm::power_product(std::move(factors));
  } else if (kind == "linear_combination") {
    std::vector<std::pair<double, HomogeneousNorm>> terms;
    for (const auto& t : j.at("terms"))
      terms.emplace_back(t.at("coefficient").get<double>(),
                         norm_from_json(t.at("norm")));
    n = HomogeneousNorm::linear_combination(std::move(terms));
  } else {
    throw EvaluationError("model json: unknown norm kind '" + kind + "'");
  }
  if (j.contains("gradient_mode")) {
    const auto& m = j.at("gradient_mode");
    if (m.at("mode").get<std::string>() == "finite_difference")
      n = n.with_mode(GradientMode::fd(m.value("step", 1e-4)));
  }
  return n;
}

// -- model -------------------------------------------------------------------

inline json model_to_json(const SpinModel& m) {
  json j;
  if (m.space.is_heisenberg())
    j["space"] = {{"kind", "heisenberg"}};
  else
    j["space"] = {{"kind", "euclidean"}, {"n", m.space.n}};
  j["dimension"] = m.D;
  j["p"] = m.p;
  j["q"] = m.q;
  json terms = json::array();
  for (const auto& t : m.phase.terms())
    terms.push_back({{"coefficient", t.coefficient},
                     {"exponent", t.exponent},
                     {"norm", norm_to_json(t.norm)}});
  j["phase"] = {{"terms", terms}};
  json monos = json::array();
  for (const auto& mo : m.interaction.monomials())
    monos.push_back({{"c", mo.c},
                     {"rho", norm_to_json(mo.rho)},
                     {"alpha", mo.alpha},
                     {"delta", norm_to_json(mo.delta)},
                     {"beta_exp", mo.beta_exp}});
  j["interaction"] = {{"monomials", monos}};
  json entries = json::array();
  for (const auto& [o, v] : m.couplings.entries())
    entries.push_back({{"offset", {o[0], o[1], o[2]}}, {"value", v}});
  j["couplings"] = {{"range", m.couplings.range()}, {"entries", entries}};
  return j;
}

inline SpinModel model_from_json(const json& j) {
  SpinModel m;
  const auto& sp = j.at("space");
  if (sp.at("kind").get<std::string>() == "heisenberg")
    m.space = SpinSpace::heisenberg();
  else
    m.space = SpinSpace::euclidean(sp.at("n").get<int>());
  m.D = j.at("dimension").get<int>();
  m.p = j.at("p").get<double>();
  m.q = j.at("q").get<double>();
  std::vector<PhaseTerm> terms;
  for (const auto& t : j.at("phase").at("terms"))
    terms.push_back({t.at("coefficient").get<double>(),
                     t.at("exponent").get<double>(),
                     norm_from_json(t.at("norm"))});
  m.phase = Phase(std::move(terms));
  std::vector<InteractionMonomial> monos;
  for (const auto& mo : j.at("interaction").at("monomials"))
    monos.push_back({mo.at("c").get<double>(), norm_from_json(mo.at("rho")),
                     mo.at("alpha").get<double>(),
                     norm_from_json(mo.at("delta")),
                     mo.at("beta_exp").get<double>()});
  m.interaction = Interaction(std::move(monos));
  std::map<Site, double> entries;
  const auto& cj = j.at("couplings");
  for (const auto& e : cj.at("entries")) {
    const auto& o = e.at("offset");
    entries[Site{o.at(0).get<int>(), o.at(1).get<int>(), o.at(2).get<int>()}] =
        e.at("value").get<double>();
  }
  m.couplings =
      CouplingMatrix::by_offset(m.D, cj.at("range").get<int>(), std::move(entries));
  m.validate();
  return m;
}

// -- reports -----------------------------------------------------------------

inline json report_to_json(const EstimateReport& r) {
  json j;
  j["constant"] = r.constant;
  j["value"] = r.value;
  j["method"] = r.method;
  j["uncertainty"] = r.uncertainty;
  if (r.pass.has_value()) j["pass"] = *r.pass;
  j["seed"] = r.seed;
  j["metadata"] = r.metadata;
  j["notes"] = r.notes;
  j["version"] = kVersion;
  return j;
}

// -- RFC 4180 CSV --------------------------------------------------------------

inline std::string csv_escape(const std::string& field) {
  bool need = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!need) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
    row(header_);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != header_.size())
      throw EvaluationError("csv: row width mismatch");
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) body_ += ",";
      body_ += csv_escape(fields[k]);
    }
    body_ += "\r\n";
  }

  const std::string& str() const { return body_; }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvaluationError("csv: cannot open " + path);
    out << body_;
  }

 private:
  std::vector<std::string> header_;
  std::string body_;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace carnot_gibbs
