#include "pwainv/model_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace pwainv {

namespace {

Error bad(const std::string& what) { return Error(ErrorCode::InvalidModel, what); }

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw bad("field '" + field + "' must be a number");
  return j.get<double>();
}

const Json& require(const Json& j, const std::string& field) {
  if (!j.is_object() || !j.contains(field)) throw bad("missing field '" + field + "'");
  return j.at(field);
}

std::complex<double> complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], "re"), number(j[1], "im")};
  if (j.is_object()) return {j.value("re", 0.0), j.value("im", 0.0)};
  throw bad("complex values must be numbers or [re, im] pairs");
}

Json complex_to_json(const std::complex<double>& z) {
  if (z.imag() == 0.0) return z.real();
  return Json::array({z.real(), z.imag()});
}

LocationMatrices location_from_json(const Json& j, int n_x, int n_u, int n_y) {
  LocationMatrices m;
  m.A = mat_from_json(require(j, "A"), n_x, n_x);
  m.B = mat_from_json(require(j, "B"), n_x, n_u);
  m.C = mat_from_json(require(j, "C"), n_y, n_x);
  m.F = j.contains("F") ? vec_from_json(j.at("F"), n_x) : Vec::Zero(n_x);
  m.D = j.contains("D") ? mat_from_json(j.at("D"), n_y, n_u) : Mat::Zero(n_y, n_u);
  m.G = j.contains("G") ? vec_from_json(j.at("G"), n_y) : Vec::Zero(n_y);
  return m;
}

Json location_to_json(const LocationMatrices& m) {
  return Json{{"A", mat_to_json(m.A)}, {"B", mat_to_json(m.B)}, {"F", vec_to_json(m.F)},
              {"C", mat_to_json(m.C)}, {"D", mat_to_json(m.D)}, {"G", vec_to_json(m.G)}};
}

Trajectory reference_from_json(const Json& j, const std::string& base_dir) {
  if (j.contains("csv")) {
    std::filesystem::path p = j.at("csv").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    return read_csv(p.string());
  }
  if (j.contains("values")) return Trajectory::scalar(j.value("start_k", 0L), vec_from_json(j.at("values")), "r");
  return make_reference(reference_profile_from_json(j.value("profile", Json::object())));
}

}  // namespace

Mat mat_from_json(const Json& j, long rows, long cols) {
  Mat m;
  if (j.is_number()) {
    m = Mat::Constant(1, 1, j.get<double>());
  } else if (j.is_array() && (j.empty() || !j[0].is_array())) {
    const long n = static_cast<long>(j.size());
    if (rows < 0 && cols < 0) {
      rows = 1;
      cols = n;
    } else if (rows < 0) {
      rows = cols > 0 ? n / cols : 0;
    } else if (cols < 0) {
      cols = rows > 0 ? n / rows : 0;
    }
    if (rows * cols != n)
      throw Error(ErrorCode::DimensionMismatch, "flat matrix has " + std::to_string(n) + " entries, expected " +
                                                    std::to_string(rows * cols));
    m.resize(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long c = 0; c < cols; ++c) m(i, c) = number(j[i * cols + c], "matrix entry");
  } else if (j.is_array()) {
    const long r = static_cast<long>(j.size());
    const long c = static_cast<long>(j[0].size());
    m.resize(r, c);
    for (long i = 0; i < r; ++i) {
      if (!j[i].is_array() || static_cast<long>(j[i].size()) != c)
        throw Error(ErrorCode::DimensionMismatch, "matrix rows have unequal lengths");
      for (long k = 0; k < c; ++k) m(i, k) = number(j[i][k], "matrix entry");
    }
  } else {
    throw bad("matrices must be numbers or arrays");
  }
  // A flat vector given for a column.
  if (rows >= 0 && cols >= 0 && m.rows() == cols && m.cols() == rows && (rows == 1 || cols == 1)) m.transposeInPlace();
  if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols))
    throw Error(ErrorCode::DimensionMismatch, "matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                                  ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  return m;
}

Vec vec_from_json(const Json& j, long size) {
  const Mat m = mat_from_json(j);
  if (m.rows() != 1 && m.cols() != 1) throw Error(ErrorCode::DimensionMismatch, "expected a vector");
  Vec v = Eigen::Map<const Vec>(m.data(), m.size());
  if (m.rows() != 1) v = m.col(0);
  if (size >= 0 && v.size() != size)
    throw Error(ErrorCode::DimensionMismatch,
                "vector has " + std::to_string(v.size()) + " entries, expected " + std::to_string(size));
  return v;
}

Json mat_to_json(const Mat& m) {
  Json out = Json::array();
  for (long i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(row);
  }
  return out;
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ZpkModel zpk_from_json(const Json& j) {
  ZpkModel z;
  for (const Json& e : require(j, "zeros")) z.zeros.push_back(complex_from_json(e));
  for (const Json& e : require(j, "poles")) z.poles.push_back(complex_from_json(e));
  z.gain = number(require(j, "gain"), "gain");
  z.Ts = j.value("Ts", 1.0);
  return z;
}

Json zpk_to_json(const ZpkModel& zpk) {
  Json zeros = Json::array(), poles = Json::array();
  for (const auto& z : zpk.zeros) zeros.push_back(complex_to_json(z));
  for (const auto& p : zpk.poles) poles.push_back(complex_to_json(p));
  return Json{{"zeros", zeros}, {"poles", poles}, {"gain", zpk.gain}, {"Ts", zpk.Ts}};
}

FeedbackParams feedback_from_json(const Json& j, FeedbackParams p) {
  p.a1 = j.value("a1", p.a1);
  p.a2 = j.value("a2", p.a2);
  p.b = j.value("b", p.b);
  p.Kd = j.value("Kd", p.Kd);
  p.Kp1 = j.value("Kp1", p.Kp1);
  p.Kp2 = j.value("Kp2", p.Kp2);
  p.e_switch = j.value("e_switch", p.e_switch);
  p.Ts = j.value("Ts", p.Ts);
  return p;
}

Json feedback_to_json(const FeedbackParams& p) {
  return Json{{"a1", p.a1}, {"a2", p.a2},   {"b", p.b},
              {"Kd", p.Kd}, {"Kp1", p.Kp1}, {"Kp2", p.Kp2}, {"e_switch", p.e_switch}, {"Ts", p.Ts}};
}

ReferenceProfile reference_profile_from_json(const Json& j, ReferenceProfile p) {
  p.amplitude = j.value("amplitude", p.amplitude);
  p.rise_start = j.value("rise_start", p.rise_start);
  p.rise_end = j.value("rise_end", p.rise_end);
  p.fall_start = j.value("fall_start", p.fall_start);
  p.fall_end = j.value("fall_end", p.fall_end);
  p.samples = j.value("samples", p.samples);
  return p;
}

Json reference_profile_to_json(const ReferenceProfile& p) {
  return Json{{"amplitude", p.amplitude}, {"rise_start", p.rise_start}, {"rise_end", p.rise_end},
              {"fall_start", p.fall_start}, {"fall_end", p.fall_end},   {"samples", p.samples}};
}

PwaModel model_from_json(const Json& j, const std::string& base_dir) {
  const Json& sched = require(j, "schedule");
  const std::string kind = require(sched, "kind").get<std::string>();
  std::optional<int> declared;
  if (j.contains("declared_mu_c")) declared = j.at("declared_mu_c").get<int>();

  if (kind == "monolithic-printhead") {
    const StateSpace plant = zpk_to_state_space(zpk_from_json(require(sched, "plant")));
    const SwitchingController ctrl = build_feedback_controller(feedback_from_json(require(sched, "feedback")));
    const Trajectory r = reference_from_json(sched.value("reference", Json::object()), base_dir);
    const PwaModel m = build_monolithic(plant, ctrl, r);
    return m.with_schedule(m.schedule().with_description(sched.dump()));
  }

  const Json& dims = require(j, "dims");
  const int n_x = require(dims, "n_x").get<int>();
  const int n_u = dims.value("n_u", 1);
  const int n_y = dims.value("n_y", 1);
  if (n_x <= 0 || n_u <= 0 || n_y <= 0) throw bad("dims must be positive");

  const Json& pj = require(j, "partition");
  const Json& wj = require(pj, "w");
  const Mat P = mat_from_json(require(pj, "P"), static_cast<long>(wj.size()), n_x);
  const Vec w = vec_from_json(wj);
  std::vector<std::vector<Signature>> sigs;
  for (const Json& loc : require(pj, "signatures")) {
    std::vector<Signature> set;
    for (const Json& s : loc) set.push_back(s.get<Signature>());
    sigs.push_back(std::move(set));
  }
  Partition part(P, w, std::move(sigs));
  const int nq = part.location_count();

  MatrixSchedule schedule;
  if (kind == "constant") {
    const Json& locs = require(sched, "locations");
    if (static_cast<int>(locs.size()) != nq) throw bad("schedule lists " + std::to_string(locs.size()) +
                                                       " locations, partition has " + std::to_string(nq));
    std::vector<LocationMatrices> per;
    for (const Json& l : locs) per.push_back(location_from_json(l, n_x, n_u, n_y));
    schedule = MatrixSchedule::constant(std::move(per));
  } else if (kind == "tabulated") {
    const Json& steps = require(sched, "steps");
    if (static_cast<int>(steps.size()) != nq) throw bad("tabulated schedule needs one step list per location");
    std::vector<std::vector<LocationMatrices>> per(nq);
    for (int q = 0; q < nq; ++q)
      for (const Json& l : steps[q]) per[q].push_back(location_from_json(l, n_x, n_u, n_y));
    schedule = MatrixSchedule::tabulated(sched.value("start_k", 0L), std::move(per));
  } else {
    throw bad("unknown schedule kind '" + kind + "'");
  }
  return PwaModel(n_x, n_u, n_y, std::move(part), std::move(schedule), declared);
}

Json model_to_json(const PwaModel& model) {
  Json j;
  j["dims"] = Json{{"n_x", model.n_x()}, {"n_u", model.n_u()}, {"n_y", model.n_y()}};
  Json sigs = Json::array();
  for (const auto& loc : model.partition().signatures()) sigs.push_back(loc);
  j["partition"] = Json{{"P", mat_to_json(model.partition().P())}, {"w", vec_to_json(model.partition().w())},
                        {"signatures", sigs}};
  if (model.declared_mu_c()) j["declared_mu_c"] = *model.declared_mu_c();
  const MatrixSchedule& s = model.schedule();
  if (!s.description().empty()) {
    j["schedule"] = Json::parse(s.description());
  } else if (s.horizon()) {
    Json steps = Json::array();
    for (int q = 0; q < s.locations(); ++q) {
      Json per = Json::array();
      for (long k = s.horizon()->begin; k < s.horizon()->end; ++k) per.push_back(location_to_json(s.evaluate(q, k)));
      steps.push_back(per);
    }
    j["schedule"] = Json{{"kind", "tabulated"}, {"start_k", s.horizon()->begin}, {"steps", steps}};
  } else {
    Json locs = Json::array();
    for (int q = 0; q < s.locations(); ++q) locs.push_back(location_to_json(s.evaluate(q, 0)));
    j["schedule"] = Json{{"kind", "constant"}, {"locations", locs}};
  }
  return j;
}

Json inverse_to_json(const InversePwaModel& inv) {
  return Json{{"role", "inverse"}, {"mu_tilde", inv.mu_tilde()}, {"source", model_to_json(inv.source())}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

LoadedModel load_model_file(const std::string& path) {
  const Json j = read_json_file(path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  LoadedModel out;
  try {
    if (j.value("role", std::string("forward")) == "inverse") {
      out.inverse_mu = require(j, "mu_tilde").get<int>();
      out.model = std::make_shared<const PwaModel>(model_from_json(require(j, "source"), base));
    } else {
      out.model = std::make_shared<const PwaModel>(model_from_json(j, base));
    }
  } catch (const Json::exception& e) {
    throw bad("'" + path + "': " + e.what());
  }
  return out;
}

BenchConfig bench_config_from_json(const Json& j, BenchConfig cfg) {
  try {
    auto model = [](const Json& m, ModelConfig base) {
      if (m.contains("plant")) base.plant = zpk_from_json(m.at("plant"));
      if (m.contains("feedback")) base.feedback = feedback_from_json(m.at("feedback"), base.feedback);
      return base;
    };
    if (j.contains("truth")) cfg.truth = model(j.at("truth"), cfg.truth);
    if (j.contains("control")) cfg.control = model(j.at("control"), cfg.control);
    if (j.contains("noise")) {
      const Json& n = j.at("noise");
      cfg.sigma_process = n.value("sigma_process", cfg.sigma_process);
      cfg.sigma_measure = n.value("sigma_measure", cfg.sigma_measure);
      cfg.seed = n.value("seed", cfg.seed);
    }
    if (j.contains("reference")) cfg.reference = reference_profile_from_json(j.at("reference"), cfg.reference);
    cfg.n_truth = j.value("n_truth", cfg.n_truth);
    cfg.n_control = j.value("n_control", cfg.n_control);
    cfg.n_edge = j.value("n_edge", cfg.n_edge);
    cfg.trials = j.value("trials", cfg.trials);
    if (j.contains("gains")) {
      const Json& g = j.at("gains");
      cfg.gains.ililc = g.value("ililc", cfg.gains.ililc);
      cfg.gains.gradient = g.value("gradient", cfg.gains.gradient);
      cfg.gains.ptype = g.value("ptype", cfg.gains.ptype);
    }
    cfg.tune_gains = j.value("tune_gains", cfg.tune_gains);
    if (j.contains("candidates")) {
      const Json& c = j.at("candidates");
      cfg.ililc_candidates = c.value("ililc", cfg.ililc_candidates);
      cfg.gradient_candidates = c.value("gradient", cfg.gradient_candidates);
      cfg.ptype_candidates = c.value("ptype", cfg.ptype_candidates);
    }
  } catch (const Json::exception& e) {
    throw bad(std::string("bench config: ") + e.what());
  }
  cfg.reference.samples = cfg.n_truth;
  return cfg;
}

Json bench_config_to_json(const BenchConfig& cfg) {
  return Json{
      {"truth", {{"plant", zpk_to_json(cfg.truth.plant)}, {"feedback", feedback_to_json(cfg.truth.feedback)}}},
      {"control", {{"plant", zpk_to_json(cfg.control.plant)}, {"feedback", feedback_to_json(cfg.control.feedback)}}},
      {"noise", {{"sigma_process", cfg.sigma_process}, {"sigma_measure", cfg.sigma_measure}, {"seed", cfg.seed}}},
      {"reference", reference_profile_to_json(cfg.reference)},
      {"n_truth", cfg.n_truth},
      {"n_control", cfg.n_control},
      {"n_edge", cfg.n_edge},
      {"trials", cfg.trials},
      {"gains", {{"ililc", cfg.gains.ililc}, {"gradient", cfg.gains.gradient}, {"ptype", cfg.gains.ptype}}},
      {"tune_gains", cfg.tune_gains},
      {"candidates",
       {{"ililc", cfg.ililc_candidates}, {"gradient", cfg.gradient_candidates}, {"ptype", cfg.ptype_candidates}}}};
}

Json to_json(const RelativeDegreeReport& r) {
  Json w = Json::array();
  for (const auto& s : r.witnesses)
    w.push_back(Json{{"degree", s.degree}, {"locations", s.locations}, {"coefficient", s.coefficient}});
  Json j{{"mu_q", r.mu_q}, {"mu_tilde", r.mu_tilde}, {"witnesses", w}};
  j["mu_c"] = r.mu_c ? Json(*r.mu_c) : Json(nullptr);
  return j;
}

Json to_json(const AssumptionReport& r) {
  Json v = Json::array();
  for (const auto& a : r.verdicts)
    v.push_back(Json{{"id", a.id}, {"pass", a.pass}, {"evidence", a.evidence}, {"detail", a.detail}});
  Json j{{"verdicts", v}};
  if (r.degrees) j["relative_degree"] = to_json(*r.degrees);
  if (r.Po.size()) j["Po"] = mat_to_json(r.Po);
  if (r.wo.size()) j["wo"] = vec_to_json(r.wo);
  return j;
}

Json to_json(const Decoupling& d) {
  return Json{{"n_s", d.n_s},
              {"n_u", d.n_u},
              {"stable_eigs", d.stable_eigs},
              {"unstable_eigs", d.unstable_eigs},
              {"max_stable_eig", d.max_stable_eig},
              {"min_unstable_eig", std::isfinite(d.min_unstable_eig) ? Json(d.min_unstable_eig) : Json(nullptr)},
              {"block_residual", d.block_residual},
              {"hyperbolicity_margin",
               std::isfinite(d.hyperbolicity_margin) ? Json(d.hyperbolicity_margin) : Json(nullptr)},
              {"anchor_key", d.anchor_key},
              {"anchor_k", d.anchor_k},
              {"distinct_matrices", d.distinct_matrices}};
}

Json to_json(const StableInversionReport& r) {
  auto finite = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return Json{{"switching", r.switching},
              {"n_s", r.n_s},
              {"n_u", r.n_u},
              {"block_residual", r.block_residual},
              {"hyperbolicity_margin", finite(r.hyperbolicity_margin)},
              {"max_stable_eig", r.max_stable_eig},
              {"min_unstable_eig", finite(r.min_unstable_eig)},
              {"chi_u_initial_norm", r.chi_u_initial_norm},
              {"chi_s_final_norm", r.chi_s_final_norm},
              {"sup_abar", r.sup_abar},
              {"sup_inverse_abar_u", r.sup_inverse_abar_u},
              {"forcing_start", r.forcing_start},
              {"forcing_end", r.forcing_end},
              {"max_state_norm", r.max_state_norm},
              {"lead_pad", r.lead_pad},
              {"trail_pad", r.trail_pad}};
}

Json to_json(const Error& e) {
  Json j{{"error", error_code_name(e.code())}, {"code", static_cast<int>(e.code())}, {"message", e.message()}};
  if (!e.assumption().empty()) j["assumption"] = e.assumption();
  if (e.step()) j["k"] = *e.step();
  if (!e.evidence().empty()) j["evidence"] = e.evidence();
  return j;
}

}  // namespace pwainv
