#include "mthin/cli.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace mthin::cli {

namespace {

Json point_json(const Point& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

Point point_from(const Json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) throw InputError(ctx + ": expected a point");
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw InputError(ctx + ": expected a point");
    p(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return p;
}

std::string timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// shortest text that reads back to the same double
std::string csv_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct JobContext {
  const RunConfig& cfg;
  const Json& job;
  std::string ctx;
  std::optional<ScalingProfile> profile;
  std::optional<DomainDescriptor> domain;

  JobContext(const RunConfig& c, const Json& j) : cfg(c), job(j), ctx("job '" + j.at("name").get<std::string>() + "'") {
    if (job.contains("process")) profile = make_profile(cfg.processes.at(job["process"].get<std::string>()));
    if (job.contains("domain")) domain = make_domain(cfg.domains.at(job["domain"].get<std::string>()));
    if (profile && domain && profile->dimension() != domain->dim())
      throw InputError(ctx + ": process and domain dimensions differ");
  }

  const Json& set_decl() const { return cfg.sets.at(job.at("set").get<std::string>()); }
  SetDescriptor set() const { return make_set(set_decl(), *domain); }
  int integer(const char* key) const { return job.at(key).get<int>(); }
  double number(const char* key) const { return job.at(key).get<double>(); }
  std::string text(const char* key) const { return job.at(key).get<std::string>(); }
  std::uint64_t seed() const { return job.at("seed").get<std::uint64_t>(); }

  Point z_or_origin() const {
    return job.contains("z") ? point_from(job["z"], ctx + ".z") : Point::Zero(domain->dim());
  }

  ReferencePoint reference(Mode mode, const Point& z) const {
    const Json& r = job.at("reference");
    if (mode == Mode::Infinity || (r.contains("mode") && r["mode"] == "infinity"))
      return reference_point_infinity(*profile, *domain);
    if (r.contains("x0")) return reference_point_at(*profile, *domain, point_from(r["x0"], ctx + ".reference.x0"));
    const Point zr = r.contains("z") ? point_from(r["z"], ctx + ".reference.z") : z;
    return reference_point_finite(*profile, *domain, zr);
  }
};

Json hypotheses(const ScalingProfile& profile) {
  const ScalingCertificate c = check_weak_scaling(profile, 1e-4, 1e4, 64);
  Json h;
  h["weak_scaling_local"] = c.local.pass;
  h["weak_scaling_global"] = c.global.tested ? Json(c.global.pass) : Json(nullptr);
  return h;
}

struct JobOutput {
  Json result;
  std::vector<std::string> flags;
  std::optional<std::string> csv;
};

JobOutput run_decompose(const JobContext& jc) {
  JobOutput out;
  const Box window{point_from(jc.job.at("window").at("lo"), jc.ctx + ".window.lo"),
                   point_from(jc.job.at("window").at("hi"), jc.ctx + ".window.hi")};
  std::ostringstream csv;
  const int d = jc.domain->dim();
  csv << "index,exponent,side,dist_boundary,diam";
  for (int i = 0; i < d; ++i) csv << ",center_" << i;
  for (int i = 0; i < d; ++i) csv << ",lattice_" << i;
  csv << "\n";
  if (window.dim() != d) throw InputError(jc.ctx + ": window dimension does not match the domain");
  if (window.empty()) {
    std::cerr << "warning: " << jc.ctx << ": empty window, no cubes\n";
    out.flags.emplace_back("empty window");
    out.result = {{"cube_count", 0}, {"empty_warning", true}};
    out.csv = csv.str();
    return out;
  }
  std::optional<SetDescriptor> focus;
  if (jc.job.contains("focus")) focus = make_set(jc.cfg.sets.at(jc.job["focus"].get<std::string>()), *jc.domain);
  const WhitneyDecomposition dec =
      whitney_decompose(*jc.domain, window, jc.number("side_min"), focus ? &focus->region() : nullptr,
                        jc.job.at("max_cubes").get<std::size_t>());
  std::size_t violations = 0;
  for (const auto& c : dec.cubes) {
    if (c.dist_boundary < c.diam * (1 - 1e-12) || c.dist_boundary > 4.0 * c.diam * (1 + 1e-12)) ++violations;
    csv << c.index << "," << c.exponent << "," << csv_number(c.side) << "," << csv_number(c.dist_boundary) << ","
        << csv_number(c.diam);
    for (int i = 0; i < d; ++i) csv << "," << csv_number(c.center(i));
    for (int i = 0; i < d; ++i) csv << "," << c.lattice[static_cast<std::size_t>(i)];
    csv << "\n";
  }
  if (dec.empty_warning) {
    std::cerr << "warning: " << jc.ctx << ": no Whitney cubes in the window\n";
    out.flags.emplace_back("empty decomposition");
  }
  if (dec.truncated) out.flags.emplace_back("cube budget exhausted");
  out.result = {{"cube_count", dec.cubes.size()},
                {"unresolved_count", dec.unresolved_count},
                {"unresolved_volume", dec.unresolved_volume},
                {"empty_warning", dec.empty_warning},
                {"truncated", dec.truncated},
                {"base_exponent", dec.base_exponent},
                {"whitney_violations", violations}};
  out.csv = csv.str();
  return out;
}

JobOutput run_capacity_ball(const JobContext& jc) {
  JobOutput out;
  std::vector<double> radii;
  if (jc.job.contains("radii")) {
    for (const auto& r : jc.job["radii"]) radii.push_back(r.get<double>());
  } else {
    const auto& e = jc.job.at("r_exponents");
    for (int k = e.at(0).get<int>(); k <= e.at(1).get<int>(); ++k) radii.push_back(std::ldexp(1.0, k));
  }
  if (radii.empty()) throw InputError(jc.ctx + ": no radii");
  Json records = Json::array();
  std::vector<double> lr;
  std::vector<double> lc;
  for (double r : radii) {
    const EnergyResult e = ball_capacity(*jc.profile, r, jc.integer("n"), jc.seed());
    Json rec = to_json(e);
    rec["r"] = r;
    records.push_back(rec);
    lr.push_back(std::log(r));
    lc.push_back(std::log(e.capacity));
    for (const auto& f : e.flags) out.flags.push_back("r=" + csv_number(r) + ": " + f);
  }
  out.result["records"] = records;
  if (jc.job.at("slope").get<bool>() && radii.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
      mx += lr[i];
      my += lc[i];
    }
    mx /= static_cast<double>(lr.size());
    my /= static_cast<double>(lr.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
      sxx += (lr[i] - mx) * (lr[i] - mx);
      sxy += (lr[i] - mx) * (lc[i] - my);
    }
    out.result["slope"] = sxy / sxx;
    if (const auto a = jc.profile->stable_alpha()) out.result["expected_slope"] = jc.profile->dimension() - *a;
  }
  return out;
}

JobOutput run_capacity_set(const JobContext& jc) {
  JobOutput out;
  const SetDescriptor E = jc.set();
  const std::string kernel = jc.text("kernel");
  EnergyResult e;
  if (kernel == "free") {
    e = capacity_of(free_kernel(*jc.profile), E.region(), jc.integer("n"), jc.seed());
  } else if (kernel == "domain") {
    e = green_energy_gamma_u(*jc.profile, *jc.domain, {}, E.region(), jc.integer("n"), jc.seed());
  } else {
    throw InputError(jc.ctx + ": kernel must be 'free' or 'domain'");
  }
  out.result = to_json(e);
  out.flags = e.flags;
  return out;
}

JobOutput run_energy_gamma(const JobContext& jc) {
  JobOutput out;
  const SetDescriptor E = jc.set();
  UFunction u;
  const std::string uname = jc.text("u");
  if (uname == "g") {
    u = reference_function(*jc.profile, *jc.domain, jc.reference(Mode::FiniteAt, jc.z_or_origin()));
  } else if (uname != "one") {
    throw InputError(jc.ctx + ": u must be 'g' or 'one'");
  }
  const std::string kernel = jc.text("kernel");
  if (kernel != "free" && kernel != "domain") throw InputError(jc.ctx + ": kernel must be 'free' or 'domain'");
  const EnergyResult e = green_energy_gamma_u(*jc.profile, *jc.domain, u, E.region(), jc.integer("n"), jc.seed(),
                                              kernel == "free" ? KernelChoice::Free : KernelChoice::Domain);
  out.result = to_json(e);
  out.flags = e.flags;
  return out;
}

JobOutput run_criterion(const JobContext& jc) {
  JobOutput out;
  const std::string method = jc.text("method");
  const Mode mode = jc.text("mode") == "finite" ? Mode::FiniteAt : Mode::Infinity;
  CriterionOptions o;
  o.n_min = jc.job.at("n_range").at(0).get<int>();
  o.n_max = jc.job.at("n_range").at(1).get<int>();
  o.n_points = jc.integer("n");
  o.n_points_max = jc.integer("n_max_points");
  o.cube_points = jc.integer("cube_points");
  o.cube_budget = jc.job.at("cube_budget").get<std::size_t>();
  o.rel_tol = jc.number("rel_tol");
  o.seed = jc.seed();
  o.hardy_check = jc.job.at("hardy_check").get<bool>();
  o.tail.margin = jc.number("margin");
  o.tail.residual_threshold = jc.number("residual_threshold");
  const std::string form = jc.text("form");
  if (form != "full" && form != "simplified") throw InputError(jc.ctx + ": form must be 'full' or 'simplified'");
  o.form = form == "full" ? IntegralForm::Full : IntegralForm::Simplified;

  const SetDescriptor E = jc.set();
  CriterionReport rep;
  if (method == "graph") {
    const auto f = E.profile_function();
    if (!f) throw InputError(jc.ctx + ": the graph test needs a subgraph-type set");
    rep = graph_test(*f, mode, jc.domain->dim(), o);
  } else if (mode == Mode::FiniteAt) {
    const Point z = jc.z_or_origin();
    if (method == "aikawa_c11") {
      rep = aikawa_sum_c11(*jc.profile, *jc.domain, E, z, o);
    } else {
      const ReferencePoint ref = jc.reference(mode, z);
      if (method == "wiener") rep = wiener_series_finite(*jc.profile, *jc.domain, ref, E, z, o);
      if (method == "aikawa") rep = aikawa_sum_finite(*jc.profile, *jc.domain, ref, E, z, o);
      if (method == "integral") rep = integral_test_finite(*jc.profile, *jc.domain, ref, E, z, o);
    }
  } else {
    if (method == "aikawa_c11") throw InputError(jc.ctx + ": aikawa_c11 is a finite-point method");
    if (!jc.profile->has_global()) throw CapabilityError(jc.ctx + ": infinity mode requires (H2) global scaling indices");
    const ReferencePoint ref = jc.reference(mode, Point::Zero(jc.domain->dim()));
    if (method == "wiener") rep = wiener_series_infinity(*jc.profile, *jc.domain, ref, E, o);
    if (method == "aikawa") rep = aikawa_sum_infinity(*jc.profile, *jc.domain, ref, E, o);
    if (method == "integral") rep = integral_test_infinity(*jc.profile, *jc.domain, ref, E, o);
  }
  out.result = to_json(rep);
  out.flags = rep.flags;
  std::ostringstream csv;
  csv << "index,term,partial_sum\n";
  for (std::size_t i = 0; i < rep.terms.size(); ++i)
    csv << csv_number(rep.indices[i]) << "," << csv_number(rep.terms[i]) << "," << csv_number(rep.partial_sums[i])
        << "\n";
  out.csv = csv.str();
  return out;
}

JobOutput run_kernel_eval(const JobContext& jc) {
  JobOutput out;
  const std::string kernel = jc.text("kernel");
  const ScalingProfile& P = *jc.profile;
  const DomainDescriptor& D = *jc.domain;
  const int d = D.dim();
  std::ostringstream csv;
  std::size_t rows = 0;
  const bool pairwise = kernel == "free" || kernel == "halfspace" || kernel == "c11" || kernel == "kappa_fat";
  if (pairwise) {
    for (int i = 0; i < d; ++i) csv << "x_" << i << ",";
    for (int i = 0; i < d; ++i) csv << "y_" << i << ",";
    csv << "value,provenance\n";
    std::optional<ReferencePoint> ref;
    if (kernel == "kappa_fat") ref = jc.reference(Mode::FiniteAt, jc.z_or_origin());
    const Json& pairs = jc.job.at("pairs");
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::string c = jc.ctx + ".pairs[" + std::to_string(k) + "]";
      const Point x = point_from(pairs[k].at(0), c);
      const Point y = point_from(pairs[k].at(1), c);
      if (x.size() != d || y.size() != d) throw InputError(c + ": dimension mismatch");
      KernelEnvelope v{};
      if (kernel == "free") v = green_free(P, x, y);
      if (kernel == "halfspace") v = green_halfspace(P, x, y);
      if (kernel == "c11") v = green_c11(P, D, x, y);
      if (kernel == "kappa_fat") v = green_kappa_fat(P, D, *ref, x, y, find_witness(D, *ref, x, y));
      for (int i = 0; i < d; ++i) csv << csv_number(x(i)) << ",";
      for (int i = 0; i < d; ++i) csv << csv_number(y(i)) << ",";
      csv << csv_number(v.value) << "," << to_string(v.provenance) << "\n";
      ++rows;
    }
  } else if (kernel == "g" || kernel == "martin_finite" || kernel == "martin_infinity") {
    for (int i = 0; i < d; ++i) csv << "x_" << i << ",";
    csv << "value,provenance\n";
    const Point z = jc.z_or_origin();
    std::optional<ReferencePoint> ref;
    if (kernel != "martin_infinity") ref = jc.reference(Mode::FiniteAt, z);
    const std::string form = jc.job.value("form", "");
    const Json& points = jc.job.at("points");
    for (std::size_t k = 0; k < points.size(); ++k) {
      const Point x = point_from(points[k], jc.ctx + ".points[" + std::to_string(k) + "]");
      if (x.size() != d) throw InputError(jc.ctx + ": point dimension mismatch");
      std::string prov = "Reference";
      double v = 0.0;
      if (kernel == "g") {
        v = g_reference(P, D, *ref, x);
      } else if (kernel == "martin_finite") {
        const KernelEnvelope e = martin_finite(P, D, *ref, x, z, form == "kappa_fat" ? MartinForm::KappaFat : MartinForm::C11);
        v = e.value;
        prov = to_string(e.provenance);
      } else {
        const KernelEnvelope e =
            martin_infinity(P, D, x, form == "green" ? MartinInfinityForm::GreenTimesNorm : MartinInfinityForm::Envelope);
        v = e.value;
        prov = to_string(e.provenance);
      }
      for (int i = 0; i < d; ++i) csv << csv_number(x(i)) << ",";
      csv << csv_number(v) << "," << prov << "\n";
      ++rows;
    }
  } else {
    throw InputError(jc.ctx + ": unknown kernel '" + kernel + "'");
  }
  out.result = {{"kernel", kernel}, {"rows", rows}};
  out.csv = csv.str();
  return out;
}

JobOutput run_scaling_check(const JobContext& jc) {
  JobOutput out;
  const ScalingCertificate c = check_weak_scaling(*jc.profile, jc.number("t_min"), jc.number("t_max"), jc.integer("grid"));
  out.result = to_json(c);
  if (!c.local.pass) out.flags.emplace_back("local weak scaling failed");
  if (c.global.tested && !c.global.pass) out.flags.emplace_back("global weak scaling failed");
  return out;
}

JobOutput run_quasi_additivity(const JobContext& jc) {
  JobOutput out;
  const Json& decl = jc.set_decl();
  if (decl.at("type") != "whitney_subfamily")
    throw InputError(jc.ctx + ": quasi-additivity needs a whitney_subfamily set");
  const auto cubes = whitney_selection(decl, *jc.domain);
  const SetDescriptor E = jc.set();
  const UFunction u = reference_function(*jc.profile, *jc.domain, jc.reference(Mode::FiniteAt, jc.z_or_origin()));
  const QuasiAdditivityReport r =
      quasi_additivity_diagnostic(*jc.profile, *jc.domain, u, E.region(), cubes, jc.integer("n"), jc.seed());
  out.result = to_json(r);
  if (!r.subadditive) out.flags.emplace_back("subadditivity violated");
  return out;
}

JobOutput dispatch(const JobContext& jc, const std::string& cmd) {
  if (cmd == "decompose") return run_decompose(jc);
  if (cmd == "capacity_ball") return run_capacity_ball(jc);
  if (cmd == "capacity_set") return run_capacity_set(jc);
  if (cmd == "energy_gamma") return run_energy_gamma(jc);
  if (cmd == "criterion") return run_criterion(jc);
  if (cmd == "kernel_eval") return run_kernel_eval(jc);
  if (cmd == "scaling_check") return run_scaling_check(jc);
  if (cmd == "quasi_additivity") return run_quasi_additivity(jc);
  throw InputError("unknown command '" + cmd + "'");
}

}  // namespace

Json to_json(const EnergyResult& r) {
  return {{"energy", r.energy},
          {"capacity", r.capacity},
          {"bounds",
           {{"energy_lower", r.lower_bound},
            {"energy_upper", r.upper_bound},
            {"capacity_lower", r.capacity_lower},
            {"capacity_upper", r.capacity_upper}}},
          {"N", r.n_points},
          {"iterations", r.iterations},
          {"certified", r.certified},
          {"flags", r.flags}};
}

Json to_json(const CriterionReport& r) {
  Json terms = Json::array();
  for (std::size_t i = 0; i < r.terms.size(); ++i) terms.push_back({{"index", r.indices[i]}, {"term", r.terms[i]}});
  return {{"method", to_string(r.method)},
          {"mode", to_string(r.mode)},
          {"z", r.z ? point_json(*r.z) : Json(nullptr)},
          {"terms", terms},
          {"partial_sums", r.partial_sums},
          {"tail_fit",
           {{"model", r.tail_fit.model},
            {"exponent", r.tail_fit.exponent},
            {"ratio", r.tail_fit.ratio},
            {"residual", r.tail_fit.residual},
            {"points", r.tail_fit.points}}},
          {"verdict", to_string(r.verdict)},
          {"budget",
           {{"n_min", r.budget.n_min},
            {"n_max", r.budget.n_max},
            {"cube_count", r.budget.cube_count},
            {"n_points", r.budget.n_points}}},
          {"flags", r.flags},
          {"notes", r.notes}};
}

Json to_json(const ScalingCertificate& c) {
  const auto regime = [](const RegimeCheck& r) {
    return Json{{"tested", r.tested}, {"pass", r.pass},           {"a_lo", r.a_lo},
                {"a_hi", r.a_hi},     {"exponent_lo", r.exponent_lo}, {"exponent_hi", r.exponent_hi}};
  };
  return {{"local", regime(c.local)}, {"global", regime(c.global)}, {"pass", c.pass()}};
}

Json to_json(const QuasiAdditivityReport& r) {
  return {{"gamma_union", r.gamma_union},
          {"gamma_sum", r.gamma_sum},
          {"ratio", r.ratio},
          {"subadditive", r.subadditive},
          {"pieces", r.pieces}};
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, p);
}

std::string strip_timestamp(const std::string& json_text) {
  Json j = Json::parse(json_text);
  j.erase("generated_at");
  return j.dump(2);
}

std::vector<JobOutcome> run_jobs(const RunConfig& config, const RunOptions& options) {
  std::vector<const Json*> selected;
  for (const auto& job : config.jobs) {
    const std::string cmd = job.at("command").get<std::string>();
    if (!options.commands.empty() && !options.commands.count(cmd)) continue;
    if (options.job && job.at("name").get<std::string>() != *options.job) continue;
    selected.push_back(&job);
  }
  const std::string dir = options.output_dir.value_or(config.output_dir);
  const bool stamp = options.timestamp.value_or(config.timestamp);

  std::vector<JobOutcome> outcomes(selected.size());
  parallel_for(selected.size(), [&](std::size_t i) {
    const Json& job = *selected[i];
    JobOutcome& oc = outcomes[i];
    oc.name = job.at("name").get<std::string>();
    oc.command = job.at("command").get<std::string>();
    try {
      const JobContext jc(config, job);
      JobOutput res = dispatch(jc, oc.command);
      Json cfg;
      cfg["job"] = job;
      if (job.contains("process")) cfg["process"] = config.processes.at(job["process"].get<std::string>());
      if (job.contains("domain")) cfg["domain"] = config.domains.at(job["domain"].get<std::string>());
      if (job.contains("set")) cfg["set"] = config.sets.at(job["set"].get<std::string>());
      Json report;
      report["job"] = oc.name;
      report["command"] = oc.command;
      report["config"] = cfg;
      report["result"] = res.result;
      report["flags"] = res.flags;
      if (jc.profile) report["hypotheses"] = hypotheses(*jc.profile);
      if (stamp) report["generated_at"] = timestamp_now();
      const std::string base = (std::filesystem::path(dir) / oc.name).string();
      write_atomic(base + ".json", report.dump(2) + "\n");
      oc.files.push_back(base + ".json");
      if (res.csv) {
        write_atomic(base + ".csv", *res.csv);
        oc.files.push_back(base + ".csv");
      }
      oc.report = std::move(report);
    } catch (const Error& e) {
      oc.exit_code = e.exit_code();
      oc.message = e.what();
    } catch (const Json::exception& e) {
      oc.exit_code = 2;
      oc.message = "job '" + oc.name + "': " + e.what();
    } catch (const std::filesystem::filesystem_error& e) {
      oc.exit_code = 2;
      oc.message = e.what();
    }
  });
  return outcomes;
}

std::vector<std::string> consistency_lines(const std::vector<JobOutcome>& outcomes) {
  std::map<std::string, std::vector<const JobOutcome*>> groups;
  for (const auto& oc : outcomes) {
    if (oc.command != "criterion" || oc.exit_code != 0) continue;
    const Json& job = oc.report.at("config").at("job");
    Json key = {{"set", job.at("set")}, {"domain", job.at("domain")}, {"mode", job.at("mode")}};
    if (job.contains("z")) key["z"] = job["z"];
    groups[key.dump()].push_back(&oc);
  }
  std::vector<std::string> lines;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    const Json k = Json::parse(key);
    std::ostringstream os;
    std::set<std::string> decided;
    std::ostringstream detail;
    for (const auto* m : members) {
      const std::string v = m->report.at("result").at("verdict").get<std::string>();
      if (v != "Indeterminate") decided.insert(v);
      detail << " " << m->name << "=" << v;
    }
    os << "consistency set=" << k.at("set").get<std::string>() << " mode=" << k.at("mode").get<std::string>() << ": "
       << (decided.size() <= 1 ? "agree" : "disagree") << " (" << detail.str().substr(1) << ")";
    lines.push_back(os.str());
  }
  return lines;
}

int exit_code(const std::vector<JobOutcome>& outcomes) {
  for (const auto& oc : outcomes)
    if (oc.exit_code != 0) return oc.exit_code;
  return 0;
}

}  // namespace mthin::cli
