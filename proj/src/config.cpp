#include "mthin/cli.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mthin::cli {

namespace {

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) { throw InputError(ctx + ": " + msg); }

const Json& field(const Json& j, const char* key, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(ctx, std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const char* key, const std::string& ctx) {
  const Json& v = field(j, key, ctx);
  if (!v.is_number()) fail(ctx, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double number_or(const Json& j, const char* key, double def, const std::string& ctx) {
  return j.contains(key) ? number(j, key, ctx) : def;
}

std::string text(const Json& j, const char* key, const std::string& ctx) {
  const Json& v = field(j, key, ctx);
  if (!v.is_string()) fail(ctx, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const Json& v, const std::string& ctx) {
  if (!v.is_array()) fail(ctx, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(ctx, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Point to_point(const Json& v, const std::string& ctx) {
  const auto xs = numbers(v, ctx);
  if (xs.empty()) fail(ctx, "empty point");
  return Eigen::Map<const Point>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Box to_box(const Json& v, const std::string& ctx) {
  Box b{to_point(field(v, "lo", ctx), ctx + ".lo"), to_point(field(v, "hi", ctx), ctx + ".hi")};
  if (b.lo.size() != b.hi.size()) fail(ctx, "lo and hi differ in dimension");
  return b;
}

ScalingIndices to_indices(const Json& v, const std::string& ctx) {
  return {number(v, "delta_lo", ctx), number(v, "delta_hi", ctx), number_or(v, "a_lo", 1.0, ctx),
          number_or(v, "a_hi", 1.0, ctx)};
}

std::map<std::string, Json> named(const Json& root, const char* key, bool required) {
  std::map<std::string, Json> out;
  if (!root.contains(key)) {
    if (required) fail("config", std::string("missing section '") + key + "'");
    return out;
  }
  const Json& list = root.at(key);
  if (!list.is_array()) fail(key, "expected an array of declarations");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string ctx = std::string(key) + "[" + std::to_string(i) + "]";
    const std::string name = text(list[i], "name", ctx);
    if (!out.emplace(name, list[i]).second) fail(ctx, "duplicate name '" + name + "'");
  }
  return out;
}

const std::set<std::string> kCommands = {"decompose",    "capacity_ball", "capacity_set",   "energy_gamma",
                                         "criterion",    "kernel_eval",   "scaling_check", "quasi_additivity"};

// Fills in a reference to a declaration: explicit name, or the only one declared.
void resolve_ref(Json& job, const char* key, const std::map<std::string, Json>& decls, const std::string& ctx) {
  if (job.contains(key)) {
    if (!job[key].is_string()) fail(ctx, std::string("field '") + key + "' must name a declaration");
    if (!decls.count(job[key].get<std::string>()))
      fail(ctx, std::string("unknown ") + key + " '" + job[key].get<std::string>() + "'");
    return;
  }
  if (decls.size() != 1) fail(ctx, std::string("field '") + key + "' is required");
  job[key] = decls.begin()->first;
}

void set_default(Json& job, const char* key, const Json& value) {
  if (!job.contains(key)) job[key] = value;
}

}  // namespace

GraphFunction make_graph(const Json& decl) {
  const std::string ctx = "graph";
  const std::string type = text(decl, "type", ctx);
  if (type == "constant") return GraphFunction(ConstantGraph{number(decl, "value", ctx)});
  if (type == "sinusoid") {
    return GraphFunction(SinusoidGraph{number(decl, "amplitude", ctx), number_or(decl, "frequency", 1.0, ctx),
                                       number_or(decl, "phase", 0.0, ctx), number_or(decl, "offset", 0.0, ctx),
                                       static_cast<int>(number_or(decl, "axis", 0.0, ctx))});
  }
  if (type == "power") return GraphFunction(PowerGraph{number_or(decl, "c", 1.0, ctx), number(decl, "p", ctx)});
  if (type == "tabulated") {
    return GraphFunction(TabulatedGraph{numbers(field(decl, "x", ctx), ctx + ".x"),
                                        numbers(field(decl, "y", ctx), ctx + ".y"), number(decl, "lipschitz", ctx)});
  }
  fail(ctx, "unknown graph type '" + type + "'");
}

ScalingProfile make_profile(const Json& decl) {
  const std::string ctx = "process '" + text(decl, "name", "process") + "'";
  const std::string family = text(decl, "family", ctx);
  const int dim = static_cast<int>(number_or(decl, "dim", 2.0, ctx));
  std::optional<ScalingProfile> p;
  if (family == "isotropic_stable") {
    p = ScalingProfile::isotropic_stable(number(decl, "alpha", ctx), dim);
  } else if (family == "stable_mixture") {
    std::vector<StableComponent> comps;
    const Json& list = field(decl, "components", ctx);
    if (!list.is_array()) fail(ctx, "components must be an array");
    for (const auto& c : list) comps.push_back({number(c, "alpha", ctx), number(c, "weight", ctx)});
    p = ScalingProfile::stable_mixture(std::move(comps), dim);
  } else if (family == "tabulated") {
    TabulatedMonotone tab{numbers(field(decl, "t", ctx), ctx + ".t"), numbers(field(decl, "psi", ctx), ctx + ".psi")};
    std::optional<ScalingIndices> global;
    if (decl.contains("global") && !decl["global"].is_null()) global = to_indices(decl["global"], ctx + ".global");
    return ScalingProfile(std::move(tab), dim, to_indices(field(decl, "local", ctx), ctx + ".local"), global);
  } else {
    fail(ctx, "unknown family '" + family + "'");
  }
  // explicit overrides; "global": null withdraws the global indices
  ScalingIndices local = decl.contains("local") ? to_indices(decl["local"], ctx + ".local") : p->local();
  std::optional<ScalingIndices> global = p->global();
  if (decl.contains("global")) {
    global = decl["global"].is_null() ? std::nullopt : std::optional(to_indices(decl["global"], ctx + ".global"));
  }
  return ScalingProfile(p->family(), dim, local, global);
}

DomainDescriptor make_domain(const Json& decl) {
  const std::string ctx = "domain '" + text(decl, "name", "domain") + "'";
  const std::string type = text(decl, "type", ctx);
  const double kappa = number_or(decl, "kappa", 0.25, ctx);
  const double r_loc = number_or(decl, "r_loc", 0.5, ctx);
  const int dim = static_cast<int>(number_or(decl, "dim", 2.0, ctx));
  if (type == "half_space") return DomainDescriptor::half_space(dim, kappa, r_loc);
  if (type == "half_space_like")
    return DomainDescriptor::half_space_like(make_graph(field(decl, "h", ctx)), dim, kappa, r_loc);
  if (type == "graph") return DomainDescriptor::graph(make_graph(field(decl, "h", ctx)), dim, kappa, r_loc);
  if (type == "cube_union") {
    std::vector<Box> cubes;
    const Json& list = field(decl, "cubes", ctx);
    if (!list.is_array()) fail(ctx, "cubes must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) cubes.push_back(to_box(list[i], ctx + ".cubes[" + std::to_string(i) + "]"));
    return DomainDescriptor::cube_union(std::move(cubes), kappa, r_loc);
  }
  fail(ctx, "unknown domain type '" + type + "'");
}

std::vector<WhitneyCube> whitney_selection(const Json& decl, const DomainDescriptor& domain) {
  const std::string ctx = "set '" + text(decl, "name", "set") + "'";
  const Box window = to_box(field(decl, "window", ctx), ctx + ".window");
  const double side_min = number_or(decl, "side_min", std::ldexp(1.0, -10), ctx);
  const WhitneyDecomposition dec = whitney_decompose(domain, window, side_min);
  std::vector<WhitneyCube> out;
  if (decl.contains("indices")) {
    for (double v : numbers(decl["indices"], ctx + ".indices")) {
      const auto i = static_cast<std::size_t>(v);
      if (v < 0 || i >= dec.cubes.size()) fail(ctx, "cube index out of range");
      out.push_back(dec.cubes[i]);
    }
  } else {
    // a band: the first `count` cubes of one size
    const Json& band = field(decl, "band", ctx);
    const int exponent = static_cast<int>(number(band, "exponent", ctx + ".band"));
    const auto count = static_cast<std::size_t>(number(band, "count", ctx + ".band"));
    for (const auto& c : dec.cubes) {
      if (c.exponent == exponent && out.size() < count) out.push_back(c);
    }
    if (out.size() < count) fail(ctx, "band has fewer cubes than requested");
  }
  return out;
}

SetDescriptor make_set(const Json& decl, const DomainDescriptor& domain) {
  const std::string ctx = "set '" + text(decl, "name", "set") + "'";
  const std::string type = text(decl, "type", ctx);
  if (type == "power_cusp") return SetDescriptor::power_cusp(domain, number_or(decl, "c", 1.0, ctx), number(decl, "p", ctx));
  if (type == "subgraph") return SetDescriptor::subgraph(domain, make_graph(field(decl, "f", ctx)));
  if (type == "box") return SetDescriptor::explicit_union({to_box(decl, ctx)}, domain.dim());
  if (type == "explicit_union") {
    std::vector<Box> boxes;
    const Json& list = field(decl, "boxes", ctx);
    if (!list.is_array()) fail(ctx, "boxes must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) boxes.push_back(to_box(list[i], ctx + ".boxes[" + std::to_string(i) + "]"));
    return SetDescriptor::explicit_union(std::move(boxes), domain.dim());
  }
  if (type == "empty") return SetDescriptor::explicit_union({}, domain.dim());
  if (type == "whitney_subfamily") {
    const auto cubes = whitney_selection(decl, domain);
    std::vector<std::size_t> idx;
    std::vector<Box> boxes;
    for (const auto& c : cubes) {
      idx.push_back(c.index);
      boxes.push_back(c.box());
    }
    return SetDescriptor::whitney_subfamily(std::move(idx), std::move(boxes));
  }
  fail(ctx, "unknown set type '" + type + "'");
}

RunConfig parse_config(const Json& root) {
  if (!root.is_object()) fail("config", "top level must be an object");
  RunConfig cfg;
  cfg.processes = named(root, "processes", false);
  cfg.domains = named(root, "domains", false);
  cfg.sets = named(root, "sets", false);
  if (root.contains("output")) {
    const Json& out = root["output"];
    if (out.contains("directory")) cfg.output_dir = text(out, "directory", "output");
    if (out.contains("timestamp")) {
      if (!out["timestamp"].is_boolean()) fail("output", "field 'timestamp' must be a boolean");
      cfg.timestamp = out["timestamp"].get<bool>();
    }
  }
  // declarations are validated eagerly so errors point at the declaration
  for (const auto& [name, d] : cfg.processes) make_profile(d);
  for (const auto& [name, d] : cfg.domains) make_domain(d);

  const Json& jobs = field(root, "jobs", "config");
  if (!jobs.is_array()) fail("jobs", "expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Json job = jobs[i];
    const std::string ctx0 = "jobs[" + std::to_string(i) + "]";
    const std::string name = text(job, "name", ctx0);
    const std::string ctx = "job '" + name + "'";
    if (!names.insert(name).second) fail(ctx, "duplicate job name");
    const std::string cmd = text(job, "command", ctx);
    if (!kCommands.count(cmd)) fail(ctx, "unknown command '" + cmd + "'");

    const bool needs_process = cmd != "decompose";
    const bool needs_domain = cmd != "capacity_ball" && cmd != "scaling_check";
    const bool needs_set = cmd == "capacity_set" || cmd == "energy_gamma" || cmd == "criterion" ||
                           cmd == "quasi_additivity";
    if (needs_process) resolve_ref(job, "process", cfg.processes, ctx);
    if (needs_domain) resolve_ref(job, "domain", cfg.domains, ctx);
    if (needs_set) resolve_ref(job, "set", cfg.sets, ctx);

    set_default(job, "seed", 1);
    if (cmd == "decompose") {
      field(job, "window", ctx);
      set_default(job, "side_min", std::ldexp(1.0, -10));
      set_default(job, "max_cubes", 0);
    } else if (cmd == "capacity_ball") {
      if (!job.contains("radii")) set_default(job, "r_exponents", Json::array({-4, 0}));
      set_default(job, "n", 600);
      set_default(job, "slope", true);
    } else if (cmd == "capacity_set") {
      set_default(job, "n", 600);
      set_default(job, "kernel", "free");
    } else if (cmd == "energy_gamma") {
      set_default(job, "n", 600);
      set_default(job, "kernel", "domain");
      set_default(job, "u", "g");
      set_default(job, "reference", Json::object());
    } else if (cmd == "criterion") {
      const std::string method = text(job, "method", ctx);
      static const std::set<std::string> methods = {"wiener", "aikawa", "aikawa_c11", "integral", "graph"};
      if (!methods.count(method)) fail(ctx, "unknown method '" + method + "'");
      set_default(job, "mode", "finite");
      const std::string mode = text(job, "mode", ctx);
      if (mode != "finite" && mode != "infinity") fail(ctx, "mode must be 'finite' or 'infinity'");
      set_default(job, "n_range", mode == "finite" ? Json::array({3, 24}) : Json::array({1, 20}));
      set_default(job, "n", 600);
      set_default(job, "n_max_points", 4096);
      set_default(job, "cube_points", 50);
      set_default(job, "cube_budget", 1 << 18);
      set_default(job, "form", "simplified");
      set_default(job, "rel_tol", 1e-6);
      set_default(job, "margin", 0.05);
      set_default(job, "residual_threshold", 1.0);
      set_default(job, "hardy_check", true);
      set_default(job, "reference", Json::object());
    } else if (cmd == "kernel_eval") {
      text(job, "kernel", ctx);
      set_default(job, "reference", Json::object());
    } else if (cmd == "scaling_check") {
      set_default(job, "t_min", 1e-6);
      set_default(job, "t_max", 1e6);
      set_default(job, "grid", 200);
    } else if (cmd == "quasi_additivity") {
      set_default(job, "n", 200);
      set_default(job, "reference", Json::object());
    }
    cfg.jobs.push_back(std::move(job));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  Json root;
  try {
    root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return parse_config(root);
}

}  // namespace mthin::cli
