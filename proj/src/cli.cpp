#include "caslab/cli.hpp"

#include "caslab/beltrami.hpp"
#include "caslab/cas.hpp"
#include "caslab/config.hpp"
#include "caslab/examples.hpp"
#include "caslab/holonomy.hpp"
#include "caslab/transport.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>

namespace caslab::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;
    std::optional<double> tol;
    std::optional<int> threads;
    std::string format;
};

struct Ctx {
    std::string sub;
    json cfg = json::object();
    fs::path config_dir = ".";
    fs::path out;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string format;
    std::optional<int> grid;
    std::optional<double> tol;
    std::string hash;
    std::ostream* log = nullptr;
};

// ---- config access -------------------------------------------------------

const json& section(const Ctx& c, const char* name) {
    static const json empty = json::object();
    if (!c.cfg.contains(name)) return empty;
    const json& t = c.cfg.at(name);
    if (!t.is_object()) throw UsageError(std::string("config: '") + name + "' must be a table");
    return t;
}

std::string where(const char* table, const char* key) { return std::string(table) + "." + key; }

double real_of(const json& t, const char* table, const char* key, double dflt) {
    if (!t.contains(key)) return dflt;
    if (!t.at(key).is_number()) throw UsageError("config: " + where(table, key) + " must be a number");
    return t.at(key).get<double>();
}

int int_of(const json& t, const char* table, const char* key, int dflt) {
    if (!t.contains(key)) return dflt;
    if (!t.at(key).is_number_integer()) throw UsageError("config: " + where(table, key) + " must be an integer");
    return t.at(key).get<int>();
}

bool bool_of(const json& t, const char* table, const char* key, bool dflt) {
    if (!t.contains(key)) return dflt;
    if (!t.at(key).is_boolean()) throw UsageError("config: " + where(table, key) + " must be true or false");
    return t.at(key).get<bool>();
}

std::string str_of(const json& t, const char* table, const char* key, const std::string& dflt) {
    if (!t.contains(key)) return dflt;
    if (!t.at(key).is_string()) throw UsageError("config: " + where(table, key) + " must be a string");
    return t.at(key).get<std::string>();
}

cplx as_cplx(const json& v, const std::string& what) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
    throw UsageError("config: " + what + " must be a number or [re, im]");
}

cplx cplx_of(const json& t, const char* table, const char* key, cplx dflt) {
    return t.contains(key) ? as_cplx(t.at(key), where(table, key)) : dflt;
}

std::vector<cplx> coeffs_of(const json& t, const char* table, const char* key, std::vector<cplx> dflt) {
    if (!t.contains(key)) return dflt;
    const json& a = t.at(key);
    if (!a.is_array() || a.empty()) throw UsageError("config: " + where(table, key) + " must be a non-empty coefficient list");
    std::vector<cplx> out;
    for (const auto& v : a) out.push_back(as_cplx(v, where(table, key)));
    return out;
}

cplx poly(const std::vector<cplx>& c, cplx z) {
    cplx acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
    return acc;
}

std::vector<cplx> derivative(const std::vector<cplx>& c) {
    std::vector<cplx> d;
    for (std::size_t k = 1; k < c.size(); ++k) d.push_back(double(k) * c[k]);
    if (d.empty()) d.push_back(0.0);
    return d;
}

template <class F>
auto as_usage(F&& f) {
    try {
        return f();
    } catch (const DomainError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

MetricFamily family_of(const json& t, const char* table) {
    return as_usage([&] { return family_from_name(str_of(t, table, "family", "riemannian")); });
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

GridDomain domain_of(const Ctx& c, const char* kind_dflt, int n_dflt, double l_dflt, cplx origin_dflt) {
    const json& t = section(c, "domain");
    std::string kind = str_of(t, "domain", "kind", kind_dflt);
    int n = c.grid ? *c.grid : int_of(t, "domain", "n", n_dflt);
    double lx = real_of(t, "domain", "lx", l_dflt), ly = real_of(t, "domain", "ly", lx);
    cplx origin = cplx_of(t, "domain", "origin", origin_dflt);
    if (!(lx > 0 && ly > 0)) throw UsageError("config: domain lengths must be positive");
    if (kind == "torus") {
        if (!power_of_two(n)) throw UsageError("config: torus grid " + std::to_string(n) + " is not a power of two");
        return GridDomain::torus(n, n, lx, ly, origin);
    }
    if (kind == "window") {
        if (n < 8) throw UsageError("config: window grid needs at least 8 nodes per side");
        return GridDomain::window(n, n, lx, ly, origin);
    }
    throw UsageError("config: domain.kind must be \"torus\" or \"window\"");
}

struct MetricChoice {
    ComplexMetric h;
    std::optional<ManufacturedSphere> sphere;
};

MetricChoice metric_of(const Ctx& c, const GridDomain& d, const char* kind_dflt) {
    const json& t = section(c, "metric");
    std::string kind = str_of(t, "metric", "kind", kind_dflt);
    if (kind == "flat") return {constant_metric(d, cplx_of(t, "metric", "lambda", 1.0)), {}};
    if (kind == "hyperbolic") {
        for (int k : {0, d.ny - 1})
            if (d.node(0, k).imag() <= 0) throw UsageError("config: hyperbolic metric needs a window above the real axis");
        auto lam = make_field(d, [](cplx z) { return 1.0 / (z.imag() * z.imag()); });
        return {make_metric(lam, ComplexField::constant(d, 0.0), ComplexField::constant(d, 1.0)), {}};
    }
    if (kind == "bers") {
        auto a = coeffs_of(t, "metric", "f1", {0.0, 1.0});
        auto b = coeffs_of(t, "metric", "f2bar", {0.0, 1.0});
        auto f1 = make_field(d, [&](cplx z) { return poly(a, z); });
        auto f2 = make_field(d, [&](cplx z) { return poly(b, std::conj(z)); });
        return {bers_metric(f1, f2), {}};
    }
    if (kind == "sphere") {
        auto a = coeffs_of(t, "metric", "F", {0.0, 1.0, cplx(0.08, 0.05)});
        auto da = derivative(a);
        auto m = manufactured_sphere(d, [&](cplx z) { return poly(a, z); }, [&](cplx z) { return poly(da, z); });
        return {m.h, m};
    }
    if (kind == "snapshot") {
        std::string p = str_of(t, "metric", "path", "");
        if (p.empty()) throw UsageError("config: metric.path is required for snapshot metrics");
        fs::path path = fs::path(p).is_absolute() ? fs::path(p) : c.config_dir / p;
        if (!fs::exists(path)) throw UsageError("config: metric snapshot '" + path.string() + "' does not exist");
        return {load_metric(path), {}};
    }
    if (kind == "family") {
        auto fam = family_of(t, "metric");
        return {sample_family(fam, c.seed, int_of(t, "metric", "index", 0), d.nx).metric, {}};
    }
    throw UsageError("config: unknown metric.kind '" + kind + "'");
}

CubicPair cubic_of(const Ctx& c, const GridDomain& d, cplx phi_dflt, cplx psibar_dflt) {
    const json& t = section(c, "cubic");
    CubicPair q;
    if (t.contains("phi") && t.at("phi").is_array() && t.at("phi").size() != 2)
        throw UsageError("config: cubic.phi must be a number or [re, im]; use phi_coeffs for polynomials");
    if (t.contains("phi_coeffs")) {
        auto a = coeffs_of(t, "cubic", "phi_coeffs", {});
        q.phi = make_field(d, [&](cplx z) { return poly(a, z); });
    } else {
        q.phi = ComplexField::constant(d, cplx_of(t, "cubic", "phi", phi_dflt));
    }
    if (t.contains("psibar_coeffs")) {
        auto a = coeffs_of(t, "cubic", "psibar_coeffs", {});
        q.psibar = make_field(d, [&](cplx z) { return poly(a, std::conj(z)); });
    } else {
        q.psibar = ComplexField::constant(d, cplx_of(t, "cubic", "psibar", psibar_dflt));
    }
    return q;
}

// [[j, k, c], ...] for c z^j zbar^k
PowerSeries2D series_of(const json& t, const char* key, int N, const json& dflt) {
    const json& terms = t.contains(key) ? t.at(key) : dflt;
    if (!terms.is_array()) throw UsageError(std::string("config: transport.") + key + " must be a list of [j, k, c]");
    PowerSeries2D s(N);
    for (const auto& e : terms) {
        if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw UsageError(std::string("config: transport.") + key + " entries must be [j, k, c]");
        int j = e[0].get<int>(), k = e[1].get<int>();
        if (j < 0 || k < 0) throw UsageError(std::string("config: transport.") + key + " exponents must be non-negative");
        if (j + k <= N) s.at(j, k) += as_cplx(e[2], std::string("transport.") + key);
    }
    return s;
}

// ---- output --------------------------------------------------------------

json envelope(const Ctx& c) {
    return {{"artifact_version", artifact_version()}, {"config_hash", c.hash}, {"subcommand", c.sub}, {"seed", c.seed}};
}

void emit_json(const Ctx& c, const std::string& name, json body) {
    json j = envelope(c);
    for (auto& [k, v] : body.items()) j[k] = std::move(v);
    write_json(c.out / name, j);
    *c.log << "wrote " << (c.out / name).string() << "\n";
}

void emit_text(const Ctx& c, const std::string& name, const std::string& text) {
    write_text(c.out / name, text);
    *c.log << "wrote " << (c.out / name).string() << "\n";
}

void emit_svg(const Ctx& c, const std::string& name, const std::vector<Plot>& plots) {
    std::vector<std::string> warnings;
    std::string svg = render_svg(plots, &warnings);
    for (const auto& w : warnings) *c.log << "warning: " << w << "\n";
    emit_text(c, name, svg);
}

void emit_snapshot(const Ctx& c, const std::string& name, const ComplexField& f) {
    save_snapshot(f, c.out / name);
    *c.log << "wrote " << (c.out / name).string() << "\n";
}

std::string sci(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3e", v);
    return b;
}

double interior_max(const ComplexField& f, int margin) {
    const auto& d = f.domain();
    int m = d.periodic ? 0 : margin;
    double out = 0;
    for (int k = m; k < d.ny - m; ++k)
        for (int j = m; j < d.nx - m; ++j) out = std::max(out, std::abs(f(j, k)));
    return out;
}

double rms(const ComplexField& u) {
    double s = 0;
    for (cplx v : u.values()) s += std::norm(v);
    return std::sqrt(s / double(std::max<std::size_t>(u.size(), 1)));
}

void require_json_only(const Ctx& c) {
    if (c.format == "csv") throw UsageError(c.sub + " writes JSON only; --format csv applies to ray and spectrum");
}

// ---- subcommands ---------------------------------------------------------

void cmd_solve(const Ctx& c) {
    require_json_only(c);
    GridDomain d = domain_of(c, "torus", 32, 1.0, 0.0);
    auto m = metric_of(c, d, "flat");
    d = m.h.domain();
    CubicPair q = m.sphere ? m.sphere->q : cubic_of(c, d, 2.0, 1.0);
    const json& t = section(c, "solver");
    cplx u0c = cplx_of(t, "solver", "u0", cplx(0.6, 0.1));
    double noise = real_of(t, "solver", "noise", 0.02);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<cplx> v(d.size());
    for (auto& x : v) {
        double re = U(rng), im = U(rng);
        x = u0c + noise * cplx(re, im);
    }
    ComplexField u0(d, v);
    GaussOptions opt;
    opt.tol = c.tol.value_or(real_of(t, "solver", "tol", opt.tol));
    opt.max_iter = int_of(t, "solver", "max_iter", opt.max_iter);
    if (!(opt.tol > 0)) throw UsageError("config: solver tolerance must be positive");
    if (opt.max_iter < 1) throw UsageError("config: solver.max_iter must be at least 1");
    if (m.sphere && !d.periodic) opt.boundary = m.sphere->u;
    auto sol = newton_solve(m.h, q, u0, opt);
    emit_snapshot(c, "u.casf", sol.u);
    json body = gauss_solution_to_json(sol, {{"u", "u.casf"}});
    body["initial_guess"] = {{"u0", cplx_to_json(u0c)}, {"noise", noise}};
    emit_json(c, "solution.json", body);
    *c.log << "solve: residual " << sci(sol.residual_norm) << " after " << sol.iterations << " Newton steps\n";
}

void cmd_ray(const Ctx& c) {
    GridDomain d = domain_of(c, "torus", 16, 1.0, 0.0);
    auto m = metric_of(c, d, "flat");
    d = m.h.domain();
    CubicPair q = cubic_of(c, d, 1.0, 0.0);
    const json& t = section(c, "ray");
    RaySchedule sch;
    sch.mode = as_usage([&] { return ray_mode_from_name(str_of(t, "ray", "mode", "hll")); });
    sch.params = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    if (t.contains("params")) {
        sch.params.clear();
        if (!t.at("params").is_array()) throw UsageError("config: ray.params must be a list of numbers");
        for (const auto& v : t.at("params")) {
            if (!v.is_number()) throw UsageError("config: ray.params must be a list of numbers");
            sch.params.push_back(v.get<double>());
        }
    }
    sch.step = real_of(t, "ray", "step", sch.step);
    sch.min_step = real_of(t, "ray", "min_step", sch.min_step);
    sch.max_step = real_of(t, "ray", "max_step", sch.max_step);
    sch.max_steps = int_of(t, "ray", "max_steps", sch.max_steps);
    sch.direction = cplx_of(t, "ray", "direction", sch.direction);
    if (c.tol) sch.newton.tol = *c.tol;
    as_usage([&] { sch.validate(); });
    ComplexField u0 = ComplexField::constant(d, cplx_of(t, "ray", "u0", 0.0));
    auto r = continue_ray(m.h, q, u0, sch);
    auto point = [](const RayPoint& p) {
        return json{{"t", p.t},
                    {"branch", p.branch},
                    {"s_mean", cplx_to_json(p.s_mean)},
                    {"u_mean", cplx_to_json(p.u_mean)},
                    {"e2u_mean", cplx_to_json(p.e2u_mean)},
                    {"u_rms", rms(p.u)},
                    {"eigenvalue", cplx_to_json(p.eigenvalue)},
                    {"residual", p.residual}};
    };
    json path = json::array(), samples = json::array();
    for (const auto& p : r.path) path.push_back(point(p));
    for (const auto& p : r.samples) samples.push_back(point(p));
    if (c.format != "json") emit_text(c, "ray.csv", ray_csv(r));
    emit_svg(c, "fold.svg", fold_plots(r));
    emit_json(c, "ray.json",
              {{"mode", ray_mode_name(sch.mode)},
               {"params", sch.params},
               {"branches", r.branches},
               {"fold", fold_to_json(r.fold)},
               {"path", path},
               {"samples", samples}});
    if (r.fold.detected)
        *c.log << "ray: fold at t* = " << r.fold.t_star << ", s* = " << r.fold.s_star.real() << ", " << r.branches
               << " branches\n";
    else
        *c.log << "ray: no fold, " << r.branches << " branch(es)\n";
}

std::vector<LoopPath> loops_of(const json& t, int steps) {
    json dflt = json::array({json::array({"circle", 0.0, 1.5, 0.2}), json::array({"rectangle", -0.2, 1.3, 0.4, 0.4})});
    const json& list = t.contains("loops") ? t.at("loops") : dflt;
    if (!list.is_array() || list.empty()) throw UsageError("config: holonomy.loops must be a non-empty list");
    std::vector<LoopPath> out;
    for (const auto& l : list) {
        auto bad = [] { return UsageError("config: loops are [\"circle\", cx, cy, r] or [\"rectangle\", x, y, w, h]"); };
        if (!l.is_array() || l.empty() || !l[0].is_string()) throw bad();
        for (std::size_t i = 1; i < l.size(); ++i)
            if (!l[i].is_number()) throw bad();
        std::string kind = l[0].get<std::string>();
        if (kind == "circle" && l.size() == 4) {
            if (!(l[3].get<double>() > 0)) throw bad();
            out.push_back(LoopPath::circle({l[1].get<double>(), l[2].get<double>()}, l[3].get<double>(), 64, steps));
        } else if (kind == "rectangle" && l.size() == 5) {
            out.push_back(LoopPath::rectangle({l[1].get<double>(), l[2].get<double>()}, l[3].get<double>(), l[4].get<double>(), steps));
        } else {
            throw bad();
        }
    }
    return out;
}

void cmd_holonomy(const Ctx& c) {
    require_json_only(c);
    GridDomain d = domain_of(c, "window", 48, 1.0, cplx(-0.5, 1.0));
    auto m = metric_of(c, d, "sphere");
    d = m.h.domain();
    ComplexMetric g = m.sphere ? m.sphere->g : m.h;
    CubicPair q = m.sphere ? m.sphere->q : cubic_of(c, d, 0.0, 0.0);
    const json& t = section(c, "holonomy");
    int steps = int_of(t, "holonomy", "steps", 512);
    if (steps < 1) throw UsageError("config: holonomy.steps must be positive");
    auto loops = loops_of(t, steps);
    for (const auto& l : loops) as_usage([&] { l.validate(d); });
    double grid_tol = c.tol.value_or(real_of(t, "holonomy", "grid_tol", 1e-4));
    auto conn = assemble_connection(g, q);
    auto flat = flatness_residual(conn);
    auto rep = structural_report(g, q, grid_tol);
    auto hs = integrate_loops(conn, loops, steps, c.threads);
    json arr = json::array();
    for (const auto& h : hs) {
        json j = holonomy_to_json(unimodular_project(h));
        j["raw_det_defect"] = h.det_defect;
        j["raw_identity_defect"] = (h.M - Mat3::Identity()).norm();
        j["enclosed_area"] = std::abs(h.loop.area());
        arr.push_back(j);
    }
    emit_json(c, "holonomy.json",
              {{"source", m.sphere ? "sphere" : "metric"},
               {"domain", domain_to_json(d)},
               {"flatness_max_interior", interior_max(flat, 3)},
               {"structural", structural_report_to_json(rep)},
               {"holonomies", arr}});
    *c.log << "holonomy: " << hs.size() << " loops, interior flatness " << sci(interior_max(flat, 3)) << "\n";
}

void cmd_spectrum(const Ctx& c) {
    const json& t = section(c, "spectrum");
    std::string mode = str_of(t, "spectrum", "mode", "scan");
    bool csv = c.format != "json";
    if (mode == "scan") {
        ScanOptions o;
        o.family = family_of(t, "spectrum");
        o.samples = int_of(t, "spectrum", "samples", o.samples);
        o.n = c.grid ? *c.grid : int_of(t, "spectrum", "n", o.n);
        o.seed = c.seed;
        o.shift = cplx_of(t, "spectrum", "shift", o.shift);
        o.floor = real_of(t, "spectrum", "floor", o.floor);
        o.stability = real_of(t, "spectrum", "stability", o.stability);
        o.refine = bool_of(t, "spectrum", "refine", o.refine);
        if (o.samples < 1 || o.n < 8) throw UsageError("config: spectrum scan needs samples >= 1 and n >= 8");
        auto r = invertibility_scan(o);
        json rows = json::array();
        for (const auto& row : r.rows)
            rows.push_back({{"index", row.index},
                            {"params_hash", row.params_hash},
                            {"params", row.params},
                            {"sigma_min", row.sigma_min},
                            {"sigma_min_coarse", row.sigma_min_coarse},
                            {"grid", row.grid},
                            {"numerical_kernel", row.numerical_kernel},
                            {"verdict", row.verdict}});
        if (csv) emit_text(c, "spectrum.csv", scan_csv(r));
        emit_svg(c, "spectrum.svg", scan_plots(r, o.floor));
        emit_json(c, "spectrum.json",
                  {{"mode", "scan"},
                   {"family", family_name(o.family)},
                   {"n", o.n},
                   {"shift", cplx_to_json(o.shift)},
                   {"floor", o.floor},
                   {"passed", r.passed},
                   {"skipped", r.skipped},
                   {"pass_fraction", r.pass_fraction},
                   {"rows", rows},
                   {"qualifier", "at grid scale"}});
        *c.log << "spectrum: " << r.passed << " of " << r.rows.size() << " samples above the floor\n";
        return;
    }
    if (mode != "operator") throw UsageError("config: spectrum.mode must be \"scan\" or \"operator\"");
    GridDomain d = domain_of(c, "torus", 16, 1.0, 0.0);
    auto m = metric_of(c, d, "flat");
    cplx k = cplx_of(t, "spectrum", "shift", 2.0);
    int count = int_of(t, "spectrum", "count", 12);
    if (count < 1) throw UsageError("config: spectrum.count must be positive");
    SpectrumOptions so;
    so.seed = c.seed;
    if (c.tol) so.tol = *c.tol;
    auto A = discretize_shifted(m.h, k);
    auto r = spectrum(A, count, so);
    if (csv) {
        std::string s = "index,re,im,residual\n";
        char b[128];
        for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
            std::snprintf(b, sizeof b, "%zu,%.17g,%.17g,%.17g\n", i, r.eigenvalues[i].real(), r.eigenvalues[i].imag(),
                          r.residuals[i]);
            s += b;
        }
        emit_text(c, "spectrum.csv", s);
    }
    emit_svg(c, "spectrum.svg", eigenvalue_plots(r));
    json body = spectrum_to_json(r);
    body["mode"] = "operator";
    body["shift"] = cplx_to_json(k);
    emit_json(c, "spectrum.json", body);
    *c.log << "spectrum: " << r.eigenvalues.size() << " eigenvalues, sigma_min " << sci(r.sigma_min) << "\n";
}

void cmd_verify(const Ctx& c) {
    require_json_only(c);
    const json& t = section(c, "verify");
    CatalogueOptions o;
    o.n = c.grid ? *c.grid : int_of(t, "verify", "n", o.n);
    o.margin = int_of(t, "verify", "margin", o.margin);
    o.threads = c.threads;
    if (o.n < 9 || o.margin < 0 || 2 * o.margin >= o.n) throw UsageError("config: verify needs n >= 9 and a margin below n/2");
    auto r = verify_catalogue(o);
    emit_json(c, "catalogue.json", catalogue_to_json(r));
    emit_text(c, "catalogue.md", catalogue_to_markdown(r));
    *c.log << "verify: " << r.examples.size() << " examples, " << (r.pass() ? "all checks pass" : "some checks fail") << "\n";
}

void cmd_transport(const Ctx& c) {
    require_json_only(c);
    const json& t = section(c, "transport");
    int N = int_of(t, "transport", "order", 12);
    if (N < 2 || N > 40) throw UsageError("config: transport.order must lie in [2, 40]");
    TransportOptions o;
    o.T = real_of(t, "transport", "T", 0.1);
    o.dt = real_of(t, "transport", "dt", 0.1 / 32);
    o.norm_radius = real_of(t, "transport", "radius", 0.5);
    o.growth_limit = real_of(t, "transport", "growth_limit", o.growth_limit);
    Generator Z;
    for (int m = 0; m < 10; ++m) {
        std::string key = "g" + std::to_string(m);
        if (t.contains(key)) {
            while (int(Z.terms.size()) < m) Z.terms.emplace_back(N);
            Z.terms.push_back(series_of(t, key.c_str(), N, json::array()));
        }
    }
    if (Z.terms.empty()) Z.terms.push_back(PowerSeries2D::z(N));
    json f0d = json::array({json::array({2, 1, 1.0}), json::array({0, 1, 1.0}), json::array({1, 2, 0.2})});
    json lamd = json::array({json::array({0, 0, 1.0}), json::array({1, 1, 0.3}), json::array({2, 0, 0.1}),
                             json::array({0, 3, -0.05})});
    auto f0 = series_of(t, "f0", N, f0d);
    auto lam = series_of(t, "lambda", N, lamd);
    auto mubar = series_of(t, "mubar", N, json::array({json::array({1, 0, 0.1})}));
    auto b = series_of(t, "b", N, json::array({json::array({0, 0, 1.0})}));
    if (lam(0, 0) == 0.0 || b(0, 0) == 0.0) throw UsageError("config: transport lambda and b need nonzero constant terms");
    auto g0 = MetricSeries::from_triple(lam, mubar, b);
    auto st = solve_transport(f0, Z, o);
    auto gt = transport_metric(g0, Z, o);
    auto defects = commute_check(g0, f0, Z, o);
    json hist = json::array();
    for (const auto& h : st.history) hist.push_back({{"t", h.t}, {"norm", h.norm}});
    emit_json(c, "transport.json",
              {{"order", N},
               {"T", o.T},
               {"dt", o.dt},
               {"radius", o.norm_radius},
               {"f", series_to_json(st.f)},
               {"history", hist},
               {"metric", metric_series_to_json(gt)},
               {"defects", commute_defects_to_json(defects)}});
    *c.log << "transport: curvature defect " << sci(defects.curvature) << ", Laplacian defect " << sci(defects.laplacian) << "\n";
}

void cmd_beltrami(const Ctx& c) {
    require_json_only(c);
    GridDomain d = domain_of(c, "window", 64, 2.0, cplx(-1.0, -1.0));
    const json& t = section(c, "beltrami");
    std::string kind = str_of(t, "beltrami", "mu", "radial");
    ComplexField mu;
    if (kind == "radial") {
        double k = real_of(t, "beltrami", "k", 0.3), r0 = real_of(t, "beltrami", "r0", 0.3),
               r1 = real_of(t, "beltrami", "r1", 0.6);
        if (!(std::abs(k) < 1) || !(0 <= r0 && r0 < r1)) throw UsageError("config: radial mu needs |k| < 1 and 0 <= r0 < r1");
        mu = radial_stretch_coefficient(d, k, r0, r1);
    } else if (kind == "zero") {
        mu = ComplexField::constant(d, 0.0);
    } else {
        throw UsageError("config: beltrami.mu must be \"radial\" or \"zero\"");
    }
    BeltramiOptions o;
    o.pad_factor = int_of(t, "beltrami", "pad_factor", o.pad_factor);
    o.tol = c.tol.value_or(real_of(t, "beltrami", "tol", o.tol));
    o.max_iter = int_of(t, "beltrami", "max_iter", o.max_iter);
    auto f = solve_beltrami(mu, o);
    emit_snapshot(c, "f.casf", f.f);
    emit_snapshot(c, "f_z.casf", f.f_z);
    emit_snapshot(c, "f_zbar.casf", f.f_zbar);
    emit_json(c, "beltrami.json",
              {{"domain", domain_to_json(d)},
               {"mu", kind},
               {"mu_sup", mu.max_abs()},
               {"iterations", f.iterations},
               {"residual", f.residual},
               {"contraction", f.contraction},
               {"increments", f.increments},
               {"fields", {{"f", "f.casf"}, {"f_z", "f_z.casf"}, {"f_zbar", "f_zbar.casf"}}}});
    *c.log << "beltrami: " << f.iterations << " iterations, residual " << sci(f.residual) << "\n";
}

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const TransportBreakdownError*>(&e)) return "TransportBreakdownError";
    if (dynamic_cast<const StepUnderflowError*>(&e)) return "StepUnderflowError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const SingularOperatorError*>(&e)) return "SingularOperatorError";
    if (dynamic_cast<const SingularMetricError*>(&e)) return "SingularMetricError";
    if (dynamic_cast<const PositivityError*>(&e)) return "PositivityError";
    if (dynamic_cast<const BranchError*>(&e)) return "BranchError";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "NonFiniteError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    return "Error";
}

int threads_from_env(std::ostream& err) {
    const char* v = std::getenv("CAS_LAB_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (*end || n < 1 || n > 1024) {
        err << "warning: ignoring CAS_LAB_THREADS='" << v << "'\n";
        return 0;
    }
    return int(n);
}

} // namespace

std::vector<Plot> fold_plots(const RayResult& r) {
    Plot a{"solution branches", "t", "rms |u|", {}, {}}, b{"smallest |eigenvalue|", "t", "|eigenvalue|", {}, {}};
    for (int br = 0; br < r.branches; ++br) {
        PlotSeries sa{"branch " + std::to_string(br), {}, true}, sb = sa;
        for (const auto& p : r.path)
            if (p.branch == br) {
                sa.points.emplace_back(p.t, rms(p.u));
                sb.points.emplace_back(p.t, std::abs(p.eigenvalue));
            }
        a.series.push_back(std::move(sa));
        b.series.push_back(std::move(sb));
    }
    if (r.fold.detected && r.branches >= 2 && !a.series[0].points.empty() && !a.series[1].points.empty()) {
        // the fold joins the last point of branch 0 to the first of branch 1
        double ya = 0.5 * (a.series[0].points.back().second + a.series[1].points.front().second);
        double yb = std::abs(r.fold.eigenvalue);
        if (!std::isfinite(yb)) yb = 0.5 * (b.series[0].points.back().second + b.series[1].points.front().second);
        double ts = r.fold.t_star;
        a.series[0].points.emplace_back(ts, ya);
        a.series[1].points.insert(a.series[1].points.begin(), {ts, ya});
        b.series[0].points.emplace_back(ts, yb);
        b.series[1].points.insert(b.series[1].points.begin(), {ts, yb});
        a.markers.push_back({ts, ya, "fold"});
        b.markers.push_back({ts, yb, "fold"});
    }
    return {a, b};
}

std::vector<Plot> scan_plots(const ScanReport& r, double floor) {
    Plot p{"sigma_min of the shifted operator", "sample", "sigma_min", {}, {}};
    PlotSeries fine{"sigma_min", {}, false}, coarse{"sigma_min coarse", {}, false}, fl{"floor", {}, true};
    for (const auto& row : r.rows) {
        if (row.grid == 0) continue;
        fine.points.emplace_back(row.index, row.sigma_min);
        if (row.sigma_min_coarse > 0) coarse.points.emplace_back(row.index, row.sigma_min_coarse);
    }
    if (!r.rows.empty()) {
        fl.points.emplace_back(r.rows.front().index, floor);
        fl.points.emplace_back(r.rows.back().index, floor);
    }
    p.series = {fine, coarse, fl};
    return {p};
}

std::vector<Plot> eigenvalue_plots(const SpectrumReport& r) {
    Plot p{"eigenvalues nearest 0", "Re", "Im", {}, {}};
    PlotSeries s{"eigenvalues", {}, false};
    for (cplx v : r.eigenvalues) s.points.emplace_back(v.real(), v.imag());
    p.series.push_back(s);
    return {p};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cas-lab: complex affine sphere experiments"};
    app.require_subcommand(1);
    Flags f;
    const std::vector<std::pair<const char*, const char*>> subs{
        {"solve", "Newton solve of the Gauss equation"},
        {"ray", "continuation along a twistor or HLL ray"},
        {"holonomy", "assemble the flat connection and integrate loops"},
        {"spectrum", "invertibility scan or eigenvalues of the shifted Laplacian"},
        {"verify", "verify the example catalogue"},
        {"transport", "power-series transport along a complex vector field"},
        {"beltrami", "solve a Beltrami equation"}};
    for (auto [name, desc] : subs) {
        auto* sc = app.add_subcommand(name, desc);
        sc->add_option("--config", f.config, "experiment file");
        sc->add_option("--out", f.out, "output directory");
        sc->add_option("--seed", f.seed, "random seed");
        sc->add_option("--grid", f.grid, "grid size per side");
        sc->add_option("--tol", f.tol, "solver tolerance");
        sc->add_option("--threads", f.threads, "worker threads")->check(CLI::Range(1, 1024));
        sc->add_option("--format", f.format, "table format")->check(CLI::IsMember({"json", "csv"}));
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "cas-lab: " << e.what() << "\n";
        return exit_config;
    }

    Ctx c;
    c.sub = app.get_subcommands().front()->get_name();
    c.log = &out;
    try {
        if (!f.config.empty()) {
            c.cfg = load_config(f.config);
            c.config_dir = fs::path(f.config).parent_path();
            if (c.config_dir.empty()) c.config_dir = ".";
        }
        if (c.cfg.contains("seed") && !(c.cfg.at("seed").is_number_integer() && c.cfg.at("seed").get<long long>() >= 0))
            throw UsageError("config: seed must be a non-negative integer");
        c.seed = f.seed.value_or(c.cfg.contains("seed") ? c.cfg.at("seed").get<std::uint64_t>() : 1);
        int env = threads_from_env(err);
        c.threads = f.threads ? *f.threads : env ? env : int_of(c.cfg, "config", "threads", 1);
        if (c.threads < 1) throw UsageError("config: threads must be positive");
        c.grid = f.grid;
        c.tol = f.tol;
        if (c.tol && !(*c.tol > 0)) throw UsageError("--tol must be positive");
        c.format = f.format;
        std::string outdir = f.out;
        if (c.cfg.contains("output")) {
            const json& o = section(c, "output");
            if (f.out == "out") outdir = str_of(o, "output", "dir", outdir);
        }
        c.out = outdir;
        json id = {{"subcommand", c.sub},
                   {"config", c.cfg},
                   {"seed", c.seed},
                   {"grid", c.grid ? json(*c.grid) : json(nullptr)},
                   {"tol", c.tol ? json(*c.tol) : json(nullptr)},
                   {"format", c.format}};
        c.hash = fnv1a_hex(id.dump());
        fs::create_directories(c.out);
    } catch (const ConfigError& e) {
        err << "cas-lab: config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "cas-lab: " << e.what() << "\n";
        return exit_config;
    }

    try {
        if (c.sub == "solve") cmd_solve(c);
        else if (c.sub == "ray") cmd_ray(c);
        else if (c.sub == "holonomy") cmd_holonomy(c);
        else if (c.sub == "spectrum") cmd_spectrum(c);
        else if (c.sub == "verify") cmd_verify(c);
        else if (c.sub == "transport") cmd_transport(c);
        else if (c.sub == "beltrami") cmd_beltrami(c);
        return exit_ok;
    } catch (const UsageError& e) {
        err << "cas-lab: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        json diag = envelope(c);
        diag["error"] = {{"type", error_kind(e)}, {"message", e.what()}};
        if (auto* nf = dynamic_cast<const NonFiniteError*>(&e)) diag["error"]["node"] = {nf->j, nf->k};
        if (auto* tb = dynamic_cast<const TransportBreakdownError*>(&e)) diag["error"]["time"] = tb->time;
        if (auto* su = dynamic_cast<const StepUnderflowError*>(&e)) diag["error"]["bracket"] = {su->t_lo, su->t_hi};
        try {
            write_json(c.out / "error.json", diag);
        } catch (...) {
        }
        err << "cas-lab: " << c.sub << " failed: " << e.what() << "\n";
        return exit_numerical;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace caslab::cli
