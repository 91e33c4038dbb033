#include "folia/lab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "folia/bunching.hpp"
#include "folia/conjugacy.hpp"
#include "folia/estimation.hpp"
#include "folia/sections.hpp"

namespace folia {

void run_gallery(const ExperimentConfig& cfg, std::map<std::string, std::string>& artifacts);

const char* lab_version() { return "0.1.0"; }

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double to_double(const std::string& field, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (...) {
        throw ConfigError(field + ": not a number: '" + v + "'");
    }
}

long to_long(const std::string& field, const std::string& v) {
    try {
        size_t pos = 0;
        long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return n;
    } catch (...) {
        throw ConfigError(field + ": not an integer: '" + v + "'");
    }
}

bool to_bool(const std::string& field, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(field + ": not a boolean: '" + v + "'");
}

} // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot read '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();

    ExperimentConfig cfg;
    cfg.raw_text = buffer.str();

    std::istringstream lines(cfg.raw_text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        std::string field = section + "." + key;

        if (section == "system") {
            if (key == "kind") cfg.kind = val;
            else if (key == "matrix") {
                std::istringstream ms(val);
                double a, b, c, d;
                if (!(ms >> a >> b >> c >> d))
                    throw ConfigError("system.matrix: expected 4 integers");
                cfg.matrix << a, b, c, d;
            } else if (key == "delta") cfg.delta = to_double(field, val);
            else if (key == "epsilon") cfg.eps = to_double(field, val);
            else if (key == "base_shape") cfg.base_shape = val;
            else if (key == "fiber_shape") cfg.fiber_shape = val;
            else throw ConfigError("config: unknown field " + field);
        } else if (section == "experiment") {
            if (key == "kind") cfg.experiment = val;
            else if (key == "side") cfg.side = val;
            else if (key == "gallery") cfg.gallery = val;
            else throw ConfigError("config: unknown field " + field);
        } else if (section == "numeric") {
            if (key == "grid") cfg.grid = static_cast<int>(to_long(field, val));
            else if (key == "seed") cfg.seed = static_cast<uint64_t>(to_long(field, val));
            else if (key == "scale_min") cfg.scale_min = to_double(field, val);
            else if (key == "scale_max") cfg.scale_max = to_double(field, val);
            else if (key == "n_pairs") cfg.n_pairs = static_cast<int>(to_long(field, val));
            else if (key == "tol") cfg.tol = to_double(field, val);
            else if (key == "margin") cfg.margin = to_double(field, val);
            else throw ConfigError("config: unknown field " + field);
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = val;
            else if (key == "plots") cfg.plots = to_bool(field, val);
            else throw ConfigError("config: unknown field " + field);
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }

    if (cfg.experiment.empty())
        throw ConfigError("experiment.kind: missing");
    if (cfg.grid < 2 || cfg.grid > (1 << 20))
        throw ConfigError("numeric.grid: out of the documented range [2, 2^20]");
    if (!(cfg.tol > 0 && cfg.tol < 1))
        throw ConfigError("numeric.tol: must lie in (0,1)");
    if (!(cfg.scale_min > 0 && cfg.scale_min < cfg.scale_max))
        throw ConfigError("numeric.scale_min/scale_max: need 0 < scale_min < scale_max");
    if (cfg.n_pairs < 1 || cfg.n_pairs > 1000000)
        throw ConfigError("numeric.n_pairs: out of the documented range");
    return cfg;
}

SystemSpec system_from_config(const ExperimentConfig& cfg) {
    SystemSpec sys = make_system(parse_system_kind(cfg.kind), cfg.matrix, cfg.delta, cfg.eps,
                                 parse_base_shape(cfg.base_shape),
                                 parse_fiber_shape(cfg.fiber_shape));
    // load-time C1-smallness proxy: reject configs violating the bunching
    // ordering with a 10% margin
    if (sys.delta > 0 || sys.eps > 0)
        validate_system_bunching(sys, sys.dim() == 2 ? 16 : 8);
    return sys;
}

namespace {

namespace fs = std::filesystem;

struct ArtifactWriter {
    fs::path dir;
    std::map<std::string, std::string> artifacts; // name -> content

    void add(const std::string& name, const std::string& content) {
        artifacts[name] = content;
    }

    void flush(const ExperimentConfig& cfg, double wall_ms) {
        fs::create_directories(dir);
        for (const auto& [name, content] : artifacts) {
            std::ofstream out(dir / name, std::ios::binary);
            out << content;
        }
        char buf[64];
        std::ostringstream mf;
        mf << "key,value\n";
        mf << "version," << lab_version() << '\n';
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(cfg.raw_text)));
        mf << "config_hash," << buf << '\n';
        mf << "seed," << cfg.seed << '\n';
        mf << "experiment," << cfg.experiment << '\n';
        std::snprintf(buf, sizeof(buf), "%.1f", wall_ms);
        mf << "wall_time_ms," << buf << '\n';
        for (const auto& [name, content] : artifacts) {
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(fnv1a64(content)));
            mf << "artifact:" << name << ',' << buf << '\n';
        }
        std::ofstream out(dir / "manifest.csv", std::ios::binary);
        out << mf.str();
    }
};

// minimal SVG scatter/line plot for optional --plots output
std::string svg_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                     const std::string& title, bool loglog) {
    const int W = 640, H = 420, M = 50;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    std::vector<double> px(xs.size()), py(ys.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        px[i] = loglog ? std::log10(std::max(xs[i], 1e-300)) : xs[i];
        py[i] = loglog ? std::log10(std::max(ys[i], 1e-300)) : ys[i];
        xlo = std::min(xlo, px[i]);
        xhi = std::max(xhi, px[i]);
        ylo = std::min(ylo, py[i]);
        yhi = std::max(yhi, py[i]);
    }
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    s << "<rect x='" << M << "' y='" << M << "' width='" << W - 2 * M << "' height='"
      << H - 2 * M << "' fill='none' stroke='black'/>\n";
    s << "<text x='" << W / 2 << "' y='20' text-anchor='middle'>" << title << "</text>\n";
    char buf[160];
    for (size_t i = 0; i < px.size(); ++i) {
        double cx = M + (px[i] - xlo) / (xhi - xlo) * (W - 2 * M);
        double cy = H - M - (py[i] - ylo) / (yhi - ylo) * (H - 2 * M);
        std::snprintf(buf, sizeof(buf), "<circle cx='%.1f' cy='%.1f' r='1.5' fill='steelblue'/>\n",
                      cx, cy);
        s << buf;
    }
    s << "</svg>\n";
    return s.str();
}

Transversal vertical_transversal(double b1, double radius) {
    Vec base(2), dir(2);
    base << b1, 0.0;
    dir << 0.0, 1.0;
    return make_transversal(wrap(base), dir, radius);
}

void run_bunching(const ExperimentConfig& cfg, ArtifactWriter& w) {
    SystemSpec sys = system_from_config(cfg);
    BracketingReport rep = bracketing(sys, cfg.grid, cfg.margin);
    std::ostringstream os;
    write_bracketing_csv(rep, os);
    w.add("bunching.csv", os.str());

    std::ostringstream ex;
    ex << "condition,mode,theta_max,satisfiable\n";
    char buf[128];
    for (const char* name :
         {"Eu", "Es", "Ecu", "Ecs", "Ec", "Wu_C2", "Ws_C2", "Wu_C1", "Ws_C1", "ThmA_cu",
          "ThmA_cs", "ThmA_c", "ThmB_in_cu", "ThmB_in_cs", "ThmB_full"}) {
        for (ExponentMode mode : {ExponentMode::Uniform, ExponentMode::Pointwise}) {
            PredictedExponent pe = predicted_exponent(rep, parse_exponent_condition(name), mode);
            std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%d", name,
                          mode == ExponentMode::Uniform ? "uniform" : "pointwise", pe.theta_max,
                          pe.satisfiable ? 1 : 0);
            ex << buf << '\n';
        }
    }
    w.add("exponents.csv", ex.str());
}

void run_section(const ExperimentConfig& cfg, ArtifactWriter& w) {
    FiberContraction fc = make_sine_shear_example();
    int grid = std::max(cfg.grid, 256);
    InvariantSectionResult res =
        solve_invariant_section(fc, [](double) { return 0.0; }, cfg.tol, 80, grid);

    std::ostringstream os;
    write_section_csv(res.section, os);
    w.add("section.csv", os.str());
    std::ostringstream cl;
    write_convergence_csv(res.log, cl);
    w.add("section_convergence.csv", cl.str());

    // empirical Holder exponent of the computed section via the pointwise
    // evaluator (interpolation would floor the fine scales)
    int depth = res.iterations + 5;
    Map1D section_map = [&fc, depth](double x) {
        return invariant_section_value(fc, [](double) { return 0.0; }, x, depth);
    };
    Vec base(2), dir(2);
    base << 0, 0;
    dir << 1, 0;
    Transversal tau = make_transversal(wrap(base), dir, 1.0);
    auto samples = sample_pairs(section_map, tau, cfg.n_pairs, cfg.scale_min, cfg.scale_max,
                                cfg.seed);
    HolderFit fit = fit_holder(samples);
    std::ostringstream fs_;
    write_fit_csv(fit, fs_);
    w.add("fit_summary.csv", fs_.str());

    if (cfg.plots) {
        std::vector<double> xs, ys;
        for (int i = 0; i < res.section.size(); i += std::max(1, res.section.size() / 2000)) {
            xs.push_back(res.section.grid_x(i));
            ys.push_back(res.section.values[i]);
        }
        w.add("section.svg", svg_plot(xs, ys, "invariant section", false));
    }
}

void run_holonomy(const ExperimentConfig& cfg, ArtifactWriter& w) {
    SystemSpec sys = system_from_config(cfg);
    if (sys.dim() != 2)
        throw ConfigError("experiment.holonomy: needs a 2-dimensional system");
    LeafSide side;
    if (cfg.side == "u") side = LeafSide::U;
    else if (cfg.side == "s") side = LeafSide::S;
    else throw ConfigError("experiment.side: must be u or s");

    ExactSplitting es = exact_splitting_linear(sys.matrix);
    Vec dir = side == LeafSide::U ? es.e_u : es.e_s;
    if (std::fabs(dir[0]) < 0.2)
        throw ConfigError("experiment.holonomy: leaf direction too vertical for the "
                          "built-in transversal pair");

    FoliationModel model = make_strong_model(sys, side, 0.08, std::min(cfg.tol, 1e-9));
    Transversal from = vertical_transversal(0.0, 0.2);
    Transversal to = vertical_transversal(0.5, 0.55);
    auto path = straight_leaf_path(sys, from.base, dir, 0.5 / dir[0], 40);

    // recenter the target transversal on the image of the path start so the
    // fitted offsets never straddle the coordinate seam
    TorusPoint center_image = holonomy_map(model, from, to, path, from.base);
    to = make_transversal(center_image, to.direction, 0.3);

    Map1D hol = [&](double s) { return holonomy_offset(model, from, to, path, s); };
    double smax = std::min(cfg.scale_max, 0.19);
    auto samples = sample_pairs(hol, from, cfg.n_pairs, std::min(cfg.scale_min, smax / 16), smax,
                                cfg.seed);
    std::ostringstream os;
    write_samples_csv(samples, os);
    w.add("holonomy_samples.csv", os.str());

    HolderFit fit = fit_holder(samples);
    std::ostringstream fs_;
    write_fit_csv(fit, fs_);
    w.add("fit_summary.csv", fs_.str());

    // verdict against the strong-holonomy bunching prediction
    BracketingReport rep = bracketing(sys, std::min(cfg.grid, 64), cfg.margin);
    PredictedExponent pe = predicted_exponent(
        rep, side == LeafSide::U ? ExponentCondition::Wu_C2 : ExponentCondition::Ws_C2);
    std::ostringstream vs;
    char buf[160];
    vs << "condition,theta_pred,envelope_theta,margin,pass\n";
    bool pass = verdict(fit, pe, 0.05);
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%d",
                  exponent_condition_name(pe.condition), pe.theta_max, fit.envelope_theta, 0.05,
                  pass ? 1 : 0);
    vs << buf << '\n';
    w.add("verdict.csv", vs.str());

    if (cfg.plots) {
        std::vector<double> xs, ys;
        for (const auto& s : samples) {
            xs.push_back(s.d_in);
            ys.push_back(s.d_out);
        }
        w.add("holonomy.svg", svg_plot(xs, ys, "holonomy pairs (log-log)", true));
    }
}

void run_conjugacy(const ExperimentConfig& cfg, ArtifactWriter& w) {
    SystemSpec g = system_from_config(cfg);
    ConjugacyField field;
    char nvbuf[64];
    (void)nvbuf;
    if (g.dim() == 2) {
        SystemSpec f = make_system(SystemKind::LinearAnosov, g.matrix, 0, 0);
        AmalgamSpec spec = make_amalgam(f, g, 0.1);
        BracketingReport rep = bracketing(g, 16, cfg.margin);
        int N = stable_depth(rep.sup_nu, std::max(2 * spec.c0_dist, 1e-3), cfg.tol);
        double tail = std::pow(rep.sup_nu, N) * std::max(2 * spec.c0_dist, 1e-3);
        int n = std::min(cfg.grid, 64);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Vec x(2);
                x << (i + 0.5) / n, (j + 0.5) / n;
                TorusPoint p(x);
                TorusPoint s = leaf_conjugacy_stable(spec, p, N);
                double resid = torus_dist(apply(g, s), leaf_conjugacy_stable(spec, amalgam(spec, p), N));
                field.inputs.push_back(p);
                field.outputs.push_back(s);
                field.tail_bound.push_back(tail);
                field.equiv_residual.push_back(resid);
            }
    } else {
        SystemSpec f = make_system(SystemKind::SkewProduct, g.matrix, 0, g.eps,
                                   BaseShape::None, g.fiber_shape);
        int n = std::min(cfg.grid, 32);
        const int nz = 4;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < nz; ++k) {
                    Vec x(3);
                    x << (i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / nz;
                    TorusPoint p(x);
                    CenterConjugacyResult res = leaf_conjugacy_center(f, g, p, 0.12, cfg.tol);
                    // equivariance at the leaf level: base components of
                    // h(f(p)) and g(h(p)) agree
                    TorusPoint lhs = leaf_conjugacy_center(f, g, apply(f, p), 0.12, cfg.tol).image;
                    TorusPoint rhs = apply(g, res.image);
                    Vec d = lift_near(lhs, rhs.coords) - rhs.coords;
                    field.inputs.push_back(p);
                    field.outputs.push_back(res.image);
                    field.tail_bound.push_back(res.fiber_move);
                    field.equiv_residual.push_back(std::hypot(d[0], d[1]));
                }
    }
    std::ostringstream os;
    write_conjugacy_csv(field, os);
    w.add("conjugacy.csv", os.str());
}

void run_suspension(const ExperimentConfig& cfg, ArtifactWriter& w) {
    SystemSpec g = system_from_config(cfg);
    if (g.dim() != 3)
        throw ConfigError("experiment.suspension: needs a skew-product system");
    SystemSpec f = make_system(SystemKind::SkewProduct, g.matrix, 0, g.eps, BaseShape::None,
                               g.fiber_shape);
    SuspensionLoop loop = make_suspension_loop(f, g);

    DetRng rng(cfg.seed);
    std::ostringstream os;
    os << "p1,p2,p3,h1,h2,h3,c1,c2,c3,diff\n";
    char buf[400];
    int n = 64;
    for (int i = 0; i < n; ++i) {
        Vec x(3);
        x << rng.uniform01(), rng.uniform01(), rng.uniform01();
        TorusPoint p(x);
        TorusPoint hol = suspension_holonomy(loop, p, p, 16, 0.2, cfg.tol);
        TorusPoint direct = leaf_conjugacy_center(f, g, p, 0.2, cfg.tol).image;
        double diff = torus_dist(hol, direct);
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", x[0], x[1],
                      x[2], hol.coords[0], hol.coords[1], hol.coords[2], direct.coords[0],
                      direct.coords[1], direct.coords[2], diff);
        os << buf << '\n';
    }
    w.add("suspension.csv", os.str());
}

void run_leafexp(const ExperimentConfig& cfg, ArtifactWriter& w) {
    SystemSpec sys = system_from_config(cfg);
    Vec p(2);
    p << 0.02, 0.01;
    LeafExpansivityReport rep = leaf_expansivity_probe(sys, wrap(p), 25);
    std::ostringstream os;
    os << "k,d_pair,d_control\n";
    char buf[160];
    int k_range = (static_cast<int>(rep.per_k_pair.size()) - 1) / 2;
    for (int k = -k_range; k <= k_range; ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", k, rep.per_k_pair[k + k_range],
                      rep.per_k_control[k + k_range]);
        os << buf << '\n';
    }
    w.add("leafexp.csv", os.str());
    std::ostringstream sm;
    sm << "key,value\n";
    std::snprintf(buf, sizeof(buf), "initial_dist,%.17g\n", rep.initial_dist);
    sm << buf;
    std::snprintf(buf, sizeof(buf), "max_pair_dist,%.17g\n", rep.max_pair_dist);
    sm << buf;
    std::snprintf(buf, sizeof(buf), "max_control_dist,%.17g\n", rep.max_control_dist);
    sm << buf;
    w.add("leafexp_summary.csv", sm.str());
}

} // namespace

int run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ArtifactWriter writer;
    writer.dir = cfg.out_dir;

    if (cfg.experiment == "bunching") run_bunching(cfg, writer);
    else if (cfg.experiment == "section") run_section(cfg, writer);
    else if (cfg.experiment == "holonomy") run_holonomy(cfg, writer);
    else if (cfg.experiment == "conjugacy") run_conjugacy(cfg, writer);
    else if (cfg.experiment == "suspension") run_suspension(cfg, writer);
    else if (cfg.experiment == "leafexp") run_leafexp(cfg, writer);
    else if (cfg.experiment == "gallery") run_gallery(cfg, writer.artifacts);
    else throw ConfigError("experiment.kind: unknown value '" + cfg.experiment + "'");

    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0).count();
    writer.flush(cfg, wall_ms);
    return 0;
}

} // namespace folia
