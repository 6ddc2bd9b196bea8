#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "specid/criteria.hpp"
#include "specid/error.hpp"
#include "specid/json_io.hpp"
#include "specid/kernel.hpp"
#include "specid/measure.hpp"
#include "specid/operator.hpp"
#include "specid/transform.hpp"

namespace specid::cli {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

std::string to_csv(const std::vector<SweepRecord>& records) {
    std::string s = "criterion,x_or_b,a_or_eps,value,est_abs_error\n";
    for (const auto& r : records) {
        s += r.criterion;
        for (double v : {r.x_or_b, r.a_or_eps, r.value, r.est_abs_error}) {
            s += ',';
            s += format_double(v);
        }
        s += '\n';
    }
    return s;
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(std::random_device{}());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ValidationError("cannot open output file '" + path + "' for writing");
        f << content;
        f.flush();
        if (!f) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ValidationError("failed writing output file '" + path + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ValidationError("cannot move output into place at '" + path + "'");
    }
}

namespace {

double parse_number(const std::string& text, const std::string& what) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v))
        throw ValidationError(what + ": '" + text + "' is not a finite number");
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, what));
    if (out.empty()) throw ValidationError(what + ": empty list");
    return out;
}

std::vector<double> parse_fixed(const std::string& text, std::size_t n, const std::string& what) {
    auto v = parse_list(text, what);
    if (v.size() != n) throw ValidationError(what + ": expected " + std::to_string(n) + " comma-separated numbers");
    return v;
}

ScaleGrid to_grid(const std::vector<double>& g) {
    if (g.size() != 3 || g[2] != std::floor(g[2]) || g[2] < 1 || g[2] > 1e6)
        throw ValidationError("grid: expected A0,RATIO,COUNT with a positive integer count");
    ScaleGrid s{g[0], g[1], static_cast<int>(g[2])};
    s.validate();
    return s;
}

json estimate_json(const LimitEstimate& e) {
    json j;
    j["status"] = to_string(e.status);
    j["extrapolated"] = e.extrapolated ? json(*e.extrapolated) : json(nullptr);
    j["method"] = e.method;
    j["growth_exponent"] = e.growth_exponent;
    j["fit_residual"] = e.fit_residual;
    j["last_value"] = e.samples.empty() ? json(nullptr) : json(e.samples.back().value);
    if (!e.notes.empty()) j["notes"] = e.notes;
    return j;
}

std::string estimate_line(const LimitEstimate& e) {
    std::string s = "status=" + to_string(e.status);
    s += " value=" + (e.extrapolated ? format_double(*e.extrapolated) : std::string("none"));
    s += " method=" + e.method;
    if (!e.notes.empty()) s += " notes=\"" + e.notes + "\"";
    return s;
}

void append_samples(std::vector<SweepRecord>& out, const std::string& id, double x,
                    const std::vector<LimitSample>& s) {
    for (const auto& v : s) out.push_back({id, x, v.scale, v.value, v.abs_error});
}

json records_json(const std::vector<SweepRecord>& rs) {
    json arr = json::array();
    for (const auto& r : rs)
        arr.push_back({{"criterion", r.criterion},
                       {"x_or_b", r.x_or_b},
                       {"a_or_eps", r.a_or_eps},
                       {"value", r.value},
                       {"est_abs_error", r.est_abs_error}});
    return arr;
}

// Default interval: the support widened by a tenth of its width each side.
std::pair<double, double> padded_support(const Measure& m) {
    const double lo = m.support_lower();
    const double hi = m.support_upper();
    const double pad = hi > lo ? 0.1 * (hi - lo) : 1.0;
    return {lo - pad, hi + pad};
}

struct Common {
    std::string config_path;
    std::string kernel;
    std::string grid;
    std::string alpha;
    std::string p;
    std::string interval;
    std::string out;
    std::string format;
    int jobs = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "JSON config; flags given here override its fields");
    sub->add_option("--kernel", c.kernel, "gauss | cauchy | power:D (default gauss)");
    sub->add_option("--grid", c.grid, "scale grid A0,RATIO,COUNT (default depends on the criterion)");
    sub->add_option("--alpha", c.alpha, "exponent list F[,F...] (default 0.5)");
    sub->add_option("--p", c.p, "exponent of the L^p criterion, in (0,1) (default 0.5)");
    sub->add_option("--interval", c.interval, "interval C,D (default: support widened by 10%)");
    sub->add_option("--out", c.out, "output path (default stdout)");
    sub->add_option("--format", c.format, "csv | json (default csv)");
    sub->add_option("--jobs", c.jobs, "worker threads (default 1)");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg;
    if (!c.config_path.empty()) {
        const json j = read_json_file(c.config_path);
        if (!j.is_object()) throw ValidationError(c.config_path + ": config must be a JSON object");
        check_keys(j, {"kernel", "grid", "alpha", "p", "interval", "out", "format", "jobs"}, c.config_path);
        try {
            if (j.contains("kernel")) cfg.kernel = j.at("kernel").get<std::string>();
            if (j.contains("grid")) cfg.grid = j.at("grid").get<std::vector<double>>();
            if (j.contains("alpha")) {
                cfg.alphas = j.at("alpha").is_array() ? j.at("alpha").get<std::vector<double>>()
                                                      : std::vector<double>{j.at("alpha").get<double>()};
            }
            if (j.contains("p")) cfg.p = j.at("p").get<double>();
            if (j.contains("interval")) {
                const auto v = j.at("interval").get<std::vector<double>>();
                if (v.size() != 2) throw ValidationError(c.config_path + ": interval needs two numbers");
                cfg.interval = std::make_pair(v[0], v[1]);
            }
            if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
            if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
            if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
        } catch (const json::exception& e) {
            throw ValidationError(c.config_path + ": " + e.what());
        }
    }
    if (!c.kernel.empty()) cfg.kernel = c.kernel;
    if (!c.grid.empty()) cfg.grid = parse_fixed(c.grid, 3, "--grid");
    if (!c.alpha.empty()) cfg.alphas = parse_list(c.alpha, "--alpha");
    if (!c.p.empty()) cfg.p = parse_number(c.p, "--p");
    if (!c.interval.empty()) {
        const auto v = parse_fixed(c.interval, 2, "--interval");
        cfg.interval = std::make_pair(v[0], v[1]);
    }
    if (!c.out.empty()) cfg.out = c.out;
    if (!c.format.empty()) cfg.format = c.format;
    if (c.jobs != 0) cfg.jobs = c.jobs;

    if (cfg.format != "csv" && cfg.format != "json")
        throw ValidationError("--format must be csv or json, got '" + cfg.format + "'");
    if (cfg.jobs < 1) throw ValidationError("--jobs must be at least 1");
    if (cfg.grid) to_grid(*cfg.grid);
    if (cfg.interval && !(cfg.interval->first < cfg.interval->second))
        throw ValidationError("--interval: requires C < D");
    builtin(cfg.kernel);
    return cfg;
}

ScaleGrid grid_or(const RunConfig& cfg, ScaleGrid fallback) { return cfg.grid ? to_grid(*cfg.grid) : fallback; }

void emit(const RunConfig& cfg, const std::string& content, std::ostream& out) {
    if (cfg.out.empty()) out << content;
    else write_atomic(cfg.out, content);
}

// ---------------------------------------------------------------- analyze

const std::vector<std::string> kCriteria = {"atom",         "alpha",         "pp_l2",         "ac_lp",
                                            "wavelet_atom", "wavelet_alpha", "wavelet_pp_l2", "finiteness"};

int cmd_analyze(const std::string& measure_ref, const std::vector<std::string>& criteria,
                const std::string& points, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Measure m = load_measure(measure_ref);
    const KernelSpec k = builtin(cfg.kernel);
    const std::vector<double> xs = points.empty() ? std::vector<double>{0.0} : parse_list(points, "--x");
    for (const auto& c : criteria)
        if (std::find(kCriteria.begin(), kCriteria.end(), c) == kCriteria.end())
            throw ValidationError("unknown criterion '" + c + "'");
    const auto [c0, d0] = cfg.interval.value_or(padded_support(m));

    std::vector<SweepRecord> records;
    json summaries = json::array();
    std::ostringstream lines;
    auto note = [&](const std::string& id, std::optional<double> x, std::optional<double> alpha,
                    const json& body, const std::string& line) {
        json s = body;
        s["criterion"] = id;
        if (x) s["x_or_b"] = *x;
        if (alpha) s["alpha"] = *alpha;
        summaries.push_back(s);
        lines << "summary " << id;
        if (x) lines << " x=" << format_double(*x);
        if (alpha) lines << " alpha=" << format_double(*alpha);
        lines << " " << line << "\n";
    };

    for (const auto& id : criteria) {
        if (id == "atom" || id == "wavelet_atom") {
            const auto g = grid_or(cfg, ScaleGrid::point_default());
            for (double x : xs) {
                const auto e = id == "atom" ? detect_atom(m, k, x, g, cfg.jobs)
                                            : wavelet_atom(m, derive_wavelet(k), k, x, g, 1.0, cfg.jobs);
                append_samples(records, id, x, e.samples);
                note(id, x, std::nullopt, estimate_json(e), estimate_line(e));
            }
        } else if (id == "alpha" || id == "wavelet_alpha") {
            const auto g = grid_or(cfg, ScaleGrid::point_default());
            for (double x : xs)
                for (double al : cfg.alphas) {
                    const auto e = id == "alpha" ? alpha_derivative(m, k, x, al, g, cfg.jobs)
                                                 : wavelet_alpha(m, derive_wavelet(k), k, x, al, g, 1.0, cfg.jobs);
                    append_samples(records, id, x, e.samples);
                    note(id, x, al, estimate_json(e), estimate_line(e));
                }
        } else if (id == "pp_l2" || id == "ac_lp" || id == "wavelet_pp_l2") {
            const auto g = grid_or(cfg, ScaleGrid::interval_default());
            const auto e = id == "pp_l2"   ? pp_l2_criterion(m, k, c0, d0, g, cfg.jobs)
                           : id == "ac_lp" ? ac_lp_criterion(m, k, c0, d0, cfg.p, g, cfg.jobs)
                                           : wavelet_pp_l2(m, derive_wavelet(k), c0, d0, g, cfg.jobs);
            // Interval criteria report the left end as the point column.
            append_samples(records, id, c0, e.samples);
            json body = estimate_json(e);
            body["interval"] = {c0, d0};
            note(id, std::nullopt, std::nullopt, body,
                 "interval=" + format_double(c0) + "," + format_double(d0) + " " + estimate_line(e));
        } else {
            const auto g = grid_or(cfg, ScaleGrid::point_default());
            for (double x : xs)
                for (double al : cfg.alphas) {
                    const auto r = finiteness_scan(m, k, x, al, g, cfg.jobs);
                    append_samples(records, "finiteness_kernel", x, r.kernel_samples);
                    append_samples(records, "finiteness_ratio", x, r.ratio_samples);
                    json body{{"verdict", to_string(r.kernel_side)},
                              {"kernel_side", to_string(r.kernel_side)},
                              {"ratio_side", to_string(r.ratio_side)},
                              {"kernel_growth", r.kernel_growth},
                              {"ratio_growth", r.ratio_growth},
                              {"agree", r.agree()}};
                    note(id, x, al, body,
                         "kernel=" + to_string(r.kernel_side) + " kernel_growth=" + format_double(r.kernel_growth) +
                             " ratio=" + to_string(r.ratio_side) +
                             " ratio_growth=" + format_double(r.ratio_growth));
                }
        }
    }

    if (cfg.format == "json") {
        emit(cfg, json{{"records", records_json(records)}, {"summaries", summaries}}.dump(2) + "\n", out);
        if (!cfg.out.empty()) out << lines.str();
    } else {
        emit(cfg, to_csv(records), out);
        (cfg.out.empty() ? err : out) << lines.str();
    }
    return kOk;
}

// --------------------------------------------------------------- classify

json verdict_json(const SpectralVerdict& v) {
    json atoms = json::array();
    for (const auto& a : v.detected_atoms) atoms.push_back({{"x", a.position}, {"w", a.weight}});
    return {{"interval", {v.c, v.d}},
            {"flags", {{"pp", v.pp_present}, {"ac", v.ac_present}, {"sc", v.sc_suspected}}},
            {"atoms", atoms},
            {"limits", {{"pp_l2", estimate_json(v.pp_l2_limit)}, {"ac_lp", estimate_json(v.ac_lp_limit)}}},
            {"interval_mass", v.interval_mass},
            {"ac_mass_estimate", v.ac_mass_estimate},
            {"notes", v.notes}};
}

int cmd_classify(const std::string& measure_ref, const RunConfig& cfg, std::ostream& out) {
    const Measure m = load_measure(measure_ref);
    const KernelSpec k = builtin(cfg.kernel);
    const auto [c, d] = cfg.interval.value_or(padded_support(m));
    ClassifyConfig cc;
    if (cfg.grid) cc.interval_grid = to_grid(*cfg.grid);
    cc.jobs = cfg.jobs;
    const auto v = classify_interval(m, k, c, d, cc);
    const std::string text = verdict_json(v).dump(2) + "\n";
    emit(cfg, text, out);
    if (!cfg.out.empty()) out << text;
    return kOk;
}

// --------------------------------------------------------------- operator

int cmd_operator(const std::string& op_ref, const std::string& test, const std::string& lambda_text,
                 const std::string& vector_text, int lambda_points, const RunConfig& cfg, std::ostream& out,
                 std::ostream& err) {
    const auto loaded = load_operator(op_ref);
    const auto& A = loaded.model;
    const Eigen::VectorXd f = vector_text.empty() ? loaded.f : parse_vector(vector_text, A);
    const KernelSpec k = builtin(cfg.kernel);

    std::vector<SweepRecord> records;
    json report{{"operator", A.name()}, {"test", test}};
    std::ostringstream lines;

    if (test == "spectrum") {
        const Measure mu = spectral_measure_of(A, f);
        json atoms = json::array();
        for (const auto& a : mu.atoms()) {
            atoms.push_back({{"x", a.position}, {"w", a.weight}});
            records.push_back({"eigenvalue_weight", a.position, 0.0, a.weight, 0.0});
        }
        report["atoms"] = atoms;
        if (A.finite()) report["eigen_residual"] = eigensystem(A).residual;
        lines << "spectral measure: " << mu.atoms().size() << " atoms";
        if (!A.finite()) lines << " (closed-form model " << A.name() << ")";
        lines << "\n";
    } else if (test == "point") {
        if (lambda_text.empty()) throw ValidationError("operator point test needs --lambda");
        const auto g = grid_or(cfg, ScaleGrid::point_default());
        json per = json::array();
        for (double lam : parse_list(lambda_text, "--lambda")) {
            const auto e = point_spectrum_test(A, f, lam, k, g, cfg.jobs);
            append_samples(records, "point_spectrum", lam, e.samples);
            json body = estimate_json(e);
            body["lambda"] = lam;
            body["point_spectrum"] = indicates_point_spectrum(e);
            per.push_back(body);
            lines << "lambda=" << format_double(lam) << " " << estimate_line(e)
                  << " point_spectrum=" << (indicates_point_spectrum(e) ? "yes" : "no") << "\n";
        }
        report["results"] = per;
    } else if (test == "ac") {
        if (!cfg.interval) throw ValidationError("operator ac test needs --interval");
        const auto g = grid_or(cfg, ScaleGrid::point_default());
        const auto r = ac_overlap_test(A, f, cfg.interval->first, cfg.interval->second, k, g, lambda_points, 1e-3,
                                       cfg.jobs);
        json per = json::array();
        for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
            append_samples(records, "ac_overlap", r.lambdas[i], r.limits[i].samples);
            json body = estimate_json(r.limits[i]);
            body["lambda"] = r.lambdas[i];
            per.push_back(body);
        }
        report["results"] = per;
        report["fraction"] = r.fraction;
        report["ac_overlap"] = r.overlap;
        lines << "ac overlap fraction=" << format_double(r.fraction) << " overlap=" << (r.overlap ? "true" : "false")
              << "\n";
    } else if (test == "interval") {
        if (!cfg.interval) throw ValidationError("operator interval test needs --interval");
        const auto g = grid_or(cfg, ScaleGrid::interval_default());
        const auto r = interval_tests(A, cfg.interval->first, cfg.interval->second, k, cfg.p, g, 1e-4, 0.01,
                                      cfg.jobs);
        json per = json::array();
        for (std::size_t n = 0; n < r.pp.size(); ++n) {
            const std::string tag = "e" + std::to_string(n + 1);
            append_samples(records, "pp_l2:" + tag, cfg.interval->first, r.pp[n].samples);
            append_samples(records, "ac_lp:" + tag, cfg.interval->first, r.ac[n].samples);
            per.push_back({{"vector", tag}, {"pp_l2", estimate_json(r.pp[n])}, {"ac_lp", estimate_json(r.ac[n])}});
            lines << tag << " pp_l2 " << estimate_line(r.pp[n]) << "\n"
                  << tag << " ac_lp " << estimate_line(r.ac[n]) << "\n";
        }
        report["results"] = per;
        report["interval"] = {r.c, r.d};
        report["pp_empty"] = r.pp_empty;
        report["ac_empty"] = r.ac_empty;
        lines << "pp " << (r.pp_empty ? "empty" : "nonempty") << ", ac " << (r.ac_empty ? "empty" : "nonempty")
              << "\n";
    } else {
        throw ValidationError("unknown operator test '" + test + "' (point, ac, interval, spectrum)");
    }

    if (cfg.format == "json") {
        report["records"] = records_json(records);
        emit(cfg, report.dump(2) + "\n", out);
        if (!cfg.out.empty()) out << lines.str();
    } else {
        emit(cfg, to_csv(records), out);
        (cfg.out.empty() ? err : out) << lines.str();
    }
    return kOk;
}

// ------------------------------------------------------------------ sweep

int cmd_sweep(const std::string& measure_ref, const std::string& transform, const std::string& b_range,
              const std::string& a_range, const RunConfig& cfg, std::ostream& out) {
    if (b_range.empty() || a_range.empty()) throw ValidationError("sweep needs --b-range and --a-range");
    const auto b = parse_fixed(b_range, 3, "--b-range");
    const auto a = parse_fixed(a_range, 3, "--a-range");
    auto count = [](double n, const char* what) {
        if (n != std::floor(n) || n < 1 || n > 1e7)
            throw ValidationError(std::string(what) + ": count must be a positive integer");
        return static_cast<std::size_t>(n);
    };
    const std::size_t nb = count(b[2], "--b-range");
    const std::size_t na = count(a[2], "--a-range");
    if (!(b[0] <= b[1]) || (nb > 1 && b[0] == b[1])) throw ValidationError("--b-range: empty range");
    if (!(a[0] <= a[1]) || (na > 1 && a[0] == a[1])) throw ValidationError("--a-range: empty range");
    if (a[0] < kScaleFloor) throw ValidationError("--a-range: scales must be >= 1e-9");
    if (transform != "cwt" && transform != "conv" && transform != "conv_scaled")
        throw ValidationError("--transform must be cwt, conv or conv_scaled");

    const Measure m = load_measure(measure_ref);
    const KernelSpec k = builtin(cfg.kernel);
    const WaveletSpec w = derive_wavelet(k);
    std::vector<double> bs(nb), as(na);
    for (std::size_t i = 0; i < nb; ++i) bs[i] = nb == 1 ? b[0] : b[0] + (b[1] - b[0]) * i / (nb - 1);
    for (std::size_t i = 0; i < na; ++i)
        as[i] = i == 0 ? a[0] : i + 1 == na ? a[1] : a[0] * std::pow(a[1] / a[0], static_cast<double>(i) / (na - 1));

    const auto vals = parallel_samples(nb * na, cfg.jobs, [&](std::size_t idx) {
        const double bb = bs[idx / na];
        const double aa = as[idx % na];
        const auto v = transform == "cwt" ? cwt(m, w, aa, bb) : conv(m, k, aa, bb, transform == "conv_scaled");
        return LimitSample{aa, v.value, v.est_abs_error};
    });
    std::vector<SweepRecord> records;
    records.reserve(vals.size());
    for (std::size_t idx = 0; idx < vals.size(); ++idx)
        records.push_back({transform, bs[idx / na], vals[idx].scale, vals[idx].value, vals[idx].abs_error});
    emit(cfg, cfg.format == "json" ? records_json(records).dump(2) + "\n" : to_csv(records), out);
    return kOk;
}

// -------------------------------------------------------------- selfcheck

struct SuiteResult {
    std::vector<std::string> failures;
};

SuiteResult suite_kernels(const std::vector<KernelSpec>& kernels) {
    SuiteResult r;
    for (const auto& k : kernels) {
        const auto rep = validate(k);
        if (const auto* f = rep.first_failure()) {
            std::string msg = "kernel " + k.name + ": clause '" + f->clause + "' fails";
            if (f->offending_x) msg += " at x=" + format_double(*f->offending_x);
            if (!f->detail.empty()) msg += " (" + f->detail + ")";
            r.failures.push_back(msg);
        }
    }
    return r;
}

SuiteResult suite_c1(const std::vector<KernelSpec>& kernels) {
    SuiteResult r;
    for (const auto& k : kernels) {
        const double c1 = c_alpha(k, 1.0).c_alpha;
        if (!(std::abs(c1 - k.a_psi) <= 1e-9))
            r.failures.push_back("kernel " + k.name + ": c_1 = " + format_double(c1) + " differs from A_psi = " +
                                 format_double(k.a_psi));
    }
    return r;
}

SuiteResult suite_routes() {
    SuiteResult r;
    for (const char* kname : {"gauss", "cauchy"}) {
        const auto k = builtin(kname);
        for (const auto& name : canonical_measure_names()) {
            const auto m = canonical_measure(name);
            for (double x : {0.3, 0.5, 0.77})
                for (double a : {0.1, 1e-3}) {
                    const auto d = conv(m, k, a, x, true);
                    const auto c = conv_cdf_route(m, k, a, x, 1.0);
                    const double tol = 1e-6 * std::abs(d.value) + d.est_abs_error + c.est_abs_error + 1e-15;
                    if (!(std::abs(d.value - c.value) <= tol))
                        r.failures.push_back(std::string(kname) + " " + name + " x=" + format_double(x) +
                                             " a=" + format_double(a) + ": direct " + format_double(d.value) +
                                             " vs distribution-function route " + format_double(c.value));
                }
        }
    }
    return r;
}

SuiteResult suite_cwt_identity() {
    SuiteResult r;
    const auto k = gauss_kernel();
    const auto w = derive_wavelet(k);
    for (const char* name : {"uniform", "cantor", "dirac_pair"}) {
        const auto m = canonical_measure(name);
        std::vector<std::array<double, 2>> pairs;
        double peak = 0.0;
        for (double b : {0.1, 0.5, 0.9})
            for (double a : {0.3, 0.05}) {
                const double W = cwt(m, w, a, b).value;
                const double h = 1e-4;
                const double up = conv(m, k, a * (1 + h), b, true).value;
                const double dn = conv(m, k, a * (1 - h), b, true).value;
                const double fd = -a * (up - dn) / (2 * a * h);
                pairs.push_back({W, fd});
                peak = std::max(peak, std::abs(W));
            }
        for (const auto& [W, fd] : pairs)
            if (!(std::abs(W - fd) <= 1e-4 * std::max(std::abs(W), 1e-2 * peak)))
                r.failures.push_back(std::string(name) + ": wavelet transform " + format_double(W) +
                                     " vs -a d/da of the scaled transform " + format_double(fd));
    }
    return r;
}

SuiteResult suite_operator() {
    SuiteResult r;
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> nd;
    const auto k = gauss_kernel();
    for (int t = 0; t < 5; ++t) {
        const int n = 8 + 8 * t;
        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) M(i, j) = M(j, i) = nd(rng);
        Eigen::VectorXd f(n);
        for (int i = 0; i < n; ++i) f[i] = nd(rng);
        f.normalize();
        const auto A = OperatorModel::dense(M);
        const auto es = eigensystem(A);
        const auto mu = spectral_measure(es, f).measure;
        if (!(std::abs(mu.total_mass() - 1.0) <= 1e-10))
            r.failures.push_back("dim " + std::to_string(n) + ": spectral weights sum to " +
                                 format_double(mu.total_mass()));
        const double lam = nd(rng);
        const double a = 0.5;
        const double lhs = expectation_transform(es, f, k, lam, a, false);
        const double rhs = conv(mu, k, a, lam, false).value;
        if (!(std::abs(lhs - rhs) <= 1e-12))
            r.failures.push_back("dim " + std::to_string(n) + ": functional calculus " + format_double(lhs) +
                                 " vs transform of the spectral measure " + format_double(rhs));
    }
    return r;
}

SuiteResult suite_atoms() {
    SuiteResult r;
    const auto m = canonical_measure("dirac_pair");
    for (const char* kname : {"gauss", "cauchy"}) {
        const auto k = builtin(kname);
        for (const auto& at : m.atoms()) {
            const auto e = detect_atom(m, k, at.position, ScaleGrid::point_default());
            if (!e.extrapolated || !(std::abs(*e.extrapolated - at.weight) <= 1e-6))
                r.failures.push_back(std::string(kname) + ": atom at " + format_double(at.position) + " measured " +
                                     estimate_line(e));
        }
    }
    return r;
}

// Deliberately broken kernel for exercising the failure path: the claimed
// decay exponent 2 is false, psi only decays like |x|^{-1.1}.
KernelSpec corrupt_kernel() {
    return make_kernel(
        "corrupt-decay", [](double x) { return std::pow(1.0 + x * x, -0.55); },
        [](double x) { return -1.1 * x * std::pow(1.0 + x * x, -1.55); }, 2.0, 3.0, true);
}

int cmd_selfcheck(bool corrupt, std::ostream& out) {
    std::vector<KernelSpec> kernels = {gauss_kernel(), cauchy_kernel(), power_kernel(2.5)};
    if (corrupt) kernels.push_back(corrupt_kernel());

    const std::vector<std::pair<std::string, std::function<SuiteResult()>>> suites = {
        {"kernel validation", [&] { return suite_kernels(kernels); }},
        {"c_1 equals A_psi", [&] { return suite_c1(kernels); }},
        {"route equivalence", suite_routes},
        {"wavelet identity", suite_cwt_identity},
        {"atom detection", suite_atoms},
        {"functional calculus", suite_operator},
    };
    std::vector<std::string> failed;
    for (const auto& [name, fn] : suites) {
        const auto t0 = std::chrono::steady_clock::now();
        SuiteResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.failures.push_back(std::string("error: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.2f", secs);
        out << (r.failures.empty() ? "PASS " : "FAIL ") << name << " (" << timing << " s)\n";
        for (const auto& f : r.failures) {
            out << "  " << f << "\n";
            failed.push_back(name + ": " + f);
        }
    }
    if (failed.empty()) {
        out << "selfcheck: all suites passed\n";
        return kOk;
    }
    out << "selfcheck: " << failed.size() << " failed invariant(s)\n";
    for (const auto& f : failed) out << "  " << f << "\n";
    return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral type identification of measures and self-adjoint operators through kernel transforms"};
    app.require_subcommand(1);

    Common ac, cc, oc, sc;
    std::string measure_ref;
    std::string criteria_text = "atom";
    std::string points;
    auto* analyze = app.add_subcommand("analyze", "run small-scale criteria on a measure, one row per scale");
    analyze->add_option("-m,--measure", measure_ref, "measure JSON path or canonical:NAME")->required();
    analyze->add_option("--criterion", criteria_text,
                        "comma list of atom, alpha, pp_l2, ac_lp, wavelet_atom, wavelet_alpha, wavelet_pp_l2, "
                        "finiteness (default atom)");
    analyze->add_option("--x", points, "evaluation points F[,F...] (default 0)");
    add_common(analyze, ac);

    auto* classify = app.add_subcommand("classify", "decide which spectral parts a measure has on an interval");
    classify->add_option("-m,--measure", measure_ref, "measure JSON path or canonical:NAME")->required();
    add_common(classify, cc);

    std::string op_ref;
    std::string test = "point";
    std::string lambda_text;
    std::string vector_text;
    int lambda_points = 20;
    auto* op = app.add_subcommand("operator", "spectral tests on a self-adjoint operator");
    op->add_option("--operator", op_ref, "operator JSON path or analytic:NAME")->required();
    op->add_option("--test", test, "point | ac | interval | spectrum (default point)");
    op->add_option("--lambda", lambda_text, "spectral points for the point test");
    op->add_option("--vector", vector_text, "eK or comma-separated components (default: the file's f, else e1)");
    op->add_option("--lambda-points", lambda_points, "grid size of the ac test (default 20)");
    add_common(op, oc);

    std::string transform = "cwt";
    std::string b_range;
    std::string a_range;
    auto* sweep = app.add_subcommand("sweep", "transform values on a (b, a) grid, long-form");
    sweep->add_option("-m,--measure", measure_ref, "measure JSON path or canonical:NAME")->required();
    sweep->add_option("--transform", transform, "cwt | conv | conv_scaled (default cwt)");
    sweep->add_option("--b-range", b_range, "B0,B1,N linearly spaced positions");
    sweep->add_option("--a-range", a_range, "A0,A1,N log-spaced scales");
    add_common(sweep, sc);

    bool corrupt = false;
    auto* self = app.add_subcommand("selfcheck", "run the invariant suites");
    self->add_flag("--corrupt-kernel", corrupt, "register a kernel violating the decay bound")->group("");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*analyze) {
            std::vector<std::string> criteria;
            std::stringstream ss(criteria_text);
            std::string item;
            while (std::getline(ss, item, ',')) criteria.push_back(item);
            return cmd_analyze(measure_ref, criteria, points, resolve(ac), out, err);
        }
        if (*classify) return cmd_classify(measure_ref, resolve(cc), out);
        if (*op) return cmd_operator(op_ref, test, lambda_text, vector_text, lambda_points, resolve(oc), out, err);
        if (*sweep) return cmd_sweep(measure_ref, transform, b_range, a_range, resolve(sc), out);
        if (*self) return cmd_selfcheck(corrupt, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}

}  // namespace specid::cli
