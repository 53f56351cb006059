#include "cimcs/harness.hpp"

#include "cimcs/error.hpp"
#include "cimcs/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace cimcs {

namespace fs = std::filesystem;

// ---- Names ------------------------------------------------------------------

std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::SupportOnly: return "support-only";
    case ExperimentKind::AltMin: return "altmin";
    case ExperimentKind::SaCompare: return "sa-compare";
    case ExperimentKind::Mri: return "mri";
    case ExperimentKind::Sweep: return "sweep";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "support-only") return ExperimentKind::SupportOnly;
    if (name == "altmin") return ExperimentKind::AltMin;
    if (name == "sa-compare") return ExperimentKind::SaCompare;
    if (name == "mri") return ExperimentKind::Mri;
    if (name == "sweep") return ExperimentKind::Sweep;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

namespace {

std::string cdp_name(CdpSolver s) { return s == CdpSolver::Jacobi ? "jacobi" : "cgd"; }

CdpSolver parse_cdp(const std::string& s, const std::string& where) {
    if (s == "jacobi") return CdpSolver::Jacobi;
    if (s == "cgd") return CdpSolver::Cgd;
    throw ConfigError(where + ": unknown CDP solver '" + s + "' (jacobi | cgd)");
}

std::string r_init_name(RInit r) {
    switch (r) {
    case RInit::Zeros: return "zeros";
    case RInit::Given: return "given";
    case RInit::Lasso: return "lasso";
    }
    return "?";
}

RInit parse_r_init(const std::string& s, const std::string& where) {
    if (s == "zeros") return RInit::Zeros;
    if (s == "lasso") return RInit::Lasso;
    throw ConfigError(where + ": r_init must be zeros or lasso");
}

// ---- Strict JSON reader -----------------------------------------------------

class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    const Json* find(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void get(const char* key, double& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(where(key) + ": must be finite");
        }
    }
    void get(const char* key, int& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
            const auto x = v->get<long long>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                throw ConfigError(where(key) + ": out of range");
            out = static_cast<int>(x);
        }
    }
    void get(const char* key, Index& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
            out = static_cast<Index>(v->get<long long>());
        }
    }
    void get(const char* key, std::uint64_t& out) {
        if (const Json* v = find(key)) {
            if (v->is_number_unsigned())
                out = v->get<std::uint64_t>();
            else if (v->is_number_integer() && v->get<long long>() >= 0)
                out = static_cast<std::uint64_t>(v->get<long long>());
            else
                throw ConfigError(where(key) + ": expected a non-negative integer");
        }
    }
    void get(const char* key, bool& out) {
        if (const Json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const Json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError((path_.empty() ? "" : path_ + ": ") + "unknown key '" + it.key() + "'");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_sde(const Json& j, const std::string& path, SdeParams& p) {
    Reader r(j, path);
    r.get("g2", p.g2);
    r.get("j", p.j);
    r.get("K", p.K);
    r.get("beta", p.beta);
    r.get("tau", p.tau);
    r.get("p_thr", p.p_thr);
    r.get("d", p.d);
    r.get("T", p.T);
    r.get("steps", p.steps);
    r.get("noise_on", p.noise_on);
    r.finish();
}

Json sde_json(const SdeParams& p) {
    return Json{{"g2", p.g2}, {"j", p.j},         {"K", p.K},         {"beta", p.beta},   {"tau", p.tau},
                {"p_thr", p.p_thr}, {"d", p.d}, {"T", p.T}, {"steps", p.steps}, {"noise_on", p.noise_on}};
}

// Schedule and CDP fields shared by the altmin block and the MRI cac/ol blocks.
void read_altmin_fields(Reader& r, AltMinConfig& a, const std::string& path, bool allow_r_init) {
    r.get("iterations", a.iterations);
    r.get("eta_init", a.eta_init);
    r.get("eta_end", a.eta_end);
    r.get("velo", a.velo);
    std::string cdp = cdp_name(a.cdp);
    r.get("cdp", cdp);
    a.cdp = parse_cdp(cdp, path + ".cdp");
    r.get("cdp_tol", a.cdp_tol);
    r.get("cdp_max_iter", a.cdp_max_iter);
    if (allow_r_init) {
        std::string ri = r_init_name(a.r_init);
        r.get("r_init", ri);
        a.r_init = parse_r_init(ri, path + ".r_init");
        r.get("lasso_lam", a.lasso_lam);
    }
}

Json altmin_json(const AltMinConfig& a, bool with_r_init) {
    Json j{{"iterations", a.iterations}, {"eta_init", a.eta_init},   {"eta_end", a.eta_end},
           {"velo", a.velo},             {"cdp", cdp_name(a.cdp)}, {"cdp_tol", a.cdp_tol},
           {"cdp_max_iter", a.cdp_max_iter}};
    if (with_r_init) {
        j["r_init"] = r_init_name(a.r_init);
        j["lasso_lam"] = a.lasso_lam;
    }
    return j;
}

void validate_altmin(const AltMinConfig& a, const std::string& path) {
    try {
        if (a.r_init == RInit::Given) {
            // filled in at run time (MRI: the LASSO solution)
            AltMinConfig probe = a;
            probe.r_given = Vector::Zero(1);
            probe.validate(1);
        } else {
            a.validate(1);
        }
        a.sde.validate();
    } catch (const InvalidArgument& ex) {
        throw ConfigError(path + ": " + ex.what());
    }
}

void read_mri_method(const Json& j, const std::string& path, AltMinConfig& a) {
    Reader r(j, path);
    read_altmin_fields(r, a, path, false);
    if (const Json* s = r.find("sde")) read_sde(*s, path + ".sde", a.sde);
    r.finish();
}

const std::set<std::string> kAxisNames = {"eta", "a", "alpha", "nu", "tau", "g2"};

} // namespace

// ---- Config -----------------------------------------------------------------

ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig c;
    Reader r(j, "");
    std::string kind = "altmin";
    r.get("experiment", kind);
    c.kind = parse_experiment_kind(kind);
    r.get("seed", c.seed);
    r.get("repetitions", c.repetitions);
    r.get("output", c.output);
    r.get("workers", c.workers);
    r.get("eta", c.eta);
    r.get("oracle_with_cim", c.oracle_with_cim);

    std::string model = std::string(to_string(c.model));
    r.get("model", model);
    try {
        c.model = parse_model(model);
    } catch (const InvalidArgument& ex) {
        throw ConfigError(std::string("model: ") + ex.what());
    }
    c.sde = SdeParams::defaults(c.model);
    if (const Json* s = r.find("sde")) read_sde(*s, "sde", c.sde);

    if (const Json* s = r.find("instance")) {
        Reader ir(*s, "instance");
        ir.get("N", c.instance.N);
        ir.get("alpha", c.instance.alpha);
        ir.get("a", c.instance.a);
        ir.get("nu", c.instance.nu);
        ir.get("file", c.instance.file);
        ir.finish();
    }

    c.altmin.model = c.model;
    if (const Json* s = r.find("altmin")) {
        Reader ar(*s, "altmin");
        read_altmin_fields(ar, c.altmin, "altmin", true);
        ar.finish();
    }
    c.altmin.sde = c.sde;

    if (const Json* s = r.find("sa")) {
        Reader sr(*s, "sa");
        std::string kind_name = c.sa.kind == SaSchedule::Kind::Zero ? "zero" : "exponential";
        sr.get("schedule", kind_name);
        if (kind_name == "zero")
            c.sa.kind = SaSchedule::Kind::Zero;
        else if (kind_name == "exponential")
            c.sa.kind = SaSchedule::Kind::Exponential;
        else
            throw ConfigError("sa.schedule: expected zero or exponential");
        sr.get("T_start", c.sa.T_start);
        sr.get("T_end", c.sa.T_end);
        sr.get("sweeps", c.sa.sweeps);
        sr.finish();
    }

    if (const Json* s = r.find("mri")) {
        Reader mr(*s, "mri");
        mr.get("image", c.mri.image);
        mr.get("side", c.mri.side);
        mr.get("sparseness", c.mri.sparseness);
        mr.get("compression", c.mri.compression);
        mr.get("gamma", c.mri.gamma);
        if (const Json* seeds = mr.find("mask_seeds")) {
            if (!seeds->is_array() || seeds->empty()) throw ConfigError("mri.mask_seeds: expected a non-empty array");
            c.mri.mask_seeds.clear();
            for (const auto& v : *seeds) {
                if (!v.is_number_integer() || v.get<long long>() < 0)
                    throw ConfigError("mri.mask_seeds: expected non-negative integers");
                c.mri.mask_seeds.push_back(v.get<std::uint64_t>());
            }
        }
        if (const Json* methods = mr.find("methods")) {
            if (!methods->is_array() || methods->empty()) throw ConfigError("mri.methods: expected a non-empty array");
            c.mri.methods.clear();
            for (const auto& v : *methods) {
                if (!v.is_string()) throw ConfigError("mri.methods: expected strings");
                try {
                    c.mri.methods.push_back(parse_mri_method(v.get<std::string>()));
                } catch (const InvalidArgument& ex) {
                    throw ConfigError(std::string("mri.methods: ") + ex.what());
                }
            }
        }
        if (const Json* l = mr.find("lasso")) {
            Reader lr(*l, "mri.lasso");
            lr.get("lam", c.mri.run.lasso_lam);
            lr.get("tol", c.mri.run.lasso_tol);
            lr.get("max_iter", c.mri.run.lasso_max_iter);
            lr.finish();
        }
        if (const Json* m = mr.find("cac")) read_mri_method(*m, "mri.cac", c.mri.run.cac);
        if (const Json* m = mr.find("ol")) read_mri_method(*m, "mri.ol", c.mri.run.ol);
        mr.finish();
    }

    if (const Json* s = r.find("sweep")) {
        Reader wr(*s, "sweep");
        std::string base = to_string(c.sweep.base);
        wr.get("base", base);
        c.sweep.base = parse_experiment_kind(base);
        if (c.sweep.base != ExperimentKind::AltMin && c.sweep.base != ExperimentKind::SupportOnly)
            throw ConfigError("sweep.base: expected altmin or support-only");
        if (const Json* axes = wr.find("axes")) {
            if (!axes->is_array()) throw ConfigError("sweep.axes: expected an array");
            std::set<std::string> names;
            for (const auto& ax : *axes) {
                Reader xr(ax, "sweep.axes[]");
                std::string name;
                xr.get("name", name);
                const Json* values = xr.find("values");
                xr.finish();
                if (!kAxisNames.count(name))
                    throw ConfigError("sweep.axes: unknown axis '" + name + "' (eta, a, alpha, nu, tau, g2)");
                if (!names.insert(name).second) throw ConfigError("sweep.axes: duplicate axis '" + name + "'");
                if (values == nullptr || !values->is_array() || values->empty())
                    throw ConfigError("sweep.axes: axis '" + name + "' needs a non-empty values array");
                std::vector<double> vals;
                for (const auto& v : *values) {
                    if (!v.is_number()) throw ConfigError("sweep.axes: axis '" + name + "' values must be numbers");
                    vals.push_back(v.get<double>());
                }
                c.sweep.axes.emplace_back(name, std::move(vals));
            }
        }
        wr.finish();
    }
    r.finish();

    // Range checks.
    if (c.repetitions < 0) throw ConfigError("repetitions: must be >= 0");
    if (c.workers < 0) throw ConfigError("workers: must be >= 0");
    if (!(c.eta >= 0.0)) throw ConfigError("eta: must be >= 0");
    if (c.output.empty()) throw ConfigError("output: must not be empty");
    if (c.instance.file.empty()) {
        if (c.instance.N < 2) throw ConfigError("instance.N: must be >= 2");
        if (!(c.instance.alpha > 0.0 && c.instance.alpha <= 1.0)) throw ConfigError("instance.alpha: must lie in (0, 1]");
        if (!(c.instance.a > 0.0 && c.instance.a <= 1.0)) throw ConfigError("instance.a: must lie in (0, 1]");
        if (!(c.instance.nu >= 0.0)) throw ConfigError("instance.nu: must be >= 0");
    }
    try {
        c.sde.validate();
        c.sa.validate();
    } catch (const InvalidArgument& ex) {
        throw ConfigError(ex.what());
    }
    validate_altmin(c.altmin, "altmin");
    if (c.kind == ExperimentKind::Mri) {
        if (!is_power_of_two(c.mri.side) || c.mri.side < 2) throw ConfigError("mri.side: must be a power of two >= 2");
        if (!(c.mri.sparseness > 0.0 && c.mri.sparseness <= 1.0)) throw ConfigError("mri.sparseness: must lie in (0, 1]");
        if (!(c.mri.compression > 0.0 && c.mri.compression <= 1.0))
            throw ConfigError("mri.compression: must lie in (0, 1]");
        if (!(c.mri.gamma >= 0.0)) throw ConfigError("mri.gamma: must be >= 0");
        if (!(c.mri.run.lasso_lam >= 0.0) || !(c.mri.run.lasso_tol > 0.0) || c.mri.run.lasso_max_iter < 1)
            throw ConfigError("mri.lasso: lam >= 0, tol > 0 and max_iter >= 1 required");
        validate_altmin(c.mri.run.cac, "mri.cac");
        validate_altmin(c.mri.run.ol, "mri.ol");
    }
    if (c.kind == ExperimentKind::Sweep && c.sweep.axes.empty()) throw ConfigError("sweep.axes: at least one axis required");
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& ex) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + ex.what());
    }
    return parse_config(j);
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["experiment"] = to_string(c.kind);
    j["seed"] = c.seed;
    j["repetitions"] = c.repetitions;
    j["output"] = c.output;
    j["workers"] = c.workers;
    j["eta"] = c.eta;
    j["oracle_with_cim"] = c.oracle_with_cim;
    j["model"] = std::string(to_string(c.model));
    j["sde"] = sde_json(c.sde);
    j["instance"] = Json{{"N", c.instance.N}, {"alpha", c.instance.alpha}, {"a", c.instance.a},
                         {"nu", c.instance.nu}, {"file", c.instance.file}};
    j["altmin"] = altmin_json(c.altmin, true);
    j["sa"] = Json{{"schedule", c.sa.kind == SaSchedule::Kind::Zero ? "zero" : "exponential"},
                   {"T_start", c.sa.T_start},
                   {"T_end", c.sa.T_end},
                   {"sweeps", c.sa.sweeps}};
    Json methods = Json::array();
    for (MriMethod m : c.mri.methods) methods.push_back(to_string(m));
    Json cac = altmin_json(c.mri.run.cac, false);
    cac["sde"] = sde_json(c.mri.run.cac.sde);
    Json ol = altmin_json(c.mri.run.ol, false);
    ol["sde"] = sde_json(c.mri.run.ol.sde);
    j["mri"] = Json{{"image", c.mri.image},
                    {"side", c.mri.side},
                    {"sparseness", c.mri.sparseness},
                    {"compression", c.mri.compression},
                    {"gamma", c.mri.gamma},
                    {"mask_seeds", c.mri.mask_seeds},
                    {"methods", methods},
                    {"lasso", Json{{"lam", c.mri.run.lasso_lam},
                                   {"tol", c.mri.run.lasso_tol},
                                   {"max_iter", c.mri.run.lasso_max_iter}}},
                    {"cac", cac},
                    {"ol", ol}};
    Json axes = Json::array();
    for (const auto& [name, values] : c.sweep.axes) axes.push_back(Json{{"name", name}, {"values", values}});
    j["sweep"] = Json{{"base", to_string(c.sweep.base)}, {"axes", axes}};
    return j;
}

std::string git_blob_sha1(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("SHA-1 digest failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        const unsigned char b = digest[i]; out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
    }
    return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    Json j = to_json(cfg);
    // Output location and worker count do not change results.
    j.erase("output");
    j.erase("workers");
    return git_blob_sha1(j.dump());
}

// ---- Numerics and scheduling --------------------------------------------------

double quantile_sorted(const std::vector<double>& sorted, double q) {
    require(!sorted.empty(), "quantile_sorted: empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile_sorted: q must lie in [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::array<double, 5> box_summary(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {values.front(), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75),
            values.back()};
}

int resolve_workers(int flag, const char* env_value, int config_value) {
    if (flag > 0) return flag;
    if (env_value != nullptr && *env_value != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env_value, &end, 10);
        if (end != nullptr && *end == '\0' && v > 0 && v <= 4096) return static_cast<int>(v);
    }
    if (config_value > 0) return config_value;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
    if (n == 0) return;
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t instance_seed(std::uint64_t master, int rep) {
    return derive_seed(master, {0x494E5354ULL, static_cast<std::uint64_t>(rep)});
}

std::uint64_t trajectory_seed(std::uint64_t master, int rep) {
    return derive_seed(master, {0x5452414AULL, static_cast<std::uint64_t>(rep)});
}

// ---- Output helpers ---------------------------------------------------------

namespace {

void log_line(const RunOptions& opt, const std::string& s) {
    if (opt.log != nullptr) *opt.log << s << '\n' << std::flush;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

std::string numbered(const std::string& stem, int k, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%03d", k);
    return stem + buf + ext;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_metadata(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
                    const Json& extra, double wall_seconds) {
    Json j;
    j["command"] = command;
    j["config"] = to_json(cfg);
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    j["results"] = extra;
    j["mri_embedding"] = "hermitian-symmetric mask, each sampled frequency contributes (Re, Im) rows";
    j["timestamp"] = utc_now();
    j["wall_seconds"] = wall_seconds;
    auto out = open_out(dir / "metadata.json");
    out << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Instance make_instance(const InstanceSpec& spec, std::uint64_t master, int rep) {
    if (!spec.file.empty()) return load_instance(spec.file);
    return gen_instance(spec.N, spec.alpha, spec.a, spec.nu, instance_seed(master, rep));
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream o;
    o << std::setprecision(prec) << v;
    return o.str();
}

} // namespace

// ---- gen ---------------------------------------------------------------------

CommandResult cmd_gen(const ExperimentConfig& cfg, const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cfg.output;
    ensure_dir(dir);
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    std::vector<std::uint32_t> crc(reps);
    parallel_for(reps, opt.workers, [&](std::size_t k) {
        const int rep = static_cast<int>(k);
        const Instance inst = gen_instance(cfg.instance.N, cfg.instance.alpha, cfg.instance.a, cfg.instance.nu,
                                           instance_seed(cfg.seed, rep));
        const fs::path file = dir / numbered("instance", rep, ".bin");
        save_instance(inst, file);
        crc[k] = instance_checksum(file);
    });
    Json files = Json::array();
    for (std::size_t k = 0; k < reps; ++k) {
        const int rep = static_cast<int>(k);
        std::ostringstream hex;
        hex << std::hex << std::setw(8) << std::setfill('0') << crc[k];
        files.push_back(Json{{"file", numbered("instance", rep, ".bin")},
                             {"seed", instance_seed(cfg.seed, rep)},
                             {"crc32", hex.str()}});
    }
    Json manifest{{"config_hash", config_hash(cfg)},
                  {"N", cfg.instance.N},
                  {"M", rounded_count(cfg.instance.alpha, cfg.instance.N)},
                  {"alpha", cfg.instance.alpha},
                  {"a", cfg.instance.a},
                  {"nu", cfg.instance.nu},
                  {"master_seed", cfg.seed},
                  {"instances", files}};
    auto out = open_out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    out.close();
    write_metadata(dir, "gen", cfg, Json{{"instances", reps}}, seconds_since(t0));
    CommandResult res;
    res.summary = "gen: wrote " + std::to_string(reps) + " instance(s) and manifest to " + dir.string();
    return res;
}

// ---- run ---------------------------------------------------------------------

namespace {

struct SupportRow {
    std::uint64_t instance_seed = 0;
    std::uint64_t sde_seed = 0;
    Index support_size = 0;
    double direction_cosine = 0.0;
    double hamming_loss = 0.0;
    double energy = 0.0;
};

CommandResult run_support_only_cmd(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    std::vector<SupportRow> rows(reps);
    parallel_for(reps, opt.workers, [&](std::size_t k) {
        const int rep = static_cast<int>(k);
        const Instance inst = make_instance(cfg.instance, cfg.seed, rep);
        const QuboProblem problem = build_qubo(inst.A, inst.y, cfg.eta);
        SdeParams p = cfg.sde;
        p.seed = trajectory_seed(cfg.seed, rep);
        const Vector source = inst.signal();
        const Support sigma = cim_support_estimation(cfg.model, problem, source, cfg.eta, p).sigma;
        rows[k] = {inst.seed,
                   p.seed,
                   popcount(sigma),
                   direction_cosine(inst.xi, sigma).value,
                   hamming_loss(sigma, inst.xi),
                   energy(problem, source, sigma).energy};
    });
    auto out = open_out(dir / "results.csv");
    out << "rep,instance_seed,sde_seed,support_size,direction_cosine,hamming_loss,energy\n";
    std::vector<double> cos;
    for (std::size_t k = 0; k < reps; ++k) {
        const auto& r = rows[k];
        out << k << ',' << r.instance_seed << ',' << r.sde_seed << ',' << r.support_size << ',' << r.direction_cosine
            << ',' << r.hamming_loss << ',' << r.energy << '\n';
        cos.push_back(r.direction_cosine);
    }
    CommandResult res;
    res.summary = "support-only: " + std::to_string(reps) + " run(s), mean direction cosine " + fmt(mean(cos));
    return res;
}

CommandResult run_altmin_cmd(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    struct Row {
        bool ok = false;
        std::string error;
        IterationRecord last;
        double wall = 0.0;
    };
    std::vector<Row> rows(reps);
    parallel_for(reps, opt.workers, [&](std::size_t k) {
        const int rep = static_cast<int>(k);
        auto trace_out = open_out(dir / numbered("trace", rep, ".csv"));
        RunTrace::write_csv_header(trace_out);
        try {
            const Instance inst = make_instance(cfg.instance, cfg.seed, rep);
            AltMinConfig a = cfg.altmin;
            a.seed = trajectory_seed(cfg.seed, rep);
            const RunTrace trace = run_alt_min(inst, a, {}, [&](const IterationRecord& rec) {
                RunTrace::write_csv_row(trace_out, rec);
                trace_out.flush();
            });
            rows[k].ok = true;
            if (!trace.records.empty()) rows[k].last = trace.records.back();
            rows[k].wall = trace.wall_seconds;
        } catch (const std::exception& ex) {
            rows[k].error = ex.what();
        }
    });
    auto out = open_out(dir / "summary.csv");
    out << "rep,status,iterations,final_eta,support_size,energy,rmse,direction_cosine,hamming_loss,error\n";
    std::size_t failed = 0;
    std::vector<double> rmse_values;
    for (std::size_t k = 0; k < reps; ++k) {
        const auto& r = rows[k];
        if (!r.ok) {
            ++failed;
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << k << ",failed,,,,,,,," << msg << '\n';
            continue;
        }
        out << k << ",ok," << (r.last.i + 1) << ',' << r.last.eta << ',' << popcount(r.last.sigma) << ','
            << r.last.energy << ',' << r.last.rmse << ',' << r.last.direction_cosine << ',' << r.last.hamming_loss
            << ",\n";
        rmse_values.push_back(r.last.rmse);
    }
    CommandResult res;
    res.summary = "altmin: " + std::to_string(reps - failed) + "/" + std::to_string(reps) +
                  " run(s) completed, mean final RMSE " + fmt(mean(rmse_values));
    if (failed > 0) {
        res.exit_code = kExitRunFailure;
        for (const auto& r : rows)
            if (!r.ok) {
                res.summary += "; first failure: " + r.error;
                break;
            }
    }
    return res;
}

CommandResult run_sa_compare_cmd(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    struct Row {
        double cim_cos = 0.0, sa_cos = 0.0, cim_energy = 0.0, sa_energy = 0.0;
    };
    std::vector<Row> rows(reps);
    parallel_for(reps, opt.workers, [&](std::size_t k) {
        const int rep = static_cast<int>(k);
        const Instance inst = make_instance(cfg.instance, cfg.seed, rep);
        const QuboProblem problem = build_qubo(inst.A, inst.y, cfg.eta);
        const Vector source = inst.signal();
        SdeParams p = cfg.sde;
        p.seed = trajectory_seed(cfg.seed, rep);
        const Support cim = cim_support_estimation(cfg.model, problem, source, cfg.eta, p).sigma;
        const SaResult sa = sa_support_estimation(problem, source, cfg.sa, derive_seed(p.seed, {0x5341ULL}));
        rows[k] = {direction_cosine(inst.xi, cim).value, direction_cosine(inst.xi, sa.sigma).value,
                   energy(problem, source, cim).energy, sa.energy};
    });
    auto out = open_out(dir / "results.csv");
    out << "rep,cim_direction_cosine,sa_direction_cosine,cim_energy,sa_energy\n";
    std::vector<double> cim, sa;
    for (std::size_t k = 0; k < reps; ++k) {
        out << k << ',' << rows[k].cim_cos << ',' << rows[k].sa_cos << ',' << rows[k].cim_energy << ','
            << rows[k].sa_energy << '\n';
        cim.push_back(rows[k].cim_cos);
        sa.push_back(rows[k].sa_cos);
    }
    out.close();
    CommandResult res;
    res.summary = "sa-compare: mean direction cosine cim " + fmt(mean(cim)) + ", sa " + fmt(mean(sa));
    if (reps > 0) {
        const KsResult ks = ks_one_sided(cim, sa);
        auto sum = open_out(dir / "ks.csv");
        sum << "statistic,p_value\n" << ks.statistic << ',' << ks.p_value << '\n';
        res.summary += ", one-sided KS p = " + fmt(ks.p_value, 4);
    }
    return res;
}

} // namespace

CommandResult cmd_run(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (cfg.kind == ExperimentKind::Mri) return cmd_mri(cfg, opt);
    if (cfg.kind == ExperimentKind::Sweep) return cmd_sweep(cfg, opt);
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cfg.output;
    ensure_dir(dir);
    CommandResult res;
    switch (cfg.kind) {
    case ExperimentKind::SupportOnly: res = run_support_only_cmd(cfg, opt, dir); break;
    case ExperimentKind::AltMin: res = run_altmin_cmd(cfg, opt, dir); break;
    case ExperimentKind::SaCompare: res = run_sa_compare_cmd(cfg, opt, dir); break;
    default: break;
    }
    write_metadata(dir, "run", cfg, Json{{"summary", res.summary}, {"exit_code", res.exit_code}}, seconds_since(t0));
    return res;
}

// ---- sweep -------------------------------------------------------------------

CommandResult cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (cfg.sweep.axes.empty()) throw ConfigError("sweep.axes: at least one axis required");
    for (const auto& [name, values] : cfg.sweep.axes)
        if (values.empty()) throw ConfigError("sweep.axes: axis '" + name + "' is empty");
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cfg.output;
    ensure_dir(dir);

    // Cartesian grid, first axis slowest.
    std::vector<std::vector<double>> points{{}};
    for (const auto& axis : cfg.sweep.axes) {
        std::vector<std::vector<double>> next;
        for (const auto& p : points)
            for (double v : axis.second) {
                auto q = p;
                q.push_back(v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    const std::size_t n_tasks = points.size() * reps;
    const bool altmin = cfg.sweep.base == ExperimentKind::AltMin;

    struct Row {
        bool ok = false;
        std::string error;
        double rmse = 0.0, cos = 0.0, hamming = 0.0, energy = 0.0;
        Index support = 0;
    };
    std::vector<Row> rows(n_tasks);
    parallel_for(n_tasks, opt.workers, [&](std::size_t task) {
        const std::size_t pi = task / std::max<std::size_t>(reps, 1);
        const int rep = static_cast<int>(task % std::max<std::size_t>(reps, 1));
        Row& row = rows[task];
        try {
            InstanceSpec ispec = cfg.instance;
            AltMinConfig a = cfg.altmin;
            SdeParams sde = cfg.sde;
            double eta = cfg.eta;
            for (std::size_t ax = 0; ax < cfg.sweep.axes.size(); ++ax) {
                const std::string& name = cfg.sweep.axes[ax].first;
                const double v = points[pi][ax];
                if (name == "eta") {
                    eta = v;
                    a.eta_init = a.eta_end = v;
                } else if (name == "a")
                    ispec.a = v;
                else if (name == "alpha")
                    ispec.alpha = v;
                else if (name == "nu")
                    ispec.nu = v;
                else if (name == "tau")
                    sde.tau = v;
                else if (name == "g2")
                    sde.g2 = v;
            }
            a.sde = sde;
            const Instance inst = make_instance(ispec, cfg.seed, rep);
            if (altmin) {
                a.seed = trajectory_seed(cfg.seed, rep);
                const RunTrace trace = run_alt_min(inst, a);
                const Metrics m = evaluate(trace.R, trace.sigma, inst.x, inst.xi);
                row.rmse = m.rmse;
                row.cos = m.direction_cosine;
                row.hamming = m.hamming_loss;
                row.support = popcount(trace.sigma);
                row.energy = trace.records.empty() ? 0.0 : trace.records.back().energy;
            } else {
                const QuboProblem problem = build_qubo(inst.A, inst.y, eta);
                sde.seed = trajectory_seed(cfg.seed, rep);
                const Vector source = inst.signal();
                const Support sigma = cim_support_estimation(cfg.model, problem, source, eta, sde).sigma;
                row.cos = direction_cosine(inst.xi, sigma).value;
                row.hamming = hamming_loss(sigma, inst.xi);
                row.support = popcount(sigma);
                row.energy = energy(problem, source, sigma).energy;
                row.rmse = rmse(source, sigma, inst.x, inst.xi);
            }
            row.ok = true;
        } catch (const std::exception& ex) {
            row.error = ex.what();
        }
    });

    auto out = open_out(dir / "sweep_runs.csv");
    out << "point";
    for (const auto& axis : cfg.sweep.axes) out << ',' << axis.first;
    out << ",rep,status,rmse,direction_cosine,hamming_loss,support_size,energy,error\n";
    std::size_t failed = 0;
    for (std::size_t task = 0; task < n_tasks; ++task) {
        const std::size_t pi = task / reps;
        const Row& r = rows[task];
        out << pi;
        for (double v : points[pi]) out << ',' << v;
        out << ',' << task % reps;
        if (r.ok) {
            out << ",ok," << r.rmse << ',' << r.cos << ',' << r.hamming << ',' << r.support << ',' << r.energy << ",\n";
        } else {
            ++failed;
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << ",failed,,,,,," << msg << '\n';
        }
    }
    out.close();

    const std::string metric = altmin ? "rmse" : "direction_cosine";
    auto sum = open_out(dir / "sweep_summary.csv");
    sum << "point";
    for (const auto& axis : cfg.sweep.axes) sum << ',' << axis.first;
    sum << ",metric,n_ok,min,q25,median,q75,max\n";
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        std::vector<double> vals;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const Row& r = rows[pi * reps + rep];
            if (r.ok) vals.push_back(altmin ? r.rmse : r.cos);
        }
        sum << pi;
        for (double v : points[pi]) sum << ',' << v;
        sum << ',' << metric << ',' << vals.size();
        if (vals.empty()) {
            sum << ",,,,,\n";
            continue;
        }
        for (double q : box_summary(vals)) sum << ',' << q;
        sum << '\n';
    }
    sum.close();

    CommandResult res;
    res.summary = "sweep: " + std::to_string(points.size()) + " point(s) x " + std::to_string(reps) +
                  " repetition(s), " + std::to_string(failed) + " failed run(s)";
    write_metadata(dir, "sweep", cfg, Json{{"summary", res.summary}, {"failed", failed}}, seconds_since(t0));
    return res;
}

// ---- mri ----------------------------------------------------------------------

CommandResult cmd_mri(const ExperimentConfig& cfg, const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cfg.output;
    ensure_dir(dir);

    Matrix image;
    if (cfg.mri.image == "phantom") {
        image = phantom(cfg.mri.side);
    } else {
        try {
            image = read_pgm(fs::path(cfg.mri.image));
        } catch (const InvalidArgument& ex) {
            throw ConfigError(std::string("mri.image: ") + ex.what());
        }
    }
    if (image.rows() != image.cols() || !is_power_of_two(image.rows()) || image.rows() < 2)
        throw ConfigError("mri.image: image must be square with a power-of-two side, got " +
                          std::to_string(image.rows()) + "x" + std::to_string(image.cols()));

    const SparseImage source = make_sparse_source(image, cfg.mri.sparseness);
    write_pgm(dir / "source.pgm", source.pixels);
    {
        auto coeffs = open_out(dir / "coefficients.csv");
        write_coefficients_csv(coeffs, source.haar_coeffs);
    }

    const auto& seeds = cfg.mri.mask_seeds;
    const auto& methods = cfg.mri.methods;
    struct Cell {
        double rmse = 0.0;
        Index support = 0;
        int iterations = 0;
        bool ok = false;
        std::string error;
    };
    std::vector<Cell> cells(seeds.size() * methods.size());
    std::vector<MriProblem> problems(seeds.size());
    std::vector<Vector> lasso(seeds.size());
    std::vector<int> lasso_iters(seeds.size());
    parallel_for(seeds.size(), opt.workers, [&](std::size_t s) {
        problems[s] = build_mri_problem(source, cfg.mri.compression, cfg.mri.gamma, seeds[s]);
        LassoResult l = lasso_ista(*problems[s].coupling, problems[s].h_z, cfg.mri.run.lasso_lam,
                                   cfg.mri.run.lasso_tol, cfg.mri.run.lasso_max_iter);
        lasso[s] = std::move(l.x);
        lasso_iters[s] = l.iterations;
        auto mask_out = open_out(dir / ("mask_seed" + std::to_string(seeds[s]) + ".txt"));
        write_mask(mask_out, problems[s].mask);
    });
    parallel_for(cells.size(), opt.workers, [&](std::size_t c) {
        const std::size_t s = c / methods.size();
        const MriMethod m = methods[c % methods.size()];
        Cell& cell = cells[c];
        try {
            const MriReconstruction rec = mri_reconstruct(problems[s], source, m, cfg.mri.run, &lasso[s]);
            write_pgm(dir / ("recon_" + to_string(m) + "_seed" + std::to_string(seeds[s]) + ".pgm"), rec.image);
            cell.rmse = rec.rmse;
            cell.support = popcount(rec.sigma);
            cell.iterations = m == MriMethod::Lasso ? lasso_iters[s] : rec.iterations;
            cell.ok = true;
        } catch (const std::exception& ex) {
            cell.error = ex.what();
        }
        log_line(opt, "mri: seed " + std::to_string(seeds[s]) + " " + to_string(m) +
                          (cell.ok ? " RMSE " + fmt(cell.rmse) : " failed: " + cell.error));
    });

    auto table = open_out(dir / "table.csv");
    table << "mask_seed,method,status,rmse,support_size,iterations\n";
    std::size_t failed = 0;
    Json per_method = Json::object();
    for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> vals;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const Cell& c = cells[s * methods.size() + m];
            table << seeds[s] << ',' << to_string(methods[m]) << ',';
            if (c.ok) {
                table << "ok," << c.rmse << ',' << c.support << ',' << c.iterations << '\n';
                vals.push_back(c.rmse);
            } else {
                ++failed;
                table << "failed,,,\n";
            }
        }
        per_method[to_string(methods[m])] = mean(vals);
    }
    table.close();

    CommandResult res;
    res.summary = "mri: mean RMSE";
    for (MriMethod m : methods) res.summary += " " + to_string(m) + "=" + fmt(per_method[to_string(m)].get<double>());
    if (failed > 0) {
        res.exit_code = kExitRunFailure;
        res.summary += "; " + std::to_string(failed) + " reconstruction(s) failed";
    }
    write_metadata(dir, "mri", cfg,
                   Json{{"summary", res.summary}, {"mean_rmse", per_method}, {"sparseness", source.sparseness}},
                   seconds_since(t0));
    return res;
}

// ---- oracle -------------------------------------------------------------------

CommandResult cmd_oracle(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (cfg.instance.file.empty() && cfg.instance.N > kMaxBruteForceN)
        throw ConfigError("instance.N: oracle runs need N <= " + std::to_string(kMaxBruteForceN));
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cfg.output;
    ensure_dir(dir);
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    struct Row {
        double ground = 0.0, sa = 0.0, cim = 0.0;
        bool sa_hit = false, cim_hit = false;
    };
    constexpr double kTol = 1e-9;
    std::vector<Row> rows(reps);
    parallel_for(reps, opt.workers, [&](std::size_t k) {
        const int rep = static_cast<int>(k);
        const Instance inst = make_instance(cfg.instance, cfg.seed, rep);
        const QuboProblem problem = build_qubo(inst.A, inst.y, cfg.eta);
        const Vector source = inst.signal();
        const auto [sigma_star, e_star] = brute_force_ground_state(problem, source);
        Row& row = rows[k];
        row.ground = e_star;
        const std::uint64_t traj = trajectory_seed(cfg.seed, rep);
        const SaResult sa = sa_support_estimation(problem, source, cfg.sa, derive_seed(traj, {0x5341ULL}));
        row.sa = sa.energy;
        row.sa_hit = std::abs(sa.energy - e_star) <= kTol;
        if (cfg.oracle_with_cim) {
            SdeParams p = cfg.sde;
            p.seed = traj;
            const Support sigma = cim_support_estimation(cfg.model, problem, source, cfg.eta, p).sigma;
            row.cim = energy(problem, source, sigma).energy;
            row.cim_hit = std::abs(row.cim - e_star) <= kTol;
        }
    });
    auto out = open_out(dir / "oracle.csv");
    out << "rep,ground_energy,sa_energy,sa_hit,cim_energy,cim_hit\n";
    std::size_t sa_hits = 0, cim_hits = 0;
    for (std::size_t k = 0; k < reps; ++k) {
        const Row& r = rows[k];
        out << k << ',' << r.ground << ',' << r.sa << ',' << r.sa_hit << ',';
        if (cfg.oracle_with_cim)
            out << r.cim << ',' << r.cim_hit;
        else
            out << ',';
        out << '\n';
        sa_hits += r.sa_hit;
        cim_hits += r.cim_hit;
    }
    out.close();
    CommandResult res;
    res.summary = "oracle: SA reached the ground energy in " + std::to_string(sa_hits) + "/" + std::to_string(reps);
    if (cfg.oracle_with_cim)
        res.summary += ", " + std::string(to_string(cfg.model)) + " in " + std::to_string(cim_hits) + "/" +
                       std::to_string(reps);
    write_metadata(dir, "oracle", cfg, Json{{"summary", res.summary}, {"sa_hits", sa_hits}, {"cim_hits", cim_hits}},
                   seconds_since(t0));
    return res;
}

} // namespace cimcs
