#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "json_config.hpp"
#include "pmubqkd/apparatus.hpp"
#include "pmubqkd/figures.hpp"
#include "pmubqkd/io.hpp"
#include "pmubqkd/mode_algebra.hpp"
#include "pmubqkd/practical_rate.hpp"
#include "pmubqkd/presets.hpp"
#include "pmubqkd/protocol.hpp"
#include "pmubqkd/turbulence.hpp"

namespace fs = std::filesystem;
using pmubqkd::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    unsigned threads = pmubqkd::default_threads();
    std::string out_dir;
    std::string out_file;
};

fs::path output_dir(const Common& c) {
    if (!c.out_dir.empty()) return c.out_dir;
    if (const char* env = std::getenv("PMUBQKD_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

fs::path write_file(const Common& c, const std::string& name, const std::string& text) {
    const fs::path dir = output_dir(c);
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    return path;
}

/// Primary output goes to stdout unless --out names a file in the output directory.
void emit(const Common& c, const std::string& text) {
    if (c.out_file.empty()) {
        std::cout << text;
    } else {
        write_file(c, c.out_file, text);
    }
}

void emit(const Common& c, const pmubqkd::io::OutputEnvelope& env) { emit(c, env.to_json().dump(2) + "\n"); }

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json base_units() {
    return {{"length", "m"}, {"angle", "rad"}, {"keyRate", "bits per sifted signal"}, {"kappa", "nats"}};
}

// ---- modes ----------------------------------------------------------------

struct ModesArgs {
    int order = 3;
    std::string render;
    double waist = 1e-3;
    int size = 65;
};

std::string to_pgm(const pmubqkd::IntensityImage& img) {
    std::ostringstream os;
    os << "P2\n" << img.size << ' ' << img.size << "\n255\n";
    for (int r = 0; r < img.size; ++r) {
        for (int c = 0; c < img.size; ++c) {
            os << static_cast<int>(std::lround(255.0 * img.at(r, c))) << (c + 1 == img.size ? '\n' : ' ');
        }
    }
    return os.str();
}

std::string to_csv(const pmubqkd::IntensityImage& img) {
    std::ostringstream os;
    for (int r = 0; r < img.size; ++r) {
        for (int c = 0; c < img.size; ++c) os << num(img.at(r, c)) << (c + 1 == img.size ? '\n' : ',');
    }
    return os.str();
}

int cmd_modes(const ModesArgs& a, const Common& c) {
    const auto pmub = pmubqkd::build_pmub(a.order);
    pmubqkd::io::OutputEnvelope env;
    env.command = "modes";
    env.params = {{"order", a.order}, {"render", a.render}, {"waist", a.waist}, {"size", a.size}};
    env.results = pmubqkd::io::to_json(pmub);
    env.units = base_units();
    env.tolerances = {{"coefficients", "exact rational under the square root"}};
    if (!a.render.empty()) {
        json files = json::array();
        for (int which = 0; which < 2; ++which) {
            const auto& basis = pmub.basis(which);
            for (std::size_t i = 0; i < basis.size(); ++i) {
                const auto img = pmubqkd::render_intensity(basis[i], a.waist, {a.size, 0.0});
                const std::string name = std::string(which == 0 ? "L" : "H") + std::to_string(i) + "." + a.render;
                files.push_back(write_file(c, name, a.render == "pgm" ? to_pgm(img) : to_csv(img)).string());
            }
        }
        env.results["renders"] = files;
    }
    emit(c, env);
    return kExitOk;
}

// ---- turbulence -------------------------------------------------------------

struct TurbulenceArgs {
    std::vector<int> p;
    std::vector<int> l;
    std::optional<double> ratio;
    std::optional<double> r0;
    std::optional<double> cn2;
    double wavelength = 1e-6;
    std::optional<double> length;
    double b = 0.01;
    int max_dl = 40;
};

std::vector<pmubqkd::ModeIndex> selected_modes(const TurbulenceArgs& a) {
    if (a.p.size() != a.l.size()) throw UsageError("--p and --l must be given the same number of times");
    if (a.p.empty()) return pmubqkd::protocol_channel_modes();
    std::vector<pmubqkd::ModeIndex> m;
    for (std::size_t i = 0; i < a.p.size(); ++i) m.push_back(pmubqkd::ModeIndex::from_pl(a.p[i], a.l[i]));
    return m;
}

/// One atmosphere for all modes; --ratio refers to the first mode's r_{p,l}.
pmubqkd::TurbulenceParams turbulence_params(const TurbulenceArgs& a, const pmubqkd::ModeIndex& first) {
    const int given = (a.ratio ? 1 : 0) + (a.r0 ? 1 : 0) + (a.cn2 ? 1 : 0);
    if (given != 1) throw UsageError("give exactly one of --ratio, --r0 or --cn2 (with --length)");
    if (a.ratio) return pmubqkd::TurbulenceParams::from_ratio(*a.ratio, first, a.b);
    if (a.r0) {
        pmubqkd::TurbulenceParams t{*a.r0, a.b};
        t.validate();
        return t;
    }
    if (!a.length) throw UsageError("--cn2 needs --length");
    return pmubqkd::TurbulenceParams::from_atmosphere(*a.cn2, a.wavelength, *a.length, a.b);
}

int cmd_turbulence(const TurbulenceArgs& a, const Common& c) {
    if (a.max_dl < 0) throw UsageError("--max-dl must be nonnegative");
    const auto modes = selected_modes(a);
    const auto params = turbulence_params(a, modes.front());
    const auto profiles = pmubqkd::parallel_map<pmubqkd::CrosstalkProfile>(
        modes.size(), c.threads, [&](std::size_t i) { return pmubqkd::crosstalk_profile(modes[i], params, a.max_dl); });

    pmubqkd::io::OutputEnvelope env;
    env.command = "turbulence";
    env.params = {{"modes", json::array()}, {"ratio", a.ratio ? json(*a.ratio) : json(nullptr)},
                  {"r0", a.r0 ? json(*a.r0) : json(nullptr)}, {"cn2", a.cn2 ? json(*a.cn2) : json(nullptr)},
                  {"wavelength", a.wavelength}, {"length", a.length ? json(*a.length) : json(nullptr)},
                  {"b", a.b}, {"maxDl", a.max_dl}};
    for (const auto& m : modes) env.params["modes"].push_back(pmubqkd::io::to_json(m));
    json profs = json::array();
    for (const auto& p : profiles) profs.push_back(pmubqkd::io::to_json(p));
    env.results = {{"params", pmubqkd::io::to_json(params)},
                   {"profiles", profs},
                   {"qber", pmubqkd::io::to_json(pmubqkd::qber_from_profiles(profiles))}};
    env.units = base_units();
    env.tolerances = {{"angular", pmubqkd::angular_kronrod_options().abs_tol},
                      {"radial", pmubqkd::radial_kronrod_options().abs_tol},
                      {"radialCutoff", 1e-14}};
    emit(c, env);
    return kExitOk;
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
    int order = 3;
    double rounds = 1e5;
    double qber = 0.0;
    std::uint64_t seed = 1;
    std::string turbulence;
    std::string leakage = "inconclusive";
    bool raw_keys = false;
};

std::vector<pmubqkd::CrosstalkProfile> load_profiles(const std::string& path) {
    json j = read_json_file(path);
    if (j.contains("results")) j = j.at("results");
    std::vector<pmubqkd::CrosstalkProfile> out;
    try {
        if (j.contains("profiles")) {
            for (const auto& p : j.at("profiles")) out.push_back(pmubqkd::io::profile_from_json(p));
        } else {
            out.push_back(pmubqkd::io::profile_from_json(j));
        }
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    return out;
}

int cmd_simulate(const SimulateArgs& a, const Common& c) {
    if (!(a.rounds >= 1.0) || a.rounds != std::floor(a.rounds) || a.rounds > 9e15) {
        throw UsageError("rounds must be a positive integer");
    }
    pmubqkd::ProtocolConfig cfg;
    cfg.order = a.order;
    cfg.rounds = static_cast<long>(a.rounds);
    cfg.seed = a.seed;
    if (a.leakage != "inconclusive" && a.leakage != "random") throw UsageError("--leakage must be inconclusive or random");
    if (a.turbulence.empty()) {
        cfg.channel = pmubqkd::SymmetricChannel{a.qber};
    } else {
        cfg.channel = pmubqkd::TurbulenceChannel::from_profiles(
            a.order, load_profiles(a.turbulence),
            a.leakage == "random" ? pmubqkd::LeakagePolicy::RandomSymbol : pmubqkd::LeakagePolicy::Inconclusive);
    }
    cfg.validate();
    const auto pmub = pmubqkd::build_pmub(a.order);
    const auto session = pmubqkd::run_session(cfg, pmub, c.threads);
    const auto& st = session.sifted.stats;

    pmubqkd::io::OutputEnvelope env;
    env.command = "simulate";
    env.seed = a.seed;
    env.params = {{"order", a.order}, {"rounds", cfg.rounds}, {"qber", a.turbulence.empty() ? json(a.qber) : json(nullptr)},
                  {"turbulence", a.turbulence.empty() ? json(nullptr) : json(a.turbulence)},
                  {"leakage", a.leakage}, {"rawKeys", a.raw_keys}};
    env.results = {{"stats", pmubqkd::io::to_json(st)},
                   {"transcriptDigest", hex(fnv1a(pmubqkd::session_transcript(session.records)))}};
    if (!st.insufficient) {
        env.results["analyticKeyRate"] = pmubqkd::analytic_key_rate(*st.jointL, *st.jointH, pmub.qMU).unclamped;
    }
    if (a.raw_keys) {
        std::ostringstream ka, kb;
        for (int s : session.sifted.rawA) ka << s << '\n';
        for (int s : session.sifted.rawB) kb << s << '\n';
        env.results["rawKeyFiles"] = {write_file(c, "rawA.txt", ka.str()).string(),
                                      write_file(c, "rawB.txt", kb.str()).string()};
    }
    env.units = base_units();
    env.caveats = pmubqkd::io::determinism_caveats();
    if (st.insufficient) env.caveats.push_back("a basis has no sifted conclusive rounds; key rate not estimated");
    emit(c, env);
    return kExitOk;
}

// ---- keyrate ----------------------------------------------------------------------

struct KeyrateArgs {
    double qber = 0.0;
    int order = 3;
    std::string preset = "paper-eq10";
    std::optional<double> theta_override;
    std::string constraints;
    int starts = 8;
    std::uint64_t seed = 0x5eed;
    std::string norm = "operator";
};

int cmd_keyrate_analytic(const KeyrateArgs& a, const Common& c) {
    if (!(a.qber >= 0.0 && a.qber <= 1.0)) throw UsageError("QBER must lie in [0, 1]");
    const auto pmub = pmubqkd::build_pmub(a.order);
    const int d = pmub.dimension();
    const auto rate = pmubqkd::analytic_key_rate(d, a.qber, pmub.qMU);
    pmubqkd::io::OutputEnvelope env;
    env.command = "keyrate analytic";
    env.params = {{"qber", a.qber}, {"order", a.order}};
    env.results = {{"keyRate", rate.unclamped},
                   {"keyRateClamped", rate.clamped()},
                   {"qMU", pmub.qMU},
                   {"errorCostPerBasis", pmubqkd::symmetric_error_cost(d, a.qber)},
                   {"threshold", pmubqkd::analytic_threshold(d, pmub.qMU)}};
    env.units = base_units();
    env.tolerances = {{"threshold", 1e-12}};
    emit(c, env);
    return kExitOk;
}

pmubqkd::DualOptions dual_options(const KeyrateArgs& a, const Common& c) {
    if (a.starts < 1) throw UsageError("--starts must be at least 1");
    if (a.norm != "operator" && a.norm != "trace") throw UsageError("--norm must be operator or trace");
    pmubqkd::DualOptions opt;
    opt.starts = a.starts;
    opt.seed = a.seed;
    opt.threads = c.threads;
    opt.norm = a.norm == "trace" ? pmubqkd::PinchedNorm::Trace : pmubqkd::PinchedNorm::Operator;
    return opt;
}

int cmd_keyrate_numerical(const KeyrateArgs& a, const Common& c) {
    const auto opt = dual_options(a, c);
    pmubqkd::ConstraintSet cs;
    if (a.preset == "custom") {
        if (a.constraints.empty()) throw UsageError("preset custom needs --constraints FILE");
        try {
            cs = pmubqkd::io::constraints_from_json(read_json_file(a.constraints));
        } catch (const json::exception& e) {
            throw UsageError(a.constraints + ": " + e.what());
        }
    } else {
        cs = pmubqkd::build_constraints(pmubqkd::parse_preset(a.preset), a.qber, pmubqkd::build_pmub(a.order),
                                        a.theta_override);
    }
    const auto pinch = pmubqkd::Pinching::key_basis(cs.alice_dim, cs.bob_dim);
    const auto sol = pmubqkd::optimize_dual(cs, pinch, pmubqkd::symmetric_error_cost(cs.alice_dim, a.qber), opt);

    pmubqkd::io::OutputEnvelope env;
    env.command = "keyrate numerical";
    env.seed = a.seed;
    env.params = {{"preset", a.preset},  {"qber", a.qber},   {"order", a.order},
                  {"thetaOverride", a.theta_override ? json(*a.theta_override) : json(nullptr)},
                  {"constraints", a.constraints.empty() ? json(nullptr) : json(a.constraints)},
                  {"starts", a.starts}, {"norm", a.norm}};
    env.results = pmubqkd::io::to_json(sol);
    env.results["labels"] = cs.labels;
    env.results["gammas"] = cs.gammas;
    env.units = base_units();
    env.tolerances = {{"simplexDiameter", opt.simplex.diameter_tol},
                      {"maxEvaluations", opt.simplex.max_evaluations},
                      {"infeasibilityMargin", 1e-6}};
    env.caveats = pmubqkd::io::determinism_caveats();
    if (!sol.feasible) {
        env.caveats.push_back("dual value exceeds log(d): no state satisfies these constraints, so the bound is vacuous");
    }
    if (a.theta_override && a.preset != "paper-eq10") env.caveats.push_back("--theta-override only affects paper-eq10");
    emit(c, env);
    return sol.converged ? kExitOk : kExitNumerical;
}

// ---- apparatus --------------------------------------------------------------------

int cmd_apparatus(const std::string& stages_path, const Common& c) {
    auto stages = pmubqkd::fig2_stages();
    auto sources = pmubqkd::fig2_sources();
    if (!stages_path.empty()) {
        const json j = read_json_file(stages_path);
        try {
            if (j.contains("stages")) {
                stages.clear();
                for (const auto& s : j.at("stages")) stages.push_back(pmubqkd::io::stage_from_json(s));
            }
            if (j.contains("sources")) {
                sources.clear();
                for (const auto& s : j.at("sources")) sources.push_back(pmubqkd::io::source_from_json(s));
            }
        } catch (const json::exception& e) {
            throw UsageError(stages_path + ": " + e.what());
        }
    }
    const auto traced = pmubqkd::apparatus_pipeline(sources, stages);

    // Undo the combine half from the channel side and check that every source comes back.
    std::vector<pmubqkd::SourceMode> channel;
    for (const auto& t : traced) channel.push_back({t.source.p, t.channel_l, t.channel_port});
    const auto back = pmubqkd::apparatus_pipeline(channel, pmubqkd::reverse_stages(stages));
    bool round_trip = true;
    for (std::size_t i = 0; i < traced.size(); ++i) {
        const auto entry = back[i].path.empty() ? back[i].source.entry : back[i].path.back();
        round_trip = round_trip && back[i].final_l == sources[i].l && entry == sources[i].entry;
    }

    pmubqkd::io::OutputEnvelope env;
    env.command = "apparatus";
    json js = json::array(), jsrc = json::array(), jt = json::array(), jc = json::array();
    for (const auto& s : stages) js.push_back(pmubqkd::io::to_json(s));
    for (const auto& s : sources) jsrc.push_back(pmubqkd::io::to_json(s));
    for (const auto& t : traced) jt.push_back(pmubqkd::io::to_json(t));
    for (const auto& [p, l] : pmubqkd::channel_modes(traced)) jc.push_back({{"p", p}, {"l", l}});
    env.params = {{"stages", js}, {"sources", jsrc}, {"stagesFile", stages_path.empty() ? json(nullptr) : json(stages_path)}};
    env.results = {{"channelModes", jc}, {"traces", jt}, {"roundTrip", round_trip}};
    env.units = base_units();
    emit(c, env);
    return kExitOk;
}

// ---- figure -------------------------------------------------------------------------

struct FigureArgs {
    std::string name;
    std::string preset = "paper-eq10";
    int order = 3;
    double q_min = 0.0, q_max = 0.15, q_step = 0.01;
    double ratio_max = 0.15, ratio_step = 0.005;
    double b = 0.01;
    int max_dl = 40;
    long samples = 200;
    std::uint64_t seed = 1;
    std::optional<double> ratio;
    double target = 0.88;
    std::optional<double> theta_override;
};

int cmd_figure(const FigureArgs& a, const Common& c) {
    std::ostringstream os;
    int code = kExitOk;
    if (a.name == "fig3") {
        pmubqkd::DualOptions opt;
        opt.threads = c.threads;
        const auto rows = pmubqkd::key_rate_curve(pmubqkd::parse_preset(a.preset), pmubqkd::build_pmub(a.order),
                                                  pmubqkd::uniform_grid(a.q_min, a.q_max, a.q_step), opt,
                                                  a.theta_override);
        os << "# fig3 preset=" << a.preset << " order=" << a.order << " toolVersion=" << pmubqkd::io::kToolVersion
           << " units=bits-per-sifted-signal\n";
        os << "Q,keyRate_4D,keyRate_BB84,keyRate_analytic,keyRate_BB84_exact,feasible_4D\n";
        for (const auto& r : rows) {
            if (!r.highDim.converged || !r.bb84.converged) code = kExitNumerical;
            os << num(r.qber) << ',' << num(r.highDim.feasible ? r.highDim.keyRate : std::nan("")) << ','
               << num(r.bb84.keyRate) << ',' << num(r.analytic) << ',' << num(r.bb84Exact) << ','
               << (r.highDim.feasible ? 1 : 0) << '\n';
        }
    } else if (a.name == "fig4") {
        const auto modes = pmubqkd::protocol_channel_modes();
        const auto rows = pmubqkd::retention_table(modes, a.b, pmubqkd::uniform_grid(0.0, a.ratio_max, a.ratio_step),
                                                   a.max_dl, c.threads);
        os << "# fig4 b=" << num(a.b) << " maxDl=" << a.max_dl << " toolVersion=" << pmubqkd::io::kToolVersion << "\n";
        os << "ratio,p,l,p_retained,sum_within_truncation,tail\n";
        for (const auto& r : rows) {
            os << num(r.ratio) << ',' << r.mode.radial() << ',' << r.mode.azimuthal() << ',' << num(r.retained) << ','
               << num(r.total) << ',' << num(r.tail) << '\n';
        }
    } else if (a.name == "fig5") {
        const auto modes = pmubqkd::protocol_channel_modes();
        const double ratio = a.ratio ? *a.ratio : pmubqkd::operating_ratio(modes, a.b, a.target);
        const auto params = pmubqkd::TurbulenceParams::from_ratio(ratio, modes.front(), a.b);
        const auto series =
            pmubqkd::practical_rate_series(params, a.samples, pmubqkd::build_pmub(a.order), a.seed, c.threads);
        os << "# fig5 seed=" << a.seed << " ratio=" << num(ratio) << " r0=" << num(params.fried_r0)
           << " order=" << a.order << " toolVersion=" << pmubqkd::io::kToolVersion << "\n";
        os << "sample,K_P,band_lower,band_upper,qber\n";
        for (const auto& s : series) {
            os << s.t << ',' << num(s.keyRate) << ',' << num(s.lower) << ',' << num(s.upper) << ',' << num(s.qber)
               << '\n';
        }
    } else {
        throw UsageError("unknown figure '" + a.name + "' (expected fig3, fig4 or fig5)");
    }
    emit(c, os.str());
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-dimensional LG/HG QKD toolkit: mode algebra, turbulence crosstalk, key-rate bounds, simulation"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file mirroring the flags (flags override it)");
    app.require_subcommand(1);
    app.fallthrough();  // global options may also follow the subcommand

    Common common;
    app.add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", common.out_dir, "output directory (default: $PMUBQKD_OUTPUT_DIR or .)");
    app.add_option("--out", common.out_file, "write the primary output to this file in the output directory");

    ModesArgs modes;
    auto* m = app.add_subcommand("modes", "LG and rotated-HG bases of one order, with overlaps");
    m->add_option("--order", modes.order, "odd mode order N");
    m->add_option("--render", modes.render, "also write intensity images")->check(CLI::IsMember({"pgm", "csv"}));
    m->add_option("--waist", modes.waist, "beam waist w (m)");
    m->add_option("--size", modes.size, "pixels per side");

    TurbulenceArgs turb;
    auto* t = app.add_subcommand("turbulence", "OAM crosstalk profiles under Kolmogorov phase turbulence");
    t->add_option("--p", turb.p, "radial index of a mode (repeat with --l)");
    t->add_option("--l", turb.l, "OAM index of a mode (repeat with --p)");
    t->add_option("--ratio", turb.ratio, "r_{p,l}/r0 for the first mode");
    t->add_option("--r0", turb.r0, "Fried parameter (m)");
    t->add_option("--cn2", turb.cn2, "structure constant Cn2 (m^-2/3)");
    t->add_option("--wavelength", turb.wavelength, "wavelength (m)");
    t->add_option("--length", turb.length, "path length (m)");
    t->add_option("--b", turb.b, "beam radius scale b (m)");
    t->add_option("--max-dl", turb.max_dl, "largest |dl| reported");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Monte-Carlo prepare-and-measure session");
    s->add_option("--order", sim.order, "odd mode order N");
    s->add_option("--rounds", sim.rounds, "number of rounds (1e6 notation accepted)");
    s->add_option("--qber", sim.qber, "symmetric channel error rate");
    s->add_option("--seed", sim.seed, "64-bit seed");
    s->add_option("--turbulence", sim.turbulence, "crosstalk profile JSON (output of `turbulence`)");
    s->add_option("--leakage", sim.leakage, "out-of-alphabet OAM: inconclusive or random");
    s->add_flag("--raw-keys", sim.raw_keys, "write rawA.txt and rawB.txt to the output directory");

    KeyrateArgs kr;
    auto* k = app.add_subcommand("keyrate", "secret-key rate bounds");
    k->require_subcommand(1);
    auto* ka = k->add_subcommand("analytic", "entropic-uncertainty bound");
    ka->add_option("--qber", kr.qber, "error rate in each basis");
    ka->add_option("--order", kr.order, "odd mode order N");
    auto* kn = k->add_subcommand("numerical", "dual lower bound");
    kn->add_option("--preset", kr.preset, "constraint preset")
        ->check(CLI::IsMember({"paper-eq10", "calibrated", "bb84", "custom"}));
    kn->add_option("--qber", kr.qber, "error rate in each basis");
    kn->add_option("--order", kr.order, "odd mode order N");
    kn->add_option("--theta-override", kr.theta_override, "replace theta (rad) in paper-eq10");
    kn->add_option("--constraints", kr.constraints, "constraint JSON for preset custom");
    kn->add_option("--starts", kr.starts, "optimizer starts");
    kn->add_option("--seed", kr.seed, "seed for start perturbations");
    kn->add_option("--norm", kr.norm, "pinched-operator norm: operator or trace");

    std::string stages_path;
    auto* ap = app.add_subcommand("apparatus", "trace source modes through the sorter stages");
    ap->add_option("--stages", stages_path, "stage table JSON");

    FigureArgs fig;
    auto* f = app.add_subcommand("figure", "CSV data for the key-rate (fig3), crosstalk (fig4) and practical-rate (fig5) plots");
    f->add_option("name", fig.name, "fig3, fig4 or fig5")->required();
    f->add_option("--preset", fig.preset, "fig3 constraint preset")->check(CLI::IsMember({"paper-eq10", "calibrated"}));
    f->add_option("--order", fig.order, "odd mode order N");
    f->add_option("--q-min", fig.q_min, "fig3 first Q");
    f->add_option("--q-max", fig.q_max, "fig3 last Q");
    f->add_option("--q-step", fig.q_step, "fig3 Q step");
    f->add_option("--theta-override", fig.theta_override, "fig3 theta (rad) for paper-eq10");
    f->add_option("--ratio-max", fig.ratio_max, "fig4 largest r_{p,l}/r0");
    f->add_option("--ratio-step", fig.ratio_step, "fig4 ratio step");
    f->add_option("--b", fig.b, "beam radius scale b (m)");
    f->add_option("--max-dl", fig.max_dl, "fig4 truncation");
    f->add_option("--samples", fig.samples, "fig5 samples");
    f->add_option("--seed", fig.seed, "fig5 seed");
    f->add_option("--ratio", fig.ratio, "fig5 r_{p,l}/r0 (default: where mean p(dl=0) equals --target)");
    f->add_option("--target", fig.target, "fig5 mean retention defining the operating point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*m) return cmd_modes(modes, common);
        if (*t) return cmd_turbulence(turb, common);
        if (*s) return cmd_simulate(sim, common);
        if (*ka) return cmd_keyrate_analytic(kr, common);
        if (*kn) return cmd_keyrate_numerical(kr, common);
        if (*ap) return cmd_apparatus(stages_path, common);
        if (*f) return cmd_figure(fig, common);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const pmubqkd::ConfigurationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}
