#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "contend/analytics.hpp"
#include "contend/equilibrium.hpp"
#include "contend/protocols.hpp"
#include "contend/sim.hpp"

namespace contend::cli {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("CONTEND_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && end != env) return v;
        throw PreconditionError("CONTEND_SEED must be a non-negative integer");
    }
    return 1;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// "p/q", a plain decimal, or anything std::stod accepts (taken exactly).
Rational parse_exact(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash != std::string::npos) {
            BigInt num(s.substr(0, slash)), den(s.substr(slash + 1));
            if (den == 0) throw PreconditionError("zero denominator in '" + s + "'");
            return Rational(num, den);
        }
        std::size_t i = 0;
        bool neg = false;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) neg = s[i++] == '-';
        std::string digits;
        int scale = 0;
        bool dot = false, ok = i < s.size();
        for (; i < s.size(); ++i) {
            if (s[i] == '.' && !dot) {
                dot = true;
            } else if (s[i] >= '0' && s[i] <= '9') {
                digits += s[i];
                if (dot) ++scale;
            } else {
                ok = false;
                break;
            }
        }
        if (ok && !digits.empty()) {
            Rational r(BigInt(digits), BigInt(1) * boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(scale)));
            return neg ? Rational(-r) : r;
        }
        return rational_from_double(std::stod(s));
    } catch (const PreconditionError&) {
        throw;
    } catch (const std::exception&) {
        throw PreconditionError("invalid number '" + s + "'");
    }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PreconditionError("cannot write " + path.string());
    f << content;
    if (!f) throw PreconditionError("failed writing " + path.string());
}

std::filesystem::path prepare_out(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (!std::filesystem::is_directory(p)) throw PreconditionError("--out '" + dir + "' is not a usable directory");
    return p;
}

json make_meta(const std::string& command, json params, std::optional<std::uint64_t> seed) {
    json m;
    m["command"] = command;
    m["params"] = std::move(params);
    m["seed"] = seed ? json(*seed) : json();
    m["version"] = CONTEND_VERSION;
    return m;
}

std::string csv_meta(const json& meta) {
    return "# " + meta.dump() + "\n";
}

Feedback resolve_feedback(const std::string& flag, const std::vector<std::string>& specs, int n, int k) {
    if (flag == "ack") return Feedback::AcknowledgementBased;
    if (flag == "ternary") return Feedback::Ternary;
    if (flag != "auto") throw PreconditionError("--feedback must be auto, ack or ternary");
    // a protocol that reads the pending count decides
    GameConfig probe{n, k, Feedback::Ternary};
    for (const auto& s : specs)
        if (parse_protocol(s, probe).requires_pending_count()) return Feedback::Ternary;
    return Feedback::AcknowledgementBased;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
    std::string op;
    int n = 0;
    int k = 0;
    std::string z = "1";
    std::string which = "sop";
    int m = 0;
    std::string format = "text";
    std::string out_dir;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    json params{{"op", a.op}, {"n", a.n}, {"k", a.k}, {"z", a.z}, {"which", a.which}, {"m", a.m}};
    json record;
    std::string text;

    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw PreconditionError(what);
    };
    if (a.op == "successes") {
        need(a.n >= 1, "--n must be >= 1");
        need(a.k >= 1, "--k must be >= 1");
        double z = to_double(parse_exact(a.z));
        double v = expected_successes(a.n, a.k, z);
        record = analytic_record("expected_successes", {{"n", a.n}, {"k", a.k}, {"z", z}}, v);
        text = fmt_double(v);
    } else if (a.op == "pmf") {
        need(a.n >= 1, "--n must be >= 1");
        need(a.k >= 1, "--k must be >= 1");
        Rational z = parse_exact(a.z);
        need(z >= 0 && z <= 1, "--z must lie in [0, 1]");
        json rows = json::array();
        std::ostringstream ts;
        if (a.n <= 64) {
            auto probs = success_count_pmf_exact(a.n, a.k, z);
            for (std::size_t x = 0; x < probs.size(); ++x) {
                rows.push_back({{"x", x}, {"exact", to_string(probs[x])}, {"approx", to_double(probs[x])}});
                ts << "(" << x << ", " << to_string(probs[x]) << ") = " << fmt_double(to_double(probs[x])) << "\n";
            }
        } else {
            auto pmf = success_count_pmf(a.n, a.k, to_double(z));
            for (std::size_t x = 0; x < pmf.probs.size(); ++x) {
                rows.push_back({{"x", x}, {"exact", nullptr}, {"approx", pmf.probs[x]}});
                ts << "(" << x << ", " << fmt_double(pmf.probs[x]) << ")\n";
            }
        }
        record = {{"operation", "success_count_pmf"},
                  {"inputs", {{"n", a.n}, {"k", a.k}, {"z", to_string(z)}}},
                  {"rows", rows}};
        text = ts.str();
        if (!text.empty()) text.pop_back();
    } else if (a.op == "optimal-mass") {
        double v = optimal_transmission_mass(a.n, a.k);
        record = analytic_record("optimal_transmission_mass", {{"n", a.n}, {"k", a.k}}, v);
        text = fmt_double(v);
    } else if (a.op == "fk-latency" || a.op == "f2-latency" || a.op == "f2-deviation" || a.op == "no-transmit") {
        Rational v;
        std::string name;
        json inputs;
        if (a.op == "fk-latency") {
            v = fk_expected_latency(a.n, a.k);
            name = "fk_expected_latency";
            inputs = {{"n", a.n}, {"k", a.k}};
        } else if (a.op == "f2-latency") {
            v = f2_closed_form_latency(a.n);
            name = "f2_closed_form_latency";
            inputs = {{"n", a.n}};
        } else if (a.op == "f2-deviation") {
            v = f2_deviation_latency(a.n);
            name = "f2_deviation_latency";
            inputs = {{"n", a.n}};
        } else {
            int m = a.m > 0 ? a.m : a.n;
            v = no_transmit_round_value(m, a.k > 0 ? a.k : 2);
            name = "no_transmit_round_value";
            inputs = {{"m", m}, {"k", a.k > 0 ? a.k : 2}};
        }
        record = analytic_record(name, inputs, v);
        text = to_string(v) + " = " + fmt_double(to_double(v));
    } else if (a.op == "bound") {
        double v;
        std::string name;
        if (a.which == "sop") {
            v = sop_finishing_bound(a.n, a.k);
            name = "sop_finishing_bound";
        } else if (a.which == "small") {
            v = small_regime_finishing_bound(a.n, a.k);
            name = "small_regime_finishing_bound";
        } else if (a.which == "tail") {
            v = deadline_tail_bound(a.n, a.k);
            name = "deadline_tail_bound";
        } else {
            throw PreconditionError("--which must be sop, small or tail");
        }
        record = analytic_record(name, {{"n", a.n}, {"k", a.k}}, v);
        text = fmt_double(v);
    } else {
        throw PreconditionError("--op must be one of successes, pmf, optimal-mass, fk-latency, f2-latency, "
                                "f2-deviation, no-transmit, bound");
    }

    json doc{{"meta", make_meta("analyze", params, std::nullopt)}, {"result", record}};
    if (!a.out_dir.empty()) write_file(prepare_out(a.out_dir) / ("analyze-" + a.op + ".json"), doc.dump(2) + "\n");
    if (a.format == "json")
        out << doc.dump(2) << "\n";
    else
        out << text << "\n";
    return kExitOk;
}

// ---- equilibrium ---------------------------------------------------------

struct EquilibriumArgs {
    int max_m = 100;
    double tol = 1e-12;
    int grid = 10000;
    bool bounds = false;
    std::string format = "csv";
    std::string out_dir;
};

int cmd_equilibrium(const EquilibriumArgs& a, std::ostream& out) {
    SolverOptions opt;
    opt.tol = a.tol;
    opt.grid_points = a.grid;
    EquilibriumTable table = solve_equilibrium_table(a.max_m, opt);
    json params{{"max_m", a.max_m}, {"tol", a.tol}, {"grid", a.grid}, {"bounds", a.bounds}};
    json meta = make_meta("equilibrium", params, std::nullopt);

    std::ostringstream csv;
    csv << csv_meta(meta);
    write_table_csv(csv, table, a.bounds);
    json doc{{"meta", meta}, {"table", table_to_json(table)}};

    if (!a.out_dir.empty()) {
        auto dir = prepare_out(a.out_dir);
        write_file(dir / "equilibrium.csv", csv.str());
        write_file(dir / "equilibrium.json", doc.dump(2) + "\n");
        out << "wrote " << (dir / "equilibrium.csv").string() << " and " << (dir / "equilibrium.json").string()
            << " (" << a.max_m - 1 << " rows)\n";
    } else if (a.format == "json") {
        out << doc.dump(2) << "\n";
    } else {
        out << csv.str();
    }
    return kExitOk;
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
    std::string exp = "latency";
    std::string protocol = "uniform";
    std::string base = "uniform";
    std::string dev = "delay1";
    int n = 0;
    int k = 0;
    std::string feedback = "auto";
    std::int64_t trials = 100000;
    std::string cutoff = "auto";
    std::string tcut = "auto";
    std::uint64_t seed = 1;
    int workers = 0;
    std::string out_dir;
};

std::int64_t parse_positive(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos == s.size() && v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw PreconditionError(std::string(what) + " must be a positive integer or 'auto' (got '" + s + "')");
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    if (a.n < 1) throw PreconditionError("--n must be >= 1");
    if (a.k < 1) throw PreconditionError("--k must be >= 1");
    if (a.trials < 1) throw PreconditionError("--trials must be >= 1");

    std::vector<std::string> specs;
    if (a.exp == "deviation")
        specs = {a.base, a.dev};
    else
        specs = {a.protocol};
    GameConfig config{a.n, a.k, resolve_feedback(a.feedback, specs, a.n, a.k)};

    json params{{"exp", a.exp}, {"n", a.n}, {"k", a.k}, {"feedback", std::string(to_string(config.feedback))},
                {"trials", a.trials}, {"cutoff", a.cutoff}, {"workers", a.workers}};
    if (a.exp == "deviation") {
        params["base"] = a.base;
        params["dev"] = a.dev;
    } else {
        params["protocol"] = a.protocol;
    }
    if (a.exp == "tail") params["tcut"] = a.tcut;

    json result;
    std::vector<std::pair<std::string, const TrialBatch*>> csvs;
    TrialBatch batch, batch2;
    std::ostringstream summary;

    if (a.exp == "latency" || a.exp == "finishing" || a.exp == "tail") {
        Protocol p = parse_protocol(a.protocol, config);
        std::vector<Protocol> profile(static_cast<std::size_t>(a.n), p);
        if (a.exp == "tail") {
            std::int64_t t_cut;
            if (a.tcut == "auto") {
                auto d = p.deadline();
                if (!d) throw PreconditionError("--tcut auto needs a deadline protocol (g1 or deadline-r)");
                t_cut = *d;
            } else {
                t_cut = parse_positive(a.tcut, "--tcut");
            }
            TailReport r = tail_probability_experiment(profile, config, t_cut, a.trials, a.seed, a.workers, &batch);
            result = to_json(r);
            summary << "Pr(T > " << t_cut << ") = " << fmt_double(r.estimate) << "  wilson95 [" << fmt_double(r.ci.lo)
                    << ", " << fmt_double(r.ci.hi) << "]  (" << r.exceed << "/" << r.trials << ")";
            if (p.kind() == ProtocolKind::DeadlineTernaryR) {
                double bound = deadline_tail_bound(a.n, a.k);
                result["analytic_bound"] = bound;
                result["within_bound"] = r.ci.hi <= bound;
                summary << "  bound " << fmt_double(bound) << (r.ci.hi <= bound ? " (ok)" : " (exceeded)");
            }
        } else {
            std::int64_t cutoff = a.cutoff == "auto" ? default_cutoff(profile, config) : parse_positive(a.cutoff, "--cutoff");
            params["cutoff_resolved"] = cutoff;
            batch = run_trials(profile, config, a.trials, cutoff, a.seed, a.workers);
            if (a.exp == "latency") {
                LatencyReport r = summarize_latency(batch);
                result = to_json(r);
                summary << "pooled " << r.pooled.label() << " latency = " << fmt_double(r.pooled.mean) << " +- "
                        << fmt_double(r.pooled.std_error) << " (trials " << r.pooled.trials << ", censored "
                        << fmt_double(r.pooled.censored_fraction) << ")";
            } else {
                EstimateReport r = summarize_finishing(batch);
                result = to_json(r);
                summary << r.label() << " finishing time = " << fmt_double(r.mean) << " +- " << fmt_double(r.std_error)
                        << " (trials " << r.trials << ", censored " << fmt_double(r.censored_fraction) << ")";
                std::optional<double> bound;
                if (p.kind() == ProtocolKind::Sop && a.n > a.k && a.k >= 2) bound = sop_finishing_bound(a.n, a.k);
                if (p.kind() == ProtocolKind::UniformFk && p.channels() == a.k && a.n >= 2 && a.n <= a.k)
                    bound = small_regime_finishing_bound(a.n, a.k);
                if (bound) {
                    result["analytic_bound"] = *bound;
                    result["within_bound"] = r.mean <= *bound;
                    summary << "  bound " << fmt_double(*bound);
                }
            }
        }
        result["protocol"] = p.name();
        csvs.emplace_back(a.exp + ".csv", &batch);
    } else if (a.exp == "deviation") {
        Protocol base = parse_protocol(a.base, config);
        Protocol dev = parse_protocol(a.dev, config);
        std::vector<Protocol> profile(static_cast<std::size_t>(a.n), base);
        profile[0] = dev;
        std::int64_t cutoff = a.cutoff == "auto" ? default_cutoff(profile, config) : parse_positive(a.cutoff, "--cutoff");
        params["cutoff_resolved"] = cutoff;
        DeviationReport r = deviation_experiment(base, dev, config, a.trials, cutoff, a.seed, a.workers, &batch, &batch2);
        result = to_json(r);
        result["base_protocol"] = base.name();
        result["deviator_protocol"] = dev.name();
        summary << "deviator " << fmt_double(r.deviator.mean) << " vs base " << fmt_double(r.base.mean)
                << ": difference " << fmt_double(r.difference) << " +- " << fmt_double(r.difference_std_error) << " ("
                << (r.common_random_numbers ? "common random numbers" : "independent streams") << ")";
        csvs.emplace_back("deviation_base.csv", &batch);
        csvs.emplace_back("deviation_dev.csv", &batch2);
    } else {
        throw PreconditionError("--exp must be latency, finishing, tail or deviation");
    }

    json meta = make_meta("simulate", params, a.seed);
    json doc{{"meta", meta}, {"result", result}};
    out << summary.str() << "\n";
    if (!a.out_dir.empty()) {
        auto dir = prepare_out(a.out_dir);
        write_file(dir / (a.exp + ".json"), doc.dump(2) + "\n");
        for (auto& [name, b] : csvs) {
            std::ostringstream os;
            os << csv_meta(meta);
            write_trials_csv(os, *b);
            write_file(dir / name, os.str());
        }
    }
    return kExitOk;
}

// ---- check ---------------------------------------------------------------

struct CheckArgs {
    int n = 0;
    int k = 0;
    std::string protocol = "uniform";
    int horizon = 3;
    std::vector<std::string> devs;
    bool no_mc = false;
    std::int64_t trials = 200000;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string format = "text";
    std::string out_dir;
};

int cmd_check(const CheckArgs& a, std::ostream& out) {
    GameConfig config = GameConfig::make(a.n, a.k, Feedback::AcknowledgementBased);
    Protocol reference = parse_protocol(a.protocol, config);
    auto ref_seq = reference.uniform_prefix(a.k);
    if (!ref_seq || !ref_seq->empty())
        throw PreconditionError("check supports the reference protocol f^k only (uniform or uniform:k=" +
                                std::to_string(a.k) + ")");
    std::vector<Protocol> devs;
    for (const auto& s : a.devs) devs.push_back(parse_protocol(s, config));

    AckCheckOptions opt;
    opt.monte_carlo = !a.no_mc;
    opt.trials = a.trials;
    opt.seed = a.seed;
    opt.workers = a.workers;
    AckCheckReport rep = check_ack_equilibrium(a.n, a.k, a.horizon, devs, opt);

    json params{{"n", a.n}, {"k", a.k}, {"protocol", a.protocol}, {"horizon", a.horizon}, {"dev", a.devs},
                {"monte_carlo", !a.no_mc}, {"trials", a.trials}};
    json doc{{"meta", make_meta("check", params, a.seed)}, {"report", report_to_json(rep)}};
    if (!a.out_dir.empty()) write_file(prepare_out(a.out_dir) / "check.json", doc.dump(2) + "\n");

    if (a.format == "json") {
        out << doc.dump(2) << "\n";
    } else {
        out << to_string(rep.verdict);
        if (rep.witness) {
            const auto& w = rep.deviations[*rep.witness];
            out << " witness=" << w.name << " latency=" << (w.exact ? to_string(w.exact_latency) : fmt_double(w.latency))
                << " base=" << to_string(rep.base_latency);
        } else {
            out << " base=" << to_string(rep.base_latency) << " deviations=" << rep.deviations.size();
        }
        if (rep.required_trials) out << " required_trials=" << *rep.required_trials;
        out << "\n";
    }
    return rep.verdict == Verdict::Inconclusive ? kExitInconclusive : kExitOk;
}

// ---- schedule ------------------------------------------------------------

struct ScheduleArgs {
    std::string protocol = "g1";
    int n = 0;
    int k = 0;
    double beta = 0.5;
    std::string rounds = "log-half-n";
    std::string mass = "literal";
    std::string out_dir;
};

int cmd_schedule(const ScheduleArgs& a, std::ostream& out) {
    json params{{"protocol", a.protocol}, {"n", a.n}, {"k", a.k}};
    json result;
    if (a.protocol == "g1") {
        RoundsRule rr;
        if (a.rounds == "log-half-n")
            rr = RoundsRule::LogOfHalfN;
        else if (a.rounds == "half-log-n")
            rr = RoundsRule::HalfOfLogN;
        else
            throw PreconditionError("--rounds must be log-half-n or half-log-n");
        G1Mass gm;
        if (a.mass == "literal")
            gm = G1Mass::Literal;
        else if (a.mass == "estimate")
            gm = G1Mass::PendingEstimate;
        else
            throw PreconditionError("--mass must be literal or estimate");
        params["beta"] = a.beta;
        params["rounds"] = a.rounds;
        params["mass"] = a.mass;
        DeadlineSchedule s = build_deadline_schedule(a.n, a.k, a.beta, rr, gm);
        json intervals = json::array();
        for (std::size_t j = 0; j < s.interval_lengths.size(); ++j)
            intervals.push_back({{"j", j + 1},
                                 {"n_j", s.pending_scale[j]},
                                 {"start", s.interval_starts[j]},
                                 {"length", s.interval_lengths[j]},
                                 {"per_channel_probability", 1.0 / s.mass_denominator[j]}});
        result = {{"r", s.r},
                  {"rounds_rule", std::string(to_string(s.rounds_rule))},
                  {"mass_rule", std::string(to_string(s.mass))},
                  {"intervals", intervals},
                  {"t0", s.t0}};
        out << "r=" << s.r << " (" << to_string(s.rounds_rule) << ") t0=" << s.t0 << " l=[";
        for (std::size_t j = 0; j < s.interval_lengths.size(); ++j) out << (j ? ", " : "") << s.interval_lengths[j];
        out << "]\n";
    } else if (a.protocol == "deadline-r" || a.protocol == "r") {
        std::int64_t t0 = ternary_deadline(a.n, a.k);
        result = {{"t0", t0}, {"tail_bound", deadline_tail_bound(a.n, a.k)}};
        out << "t0=" << t0 << " tail_bound=" << fmt_double(deadline_tail_bound(a.n, a.k)) << "\n";
    } else {
        throw PreconditionError("--protocol must be g1 or deadline-r");
    }
    if (!a.out_dir.empty()) {
        json doc{{"meta", make_meta("schedule", params, std::nullopt)}, {"schedule", result}};
        write_file(prepare_out(a.out_dir) / "schedule.json", doc.dump(2) + "\n");
    }
    return kExitOk;
}

const char* kProtocolHelp =
    "Protocol specs: name[:key=value[;key=value]*]\n"
    "  uniform[:k=K]        f^k, 1/k per channel (K defaults to the game k)\n"
    "  sop                  1/max{m,k} per channel (ternary)\n"
    "  g1[:beta=B;mass=literal|estimate;rounds=log-half-n|half-log-n]\n"
    "                       acknowledgement-based deadline protocol\n"
    "  deadline-r           SOP until ceil(4e(n-k)/k), then a locked channel (ternary)\n"
    "  ternary-eq[:max_m=M] two-channel ternary equilibrium (k=2)\n"
    "  delay1[:k=K]         silent at t=1, then f^k\n"
    "  prefix:A,B,..;tail=SPEC  forced actions, then SPEC (tail must come last)\n";

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Strategic multi-channel contention resolution: analytics, equilibria, simulation"};
    app.footer(kProtocolHelp);
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CONTEND_VERSION));

    std::uint64_t seed = 1;
    try {
        seed = default_seed();
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitPrecondition;
    }

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Closed forms and exact chains");
    analyze->add_option("--op", an.op, "successes|pmf|optimal-mass|fk-latency|f2-latency|f2-deviation|no-transmit|bound")
        ->required();
    analyze->add_option("--n", an.n, "Players");
    analyze->add_option("--k", an.k, "Channels");
    analyze->add_option("--z", an.z, "Per-player transmission mass (decimal or p/q)");
    analyze->add_option("--m", an.m, "Pending count for no-transmit (defaults to --n)");
    analyze->add_option("--which", an.which, "Bound: sop|small|tail");
    analyze->add_option("--format", an.format, "text|json");
    analyze->add_option("--out", an.out_dir, "Output directory");

    EquilibriumArgs eq;
    auto* equilibrium = app.add_subcommand("equilibrium", "Solve the ternary two-channel equilibrium table");
    equilibrium->add_option("--max-m", eq.max_m, "Largest pending count");
    equilibrium->add_option("--tol", eq.tol, "Maximum final bisection bracket width");
    equilibrium->add_option("--grid", eq.grid, "Scan grid points");
    equilibrium->add_flag("--bounds", eq.bounds, "Add the 1/(2 sqrt(m-1)) and 2/sqrt(m-1) columns");
    equilibrium->add_option("--format", eq.format, "csv|json (stdout only)");
    equilibrium->add_option("--out", eq.out_dir, "Output directory");

    SimulateArgs sim;
    sim.seed = seed;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiments");
    simulate->add_option("--exp", sim.exp, "latency|finishing|tail|deviation");
    simulate->add_option("--protocol", sim.protocol, "Protocol spec for all players");
    simulate->add_option("--base", sim.base, "Base protocol (deviation)");
    simulate->add_option("--dev", sim.dev, "Deviator protocol for player 0 (deviation)");
    simulate->add_option("--n", sim.n, "Players")->required();
    simulate->add_option("--k", sim.k, "Channels")->required();
    simulate->add_option("--feedback", sim.feedback, "auto|ack|ternary");
    simulate->add_option("--trials", sim.trials, "Independent traces");
    simulate->add_option("--cutoff", sim.cutoff, "Censoring round or auto");
    simulate->add_option("--tcut", sim.tcut, "Tail cut round or auto (deadline)");
    simulate->add_option("--seed", sim.seed, "Seed (default CONTEND_SEED or 1)");
    simulate->add_option("--workers", sim.workers, "Worker threads (0 = all cores)");
    simulate->add_option("--out", sim.out_dir, "Output directory for JSON and CSV");

    CheckArgs ck;
    ck.seed = seed;
    auto* check = app.add_subcommand("check", "Deviation check for f^k under acknowledgement feedback");
    check->add_option("--n", ck.n, "Players")->required();
    check->add_option("--k", ck.k, "Channels")->required();
    check->add_option("--protocol", ck.protocol, "Reference protocol (uniform)");
    check->add_option("--horizon", ck.horizon, "Enumerate all prefix deviations up to this length");
    check->add_option("--dev", ck.devs, "Explicit deviation spec (repeatable); replaces the enumeration");
    check->add_flag("--no-mc", ck.no_mc, "Refuse Monte Carlo fallback");
    check->add_option("--trials", ck.trials, "Monte Carlo trials per deviation");
    check->add_option("--seed", ck.seed, "Seed (default CONTEND_SEED or 1)");
    check->add_option("--workers", ck.workers, "Worker threads (0 = all cores)");
    check->add_option("--format", ck.format, "text|json");
    check->add_option("--out", ck.out_dir, "Output directory");

    ScheduleArgs sc;
    auto* schedule = app.add_subcommand("schedule", "Deadline schedules");
    schedule->add_option("--protocol", sc.protocol, "g1|deadline-r");
    schedule->add_option("--n", sc.n, "Players")->required();
    schedule->add_option("--k", sc.k, "Channels")->required();
    schedule->add_option("--beta", sc.beta, "Interval shrink factor in (0,1)");
    schedule->add_option("--rounds", sc.rounds, "log-half-n|half-log-n");
    schedule->add_option("--mass", sc.mass, "literal|estimate");
    schedule->add_option("--out", sc.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitPrecondition;
    }

    try {
        if (*analyze) return cmd_analyze(an, out);
        if (*equilibrium) return cmd_equilibrium(eq, out);
        if (*simulate) return cmd_simulate(sim, out);
        if (*check) return cmd_check(ck, out);
        if (*schedule) return cmd_schedule(sc, out);
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitPrecondition;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("contend");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace contend::cli
