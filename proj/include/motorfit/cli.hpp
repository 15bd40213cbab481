#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "motorfit/error.hpp"
#include "motorfit/lti.hpp"
#include "motorfit/markov_ident.hpp"
#include "motorfit/model_document.hpp"
#include "motorfit/pinv_ident.hpp"
#include "motorfit/servo.hpp"
#include "motorfit/signal_prep.hpp"
#include "motorfit/simulate.hpp"

namespace motorfit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitAlgorithm = 3;

/// "num;den", each a comma-separated coefficient list in ascending powers of
/// S: "36;36,1,1" is 36 / (S^2 + S + 36).
inline TransferFunction parse_tf_literal(std::string_view text) {
    const auto semi = text.find(';');
    if (semi == std::string_view::npos || text.find(';', semi + 1) != std::string_view::npos)
        throw InvalidInput("tf literal: expected \"num;den\", got \"" + std::string(text) + "\"");
    const auto coeffs = [&](std::string_view part) {
        std::vector<double> c;
        for (const auto cell : motorfit::detail::split_cells(part)) {
            const auto v = motorfit::detail::parse_double(cell);
            if (!v) throw InvalidInput("tf literal: bad coefficient '" + std::string(cell) + "'");
            c.push_back(*v);
        }
        return Polynomial(std::move(c));
    };
    return {coeffs(text.substr(0, semi)), coeffs(text.substr(semi + 1))};
}

/// "step:M", "sine:M:F", "triangle:M:F" or "square:M:F" (magnitude, Hz).
inline WaveformSpec parse_input_spec(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = text.find(':', start);
        parts.push_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    WaveformSpec w;
    if (parts[0] == "step") w.kind = Waveform::step;
    else if (parts[0] == "sine") w.kind = Waveform::sine;
    else if (parts[0] == "triangle") w.kind = Waveform::triangle;
    else if (parts[0] == "square") w.kind = Waveform::square;
    else throw InvalidInput("input spec: unknown waveform '" + std::string(parts[0]) + "'");
    const std::size_t want = w.kind == Waveform::step ? 2 : 3;
    if (parts.size() != want)
        throw InvalidInput("input spec: '" + std::string(text) + "' should be " +
                           (w.kind == Waveform::step ? "step:M" : std::string(parts[0]) + ":M:F"));
    const auto mag = motorfit::detail::parse_double(parts[1]);
    if (!mag) throw InvalidInput("input spec: bad magnitude '" + std::string(parts[1]) + "'");
    w.magnitude = *mag;
    if (want == 3) {
        const auto f = motorfit::detail::parse_double(parts[2]);
        if (!f) throw InvalidInput("input spec: bad frequency '" + std::string(parts[2]) + "'");
        w.frequency = *f;
    }
    w.validate();
    return w;
}

inline std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Seed for added noise; MOTORFIT_SEED wins over the command line.
inline std::uint64_t noise_seed(std::uint64_t flag) {
    const char* env = std::getenv("MOTORFIT_SEED");
    if (!env || !*env) return flag;
    std::uint64_t seed = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InvalidInput("MOTORFIT_SEED is not an unsigned integer: '" + std::string(s) + "'");
    return seed;
}

/// Step magnitude of a synchronized record: the median input level.
inline double step_magnitude(const SyncedRecord& r) { return motorfit::detail::median(r.input.samples); }

namespace io {

/// Writes to the named file, or to `fallback` when the name is empty.
template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
    if (path.empty() || path == "-") {
        write(fallback);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + path);
    write(f);
    if (!f) throw InvalidInput("error writing " + path);
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_number(v[i]);
    return s;
}

}  // namespace io

/// Current stage of a command, reported when it fails.
struct Stage {
    std::string name = "arguments";
    void operator()(std::string n) { name = std::move(n); }
};

// ---- preprocess -------------------------------------------------------------

struct PreprocessArgs {
    std::vector<std::string> channels;  ///< name=path
    std::string format = "native";
    double threshold = kDefaultStepThreshold;
    std::vector<std::string> unwrap;
    UnwrapOptions unwrap_opt;
    std::size_t ratio = 1;
    std::string output;
};

inline int cmd_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err, Stage& stage) {
    stage("load");
    const CsvFormat fmt = a.format == "scope" ? CsvFormat::scope : CsvFormat::native;
    std::vector<std::pair<std::string, TraceFile>> files;
    for (const auto& spec : a.channels) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw InvalidInput("--channel expects name=path, got '" + spec + "'");
        files.emplace_back(spec.substr(0, eq), load_trace_csv(spec.substr(eq + 1), fmt));
    }
    const std::size_t raw_samples = files.front().second.input.size();
    const double raw_dt = files.front().second.input.dt;

    stage("synchronize");
    SyncedRecord rec = synchronize_files(files, a.threshold);
    stage("unwrap");
    for (const auto& name : a.unwrap) rec.channels[name] = unwrap_position(rec.channel(name), a.unwrap_opt);
    stage("zero_shift");
    for (auto& [name, c] : rec.channels) c = zero_shift(c);
    stage("downsample");
    const std::size_t synced = rec.size();
    rec = downsample(rec, a.ratio);

    stage("write");
    io::emit(a.output, out, [&](std::ostream& os) { write_record_csv(os, rec); });
    err << "preprocess: " << raw_samples << " raw samples, " << synced << " from the step onset, " << rec.size()
        << " kept; dt " << format_number(raw_dt) << " -> " << format_number(rec.dt()) << '\n';
    return kExitOk;
}

// ---- identify ---------------------------------------------------------------

struct IdentifyArgs {
    std::string record;
    std::string method;
    std::string channel = "velocity";
    int states = 2;
    std::optional<double> va;
    double cancel_tol = kDefaultCancelTol;
    int lm = 11;
    std::optional<double> te;
    double gap = kDefaultGapThreshold;
    std::optional<int> order;  ///< overrides the detected order
    std::string signal = "step";
    std::string output;
};

inline int cmd_identify(const IdentifyArgs& a, std::ostream& out, std::ostream& err, Stage& stage) {
    stage("load");
    const SyncedRecord rec = load_record_csv(a.record);
    const double va = a.va.value_or(step_magnitude(rec));

    std::optional<ModelDocument> doc;
    if (a.method == "pinv") {
        stage("identify_pinv");
        doc = document_from_pinv(identify_pinv(rec, a.states, va, a.cancel_tol), a.cancel_tol);
    } else if (a.method == "first-order") {
        stage("first_order_fit");
        doc = document_from_first_order(first_order_fit(rec.channel(a.channel), va), va, a.cancel_tol);
    } else {
        const Trace& v = rec.channel(a.channel);
        stage("estimate_markov");
        const auto kind = a.signal == "impulse" ? MarkovSignal::impulse : MarkovSignal::step_from_rest;
        auto seq = estimate_markov(v, va, a.lm, a.te.value_or(v.duration() / 3.0), kind);
        stage("estimate_order");
        auto ord = estimate_order(hankel_build(seq), a.gap);
        err << "spectrum: " << io::join(ord.spectrum) << '\n';
        if (a.order) {
            if (*a.order < 1) throw InvalidInput("--order must be positive");
            err << "order: " << *a.order << " (detected " << ord.order << ")\n";
            ord.order = *a.order;
        } else {
            err << "order: " << ord.order << '\n';
        }
        if (ord.order == 0) throw IdentificationError("identify_markov: response carries no signal (order 0)");
        stage("realize_companion");
        auto model = realize_companion(seq, ord.order);
        auto tf = ss_to_tf(model);
        doc = document_from_markov({std::move(seq), std::move(ord), std::move(model), std::move(tf)}, a.cancel_tol);
        doc->diagnostics["gap_threshold"] = a.gap;
        doc->diagnostics["signal"] = a.signal;
        doc->diagnostics["order_forced"] = a.order.has_value();
    }
    doc->diagnostics["dt"] = rec.dt();
    doc->diagnostics["va"] = va;
    doc->diagnostics["channel"] = a.method == "pinv" ? std::string("position,velocity") : a.channel;

    stage("write");
    io::emit(a.output, out, [&](std::ostream& os) { os << to_json(*doc).dump(2) << '\n'; });
    return kExitOk;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string model;
    std::string tf;
    std::string output_kind = "velocity";
    std::string input = "step:1";
    double dt = 0.01;
    double duration = 10.0;
    std::optional<double> kp, kv, sat;
    double noise = 0.0;
    std::uint64_t seed = 1;
    std::string output;
};

inline StateSpaceModel document_output(const ModelDocument& d, const std::string& kind) {
    return kind == "position" ? d.position_model() : d.model;
}

inline void warn_if_step_unstable(const Matrix& A, double dt, std::ostream& err) {
    if (A.eigenvalues().real().maxCoeff() < 0.0 && rk4_amplification(A, dt) > 1.0)
        err << "simulate: warning: dt " << format_number(dt)
            << " s is too coarse for the fastest mode; the stable response will blow up numerically\n";
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err, Stage& stage) {
    stage("model");
    std::optional<ModelDocument> doc;
    std::optional<TransferFunction> tf;
    if (!a.model.empty()) doc = load_model_document(a.model);
    else tf = parse_tf_literal(a.tf);
    const WaveformSpec wave = parse_input_spec(a.input);

    SyncedRecord rec;
    Trace y;
    if (a.kp || a.kv || a.sat) {
        stage("simulate_servo_loop");
        ServoLoopConfig cfg{tf ? *tf : doc->position_tf, a.kp.value_or(0.0), a.kv.value_or(0.0), a.sat, wave};
        // Unsaturated loop: A - B (kp C + kv C A).
        const auto plant = tf_to_ss_companion(cfg.plant);
        warn_if_step_unstable(plant.A - plant.B * (cfg.kp * plant.C + cfg.kv * plant.C * plant.A), a.dt, err);
        auto res = simulate_servo_loop(cfg, a.dt, a.duration);
        rec.input = std::move(res.reference);
        y = std::move(res.position);
    } else {
        stage("simulate_lti");
        const StateSpaceModel m = tf ? tf_to_ss_companion(*tf) : document_output(*doc, a.output_kind);
        warn_if_step_unstable(m.A, a.dt, err);
        rec.input = generate_reference(wave, a.dt, a.duration);
        y = simulate_lti(m, rec.input);
    }
    if (y.diverged) {
        err << "simulate: response diverged at t = " << format_number(y.duration()) << " s; output cut short\n";
        rec.input.samples.resize(y.size());
    }
    y = add_noise(std::move(y), a.noise, noise_seed(a.seed));
    rec.channels["output"] = std::move(y);

    stage("write");
    io::emit(a.output, out, [&](std::ostream& os) { write_record_csv(os, rec); });
    return kExitOk;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
    std::string model;
    std::string record;
    std::string channel;
    std::string output_kind;
    std::string csv;
};

/// Brings a record to the model's sample period by integer decimation.
inline SyncedRecord match_model_dt(const SyncedRecord& rec, const ModelDocument& doc) {
    if (!doc.diagnostics.contains("dt")) return rec;
    const double model_dt = doc.diagnostics.at("dt").get<double>();
    const double ratio = model_dt / rec.dt();
    const double whole = std::round(ratio);
    if (whole < 1.0 || std::abs(ratio - whole) > 1e-6 * ratio)
        throw InvalidInput("compare: record dt " + format_number(rec.dt()) + " does not divide the model dt " +
                           format_number(model_dt) + " by an integer");
    return whole == 1.0 ? rec : downsample(rec, static_cast<std::size_t>(whole));
}

inline int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err, Stage& stage) {
    stage("load");
    const ModelDocument doc = load_model_document(a.model);
    SyncedRecord rec = load_record_csv(a.record);

    stage("channel");
    std::string channel = a.channel;
    if (channel.empty()) {
        if (rec.has("velocity")) channel = "velocity";
        else if (rec.channels.size() == 1) channel = rec.channels.begin()->first;
        else throw InvalidInput("compare: record has several channels and none is 'velocity'; pass --channel");
    }
    const std::string kind = !a.output_kind.empty() ? a.output_kind : channel == "position" ? "position" : "velocity";
    rec.channel(channel);

    stage("resample");
    rec = match_model_dt(rec, doc);

    stage("simulate_lti");
    const Trace& measured = rec.channel(channel);
    const Trace predicted = simulate_lti(document_output(doc, kind), rec.input);
    if (predicted.diverged) err << "compare: model response diverged; comparing the finite part\n";

    stage("fit_report");
    const FitReport r = fit_report(predicted, measured);
    out << "channel " << channel << '\n'
        << "output " << kind << '\n'
        << "nrmse " << format_number(r.nrmse) << '\n'
        << "max_abs_error " << format_number(r.max_abs_error) << '\n'
        << "horizon " << format_number(r.horizon) << '\n'
        << "samples " << r.samples << '\n';

    if (!a.csv.empty()) {
        stage("write");
        SyncedRecord curves;
        curves.input = rec.input;
        curves.input.samples.resize(r.samples);
        curves.channels["measured"] = measured;
        curves.channels["measured"].samples.resize(r.samples);
        curves.channels["model"] = predicted;
        curves.channels["model"].samples.resize(r.samples);
        io::emit(a.csv, out, [&](std::ostream& os) { write_record_csv(os, curves); });
    }
    return kExitOk;
}

// ---- entry point ------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"DC motor state-space identification toolkit", "motorfit"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* p = app.add_subcommand("preprocess", "Synchronize, unwrap, zero-shift and decimate raw records");
    p->add_option("--channel", pre.channels, "Channel file as name=path; repeat for each channel")->required();
    p->add_option("--format", pre.format, "Input CSV flavour")->check(CLI::IsMember({"native", "scope"}));
    p->add_option("--threshold", pre.threshold, "Step onset threshold in volts");
    p->add_option("--unwrap", pre.unwrap, "Channel holding a wrapping position encoder signal");
    p->add_option("--wrap-jump", pre.unwrap_opt.jump, "Adjacent jump treated as an encoder wrap");
    p->add_option("--wrap-span", pre.unwrap_opt.span, "Offset added or removed per wrap");
    p->add_option("--glitch-floor", pre.unwrap_opt.glitch_floor, "Near-zero level below which jumps are glitches");
    p->add_option("--ratio", pre.ratio, "Decimation ratio")->check(CLI::PositiveNumber);
    p->add_option("-o,--output", pre.output, "Output record (default stdout)");

    IdentifyArgs id;
    auto* i = app.add_subcommand("identify", "Identify a model from a preprocessed record");
    i->add_option("--record", id.record, "Preprocessed record CSV")->required();
    i->add_option("--method", id.method, "Identification method")
        ->required()
        ->check(CLI::IsMember({"pinv", "markov", "first-order"}));
    i->add_option("--channel", id.channel, "Velocity channel (markov, first-order)");
    i->add_option("--states", id.states, "pinv: 2 (position, velocity) or 3 (adds current)")
        ->check(CLI::IsMember({2, 3}));
    i->add_option("--va", id.va, "Step magnitude (default: median input level)");
    i->add_option("--cancel-tol", id.cancel_tol, "Pole/zero cancellation distance");
    i->add_option("--lm", id.lm, "markov: number of Markov parameters (odd)");
    i->add_option("--te", id.te, "markov: fit window in seconds (default: a third of the record)");
    i->add_option("--gap", id.gap, "markov: normalized singular value threshold");
    i->add_option("--order", id.order, "markov: use this order instead of the detected one");
    i->add_option("--signal", id.signal, "markov: the channel is a step response from rest, or an impulse response")
        ->check(CLI::IsMember({"step", "impulse"}));
    i->add_option("-o,--output", id.output, "Model document (default stdout)");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate a model or transfer function");
    auto* model_opt = s->add_option("--model", sim.model, "Model document");
    auto* tf_opt = s->add_option("--tf", sim.tf,
                                 "Transfer function \"num;den\", ascending powers of S: \"36;36,1,1\" is "
                                 "36/(S^2+S+36)");
    model_opt->excludes(tf_opt);
    tf_opt->excludes(model_opt);
    s->add_option("--output-kind", sim.output_kind, "Model output for open-loop runs")
        ->check(CLI::IsMember({"velocity", "position"}));
    s->add_option("--input", sim.input, "step:M, sine:M:F, triangle:M:F or square:M:F (F in Hz)");
    s->add_option("--dt", sim.dt, "Sample period in seconds");
    s->add_option("--duration", sim.duration, "Length in seconds");
    s->add_option("--kp", sim.kp, "Position gain; any gain closes the servo loop around the position TF");
    s->add_option("--kv", sim.kv, "Velocity gain");
    s->add_option("--sat", sim.sat, "Symmetric actuator limit");
    s->add_option("--noise", sim.noise, "Uniform output noise amplitude");
    s->add_option("--seed", sim.seed, "Noise seed (MOTORFIT_SEED overrides)");
    s->add_option("-o,--output", sim.output, "Output CSV t,input,output (default stdout)");

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "Compare a model's prediction with a record");
    c->add_option("--model", cmp.model, "Model document")->required();
    c->add_option("--record", cmp.record, "Record CSV")->required();
    c->add_option("--channel", cmp.channel, "Measured channel (default: velocity, or the only one)");
    c->add_option("--output-kind", cmp.output_kind, "Model output (default: matches the channel)")
        ->check(CLI::IsMember({"velocity", "position"}));
    c->add_option("--csv", cmp.csv, "Write t,input,measured,model to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }
    if (s->parsed() && sim.model.empty() && sim.tf.empty()) {
        err << "motorfit simulate [arguments]: one of --model or --tf is required\n";
        return kExitInput;
    }

    Stage stage;
    const CLI::App* cmd = app.get_subcommands().front();
    try {
        if (cmd == p) return cmd_preprocess(pre, out, err, stage);
        if (cmd == i) return cmd_identify(id, out, err, stage);
        if (cmd == s) return cmd_simulate(sim, out, err, stage);
        return cmd_compare(cmp, out, err, stage);
    } catch (const InvalidInput& e) {
        err << "motorfit " << cmd->get_name() << " [" << stage.name << "]: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "motorfit " << cmd->get_name() << " [" << stage.name << "]: " << e.what() << '\n';
        return kExitAlgorithm;
    }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"motorfit"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace motorfit::cli
