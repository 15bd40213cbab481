#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motorfit/error.hpp"
#include "motorfit/trace.hpp"

namespace motorfit {

/// Input step plus named measurement channels ("position", "velocity",
/// "current"), all starting at the step onset with a shared grid.
struct SyncedRecord {
    Trace input;
    std::map<std::string, Trace> channels;

    std::size_t size() const noexcept { return input.size(); }
    double dt() const noexcept { return input.dt; }
    bool has(const std::string& name) const { return channels.count(name) != 0; }
    const Trace& channel(const std::string& name) const {
        const auto it = channels.find(name);
        if (it == channels.end()) throw InvalidInput("record has no '" + name + "' channel");
        return it->second;
    }
};

enum class CsvFormat { native, scope };

/// One CSV file: the step input and the measured signal recorded with it.
struct TraceFile {
    Trace input;
    Trace signal;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

/// Sample period of a time column. Every step must be within 1% of the
/// median step; the period itself is the mean over the whole span, which
/// keeps the rounding of individual timestamps out of it.
inline double uniform_dt(const std::vector<double>& t, const std::string& source) {
    std::vector<double> steps(t.size() - 1);
    for (std::size_t k = 1; k < t.size(); ++k) steps[k - 1] = t[k] - t[k - 1];
    const double dt = median(steps);
    if (!(dt > 0.0)) throw InvalidInput(source + ": time column is not increasing");
    for (std::size_t k = 0; k < steps.size(); ++k)
        if (std::abs(steps[k] - dt) > 0.01 * dt)
            throw InvalidInput(source + ": non-uniform sampling near row " + std::to_string(k + 2));
    return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

}  // namespace detail

/// Minimum number of data rows accepted by the CSV readers.
inline constexpr std::size_t kMinCsvRows = 16;

/// Parses a `t,input,signal` record.
///
/// native: optional header `t,input,<name>`, then rows of exactly three
/// numbers; anything else is an error. scope: rows whose last three non-empty
/// trailing cells parse as numbers are data, every other row is skipped, and
/// leading metadata columns are ignored.
///
/// Any time step deviating from the median step by more than 1% rejects the
/// file as non-uniformly sampled; the period is then the mean step.
inline TraceFile parse_trace_csv(std::istream& in, CsvFormat format, const std::string& source = "<stream>") {
    std::vector<double> t, u, y;
    std::string name = "signal";
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (lineno == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
        if (detail::trim(view).empty()) continue;
        auto cells = detail::split_cells(view);

        if (format == CsvFormat::native) {
            if (cells.size() != 3)
                throw InvalidInput(source + ":" + std::to_string(lineno) + ": expected 3 columns");
            const auto a = detail::parse_double(cells[0]);
            const auto b = detail::parse_double(cells[1]);
            const auto c = detail::parse_double(cells[2]);
            if (!a || !b || !c) {
                if (!seen_data && t.empty() && !a) {  // header
                    if (const auto n = detail::trim(cells[2]); !n.empty()) name = std::string(n);
                    continue;
                }
                throw InvalidInput(source + ":" + std::to_string(lineno) + ": malformed data row");
            }
            t.push_back(*a);
            u.push_back(*b);
            y.push_back(*c);
            seen_data = true;
        } else {
            while (!cells.empty() && detail::trim(cells.back()).empty()) cells.pop_back();
            if (cells.size() < 3) continue;
            const std::size_t k = cells.size() - 3;
            const auto a = detail::parse_double(cells[k]);
            const auto b = detail::parse_double(cells[k + 1]);
            const auto c = detail::parse_double(cells[k + 2]);
            if (!a || !b || !c) continue;
            t.push_back(*a);
            u.push_back(*b);
            y.push_back(*c);
        }
    }
    if (t.size() < kMinCsvRows)
        throw InvalidInput(source + ": only " + std::to_string(t.size()) + " data rows (need at least " +
                           std::to_string(kMinCsvRows) + ")");

    const double dt = detail::uniform_dt(t, source);
    TraceFile out;
    out.input = Trace{t.front(), dt, std::move(u), "input"};
    out.signal = Trace{t.front(), dt, std::move(y), name};
    return out;
}

inline TraceFile load_trace_csv(const std::string& path, CsvFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    return parse_trace_csv(in, format, path);
}

namespace detail {

inline void write_number(std::ostream& os, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
}

}  // namespace detail

/// Multi-channel record: header `t,input,<name>...` then one row per sample.
/// With a single channel this is exactly the native three-column format.
/// Numbers use the shortest decimal that reads back to the same double.
inline void write_record_csv(std::ostream& os, const SyncedRecord& r) {
    os << "t,input";
    for (const auto& [name, c] : r.channels) {
        if (c.size() != r.size()) throw InvalidInput("write_record_csv: channel '" + name + "' has a different length");
        os << ',' << name;
    }
    os << '\n';
    for (std::size_t k = 0; k < r.size(); ++k) {
        detail::write_number(os, r.input.time(k));
        os << ',';
        detail::write_number(os, r.input[k]);
        for (const auto& [name, c] : r.channels) {
            os << ',';
            detail::write_number(os, c[k]);
        }
        os << '\n';
    }
}

/// Reads what write_record_csv writes. A headerless file must have three
/// columns and its channel is called "signal"; wider files need the header.
inline SyncedRecord parse_record_csv(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (lineno == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
        if (detail::trim(view).empty()) continue;
        const auto cells = detail::split_cells(view);
        if (cols.empty()) {
            if (cells.size() < 3) throw InvalidInput(source + ":" + std::to_string(lineno) + ": need at least 3 columns");
            cols.resize(cells.size());
            if (!detail::parse_double(cells[0])) {
                for (std::size_t i = 2; i < cells.size(); ++i) {
                    std::string n(detail::trim(cells[i]));
                    if (n.empty() || std::find(names.begin(), names.end(), n) != names.end())
                        throw InvalidInput(source + ": empty or repeated channel name in header");
                    names.push_back(std::move(n));
                }
                continue;
            }
            if (cells.size() != 3) throw InvalidInput(source + ": a record with more than one channel needs a header");
            names = {"signal"};
        }
        if (cells.size() != cols.size())
            throw InvalidInput(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                               " columns");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto v = detail::parse_double(cells[i]);
            if (!v) throw InvalidInput(source + ":" + std::to_string(lineno) + ": malformed data row");
            cols[i].push_back(*v);
        }
    }
    const std::size_t rows = cols.empty() ? 0 : cols[0].size();
    if (rows < kMinCsvRows)
        throw InvalidInput(source + ": only " + std::to_string(rows) + " data rows (need at least " +
                           std::to_string(kMinCsvRows) + ")");
    const double dt = detail::uniform_dt(cols[0], source);
    const double t0 = cols[0].front();
    SyncedRecord rec;
    rec.input = Trace{t0, dt, std::move(cols[1]), "input"};
    for (std::size_t i = 0; i < names.size(); ++i)
        rec.channels[names[i]] = Trace{t0, dt, std::move(cols[i + 2]), names[i]};
    return rec;
}

inline SyncedRecord load_record_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    return parse_record_csv(in, path);
}

namespace detail {

/// Index of the single upward threshold crossing of a step input.
inline std::size_t step_onset(const Trace& input, double threshold) {
    std::optional<std::size_t> onset;
    std::size_t crossings = 0;
    if (!input.empty() && input[0] >= threshold) {
        onset = 0;
        ++crossings;
    }
    for (std::size_t k = 1; k < input.size(); ++k) {
        if (input[k - 1] < threshold && input[k] >= threshold) {
            if (!onset) onset = k;
            ++crossings;
        }
    }
    if (!onset) throw InvalidInput("synchronize: no step onset");
    if (crossings > 1) throw InvalidInput("synchronize: input crosses the threshold more than once");
    return *onset;
}

inline Trace slice(const Trace& t, std::size_t first, std::size_t count) {
    Trace out = t;
    out.samples.assign(t.samples.begin() + static_cast<std::ptrdiff_t>(first),
                       t.samples.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.t0 = t.t0 + static_cast<double>(first) * t.dt;
    return out;
}

inline bool same_dt(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

}  // namespace detail

inline constexpr double kDefaultStepThreshold = 0.5;

/// Cuts every trace at the first sample where the input reaches threshold,
/// trims to the shortest, and rebases time to 0.
inline SyncedRecord synchronize(const Trace& input, const std::vector<std::pair<std::string, Trace>>& signals,
                                double threshold = kDefaultStepThreshold) {
    const std::size_t onset = detail::step_onset(input, threshold);
    std::size_t length = input.size() - onset;
    for (const auto& [name, s] : signals) {
        if (!detail::same_dt(s.dt, input.dt)) throw InvalidInput("synchronize: channel '" + name + "' has a different dt");
        if (s.size() <= onset) throw InvalidInput("synchronize: channel '" + name + "' ends before the step onset");
        length = std::min(length, s.size() - onset);
    }
    SyncedRecord rec;
    rec.input = detail::slice(input, onset, length);
    rec.input.t0 = 0.0;
    for (const auto& [name, s] : signals) {
        Trace c = detail::slice(s, onset, length);
        c.t0 = 0.0;
        c.label = name;
        rec.channels[name] = std::move(c);
    }
    return rec;
}

/// Synchronizes channels recorded one at a time, each next to its own copy of
/// the step input: every file is cut at its own onset, then all are trimmed to
/// the shortest. The record's input comes from the first file.
inline SyncedRecord synchronize_files(const std::vector<std::pair<std::string, TraceFile>>& files,
                                      double threshold = kDefaultStepThreshold) {
    if (files.empty()) throw InvalidInput("synchronize: no input files");
    std::vector<SyncedRecord> parts;
    for (const auto& [name, f] : files) {
        if (!detail::same_dt(f.input.dt, files.front().second.input.dt))
            throw InvalidInput("synchronize: '" + name + "' has a different sample period");
        parts.push_back(synchronize(f.input, {{name, f.signal}}, threshold));
    }
    std::size_t length = parts.front().size();
    for (const auto& p : parts) length = std::min(length, p.size());
    SyncedRecord rec;
    rec.input = detail::slice(parts.front().input, 0, length);
    for (auto& p : parts)
        for (auto& [name, c] : p.channels) {
            if (rec.channels.count(name)) throw InvalidInput("synchronize: duplicate channel '" + name + "'");
            rec.channels[name] = detail::slice(c, 0, length);
        }
    return rec;
}

struct UnwrapOptions {
    double jump = 15.0;          ///< adjacent drop/rise treated as an encoder wrap
    double span = 20.4;          ///< amount added or removed per wrap
    double glitch_floor = 1.0;   ///< near-zero samples below this may be glitches
    double glitch_step = 5.0;    ///< ...if they differ from the previous sample by more than this
};

/// Encoder unwrapping in two passes: near-zero glitches between wraps are
/// replaced by the previous sample, then each adjacent jump larger than
/// `jump` shifts every later sample by `span`.
inline Trace unwrap_position(const Trace& p, const UnwrapOptions& opt = {}) {
    if (!(opt.jump > 0.0) || !(opt.span > 0.0)) throw InvalidInput("unwrap_position: jump and span must be positive");
    Trace out = p;
    auto& x = out.samples;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i]) < opt.glitch_floor && std::abs(x[i] - x[i - 1]) > opt.glitch_step) x[i] = x[i - 1];

    // Shifting "all subsequent samples" leaves raw adjacent differences
    // unchanged, so a running offset is enough.
    double offset = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double raw = x[i];
        double d = x[i - 1] - (raw + offset);
        if (d > opt.jump) {
            offset += opt.span;
            d -= opt.span;
        }
        if (d < -opt.jump) offset -= opt.span;
        x[i] = raw + offset;
    }
    return out;
}

inline Trace zero_shift(const Trace& t) {
    if (t.empty()) throw InvalidInput("zero_shift: empty trace");
    Trace out = t;
    const double first = t.samples.front();
    for (double& v : out.samples) v -= first;
    return out;
}

/// Keeps samples 0, ratio, 2*ratio, ...; no averaging.
inline Trace downsample(const Trace& t, std::size_t ratio) {
    if (ratio < 1) throw InvalidInput("downsample: ratio must be >= 1");
    Trace out = t;
    out.dt = t.dt * static_cast<double>(ratio);
    out.samples.clear();
    for (std::size_t k = 0; k < t.size(); k += ratio) out.samples.push_back(t.samples[k]);
    if (out.size() < 2) throw InvalidInput("downsample: fewer than 2 samples remain");
    return out;
}

inline SyncedRecord downsample(const SyncedRecord& r, std::size_t ratio) {
    SyncedRecord out;
    out.input = downsample(r.input, ratio);
    for (const auto& [name, c] : r.channels) out.channels[name] = downsample(c, ratio);
    return out;
}

enum class DiffScheme {
    central3,  ///< (f(t+d) - f(t-d)) / 2d
    central5,  ///< (-f(t+2d) + 8f(t+d) - 8f(t-d) + f(t-2d)) / 12d
};

inline std::size_t stencil_half_width(DiffScheme s) noexcept { return s == DiffScheme::central3 ? 1 : 2; }

/// Central-difference derivative. Samples without a full stencil are
/// dropped: the result starts half a stencil later and is shorter by a full
/// stencil width.
inline Trace differentiate(const Trace& t, DiffScheme scheme = DiffScheme::central5) {
    const std::size_t h = stencil_half_width(scheme);
    if (t.size() < 2 * h + 1) throw InvalidInput("differentiate: trace too short for the stencil");
    const auto& f = t.samples;
    Trace out;
    out.dt = t.dt;
    out.t0 = t.t0 + static_cast<double>(h) * t.dt;
    out.label = t.label.empty() ? std::string{} : "d(" + t.label + ")/dt";
    out.samples.reserve(t.size() - 2 * h);
    for (std::size_t k = h; k + h < t.size(); ++k) {
        if (scheme == DiffScheme::central3)
            out.samples.push_back((f[k + 1] - f[k - 1]) / (2.0 * t.dt));
        else
            out.samples.push_back((-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * t.dt));
    }
    return out;
}

/// Drops `front` samples at the start and `back` at the end.
inline Trace crop(const Trace& t, std::size_t front, std::size_t back) {
    if (front + back > t.size()) throw InvalidInput("crop: trace too short");
    return detail::slice(t, front, t.size() - front - back);
}

}  // namespace motorfit
