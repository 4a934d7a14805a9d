#pragma once

// CSV and SVG output for trajectories, sweeps and training logs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "eval.hpp"
#include "outer_es.hpp"
#include "rollout.hpp"

namespace badger {

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << content;
    if (!f.flush()) throw IoError("failed writing " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

// ---------------------------------------------------------------------------
// SVG line chart

struct ChartSeries {
    std::string name;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
    int width = 720;
    int height = 440;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fmt_px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace detail

inline std::string render_svg(const LineChart& chart) {
    const double left = 70, right = 170, top = 40, bottom = 55;
    const double pw = chart.width - left - right, ph = chart.height - top - bottom;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : chart.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << chart.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << detail::xml_escape(chart.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
        os << "<line x1=\"" << detail::fmt_px(px(fx)) << "\" y1=\"" << top << "\" x2=\"" << detail::fmt_px(px(fx))
           << "\" y2=\"" << top + ph << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << detail::fmt_px(px(fx)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
           << detail::fmt_tick(fx) << "</text>\n";
        os << "<line x1=\"" << left << "\" y1=\"" << detail::fmt_px(py(fy)) << "\" x2=\"" << left + pw << "\" y2=\""
           << detail::fmt_px(py(fy)) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << detail::fmt_px(py(fy) + 4) << "\" text-anchor=\"end\">"
           << detail::fmt_tick(fy) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << chart.height - 12 << "\" text-anchor=\"middle\">"
       << detail::xml_escape(chart.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << top + ph / 2 << ")\">" << detail::xml_escape(chart.y_label) << "</text>\n";
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\""
           << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << detail::fmt_px(px(s.x[i])) << ',' << detail::fmt_px(py(s.y[i])) << ' ';
        }
        os << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
           << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
           << "/>\n";
        os << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(s.name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#e67e22", "#2980b9", "#27ae60", "#8e44ad", "#c0392b", "#16a085", "#7f8c8d"};
    return colors[i % 7];
}

// ---------------------------------------------------------------------------
// Trajectory export

inline std::string episode_csv(const Trajectory& traj, const TaskInstance& task) {
    std::ostringstream os;
    os << "step,error,hotcold";
    for (std::size_t i = 0; i < task.d; ++i) os << ",output_" << i;
    for (std::size_t i = 0; i < task.d; ++i) os << ",target_" << i;
    os << '\n';
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& s = traj.steps[t];
        os << t + 1 << ',' << format_double(s.feedback.error) << ',' << format_double(s.feedback.hotcold);
        for (double v : s.output) os << ',' << format_double(v);
        for (double v : task.target) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

inline std::string experts_csv(const Trajectory& traj) {
    std::ostringstream os;
    const std::size_t M = traj.steps.empty() || traj.steps[0].messages.empty() ? 0 : traj.steps[0].messages[0].size();
    os << "step,expert";
    for (std::size_t c = 0; c < M; ++c) os << ",msg_" << c;
    os << ",state_norm\n";
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& s = traj.steps[t];
        for (std::size_t i = 0; i < s.messages.size(); ++i) {
            os << t + 1 << ',' << i;
            for (double v : s.messages[i]) os << ',' << format_double(v);
            os << ',' << format_double(std::sqrt(dot(s.states[i], s.states[i]))) << '\n';
        }
    }
    return os.str();
}

inline LineChart trace_chart(const Trajectory& traj, const TaskInstance& task) {
    LineChart c;
    c.title = "Agent output vs target over the inner loop";
    c.x_label = "step";
    c.y_label = "value";
    for (std::size_t i = 0; i < task.d; ++i) {
        ChartSeries out{"output " + std::to_string(i), palette(i), {}, {}, false};
        ChartSeries tgt{"target " + std::to_string(i), palette(i), {}, {}, true};
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            out.x.push_back(static_cast<double>(t + 1));
            out.y.push_back(traj.steps[t].output[i]);
            tgt.x.push_back(static_cast<double>(t + 1));
            tgt.y.push_back(task.target[i]);
        }
        c.series.push_back(std::move(out));
        c.series.push_back(std::move(tgt));
    }
    return c;
}

// Writes episode.csv, experts.csv and trace.svg into `dir` (created if needed).
inline void export_trace(const Trajectory& traj, const TaskInstance& task, const std::filesystem::path& dir) {
    ensure_dir(dir);
    write_text(dir / "episode.csv", episode_csv(traj, task));
    write_text(dir / "experts.csv", experts_csv(traj));
    write_text(dir / "trace.svg", render_svg(trace_chart(traj, task)));
}

// ---------------------------------------------------------------------------
// Sweeps and training log

inline std::string sweep_csv(const SweepReport& rep) {
    std::ostringstream os;
    os << rep.key_name << ",d,mean_loss,std_error,ci95,n_episodes,chance,mean_value,beats_chance,beats_mean_value\n";
    for (const auto& r : rep.rows)
        os << r.key << ',' << r.d << ',' << format_double(r.mean_loss) << ',' << format_double(r.std_error) << ','
           << format_double(r.ci95) << ',' << r.n_episodes << ',' << format_double(r.chance) << ','
           << format_double(r.mean_value) << ',' << (r.beats_chance() ? 1 : 0) << ','
           << (r.beats_mean_value() ? 1 : 0) << '\n';
    return os.str();
}

inline LineChart sweep_chart(const SweepReport& rep) {
    LineChart c;
    c.title = rep.key_name == "d" ? "Loss vs number of output dimensions" : "Loss vs number of experts";
    c.x_label = rep.key_name;
    c.y_label = "mean episode loss";
    ChartSeries loss{"agent", palette(1), {}, {}, false};
    ChartSeries chance{"chance", "#000000", {}, {}, false};
    ChartSeries mean{"mean value", "#000000", {}, {}, true};
    for (const auto& r : rep.rows) {
        const double x = static_cast<double>(r.key);
        loss.x.push_back(x);
        loss.y.push_back(r.mean_loss);
        chance.x.push_back(x);
        chance.y.push_back(r.chance);
        mean.x.push_back(x);
        mean.y.push_back(r.mean_value);
    }
    c.series = {loss, chance, mean};
    return c;
}

inline std::string loss_log_header() { return "generation,stage,lr_scale,mean_loss,min_loss,max_loss\n"; }

inline std::string loss_log_row(const GenerationLog& r) {
    return std::to_string(r.generation) + ',' + std::to_string(r.stage) + ',' + format_double(r.lr_scale) + ',' +
           format_double(r.mean_loss) + ',' + format_double(r.min_loss) + ',' + format_double(r.max_loss) + '\n';
}

}  // namespace badger
