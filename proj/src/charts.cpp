#include "trajinspect/charts.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

namespace trajinspect {

namespace {

constexpr double kPanelW = 420, kPanelH = 260, kMargin = 48;
constexpr const char* kBlue = "#3b6fb6";
constexpr const char* kOrange = "#e08a2c";

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

class Svg {
public:
    Svg(double w, double h) : w_(w), h_(h) {}

    void rect(double x, double y, double w, double h, const char* fill) {
        body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
              << num(h) << "\" fill=\"" << fill << "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "#222") {
        body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
              << "\" stroke=\"" << stroke << "\" stroke-width=\"1\"/>\n";
    }
    void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 11) {
        body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    }
    std::string str() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\"" << num(h_)
           << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

private:
    double w_, h_;
    std::ostringstream body_;
};

/// Plot area of one panel with a y axis from 0 to `ymax`.
struct Panel {
    double x0, y0, w, h, ymax;

    double y(double v) const { return y0 + h - h * std::clamp(v / ymax, 0.0, 1.0); }

    void axes(Svg& svg, const std::string& title, const std::string& ylabel) const {
        svg.line(x0, y0 + h, x0 + w, y0 + h);
        svg.line(x0, y0, x0, y0 + h);
        for (int i = 0; i <= 4; ++i) {
            const double v = ymax * i / 4.0;
            svg.line(x0 - 4, y(v), x0, y(v));
            svg.text(x0 - 6, y(v) + 4, num(v), "end", 9);
        }
        svg.text(x0 + w / 2, y0 - 10, title, "middle", 13);
        svg.text(x0 - 36, y0 + h / 2, ylabel, "middle", 10);
    }
};

double nice_max(double v) { return v <= 0 ? 1.0 : v * 1.1; }

void histogram_panel(Svg& svg, const Panel& p, const LengthHistogram& h, const char* color) {
    double total = 0;
    for (auto c : h) total += static_cast<double>(c);
    const double bw = p.w / static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double frac = total > 0 ? static_cast<double>(h[i]) / total : 0.0;
        svg.rect(p.x0 + bw * static_cast<double>(i) + 1, p.y(frac), bw - 2, p.y0 + p.h - p.y(frac), color);
        if (i % 2 == 1) svg.text(p.x0 + bw * (static_cast<double>(i) + 0.5), p.y0 + p.h + 14, num(i + 1.0), "middle", 9);
    }
    svg.text(p.x0 + p.w / 2, p.y0 + p.h + 30, "trajectory length (steps)", "middle", 10);
}

}  // namespace

std::string length_chart_svg(const LengthReport& r) {
    const auto share = [](const LengthHistogram& h) {
        double total = 0, top = 0;
        for (auto c : h) total += static_cast<double>(c);
        for (auto c : h) top = std::max(top, total > 0 ? static_cast<double>(c) / total : 0.0);
        return top;
    };
    const double ymax = nice_max(std::max(share(r.train_histogram), share(r.rollout_histogram)));
    Svg svg(2 * (kPanelW + kMargin) + kMargin, kPanelH + 2.5 * kMargin);
    const Panel left{kMargin + 20, kMargin, kPanelW, kPanelH, ymax};
    const Panel right{2 * kMargin + kPanelW + 20, kMargin, kPanelW, kPanelH, ymax};
    left.axes(svg, "training data (n=" + std::to_string(r.n_train) + ")", "share");
    right.axes(svg, "behavior-policy roll-outs (n=" + std::to_string(r.n_rollouts) + ")", "share");
    histogram_panel(svg, left, r.train_histogram, kBlue);
    histogram_panel(svg, right, r.rollout_histogram, kOrange);
    svg.text(right.x0 + right.w, 16, "TV distance " + num(r.total_variation_distance), "end", 11);
    return svg.str();
}

std::string termination_chart_svg(const TerminationBiasReport& r) {
    double top = 0;
    const auto upper = [](const std::optional<Interval>& iv) { return iv ? iv->upper : 0.0; };
    for (const auto& s : r.steps) top = std::max({top, upper(s.actual), upper(s.predicted)});
    const double wide = 2 * kPanelW;
    Svg svg(wide + kPanelW * 0.5 + 3 * kMargin, kPanelH + 2.5 * kMargin);
    const Panel steps{kMargin + 20, kMargin, wide, kPanelH, nice_max(top)};
    steps.axes(svg, "termination by step: actual (blue) vs predicted (orange)", "probability");
    const double bw = steps.w / static_cast<double>(std::max<std::size_t>(r.steps.size(), 1));
    const auto bar = [&](const Panel& p, double x, double w, const std::optional<Interval>& iv, const char* color) {
        if (!iv) return;
        svg.rect(x, p.y(iv->point), w, p.y0 + p.h - p.y(iv->point), color);
        const double cx = x + w / 2;
        svg.line(cx, p.y(iv->lower), cx, p.y(iv->upper));
        svg.line(cx - 3, p.y(iv->lower), cx + 3, p.y(iv->lower));
        svg.line(cx - 3, p.y(iv->upper), cx + 3, p.y(iv->upper));
    };
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        const double x = steps.x0 + bw * static_cast<double>(i);
        bar(steps, x + 2, bw / 2 - 2, r.steps[i].actual, kBlue);
        bar(steps, x + bw / 2, bw / 2 - 2, r.steps[i].predicted, kOrange);
        svg.text(x + bw / 2, steps.y0 + steps.h + 14, std::to_string(r.steps[i].step), "middle", 9);
    }
    svg.text(steps.x0 + steps.w / 2, steps.y0 + steps.h + 30, "time step", "middle", 10);

    const double pre_top = std::max(upper(r.prefinal_actual), upper(r.prefinal_predicted));
    const Panel pre{steps.x0 + steps.w + 2 * kMargin, kMargin, kPanelW * 0.5, kPanelH, nice_max(pre_top)};
    pre.axes(svg, "steps 1-19 pooled", "");
    bar(pre, pre.x0 + 10, pre.w / 2 - 15, r.prefinal_actual, kBlue);
    bar(pre, pre.x0 + pre.w / 2 + 5, pre.w / 2 - 15, r.prefinal_predicted, kOrange);
    svg.text(pre.x0 + pre.w / 4, pre.y0 + pre.h + 14, "actual", "middle", 10);
    svg.text(pre.x0 + 3 * pre.w / 4, pre.y0 + pre.h + 14, "predicted", "middle", 10);
    return svg.str();
}

std::string discharge_chart_svg(const DischargeTreatmentReport& r) {
    const std::vector<std::pair<std::string, const DischargePopulation*>> pops = {
        {"train, discharged", &r.train_uncensored_survivors},
        {"train, censored", &r.train_censored_survivors},
        {"roll-outs", &r.rollout_survivors}};
    Svg svg(kPanelW + 2 * kMargin + 20, kPanelH + 2.5 * kMargin);
    const Panel p{kMargin + 20, kMargin, kPanelW, kPanelH, 1.0};
    p.axes(svg, "survivors ending on vasopressors: any (blue), large (orange)", "share");
    const double gw = p.w / static_cast<double>(pops.size());
    for (std::size_t i = 0; i < pops.size(); ++i) {
        const double x = p.x0 + gw * static_cast<double>(i);
        const auto* pop = pops[i].second;
        if (pop->frac_nonzero_vaso_at_end) {
            const double v = *pop->frac_nonzero_vaso_at_end;
            svg.rect(x + 8, p.y(v), gw / 2 - 10, p.y0 + p.h - p.y(v), kBlue);
        }
        if (pop->frac_large_vaso_at_end) {
            const double v = *pop->frac_large_vaso_at_end;
            svg.rect(x + gw / 2 + 2, p.y(v), gw / 2 - 10, p.y0 + p.h - p.y(v), kOrange);
        }
        svg.text(x + gw / 2, p.y0 + p.h + 14, pops[i].first + " (n=" + std::to_string(pop->n) + ")", "middle", 9);
    }
    return svg.str();
}

std::string rare_action_chart_svg(const RareActionReport& r) {
    Svg svg(2 * (kPanelW / 2 + kMargin) + 2 * kMargin, kPanelH + 2.5 * kMargin);
    const Panel freq{kMargin + 20, kMargin, kPanelW / 2, kPanelH, 1.0};
    const double count_top = nice_max(std::max(r.avg_rl_action_count, r.avg_common_action_count));
    const Panel count{freq.x0 + freq.w + 2 * kMargin, kMargin, kPanelW / 2, kPanelH, count_top};
    freq.axes(svg, "mean frequency", "");
    count.axes(svg, "mean count", "");
    const auto pair = [&](const Panel& p, double rl, double common) {
        svg.rect(p.x0 + 10, p.y(rl), p.w / 2 - 15, p.y0 + p.h - p.y(rl), kOrange);
        svg.rect(p.x0 + p.w / 2 + 5, p.y(common), p.w / 2 - 15, p.y0 + p.h - p.y(common), kBlue);
        svg.text(p.x0 + p.w / 4, p.y0 + p.h + 14, "RL action", "middle", 10);
        svg.text(p.x0 + 3 * p.w / 4, p.y0 + p.h + 14, "common action", "middle", 10);
    };
    pair(freq, r.avg_rl_action_freq, r.avg_common_action_freq);
    pair(count, r.avg_rl_action_count, r.avg_common_action_count);
    svg.text(count.x0 + count.w, 16, std::to_string(r.n_states) + " rarest-RL-action states", "end", 11);
    return svg.str();
}

}  // namespace trajinspect
