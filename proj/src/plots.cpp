#include <cmath>
#include <sstream>

#include "sepsis/evaluation.hpp"

namespace sepsis {

namespace {

constexpr double kW = 420, kH = 420, kPad = 50;

struct Canvas {
    std::ostringstream out;
    double x0, x1, y0, y1;

    Canvas(std::string_view title, double xa, double xb, double ya, double yb, std::string_view xlabel,
           std::string_view ylabel)
        : x0(xa), x1(xb), y0(ya), y1(yb) {
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
            << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
        out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
            << kH - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
        out << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kH / 2
            << ")\">" << ylabel << "</text>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
            out << "<text x=\"" << px(fx) << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\">" << fmt(fx)
                << "</text>\n";
            out << "<text x=\"" << kPad - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << fmt(fy)
                << "</text>\n";
        }
    }
    static std::string fmt(double v) {
        std::ostringstream s;
        s.precision(3);
        s << v;
        return s.str();
    }
    double px(double x) const { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); }
    double py(double y) const { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); }
    std::string finish() {
        out << "</svg>\n";
        return out.str();
    }
};

} // namespace

std::string roc_svg(const EvalReport& report, std::string_view title) {
    Canvas c(title, 0, 1, 0, 1, "false positive rate", "true positive rate");
    c.out << "<line x1=\"" << c.px(0) << "\" y1=\"" << c.py(0) << "\" x2=\"" << c.px(1) << "\" y2=\"" << c.py(1)
          << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n<polyline fill=\"none\" stroke=\"#1f77b4\" "
             "stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : report.roc.points) c.out << c.px(x) << ',' << c.py(y) << ' ';
    c.out << "\"/>\n<text x=\"" << c.px(0.55) << "\" y=\"" << c.py(0.1) << "\">AUROC " << Canvas::fmt(report.roc.auroc)
          << "</text>\n";
    return c.finish();
}

std::string precision_earliness_svg(const EvalReport& report, std::string_view title) {
    double emin = 0, emax = 1;
    bool any = false;
    for (const auto& m : report.metrics) {
        if (!std::isfinite(m.median_earliness) || !std::isfinite(m.precision)) continue;
        emin = any ? std::min(emin, m.median_earliness) : m.median_earliness;
        emax = any ? std::max(emax, m.median_earliness) : m.median_earliness;
        any = true;
    }
    if (!(emax > emin)) emax = emin + 1;
    Canvas c(title, emin, emax, 0, 1, "median earliness (h)", "precision");
    for (const auto& m : report.metrics) {
        if (!std::isfinite(m.median_earliness) || !std::isfinite(m.precision)) continue;
        c.out << "<circle cx=\"" << c.px(m.median_earliness) << "\" cy=\"" << c.py(m.precision)
              << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    }
    const auto& a = report.at_recall;
    if (a.attained && std::isfinite(a.precision) && std::isfinite(a.median_earliness))
        c.out << "<circle cx=\"" << c.px(a.median_earliness) << "\" cy=\"" << c.py(a.precision)
              << "\" r=\"5\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    return c.finish();
}

} // namespace sepsis
