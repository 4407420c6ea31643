#include "wss/io/pipeline.hpp"

#include "wss/eval/metrics.hpp"
#include "wss/util/csv.hpp"
#include "wss/util/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace wss {

namespace fs = std::filesystem;

namespace {

// Minimal line-plot SVG: axes, ticks, one polyline.
void write_svg_curve(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& x_label,
                     const std::string& y_label, const std::string& title) {
    const int width = 560, height = 420, margin = 60;
    const double x_max = std::max(1e-9, *std::max_element(xs.begin(), xs.end()));
    const double y_max = 1.0;

    auto px = [&](double x) { return margin + x / x_max * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - y / y_max * (height - 2 * margin); };

    std::ofstream out(path);
    require(out.good(), "cannot write SVG: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    // Axes.
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x_max * i / 5.0, yv = y_max * i / 5.0;
        out << "<line x1=\"" << px(xv) << "\" y1=\"" << height - margin << "\" x2=\"" << px(xv)
            << "\" y2=\"" << height - margin + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(xv) << "\" y=\"" << height - margin + 20
            << "\" text-anchor=\"middle\" font-size=\"11\">" << csv_num(xv) << "</text>\n";
        out << "<line x1=\"" << margin - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << margin
            << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << margin - 8 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << csv_num(yv) << "</text>\n";
    }
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 14
        << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
        << height / 2 << ")\">" << y_label << "</text>\n";

    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i)
        out << px(xs[i]) << ',' << py(std::min(ys[i], y_max)) << ' ';
    out << "\"/>\n</svg>\n";
}

std::optional<double> cell_value(const CsvTable& t, const std::vector<std::string>& row,
                                 const std::string& column) {
    const int c = t.column(column);
    if (c >= static_cast<int>(row.size()) || row[static_cast<size_t>(c)].empty())
        return std::nullopt;
    return std::stod(row[static_cast<size_t>(c)]);
}

std::optional<double> aggregate_score(const std::optional<double>& auroc,
                                      const std::optional<double>& ap) {
    if (!auroc || !ap) return std::nullopt;
    return 0.5 * (*auroc + *ap);
}

} // namespace

void cmd_report(const std::string& val_metrics_csv, const std::string& test_metrics_csv,
                const std::string& curves_dir, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const CsvTable val = read_csv(val_metrics_csv);
    const CsvTable test = read_csv(test_metrics_csv);

    CsvWriter out((fs::path(out_dir) / "relative_change.csv").string(),
                  {"model", "dataset", "ap_ratio", "auroc_ratio", "sensitivity_ratio",
                   "aggregate_val", "aggregate_test", "aggregate_ratio"});
    const int val_model = val.column("model");
    const int test_model = test.column("model");
    for (const auto& trow : test.rows) {
        const std::string& model = trow[static_cast<size_t>(test_model)];
        const auto vit = std::find_if(val.rows.begin(), val.rows.end(), [&](const auto& r) {
            return r[static_cast<size_t>(val_model)] == model;
        });
        if (vit == val.rows.end()) continue;
        const auto& vrow = *vit;

        auto ratio = [&](const std::string& col) -> std::optional<double> {
            const auto tv = cell_value(test, trow, col);
            const auto vv = cell_value(val, vrow, col);
            if (!tv || !vv) return std::nullopt;
            return relative_change(*tv, *vv);
        };
        const auto agg_val = aggregate_score(cell_value(val, vrow, "AUROC"),
                                             cell_value(val, vrow, "AP"));
        const auto agg_test = aggregate_score(cell_value(test, trow, "AUROC"),
                                              cell_value(test, trow, "AP"));
        std::optional<double> agg_ratio;
        if (agg_val && agg_test) agg_ratio = relative_change(*agg_test, *agg_val);

        auto cell = [](const std::optional<double>& v) {
            return v ? csv_num(*v) : std::string();
        };
        out.row({model, trow[static_cast<size_t>(test.column("dataset"))], cell(ratio("AP")),
                 cell(ratio("AUROC")), cell(ratio("sensitivity_at_1fp")), cell(agg_val),
                 cell(agg_test), cell(agg_ratio)});
    }

    if (!curves_dir.empty()) {
        const fs::path cd(curves_dir);
        if (fs::exists(cd / "froc.csv")) {
            const CsvTable froc = read_csv((cd / "froc.csv").string());
            std::vector<double> xs, ys;
            const int xc = froc.column("fp_per_patient"), yc = froc.column("sensitivity");
            for (const auto& r : froc.rows) {
                xs.push_back(std::stod(r[static_cast<size_t>(xc)]));
                ys.push_back(std::stod(r[static_cast<size_t>(yc)]));
            }
            if (!xs.empty())
                write_svg_curve((fs::path(out_dir) / "froc.svg").string(), xs, ys,
                                "false positives per patient", "sensitivity", "FROC");
        }
        if (fs::exists(cd / "pr.csv")) {
            const CsvTable pr = read_csv((cd / "pr.csv").string());
            std::vector<double> xs, ys;
            const int xc = pr.column("recall"), yc = pr.column("precision");
            for (const auto& r : pr.rows) {
                xs.push_back(std::stod(r[static_cast<size_t>(xc)]));
                ys.push_back(std::stod(r[static_cast<size_t>(yc)]));
            }
            if (!xs.empty())
                write_svg_curve((fs::path(out_dir) / "pr.svg").string(), xs, ys, "recall",
                                "precision", "Precision-Recall");
        }
    }
}

} // namespace wss
