#include "phaseflow/eval.hpp"

#include <cmath>
#include <sstream>

namespace phaseflow::eval {

namespace {

// pred/gt pairs surviving the transition filter
std::vector<std::pair<int, int>> paired_labels(const PhaseTimeline& pred,
                                               const PhaseTimeline& gt,
                                               const MetricOptions& opt) {
  if (pred.labels.size() != gt.labels.size())
    throw DataError("prediction/ground-truth length mismatch");
  pred.validate();
  gt.validate();
  std::vector<std::pair<int, int>> out;
  out.reserve(gt.labels.size());
  for (std::size_t t = 0; t < gt.labels.size(); ++t) {
    if (opt.exclude_transition && gt.labels[t] == 0) continue;
    out.emplace_back(pred.labels[t], gt.labels[t]);
  }
  return out;
}

}  // namespace

ConfusionMatrix confusion(const PhaseTimeline& pred, const PhaseTimeline& gt,
                          int n_classes) {
  if (pred.labels.size() != gt.labels.size())
    throw DataError("prediction/ground-truth length mismatch");
  ConfusionMatrix cm(n_classes);
  for (std::size_t t = 0; t < gt.labels.size(); ++t)
    cm.counts[static_cast<std::size_t>(gt.labels[t])]
             [static_cast<std::size_t>(pred.labels[t])] += 1;
  return cm;
}

double frame_accuracy(const PhaseTimeline& pred, const PhaseTimeline& gt,
                      const MetricOptions& opt) {
  const auto pairs = paired_labels(pred, gt, opt);
  if (pairs.empty()) throw DataError("no frames to score");
  long hits = 0;
  for (const auto& [p, g] : pairs) hits += p == g;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double macro_f1(const PhaseTimeline& pred, const PhaseTimeline& gt,
                int n_classes, const MetricOptions& opt) {
  const auto pairs = paired_labels(pred, gt, opt);
  std::vector<long> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> support(static_cast<std::size_t>(n_classes), 0);
  for (const auto& [p, g] : pairs) {
    support[static_cast<std::size_t>(g)] += 1;
    if (p == g) {
      tp[static_cast<std::size_t>(g)] += 1;
    } else {
      fp[static_cast<std::size_t>(p)] += 1;
      fn[static_cast<std::size_t>(g)] += 1;
    }
  }
  double sum = 0.0;
  std::size_t considered = 0;
  for (std::size_t c = 0; c < static_cast<std::size_t>(n_classes); ++c) {
    if (support[c] == 0 && !opt.zero_support_as_zero) continue;
    if (support[c] == 0 && opt.zero_support_as_zero) {
      ++considered;  // contributes F1 = 0
      continue;
    }
    const double prec_den = static_cast<double>(tp[c] + fp[c]);
    const double rec_den = static_cast<double>(tp[c] + fn[c]);
    const double precision = prec_den > 0 ? tp[c] / prec_den : 0.0;
    const double recall = rec_den > 0 ? tp[c] / rec_den : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    sum += f1;
    ++considered;
  }
  if (considered == 0) throw DataError("no supported class");
  return 100.0 * sum / static_cast<double>(considered);
}

RunAggregate aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) throw InputError("no runs to aggregate");
  RunAggregate agg;
  agg.runs = values.size();
  for (double v : values) agg.mean += v;
  agg.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - agg.mean) * (v - agg.mean);
  agg.std_dev = std::sqrt(var / static_cast<double>(values.size()));
  return agg;
}

namespace {

const char* kClassColors[kNumClasses] = {
    "#bdbdbd",  // transition, grey
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
    "#e377c2", "#17becf", "#d62728"};

void emit_ribbon_row(std::ostringstream& svg, const PhaseTimeline& tl, int x0,
                     int y0, double px_per_s, int height) {
  std::size_t start = 0;
  for (std::size_t t = 1; t <= tl.labels.size(); ++t) {
    if (t < tl.labels.size() && tl.labels[t] == tl.labels[start]) continue;
    const double x = x0 + px_per_s * static_cast<double>(start);
    const double w = px_per_s * static_cast<double>(t - start);
    svg << "  <rect x=\"" << x << "\" y=\"" << y0 << "\" width=\"" << w
        << "\" height=\"" << height << "\" fill=\""
        << kClassColors[tl.labels[start]] << "\"/>\n";
    start = t;
  }
}

}  // namespace

std::string ribbon_svg(const std::vector<RibbonPair>& pairs,
                       const std::vector<std::string>& label_names) {
  if (label_names.size() != static_cast<std::size_t>(kNumClasses))
    throw InputError("expected 9 label names");
  std::size_t max_t = 0;
  for (const auto& p : pairs) {
    if (p.pred.labels.size() != p.gt.labels.size())
      throw DataError("prediction/ground-truth length mismatch");
    max_t = std::max(max_t, p.gt.labels.size());
  }

  const int x0 = 120, row_h = 18, pair_gap = 26, block_h = 2 * row_h;
  const int plot_w = 820;
  const double px_per_s =
      max_t > 0 ? static_cast<double>(plot_w) / static_cast<double>(max_t) : 1.0;
  const int legend_h = 40;
  const int axis_h = 30;
  const int height = legend_h +
                     static_cast<int>(pairs.size()) * (block_h + pair_gap) +
                     axis_h + 10;
  const int width = x0 + plot_w + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
      << width << "\" height=\"" << height << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\""
      << height << "\" fill=\"white\"/>\n";

  // legend
  int lx = x0;
  for (int c = 0; c < kNumClasses; ++c) {
    svg << "  <rect x=\"" << lx << "\" y=\"10\" width=\"12\" height=\"12\" "
        << "fill=\"" << kClassColors[c] << "\"/>\n";
    svg << "  <text x=\"" << lx + 16 << "\" y=\"20\" font-size=\"10\" "
        << "font-family=\"sans-serif\">" << label_names[static_cast<std::size_t>(c)]
        << "</text>\n";
    lx += 16 + static_cast<int>(label_names[static_cast<std::size_t>(c)].size()) * 6 + 12;
  }

  int y = legend_h;
  for (const auto& p : pairs) {
    svg << "  <text x=\"10\" y=\"" << y + row_h
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << p.title
        << "</text>\n";
    emit_ribbon_row(svg, p.pred, x0, y, px_per_s, row_h - 2);
    emit_ribbon_row(svg, p.gt, x0, y + row_h, px_per_s, row_h - 2);
    svg << "  <text x=\"" << x0 + plot_w + 4 << "\" y=\"" << y + 12
        << "\" font-size=\"9\" font-family=\"sans-serif\">pred</text>\n";
    svg << "  <text x=\"" << x0 + plot_w + 4 << "\" y=\"" << y + row_h + 12
        << "\" font-size=\"9\" font-family=\"sans-serif\">gt</text>\n";
    y += block_h + pair_gap;
  }

  // time axis in minutes
  if (max_t > 0) {
    const double minutes = static_cast<double>(max_t) / 60.0;
    const int n_ticks = 6;
    svg << "  <line x1=\"" << x0 << "\" y1=\"" << y << "\" x2=\""
        << x0 + plot_w << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= n_ticks; ++i) {
      const double frac = static_cast<double>(i) / n_ticks;
      const double x = x0 + frac * plot_w;
      svg << "  <line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x
          << "\" y2=\"" << y + 4 << "\" stroke=\"black\"/>\n";
      svg << "  <text x=\"" << x - 8 << "\" y=\"" << y + 16
          << "\" font-size=\"9\" font-family=\"sans-serif\">"
          << static_cast<int>(frac * minutes + 0.5) << " min</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace phaseflow::eval
