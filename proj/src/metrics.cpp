#include "tsgzsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace tsgzsl::metrics {

AccuracyPair accuracy_split(const std::vector<int>& preds, const std::vector<int>& labels,
                            const std::set<int>& seen_classes) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("accuracy_split: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  }
  AccuracyPair out;
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // class -> (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool correct = preds[i] == labels[i];
    auto& pc = per_class[labels[i]];
    pc.second += 1;
    pc.first += correct ? 1 : 0;
    if (seen_classes.count(labels[i])) {
      out.seen_total += 1;
      out.seen_correct += correct ? 1 : 0;
    } else {
      out.unseen_total += 1;
      out.unseen_correct += correct ? 1 : 0;
    }
  }
  if (out.seen_total == 0) throw std::invalid_argument("accuracy_split: no seen-class test samples");
  if (out.unseen_total == 0) throw std::invalid_argument("accuracy_split: no unseen-class test samples");
  out.micro_s = static_cast<double>(out.seen_correct) / static_cast<double>(out.seen_total);
  out.micro_u = static_cast<double>(out.unseen_correct) / static_cast<double>(out.unseen_total);

  double macro_s = 0.0, macro_u = 0.0;
  std::size_t n_s = 0, n_u = 0;
  for (const auto& [cls, cnt] : per_class) {
    const double acc = static_cast<double>(cnt.first) / static_cast<double>(cnt.second);
    if (seen_classes.count(cls)) {
      macro_s += acc;
      ++n_s;
    } else {
      macro_u += acc;
      ++n_u;
    }
  }
  out.macro_s = n_s ? macro_s / static_cast<double>(n_s) : 0.0;
  out.macro_u = n_u ? macro_u / static_cast<double>(n_u) : 0.0;
  return out;
}

double harmonic_mean(double acc_s, double acc_u) {
  if (acc_s * acc_u == 0.0) return 0.0;
  return 2.0 * acc_s * acc_u / (acc_s + acc_u);
}

std::vector<double> gamma_grid() {
  std::vector<double> grid;
  grid.reserve(1021);
  for (int i = -20; i <= 0; ++i) grid.push_back(static_cast<double>(i) * 0.05);
  for (int j = 1; j <= 1000; ++j) grid.push_back(static_cast<double>(j) * 0.001);
  return grid;
}

double ausuc_from_points(const std::vector<SUCurvePoint>& points) {
  if (points.empty()) throw std::invalid_argument("ausuc_from_points: no points");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(points.size() + 2);
  double max_s = 0.0, max_u = 0.0;
  for (const auto& p : points) {
    pts.emplace_back(p.acc_s, p.acc_u);
    max_s = std::max(max_s, p.acc_s);
    max_u = std::max(max_u, p.acc_u);
  }
  pts.emplace_back(0.0, max_u);
  pts.emplace_back(max_s, 0.0);
  // ascending acc_s; ties keep the higher acc_u first so vertical segments
  // contribute no spurious area
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    area += (pts[k + 1].first - pts[k].first) * (pts[k].second + pts[k + 1].second) * 0.5;
  }
  return area;
}

SUCurve ausuc_sweep(const model::GZSLModel& model, const std::vector<std::vector<double>>& probs,
                    const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw std::invalid_argument("ausuc_sweep: probability rows and labels must be nonempty and aligned");
  }
  const std::set<int> seen(model.class_order.begin(),
                           model.class_order.begin() + static_cast<std::ptrdiff_t>(model.num_seen));
  SUCurve curve;
  for (double g : gamma_grid()) {
    std::vector<int> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) preds[i] = model.predict(probs[i], g);
    const AccuracyPair acc = accuracy_split(preds, labels, seen);
    curve.points.push_back({g, acc.micro_s, acc.micro_u});
  }
  curve.ausuc = ausuc_from_points(curve.points);
  return curve;
}

std::string sweep_csv(const SUCurve& curve) {
  std::string out = "gamma,acc_s,acc_u\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.gamma, p.acc_s, p.acc_u);
    out += buf;
  }
  return out;
}

std::string sweep_svg(const SUCurve& curve) {
  const int size = 560, margin = 60, plot = size - 2 * margin;
  auto px = [&](double x) { return margin + x * plot; };
  auto py = [&](double y) { return size - margin - y * plot; };
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                size, size, size, size);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes with 0.2 ticks
  for (int i = 0; i <= 5; ++i) {
    const double v = i * 0.2;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", px(v),
                  py(0.0), px(v), py(1.0));
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", px(0.0),
                  py(v), px(1.0), py(v));
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">%.1f</text>\n",
                  px(v), py(0.0) + 20.0, v);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\">%.1f</text>\n",
                  px(0.0) - 8.0, py(v) + 4.0, v);
    svg += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", px(0.0),
                py(0.0), px(1.0), py(0.0));
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", px(0.0),
                py(0.0), px(0.0), py(1.0));
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\">seen accuracy</text>\n",
                px(0.5), py(0.0) + 40.0);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 %.1f %.1f)\">unseen accuracy</text>\n",
                px(0.0) - 40.0, py(0.5), px(0.0) - 40.0, py(0.5));
  svg += buf;
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(p.acc_s), py(p.acc_u));
    svg += buf;
  }
  svg += "\"/>\n";
  char label[96];
  std::snprintf(label, sizeof(label), "AUSUC = %.4f", curve.ausuc);
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"end\">%s</text>\n", px(1.0),
                py(1.0) - 8.0, label);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["acc_s"] = report.acc_s;
  j["acc_u"] = report.acc_u;
  j["h"] = report.h;
  j["macro_acc_s"] = report.macro_acc_s;
  j["macro_acc_u"] = report.macro_acc_u;
  j["seen_total"] = report.seen_total;
  j["seen_correct"] = report.seen_correct;
  j["unseen_total"] = report.unseen_total;
  j["unseen_correct"] = report.unseen_correct;
  j["gamma"] = report.gamma;
  j["tau"] = report.tau;
  j["ausuc"] = report.ausuc;
  return j.dump(2) + "\n";
}

}  // namespace tsgzsl::metrics
