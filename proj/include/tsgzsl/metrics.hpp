#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "tsgzsl/model.hpp"

namespace tsgzsl::metrics {

struct EvalReport {
  double acc_s = 0.0;        // micro top-1 over samples of seen classes
  double acc_u = 0.0;        // micro top-1 over samples of unseen classes
  double h = 0.0;
  double macro_acc_s = 0.0;  // per-class means, reported for transparency
  double macro_acc_u = 0.0;
  std::size_t seen_total = 0, seen_correct = 0;
  std::size_t unseen_total = 0, unseen_correct = 0;
  double gamma = 0.0;
  double tau = 1.0;
  double ausuc = 0.0;
};

struct SUCurvePoint {
  double gamma = 0.0;
  double acc_s = 0.0;
  double acc_u = 0.0;
};

struct SUCurve {
  std::vector<SUCurvePoint> points;  // gamma strictly increasing
  double ausuc = 0.0;
};

struct AccuracyPair {
  double micro_s = 0.0, micro_u = 0.0;
  double macro_s = 0.0, macro_u = 0.0;
  std::size_t seen_total = 0, seen_correct = 0, unseen_total = 0, unseen_correct = 0;
};

/// Micro (and macro) top-1 accuracy over samples whose true class is seen,
/// and separately over samples whose true class is unseen. Throws when
/// either group is empty.
AccuracyPair accuracy_split(const std::vector<int>& preds, const std::vector<int>& labels,
                            const std::set<int>& seen_classes);

/// H = 2 acc_s acc_u / (acc_s + acc_u), defined as 0 when either factor is 0.
double harmonic_mean(double acc_s, double acc_u);

/// The calibration-factor grid: -1.00 .. 0.00 step 0.05, then 0.001 .. 1.000
/// step 0.001 (gamma=0 appears once). 1021 strictly increasing values.
std::vector<double> gamma_grid();

/// Area under the (acc_s, acc_u) staircase: points sorted by acc_s (ties by
/// descending acc_u), exact duplicates removed, endpoints anchored at
/// (0, max acc_u) and (max acc_s, 0), trapezoidal integration.
double ausuc_from_points(const std::vector<SUCurvePoint>& points);

/// Full gamma sweep over a fixed probability matrix (rows follow
/// model.class_order slots). Pure: same inputs give bit-identical output.
SUCurve ausuc_sweep(const model::GZSLModel& model, const std::vector<std::vector<double>>& probs,
                    const std::vector<int>& labels);

std::string sweep_csv(const SUCurve& curve);
/// Standalone SVG line plot of acc_u against acc_s.
std::string sweep_svg(const SUCurve& curve);

std::string report_json(const EvalReport& report);

}  // namespace tsgzsl::metrics
