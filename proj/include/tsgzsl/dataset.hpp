#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tsgzsl/rng.hpp"

namespace tsgzsl::data {

struct LabeledSeries {
  std::vector<double> values;  // length T, finite
  int label = 0;               // dense class id
};

struct Dataset {
  std::string name;
  std::vector<LabeledSeries> series;
  std::size_t num_classes = 0;
  std::size_t series_length = 0;
  std::map<double, int> label_map;  // original label -> dense id

  std::size_t size() const { return series.size(); }
};

/// Class-wise GZSL partition. Outer level: seen/unseen classes with a 20%
/// per-class sample holdout of the seen classes as the seen test set.
/// Inner level (carved out of train_idx only): the seen classes are halved
/// into inner-train vs validation classes, with a further 20% holdout of the
/// inner-train classes as the seen validation set.
struct GZSLSplit {
  std::uint64_t seed = 0;
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> seen_test_idx;
  std::vector<std::size_t> unseen_test_idx;

  std::vector<int> inner_train_classes;
  std::vector<int> val_classes;
  std::vector<std::size_t> inner_train_idx;
  std::vector<std::size_t> seen_val_idx;
  std::vector<std::size_t> unseen_val_idx;

  std::vector<std::string> warnings;
};

/// Parses one UCR-style file: one series per line, first field the class
/// label, remaining fields the values. Tab, comma and space separators are
/// accepted. Throws on ragged rows (with line number), unparsable or
/// non-finite values (with line/column) and empty files.
Dataset load_ucr_tsv(const std::string& path);

/// Pools two files (e.g. the archive's TRAIN and TEST parts) into one
/// dataset with a shared dense label mapping.
Dataset merge(const Dataset& a, const Dataset& b);

/// Per-series z-normalization (population sigma); constant series map to
/// all-zeros.
Dataset znormalize(const Dataset& ds);

GZSLSplit make_gzsl_split(const Dataset& ds, std::uint64_t seed);

std::string split_to_json(const GZSLSplit& split);
GZSLSplit split_from_json(const std::string& text);

}  // namespace tsgzsl::data
