#include "tsgzsl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tsgzsl::data {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t' || c == ',' || c == ' ' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double parse_value(const std::string& tok, std::size_t line_no, std::size_t col) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ", column " +
                             std::to_string(col) + ": cannot read '" + tok + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ", column " +
                             std::to_string(col) + ": non-finite value '" + tok + "'");
  }
  return v;
}

void remap_labels(Dataset& ds, const std::vector<double>& original_labels) {
  ds.label_map.clear();
  for (double l : original_labels) ds.label_map.emplace(l, 0);
  int next = 0;
  for (auto& [orig, dense] : ds.label_map) dense = next++;
  ds.num_classes = ds.label_map.size();
  for (std::size_t i = 0; i < ds.series.size(); ++i) {
    ds.series[i].label = ds.label_map.at(original_labels[i]);
  }
}

// Stratified per-class holdout: floor(fraction*n) per class, remainder
// topped up on the largest classes until round(fraction*total) is reached.
// Classes too small to spare a sample get a warning instead of a holdout.
std::vector<std::size_t> stratified_holdout(const std::vector<std::vector<std::size_t>>& by_class,
                                            const std::vector<int>& class_ids, double fraction,
                                            core::Rng& rng, std::vector<std::string>& warnings,
                                            std::vector<std::vector<std::size_t>>& shuffled_out) {
  std::size_t total = 0;
  for (const auto& v : by_class) total += v.size();
  const std::size_t target = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(total)));

  shuffled_out.clear();
  std::vector<std::size_t> quota(by_class.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    shuffled_out.push_back(std::move(idx));
    if (by_class[c].size() < 2) {
      warnings.push_back("class " + std::to_string(class_ids[c]) + " has " +
                         std::to_string(by_class[c].size()) + " sample(s); holdout skipped");
      continue;
    }
    quota[c] = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(by_class[c].size())));
    assigned += quota[c];
  }
  // distribute the remainder to the largest classes, never emptying one
  std::vector<std::size_t> order(by_class.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return by_class[a].size() > by_class[b].size(); });
  bool progress = true;
  while (assigned < target && progress) {
    progress = false;
    for (std::size_t c : order) {
      if (assigned >= target) break;
      if (by_class[c].size() < 2) continue;
      if (quota[c] + 1 <= by_class[c].size() - 1) {
        ++quota[c];
        ++assigned;
        progress = true;
      }
    }
  }
  if (assigned < target) {
    warnings.push_back("holdout target " + std::to_string(target) + " not reachable; assigned " +
                       std::to_string(assigned));
  }

  std::vector<std::size_t> holdout;
  for (std::size_t c = 0; c < shuffled_out.size(); ++c) {
    holdout.insert(holdout.end(), shuffled_out[c].begin(), shuffled_out[c].begin() +
                                      static_cast<std::ptrdiff_t>(quota[c]));
    shuffled_out[c].erase(shuffled_out[c].begin(), shuffled_out[c].begin() +
                                                       static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(holdout.begin(), holdout.end());
  return holdout;
}

}  // namespace

Dataset load_ucr_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset file '" + path + "'");

  Dataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  std::vector<double> original_labels;

  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;  // blank/trailing line
    if (expected_fields == 0) {
      expected_fields = toks.size();
      if (expected_fields < 3) {
        throw std::runtime_error("line " + std::to_string(line_no) + " of '" + path +
                                 "': a series needs a label and at least 2 values");
      }
      ds.series_length = expected_fields - 1;
    } else if (toks.size() != expected_fields) {
      throw std::runtime_error("ragged row at line " + std::to_string(line_no) + " of '" + path + "': " +
                               std::to_string(toks.size()) + " fields, expected " +
                               std::to_string(expected_fields));
    }
    LabeledSeries s;
    s.values.reserve(ds.series_length);
    original_labels.push_back(parse_value(toks[0], line_no, 1));
    for (std::size_t i = 1; i < toks.size(); ++i) {
      s.values.push_back(parse_value(toks[i], line_no, i + 1));
    }
    ds.series.push_back(std::move(s));
  }
  if (ds.series.empty()) throw std::runtime_error("dataset file '" + path + "' is empty");
  remap_labels(ds, original_labels);
  return ds;
}

Dataset merge(const Dataset& a, const Dataset& b) {
  if (a.series_length != b.series_length) {
    throw std::runtime_error("cannot merge datasets with lengths " + std::to_string(a.series_length) +
                             " and " + std::to_string(b.series_length));
  }
  Dataset out;
  out.name = a.name;
  out.series_length = a.series_length;
  std::vector<double> original;
  auto append = [&](const Dataset& d) {
    std::vector<double> inverse(d.num_classes);
    for (const auto& [orig, dense] : d.label_map) inverse[static_cast<std::size_t>(dense)] = orig;
    for (const auto& s : d.series) {
      out.series.push_back(s);
      original.push_back(inverse[static_cast<std::size_t>(s.label)]);
    }
  };
  append(a);
  append(b);
  remap_labels(out, original);
  return out;
}

Dataset znormalize(const Dataset& ds) {
  Dataset out = ds;
  for (auto& s : out.series) {
    const std::size_t n = s.values.size();
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : s.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
      std::fill(s.values.begin(), s.values.end(), 0.0);
    } else {
      for (double& v : s.values) v = (v - mean) / sd;
    }
  }
  return out;
}

GZSLSplit make_gzsl_split(const Dataset& ds, std::uint64_t seed) {
  if (ds.num_classes < 3) {
    throw std::runtime_error("GZSL split needs at least 3 classes, dataset has " +
                             std::to_string(ds.num_classes));
  }
  core::Rng rng = core::Rng(seed).derive(0x5154);  // split stream

  GZSLSplit split;
  split.seed = seed;

  const std::size_t C = ds.num_classes;
  const std::size_t n_seen = (2 * C + 2) / 3;  // ceil(2C/3)
  std::vector<int> classes(C);
  for (std::size_t c = 0; c < C; ++c) classes[c] = static_cast<int>(c);
  rng.shuffle(classes);
  split.seen_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_seen));
  split.unseen_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_seen), classes.end());
  std::sort(split.seen_classes.begin(), split.seen_classes.end());
  std::sort(split.unseen_classes.begin(), split.unseen_classes.end());

  const std::set<int> seen_set(split.seen_classes.begin(), split.seen_classes.end());

  // outer sample split: unseen-class samples all go to the unseen test set
  std::vector<std::vector<std::size_t>> seen_by_class(n_seen);
  std::vector<int> seen_ids = split.seen_classes;
  auto seen_slot = [&](int label) {
    return static_cast<std::size_t>(
        std::lower_bound(seen_ids.begin(), seen_ids.end(), label) - seen_ids.begin());
  };
  for (std::size_t i = 0; i < ds.series.size(); ++i) {
    const int label = ds.series[i].label;
    if (seen_set.count(label)) {
      seen_by_class[seen_slot(label)].push_back(i);
    } else {
      split.unseen_test_idx.push_back(i);
    }
  }

  std::vector<std::vector<std::size_t>> seen_remainder;
  split.seen_test_idx =
      stratified_holdout(seen_by_class, seen_ids, 0.20, rng, split.warnings, seen_remainder);
  for (const auto& rem : seen_remainder) {
    split.train_idx.insert(split.train_idx.end(), rem.begin(), rem.end());
  }
  std::sort(split.train_idx.begin(), split.train_idx.end());

  // inner split over the seen classes, carved out of train_idx only
  std::vector<int> seen_shuffled = split.seen_classes;
  rng.shuffle(seen_shuffled);
  const std::size_t n_inner = (n_seen + 1) / 2;
  split.inner_train_classes.assign(seen_shuffled.begin(),
                                   seen_shuffled.begin() + static_cast<std::ptrdiff_t>(n_inner));
  split.val_classes.assign(seen_shuffled.begin() + static_cast<std::ptrdiff_t>(n_inner),
                           seen_shuffled.end());
  std::sort(split.inner_train_classes.begin(), split.inner_train_classes.end());
  std::sort(split.val_classes.begin(), split.val_classes.end());

  const std::set<int> inner_set(split.inner_train_classes.begin(), split.inner_train_classes.end());
  std::vector<std::vector<std::size_t>> inner_by_class(split.inner_train_classes.size());
  auto inner_slot = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(split.inner_train_classes.begin(),
                                                     split.inner_train_classes.end(), label) -
                                    split.inner_train_classes.begin());
  };
  for (std::size_t i : split.train_idx) {
    const int label = ds.series[i].label;
    if (inner_set.count(label)) {
      inner_by_class[inner_slot(label)].push_back(i);
    } else {
      split.unseen_val_idx.push_back(i);
    }
  }
  std::vector<std::vector<std::size_t>> inner_remainder;
  split.seen_val_idx = stratified_holdout(inner_by_class, split.inner_train_classes, 0.20, rng,
                                          split.warnings, inner_remainder);
  for (const auto& rem : inner_remainder) {
    split.inner_train_idx.insert(split.inner_train_idx.end(), rem.begin(), rem.end());
  }
  std::sort(split.inner_train_idx.begin(), split.inner_train_idx.end());
  std::sort(split.unseen_val_idx.begin(), split.unseen_val_idx.end());
  return split;
}

std::string split_to_json(const GZSLSplit& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["seen_classes"] = split.seen_classes;
  j["unseen_classes"] = split.unseen_classes;
  j["train_idx"] = split.train_idx;
  j["seen_test_idx"] = split.seen_test_idx;
  j["unseen_test_idx"] = split.unseen_test_idx;
  j["inner_train_classes"] = split.inner_train_classes;
  j["val_classes"] = split.val_classes;
  j["inner_train_idx"] = split.inner_train_idx;
  j["seen_val_idx"] = split.seen_val_idx;
  j["unseen_val_idx"] = split.unseen_val_idx;
  j["warnings"] = split.warnings;
  return j.dump(2) + "\n";
}

GZSLSplit split_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GZSLSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.seen_classes = j.at("seen_classes").get<std::vector<int>>();
  s.unseen_classes = j.at("unseen_classes").get<std::vector<int>>();
  s.train_idx = j.at("train_idx").get<std::vector<std::size_t>>();
  s.seen_test_idx = j.at("seen_test_idx").get<std::vector<std::size_t>>();
  s.unseen_test_idx = j.at("unseen_test_idx").get<std::vector<std::size_t>>();
  s.inner_train_classes = j.at("inner_train_classes").get<std::vector<int>>();
  s.val_classes = j.at("val_classes").get<std::vector<int>>();
  s.inner_train_idx = j.at("inner_train_idx").get<std::vector<std::size_t>>();
  s.seen_val_idx = j.at("seen_val_idx").get<std::vector<std::size_t>>();
  s.unseen_val_idx = j.at("unseen_val_idx").get<std::vector<std::size_t>>();
  s.warnings = j.at("warnings").get<std::vector<std::string>>();
  return s;
}

}  // namespace tsgzsl::data
