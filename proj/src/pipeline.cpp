#include "tsgzsl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tsgzsl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// rng stream tags for the independent random decisions of a run
constexpr std::uint64_t kStreamEncoderStage1 = 0xE1;
constexpr std::uint64_t kStreamEncoderStage2 = 0xE2;
constexpr std::uint64_t kStreamClassifierStage1 = 0xC1;
constexpr std::uint64_t kStreamClassifierStage2 = 0xC2;
constexpr std::uint64_t kStreamSearch = 0x5EA2;

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

template <class T>
void read_key(const json& j, std::set<std::string>& seen, const char* key, T& out) {
  seen.insert(key);
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw std::runtime_error("write error on '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
  RunConfig c;
  std::set<std::string> known;

  read_key(j, known, "data", c.data);
  read_key(j, known, "data_test", c.data_test);
  read_key(j, known, "out", c.out);
  read_key(j, known, "seed", c.seed);
  read_key(j, known, "mode", c.mode);
  read_key(j, known, "normalize", c.normalize);
  read_key(j, known, "tau", c.tau);
  known.insert("gamma");
  if (j.contains("gamma")) {
    if (j.at("gamma").is_string()) {
      if (j.at("gamma").get<std::string>() != "sweep") {
        throw std::runtime_error("config: gamma must be a number or \"sweep\"");
      }
      c.gamma_sweep = true;
    } else {
      c.gamma_sweep = false;
      c.gamma = j.at("gamma").get<double>();
    }
  }
  read_key(j, known, "apen_m", c.apen_m);
  read_key(j, known, "apen_r_factor", c.apen_r_factor);
  read_key(j, known, "dump_attributes", c.dump_attributes);
  read_key(j, known, "trials", c.trials);

  read_key(j, known, "enc_repr_dim", c.enc.repr_dim);
  read_key(j, known, "enc_hidden_dim", c.enc.hidden_dim);
  read_key(j, known, "enc_blocks", c.enc.num_residual_blocks);
  read_key(j, known, "enc_kernel", c.enc.kernel_size);
  read_key(j, known, "enc_mask_prob", c.enc.mask_probability);
  read_key(j, known, "enc_batch", c.enc.batch_size);
  read_key(j, known, "enc_epochs", c.enc.epochs);
  read_key(j, known, "enc_hierarchical", c.enc.hierarchical_levels);
  read_key(j, known, "enc_lr", c.enc.learning_rate);

  read_key(j, known, "lat_blocks", c.lat.num_conv_blocks);
  read_key(j, known, "lat_filters", c.lat.filters);
  read_key(j, known, "lat_kernels", c.lat.kernels);
  read_key(j, known, "lat_pool", c.lat.pool_size);
  read_key(j, known, "lat_dim", c.lat.latent_dim);
  read_key(j, known, "lat_epochs", c.lat.epochs);
  read_key(j, known, "lat_batch", c.lat.batch_size);
  read_key(j, known, "lat_lr", c.lat.learning_rate);
  read_key(j, known, "clf_hidden", c.lat.clf_hidden);

  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  }
  model::parse_mode(c.mode);  // fail fast on bad mode strings
  return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  try {
    return from_json_text(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["data"] = data;
  j["data_test"] = data_test;
  j["out"] = out;
  j["seed"] = seed;
  j["mode"] = mode;
  j["normalize"] = normalize;
  j["tau"] = tau;
  if (gamma_sweep) {
    j["gamma"] = "sweep";
  } else {
    j["gamma"] = gamma;
  }
  j["apen_m"] = apen_m;
  j["apen_r_factor"] = apen_r_factor;
  j["dump_attributes"] = dump_attributes;
  j["trials"] = trials;
  j["enc_repr_dim"] = enc.repr_dim;
  j["enc_hidden_dim"] = enc.hidden_dim;
  j["enc_blocks"] = enc.num_residual_blocks;
  j["enc_kernel"] = enc.kernel_size;
  j["enc_mask_prob"] = enc.mask_probability;
  j["enc_batch"] = enc.batch_size;
  j["enc_epochs"] = enc.epochs;
  j["enc_hierarchical"] = enc.hierarchical_levels;
  j["enc_lr"] = enc.learning_rate;
  j["lat_blocks"] = lat.num_conv_blocks;
  j["lat_filters"] = lat.filters;
  j["lat_kernels"] = lat.kernels;
  j["lat_pool"] = lat.pool_size;
  j["lat_dim"] = lat.latent_dim;
  j["lat_epochs"] = lat.epochs;
  j["lat_batch"] = lat.batch_size;
  j["lat_lr"] = lat.learning_rate;
  j["clf_hidden"] = lat.clf_hidden;
  return j.dump(2) + "\n";
}

void SearchSpace::validate() const {
  const std::vector<std::pair<const char*, std::size_t>> sizes = {
      {"repr_dim", repr_dim.size()},     {"hidden_dim", hidden_dim.size()},
      {"enc_blocks", enc_blocks.size()}, {"enc_kernel", enc_kernel.size()},
      {"lat_blocks", lat_blocks.size()}, {"lat_filters", lat_filters.size()},
      {"lat_kernel", lat_kernel.size()}, {"lat_pool", lat_pool.size()},
      {"latent_dim", latent_dim.size()}, {"clf_hidden", clf_hidden.size()},
      {"tau", tau.size()}};
  for (const auto& [name, n] : sizes) {
    if (n == 0) throw std::runtime_error("search space: empty choice list for '" + std::string(name) + "'");
  }
}

SearchSpace SearchSpace::from_json_file(const std::string& path) {
  const json j = json::parse(read_file(path));
  SearchSpace s;
  std::set<std::string> known;
  read_key(j, known, "repr_dim", s.repr_dim);
  read_key(j, known, "hidden_dim", s.hidden_dim);
  read_key(j, known, "enc_blocks", s.enc_blocks);
  read_key(j, known, "enc_kernel", s.enc_kernel);
  read_key(j, known, "lat_blocks", s.lat_blocks);
  read_key(j, known, "lat_filters", s.lat_filters);
  read_key(j, known, "lat_kernel", s.lat_kernel);
  read_key(j, known, "lat_pool", s.lat_pool);
  read_key(j, known, "latent_dim", s.latent_dim);
  read_key(j, known, "clf_hidden", s.clf_hidden);
  read_key(j, known, "tau", s.tau);
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::runtime_error("search space '" + path + "': unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

RunConfig SearchSpace::sample(const RunConfig& base, core::Rng& rng) const {
  validate();
  RunConfig c = base;
  c.enc.repr_dim = rng.choice(repr_dim);
  c.enc.hidden_dim = rng.choice(hidden_dim);
  c.enc.num_residual_blocks = rng.choice(enc_blocks);
  c.enc.kernel_size = rng.choice(enc_kernel);
  c.lat.num_conv_blocks = rng.choice(lat_blocks);
  const std::size_t f = rng.choice(lat_filters);
  const std::size_t k = rng.choice(lat_kernel);
  c.lat.filters.assign(c.lat.num_conv_blocks, f);
  c.lat.kernels.assign(c.lat.num_conv_blocks, k);
  c.lat.pool_size = rng.choice(lat_pool);
  c.lat.latent_dim = rng.choice(latent_dim);
  c.lat.clf_hidden = {rng.choice(clf_hidden)};
  c.tau = rng.choice(tau);
  return c;
}

data::Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw std::runtime_error("no dataset path configured (set \"data\")");
  if (fs::is_directory(cfg.data)) {
    std::vector<std::string> train_files, test_files;
    for (const auto& entry : fs::directory_iterator(cfg.data)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.find("_TRAIN") != std::string::npos) train_files.push_back(entry.path().string());
      if (name.find("_TEST") != std::string::npos) test_files.push_back(entry.path().string());
    }
    std::sort(train_files.begin(), train_files.end());
    std::sort(test_files.begin(), test_files.end());
    if (train_files.empty()) {
      throw std::runtime_error("directory '" + cfg.data + "' holds no *_TRAIN* file");
    }
    data::Dataset ds = data::load_ucr_tsv(train_files[0]);
    if (!test_files.empty()) ds = data::merge(ds, data::load_ucr_tsv(test_files[0]));
    return ds;
  }
  data::Dataset ds = data::load_ucr_tsv(cfg.data);
  if (!cfg.data_test.empty()) ds = data::merge(ds, data::load_ucr_tsv(cfg.data_test));
  return ds;
}

data::Dataset make_waveforms(std::size_t n, std::size_t t_len, core::Rng& rng) {
  data::Dataset ds;
  ds.name = "waveforms";
  ds.series_length = t_len;
  for (int c = 0; c < 4; ++c) ds.label_map.emplace(static_cast<double>(c), c);
  ds.num_classes = 4;
  const double two_pi = 2.0 * 3.14159265358979323846;
  // each waveform family lives in its own frequency band so the classes are
  // separable under random phase
  const double freq_lo[4] = {2.0, 3.5, 5.0, 0.0};
  const double freq_hi[4] = {3.0, 4.5, 6.5, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 4);
    const double freq = rng.uniform_real(freq_lo[cls], freq_hi[cls]);
    const double phase = rng.uniform01();
    data::LabeledSeries s;
    s.label = cls;
    s.values.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      const double x = freq * static_cast<double>(t) / static_cast<double>(t_len) + phase;
      double v = 0.0;
      switch (cls) {
        case 0: v = std::sin(two_pi * x); break;
        case 1: v = std::sin(two_pi * x) >= 0.0 ? 1.0 : -1.0; break;
        case 2: v = 2.0 * (x - std::floor(x)) - 1.0; break;
        case 3: v = rng.normal(0.0, 1.0); break;
      }
      if (cls != 3) v += rng.normal(0.0, 0.1);
      s.values[t] = v;
    }
    ds.series.push_back(std::move(s));
  }
  return ds;
}

std::string dataset_to_tsv(const data::Dataset& ds) {
  std::string out;
  char buf[64];
  for (const auto& s : ds.series) {
    out += std::to_string(s.label);
    for (double v : s.values) {
      std::snprintf(buf, sizeof(buf), "\t%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

namespace {

data::Dataset prepare(const RunConfig& cfg) {
  data::Dataset ds = load_dataset(cfg);
  if (cfg.normalize) ds = data::znormalize(ds);
  return ds;
}

std::vector<std::vector<double>> series_of(const data::Dataset& ds,
                                           const std::vector<std::size_t>& idx) {
  std::vector<std::vector<double>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(ds.series[i].values);
  return out;
}

std::vector<double> attrs_of(const data::Dataset& ds, std::size_t i, const RunConfig& cfg) {
  features::ApEnParams p{cfg.apen_m, cfg.apen_r_factor};
  const auto a = features::compute_attributes(ds.series[i].values, p);
  return std::vector<double>(a.values.begin(), a.values.end());
}

std::string fixed_split_path(const RunConfig& cfg) { return path_join(cfg.out, "split.json"); }

data::GZSLSplit load_split(const RunConfig& cfg) {
  const std::string path = fixed_split_path(cfg);
  if (!fs::exists(path)) {
    throw std::runtime_error("split manifest '" + path + "' is missing; run the split command first");
  }
  return data::split_from_json(read_file(path));
}

}  // namespace

StageModels train_stage(const data::Dataset& ds, const RunConfig& cfg,
                        const std::vector<std::size_t>& train_idx, std::vector<int> seen_classes,
                        std::vector<int> unseen_classes, core::Rng enc_rng, core::Rng clf_rng) {
  const model::Mode mode = model::parse_mode(cfg.mode);
  StageModels stage{
      model::GZSLModel{}, std::nullopt, encoder::TrainCurve{}, model::TrainCurve{}};

  if (mode != model::Mode::NoEmbedder) {
    stage.embedder = encoder::train_embedder(series_of(ds, train_idx), cfg.enc, enc_rng,
                                             &stage.enc_curve);
  }

  std::vector<int> class_order = seen_classes;
  class_order.insert(class_order.end(), unseen_classes.begin(), unseen_classes.end());

  std::size_t input_dim = 0;
  switch (mode) {
    case model::Mode::Full: input_dim = cfg.enc.repr_dim + features::kAttributeCount; break;
    case model::Mode::NoEmbedder: input_dim = ds.series_length + features::kAttributeCount; break;
    case model::Mode::NoAttributes: input_dim = cfg.enc.repr_dim; break;
  }

  stage.classifier = model::GZSLModel::init(cfg.lat, mode, cfg.tau, std::move(class_order),
                                            seen_classes.size(), input_dim, clf_rng);

  if (mode != model::Mode::NoAttributes) {
    std::vector<std::vector<double>> train_attrs;
    train_attrs.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_attrs.push_back(attrs_of(ds, i, cfg));
    stage.classifier.attr_std.fit(train_attrs);
  }

  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  inputs.reserve(train_idx.size());
  for (std::size_t i : train_idx) {
    const std::vector<double> emb = mode != model::Mode::NoEmbedder
                                        ? encoder::embed_series(*stage.embedder, ds.series[i].values)
                                        : std::vector<double>{};
    const std::vector<double> attrs =
        mode != model::Mode::NoAttributes ? attrs_of(ds, i, cfg) : std::vector<double>{};
    inputs.push_back(model::build_input(mode, stage.classifier, emb, ds.series[i].values, attrs));
    labels.push_back(ds.series[i].label);
  }
  model::train_gzsl(stage.classifier, inputs, labels, clf_rng, &stage.clf_curve);
  return stage;
}

std::vector<std::vector<double>> probabilities(const data::Dataset& ds, const StageModels& stage,
                                               const std::vector<std::size_t>& idx,
                                               const RunConfig& cfg) {
  const model::Mode mode = stage.classifier.mode;
  std::vector<std::vector<double>> probs;
  probs.reserve(idx.size());
  for (std::size_t i : idx) {
    const std::vector<double> emb = mode != model::Mode::NoEmbedder
                                        ? encoder::embed_series(*stage.embedder, ds.series[i].values)
                                        : std::vector<double>{};
    const std::vector<double> attrs =
        mode != model::Mode::NoAttributes ? attrs_of(ds, i, cfg) : std::vector<double>{};
    const auto q = model::build_input(mode, stage.classifier, emb, ds.series[i].values, attrs);
    probs.push_back(stage.classifier.class_probs(q));
  }
  return probs;
}

ValidationOutcome select_gamma(const data::Dataset& ds, const StageModels& stage,
                               const std::vector<std::size_t>& eval_idx, const RunConfig& cfg) {
  std::vector<int> labels;
  labels.reserve(eval_idx.size());
  for (std::size_t i : eval_idx) labels.push_back(ds.series[i].label);
  const auto probs = probabilities(ds, stage, eval_idx, cfg);

  ValidationOutcome out;
  out.curve = metrics::ausuc_sweep(stage.classifier, probs, labels);
  out.val_ausuc = out.curve.ausuc;
  out.best_h = -1.0;
  for (const auto& p : out.curve.points) {
    const double h = metrics::harmonic_mean(p.acc_s, p.acc_u);
    if (h > out.best_h) {
      out.best_h = h;
      out.gamma_star = p.gamma;
    }
  }
  return out;
}

std::string cmd_split(const RunConfig& cfg) {
  const data::Dataset ds = prepare(cfg);
  const data::GZSLSplit split = data::make_gzsl_split(ds, cfg.seed);
  fs::create_directories(cfg.out);
  const std::string path = fixed_split_path(cfg);
  write_file_atomic(path, data::split_to_json(split));
  return path;
}

void cmd_train(const RunConfig& cfg) {
  const data::Dataset ds = prepare(cfg);
  const data::GZSLSplit split = load_split(cfg);
  const core::Rng root(cfg.seed);
  fs::create_directories(cfg.out);

  // stage 1: inner split, gamma selection on the validation sets
  StageModels stage1 = train_stage(ds, cfg, split.inner_train_idx, split.inner_train_classes,
                                   split.val_classes, root.derive(kStreamEncoderStage1),
                                   root.derive(kStreamClassifierStage1));
  std::vector<std::size_t> val_idx = split.seen_val_idx;
  val_idx.insert(val_idx.end(), split.unseen_val_idx.begin(), split.unseen_val_idx.end());
  const ValidationOutcome val = select_gamma(ds, stage1, val_idx, cfg);
  const double gamma_star = cfg.gamma_sweep ? val.gamma_star : cfg.gamma;

  ordered_json vj;
  vj["val_ausuc"] = val.val_ausuc;
  vj["val_best_h"] = val.best_h;
  vj["gamma_star"] = gamma_star;
  vj["gamma_selected_on_validation"] = cfg.gamma_sweep;
  write_file_atomic(path_join(cfg.out, "validation.json"), vj.dump(2) + "\n");

  // stage 2: retrain on train + seen validation + unseen validation samples
  StageModels stage2 = train_stage(ds, cfg, split.train_idx, split.seen_classes,
                                   split.unseen_classes, root.derive(kStreamEncoderStage2),
                                   root.derive(kStreamClassifierStage2));
  stage2.classifier.gamma = gamma_star;

  core::save_tensors(path_join(cfg.out, "model.bin"), stage2.classifier.named_params());
  if (stage2.embedder) {
    core::save_tensors(path_join(cfg.out, "encoder.bin"), stage2.embedder->named_params());
    write_file_atomic(path_join(cfg.out, "enc_curve.csv"), stage2.enc_curve.to_csv());
  }
  write_file_atomic(path_join(cfg.out, "clf_curve.csv"), stage2.clf_curve.to_csv());

  json sidecar = json::parse(stage2.classifier.sidecar_json());
  sidecar["normalize"] = cfg.normalize;
  sidecar["apen_m"] = cfg.apen_m;
  sidecar["apen_r_factor"] = cfg.apen_r_factor;
  sidecar["enc_repr_dim"] = cfg.enc.repr_dim;
  sidecar["enc_hidden_dim"] = cfg.enc.hidden_dim;
  sidecar["enc_blocks"] = cfg.enc.num_residual_blocks;
  sidecar["enc_kernel"] = cfg.enc.kernel_size;
  sidecar["enc_mask_prob"] = cfg.enc.mask_probability;
  sidecar["enc_batch"] = cfg.enc.batch_size;
  sidecar["enc_epochs"] = cfg.enc.epochs;
  sidecar["enc_hierarchical"] = cfg.enc.hierarchical_levels;
  sidecar["enc_lr"] = cfg.enc.learning_rate;
  write_file_atomic(path_join(cfg.out, "model.json"), sidecar.dump(2) + "\n");

  write_file_atomic(path_join(cfg.out, "resolved_config.json"), cfg.to_json());

  if (cfg.dump_attributes && model::parse_mode(cfg.mode) != model::Mode::NoAttributes) {
    std::vector<features::AttributeVector> rows;
    features::ApEnParams p{cfg.apen_m, cfg.apen_r_factor};
    rows.reserve(ds.size());
    for (const auto& s : ds.series) rows.push_back(features::compute_attributes(s.values, p));
    write_file_atomic(path_join(cfg.out, "attributes.csv"), features::attributes_csv(rows));
  }
}

metrics::EvalReport cmd_eval(const RunConfig& cfg) {
  const data::GZSLSplit split = load_split(cfg);

  const std::string sidecar_path = path_join(cfg.out, "model.json");
  if (!fs::exists(sidecar_path)) {
    throw std::runtime_error("model sidecar '" + sidecar_path + "' is missing; run train first");
  }
  const std::string sidecar_text = read_file(sidecar_path);
  core::Rng init_rng(0);
  model::GZSLModel clf = model::GZSLModel::from_sidecar_json(sidecar_text, init_rng);
  core::load_into(path_join(cfg.out, "model.bin"), clf.named_params());

  // the saved class layout must match the split manifest
  std::vector<int> want_seen(clf.class_order.begin(),
                             clf.class_order.begin() + static_cast<std::ptrdiff_t>(clf.num_seen));
  std::vector<int> want_unseen(clf.class_order.begin() + static_cast<std::ptrdiff_t>(clf.num_seen),
                               clf.class_order.end());
  std::sort(want_seen.begin(), want_seen.end());
  std::sort(want_unseen.begin(), want_unseen.end());
  if (want_seen != split.seen_classes || want_unseen != split.unseen_classes) {
    throw std::runtime_error("model/split mismatch: the saved model's class layout differs from the manifest");
  }

  StageModels stage{std::move(clf), std::nullopt, {}, {}};
  // preprocessing must follow the flags the model was trained with
  RunConfig eval_cfg = cfg;
  {
    const json sj = json::parse(sidecar_text);
    eval_cfg.normalize = sj.at("normalize").get<bool>();
    eval_cfg.apen_m = sj.at("apen_m").get<std::size_t>();
    eval_cfg.apen_r_factor = sj.at("apen_r_factor").get<double>();
    if (stage.classifier.mode != model::Mode::NoEmbedder) {
      encoder::EncoderConfig ec;
      ec.repr_dim = sj.at("enc_repr_dim").get<std::size_t>();
      ec.hidden_dim = sj.at("enc_hidden_dim").get<std::size_t>();
      ec.num_residual_blocks = sj.at("enc_blocks").get<std::size_t>();
      ec.kernel_size = sj.at("enc_kernel").get<std::size_t>();
      ec.mask_probability = sj.at("enc_mask_prob").get<double>();
      ec.batch_size = sj.at("enc_batch").get<std::size_t>();
      ec.epochs = sj.at("enc_epochs").get<std::size_t>();
      ec.hierarchical_levels = sj.at("enc_hierarchical").get<bool>();
      ec.learning_rate = sj.at("enc_lr").get<double>();
      core::Rng enc_init(0);
      stage.embedder = encoder::EmbedderModel::init(ec, enc_init);
      core::load_into(path_join(cfg.out, "encoder.bin"), stage.embedder->named_params());
    }
  }
  const data::Dataset ds = prepare(eval_cfg);

  std::vector<std::size_t> test_idx = split.seen_test_idx;
  test_idx.insert(test_idx.end(), split.unseen_test_idx.begin(), split.unseen_test_idx.end());
  std::vector<int> labels;
  labels.reserve(test_idx.size());
  for (std::size_t i : test_idx) labels.push_back(ds.series[i].label);

  const auto probs = probabilities(ds, stage, test_idx, eval_cfg);

  std::vector<int> preds(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    preds[i] = stage.classifier.predict(probs[i], stage.classifier.gamma);
  }
  const std::set<int> seen_set(split.seen_classes.begin(), split.seen_classes.end());
  const metrics::AccuracyPair acc = metrics::accuracy_split(preds, labels, seen_set);

  const metrics::SUCurve curve = metrics::ausuc_sweep(stage.classifier, probs, labels);

  metrics::EvalReport report;
  report.acc_s = acc.micro_s;
  report.acc_u = acc.micro_u;
  report.h = metrics::harmonic_mean(acc.micro_s, acc.micro_u);
  report.macro_acc_s = acc.macro_s;
  report.macro_acc_u = acc.macro_u;
  report.seen_total = acc.seen_total;
  report.seen_correct = acc.seen_correct;
  report.unseen_total = acc.unseen_total;
  report.unseen_correct = acc.unseen_correct;
  report.gamma = stage.classifier.gamma;
  report.tau = stage.classifier.tau;
  report.ausuc = curve.ausuc;

  write_file_atomic(path_join(cfg.out, "eval_report.json"), metrics::report_json(report));
  write_file_atomic(path_join(cfg.out, "sweep.csv"), metrics::sweep_csv(curve));
  write_file_atomic(path_join(cfg.out, "sweep.svg"), metrics::sweep_svg(curve));
  return report;
}

RunConfig cmd_search(const RunConfig& cfg, const SearchSpace& space) {
  space.validate();
  if (cfg.trials < 1) throw std::runtime_error("search: trial budget must be >= 1");
  const data::Dataset ds = prepare(cfg);
  const data::GZSLSplit split = load_split(cfg);
  fs::create_directories(cfg.out);

  const core::Rng root(cfg.seed);
  ordered_json trials_log = ordered_json::array();
  RunConfig best = cfg;
  double best_objective = -1.0;

  // one sampling stream per trial; the training streams depend only on the
  // run seed so identical sampled configs produce identical objectives
  core::Rng sample_rng = root.derive(kStreamSearch);
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const RunConfig candidate = space.sample(cfg, sample_rng);

    StageModels stage = train_stage(ds, candidate, split.inner_train_idx, split.inner_train_classes,
                                    split.val_classes, root.derive(kStreamEncoderStage1),
                                    root.derive(kStreamClassifierStage1));
    std::vector<std::size_t> val_idx = split.seen_val_idx;
    val_idx.insert(val_idx.end(), split.unseen_val_idx.begin(), split.unseen_val_idx.end());
    const ValidationOutcome val = select_gamma(ds, stage, val_idx, candidate);

    ordered_json t;
    t["trial"] = trial;
    t["val_ausuc"] = val.val_ausuc;
    t["val_best_h"] = val.best_h;
    t["gamma_star"] = val.gamma_star;
    t["config"] = json::parse(candidate.to_json());
    trials_log.push_back(t);

    if (val.val_ausuc > best_objective) {
      best_objective = val.val_ausuc;
      best = candidate;
    }
  }

  ordered_json summary;
  summary["objective"] = "val_ausuc";
  summary["best_objective"] = best_objective;
  summary["trials"] = trials_log;
  write_file_atomic(path_join(cfg.out, "trials.json"), summary.dump(2) + "\n");
  write_file_atomic(path_join(cfg.out, "best_config.json"), best.to_json());
  return best;
}

metrics::EvalReport cmd_pipeline(const RunConfig& cfg, const SearchSpace& space) {
  cmd_split(cfg);
  RunConfig chosen = cfg;
  if (cfg.trials >= 1) chosen = cmd_search(cfg, space);
  cmd_train(chosen);
  return cmd_eval(chosen);
}

}  // namespace tsgzsl::pipeline
