#include "tke/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <span>
#include <sstream>

#include <Eigen/Core>

#include "tke/models/mlp.hpp"
#include "tke/parallel.hpp"

namespace tke {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCode::parameter, "config: " + msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) bad_config(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) bad_config("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    bad_config(what + ": " + e.what());
  }
}

std::size_t get_size(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad_config(what + " must be a non-negative integer");
  return j.get<std::size_t>();
}

std::uint64_t get_seed(const json& j, const std::string& what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad_config(what + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SegmentationSource segmentation_from(const json& j, const fs::path& base) {
  SegmentationSource s;
  if (j.is_string()) {
    s.file = j.get<std::string>();
    s.bounds = load_segmentation(resolve(base, s.file));
  } else if (j.is_object()) {
    // The canonical form keeps the file name next to the bounds it held.
    json bounds = j;
    if (bounds.contains("file")) {
      s.file = get_as<std::string>(bounds["file"], "segmentation.file");
      bounds.erase("file");
    }
    s.bounds = segmentation_from_json(bounds);
  } else {
    bad_config("segmentation must be a file name or {\"burn_start_s\", \"burn_end_s\"}");
  }
  return s;
}

json segmentation_json(const std::optional<SegmentationSource>& s) {
  if (!s) return nullptr;
  json j{{"burn_start_s", s->bounds.burn_start_s}, {"burn_end_s", s->bounds.burn_end_s}};
  if (!s->file.empty()) j["file"] = s->file;
  return j;
}

std::vector<std::string> file_list(const json& j, const std::string& what) {
  std::vector<std::string> files;
  if (j.is_string()) {
    files.push_back(j.get<std::string>());
  } else if (j.is_array()) {
    for (const auto& f : j) files.push_back(get_as<std::string>(f, what));
  } else {
    bad_config(what + " must be a file name or a list of file names");
  }
  if (files.empty()) bad_config(what + " lists no files");
  return files;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

// Runs f, converting library errors into stage-tagged ones.
template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, ErrorCode::io, std::string("io error: ") + e.what());
  } catch (const json::exception& e) {
    throw StageError(stage, ErrorCode::parameter, std::string("parameter error: ") + e.what());
  }
}

// Output directory bookkeeping: every file goes through here so a failed run
// can move what it wrote into quarantine/.
class OutputSink {
 public:
  OutputSink(fs::path dir, std::ostream* mirror) : dir_(std::move(dir)), mirror_(mirror) {
    fs::create_directories(dir_);
    fs::remove_all(dir_ / "quarantine");
    log_path_ = dir_ / "run.log.jsonl";
    log_.open(log_path_, std::ios::binary | std::ios::trunc);
    if (!log_) throw Error(ErrorCode::io, "cannot write " + log_path_.string());
  }

  fs::path path(const std::string& name) {
    fs::path p = dir_ / name;
    if (std::find(written_.begin(), written_.end(), p) == written_.end()) written_.push_back(p);
    return p;
  }

  void text(const std::string& name, const std::string& content) {
    const fs::path p = path(name);
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
  }

  void log(const std::string& stage, const std::string& event, json extra = json::object()) {
    json line{{"stage", stage}, {"event", event}};
    for (auto& [k, v] : extra.items()) line[k] = v;
    const std::string s = line.dump();
    log_ << s << '\n';
    log_.flush();
    if (mirror_) *mirror_ << s << '\n';
  }

  const std::vector<fs::path>& written() const { return written_; }

  void quarantine(const StageError& e) {
    log("error", "failed", {{"failed_stage", e.stage()}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}});
    log_.close();
    const fs::path q = dir_ / "quarantine";
    std::error_code ec;
    fs::create_directories(q, ec);
    std::vector<fs::path> files = written_;
    files.push_back(log_path_);
    for (const auto& f : files) {
      if (fs::exists(f, ec)) fs::rename(f, q / f.filename(), ec);
    }
    std::ofstream err(q / "error.json", std::ios::binary);
    err << json{{"stage", e.stage()}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::ostream* mirror_;
  fs::path log_path_;
  std::ofstream log_;
  std::vector<fs::path> written_;
};

struct Scaled {
  Eigen::MatrixXd train_X, test_X, val_X;
  Eigen::VectorXd train_y, test_y, val_y;
  std::vector<std::size_t> train, test, val;
};

Scaled scale_splits(const PreparedDataset& d) {
  Scaled s;
  s.train = d.table.rows_in(Split::train);
  s.test = d.table.rows_in(Split::test);
  s.val = d.table.rows_in(Split::val);
  const Eigen::MatrixXd Z = transform(d.table.X, d.scaler);
  s.train_X = select_rows(Z, s.train);
  s.test_X = select_rows(Z, s.test);
  s.val_X = select_rows(Z, s.val);
  s.train_y = select_rows(d.table.y, s.train);
  s.test_y = select_rows(d.table.y, s.test);
  s.val_y = select_rows(d.table.y, s.val);
  return s;
}

SplitEvaluation evaluate_split(const Regressor& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const std::vector<std::size_t>& rows, const FeatureTable& table) {
  SplitEvaluation e;
  e.metrics.r2 = e.metrics.mse = e.metrics.mae = std::nan("");
  if (rows.empty()) return e;
  const Eigen::VectorXd pred = model.predict(X);
  e.actual.assign(y.data(), y.data() + y.size());
  e.predicted.assign(pred.data(), pred.data() + pred.size());
  e.residual.resize(rows.size());
  e.time_s.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    e.residual[i] = e.actual[i] - e.predicted[i];
    e.time_s[i] = table.time_s[rows[i]];
  }
  e.metrics.n = rows.size();
  e.metrics.mse = mse(e.actual, e.predicted);
  e.metrics.mae = mae(e.actual, e.predicted);
  e.metrics.r2 = rows.size() >= 2 ? r_squared(e.actual, e.predicted) : std::nan("");
  try {
    e.kde = kde(e.residual);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::degenerate_variance && err.code() != ErrorCode::insufficient_data) throw;
  }
  return e;
}

using SpecFor = std::function<RegressorSpec(std::size_t dataset_index, std::size_t model_index)>;

std::vector<PairEvaluation> train_and_evaluate(const PipelineConfig& config, const std::vector<PreparedDataset>& data,
                                               const SpecFor& spec_for, const RunOptions& options) {
  const std::size_t n_models = config.models.size();
  const std::size_t n_pairs = data.size() * n_models;
  std::vector<Scaled> scaled;
  for (const auto& d : data) scaled.push_back(scale_splits(d));

  std::vector<PairEvaluation> out(n_pairs);
  const std::size_t threads = std::max<std::size_t>(options.threads, 1);
  const std::size_t inner = std::max<std::size_t>(1, threads / std::max<std::size_t>(n_pairs, 1));
  parallel_for(n_pairs, threads, [&](std::size_t task) {
    const std::size_t di = task / n_models;
    const std::size_t mi = task % n_models;
    const auto& d = data[di];
    const auto& s = scaled[di];
    PairEvaluation pe;
    pe.spec = spec_for(di, mi);
    pe.model = pe.spec.kind;
    pe.dataset = d.name;
    FitContext ctx;
    ctx.threads = inner;
    if (!s.val.empty()) {
      ctx.X_val = &s.val_X;
      ctx.y_val = &s.val_y;
    }
    if (options.on_mlp_epoch) {
      ctx.on_mlp_epoch = [&](std::size_t epoch, const MlpModel& m) { options.on_mlp_epoch(d.name, epoch, m); };
    }
    const auto model = staged("train", [&] { return fit(pe.spec, s.train_X, s.train_y, ctx); });
    staged("evaluate", [&] {
      pe.splits[Split::train] = evaluate_split(*model, s.train_X, s.train_y, s.train, d.table);
      pe.splits[Split::test] = evaluate_split(*model, s.test_X, s.test_y, s.test, d.table);
      pe.splits[Split::val] = evaluate_split(*model, s.val_X, s.val_y, s.val, d.table);
    });
    out[task] = std::move(pe);
  });
  return out;
}

void write_corr_csv(OutputSink& sink, const std::string& name, const std::vector<PreparedDataset>& data,
                    bool use_pearson) {
  std::ostringstream out;
  const auto& names = data.front().correlations.names;
  out << "dataset,variable";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& d : data) {
    const Eigen::MatrixXd& m = use_pearson ? d.correlations.pearson : d.correlations.spearman;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << d.name << ',' << d.correlations.names[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << fmt17(m(i, j));
      out << '\n';
    }
  }
  sink.text(name, out.str());
}

void write_pred_csv(OutputSink& sink, const PairEvaluation& pe) {
  std::ostringstream out;
  out << "split,time_s,actual,predicted,residual\n";
  for (Split s : {Split::train, Split::test, Split::val}) {
    const auto it = pe.splits.find(s);
    if (it == pe.splits.end()) continue;
    const auto& e = it->second;
    for (std::size_t i = 0; i < e.actual.size(); ++i) {
      out << to_string(s) << ',' << fmt17(e.time_s[i]) << ',' << fmt17(e.actual[i]) << ',' << fmt17(e.predicted[i])
          << ',' << fmt17(e.residual[i]) << '\n';
    }
  }
  sink.text("pred_" + std::string(to_string(pe.model)) + "_" + pe.dataset + ".csv", out.str());
}

std::vector<PreparedDataset> prepare_all(const PipelineConfig& config, OutputSink& sink) {
  std::vector<PreparedDataset> data;
  for (const auto& input : config.datasets) {
    data.push_back(prepare_dataset(config, input));
    const auto& d = data.back();
    sink.log("split", "done",
             {{"dataset", d.name},
              {"rows", d.table.rows()},
              {"train", d.table.rows_in(Split::train).size()},
              {"test", d.table.rows_in(Split::test).size()},
              {"val", d.table.rows_in(Split::val).size()}});
  }
  return data;
}

void write_dataset_outputs(OutputSink& sink, const std::vector<PreparedDataset>& data) {
  for (const auto& d : data) {
    write_augmented_csv(sink.path("tke_" + d.name + ".csv"), d.data, d.turbulence);
    write_features_csv(sink.path("features_" + d.name + ".csv"), d.table);
  }
  write_corr_csv(sink, "corr_pearson.csv", data, true);
  write_corr_csv(sink, "corr_spearman.csv", data, false);
}

RunResult finish_run(const PipelineConfig& config, OutputSink& sink, const std::vector<PreparedDataset>& data,
                     std::vector<PairEvaluation> pairs, const std::string& command, const json& extra_manifest) {
  RunResult result;
  result.config_hash = config_hash(config);
  for (const auto& d : data) result.report.datasets.push_back(d.name);
  for (const auto& m : config.models) result.report.models.push_back(m.kind);
  result.report.pairs = std::move(pairs);

  staged("write", [&] {
    write_dataset_outputs(sink, data);
    std::ostringstream metrics;
    write_metrics_csv(metrics, result.report);
    sink.text("metrics.csv", metrics.str());
    for (const auto& pe : result.report.pairs) {
      write_pred_csv(sink, pe);
      const auto& test = pe.splits.at(Split::test);
      const std::string kde_name = "kde_" + std::string(to_string(pe.model)) + "_" + pe.dataset + ".csv";
      if (test.kde) {
        write_kde_csv(sink.path(kde_name), *test.kde);
      } else {
        sink.log("write", "kde_skipped", {{"file", kde_name}});
      }
    }
  });
  staged("report", [&] { sink.text("r2_table.txt", report_table(result.report)); });

  staged("write", [&] {
    json inputs = json::object();
    for (const auto& in : config.datasets) {
      json files = json::array();
      for (std::size_t i = 0; i < in.files.size(); ++i) {
        files.push_back({{"file", in.files[i]}, {"fnv1a", hex64(file_hash(in.resolved[i]))}});
      }
      inputs[in.name] = files;
    }
    std::vector<std::string> outputs;
    for (const auto& p : sink.written()) outputs.push_back(p.filename().string());
    outputs.push_back("manifest.json");
    std::sort(outputs.begin(), outputs.end());
    json manifest{{"tool", "tke-forge"},
                  {"version", kVersion},
                  {"command", command},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"config_hash", result.config_hash},
                  {"config", to_json(config)},
                  {"inputs", inputs},
                  {"outputs", outputs}};
    for (auto& [k, v] : extra_manifest.items()) manifest[k] = v;
    sink.text("manifest.json", manifest.dump(2) + "\n");
  });
  sink.log("report", "done", {{"pairs", result.report.pairs.size()}, {"config_hash", result.config_hash}});
  result.outputs = sink.written();
  return result;
}

RegressorSpec with_seed(RegressorSpec spec, std::uint64_t seed) {
  spec.seed = seed;
  return spec;
}

}  // namespace

// ---- config --------------------------------------------------------------

void PipelineConfig::validate() const {
  if (datasets.empty()) bad_config("no datasets");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (d.name.empty()) bad_config("empty dataset name");
    if (d.name.find_first_of("/\\,\"") != std::string::npos) bad_config("dataset name '" + d.name + "' has path or CSV characters");
    if (!names.insert(d.name).second) bad_config("duplicate dataset " + d.name);
    if (d.files.empty()) bad_config("dataset " + d.name + " lists no files");
    for (const auto& p : d.resolved) {
      if (!fs::is_regular_file(p)) throw Error(ErrorCode::io, "input file not found: " + p.string());
    }
    if (d.segmentation) d.segmentation->bounds.validate();
  }
  if (segmentation) segmentation->bounds.validate();
  if (!(clamp_lo_C < clamp_hi_C)) bad_config("clamp bounds must satisfy lo < hi");
  if (turbulence.ma_window < 1) bad_config("ma_window must be >= 1");
  if (turbulence.rolling_window < 2) bad_config("rolling_window must be >= 2");
  ratios.validate();
  if (models.empty()) bad_config("no models");
  std::set<ModelKind> kinds;
  for (const auto& m : models) {
    m.validate();
    if (!kinds.insert(m.kind).second) bad_config("model " + std::string(to_string(m.kind)) + " listed twice");
  }
  if (cv.folds < 1) bad_config("cv.folds must be >= 1");
  if (!(cv.train_frac > 0 && cv.train_frac < 1)) bad_config("cv.train_frac must lie in (0, 1)");
  for (const auto& [kind, grid] : sweep) {
    if (!kinds.count(kind)) bad_config("sweep lists model " + std::string(to_string(kind)) + " which is not configured");
    for (const auto& [key, values] : grid) {
      if (values.empty()) throw Error(ErrorCode::parameter, "sweep " + std::string(to_string(kind)) + "." + key + " is empty");
    }
  }
  if (output_dir.empty()) bad_config("output_dir is empty");
}

fs::path PipelineConfig::output_path() const { return resolve(base_dir, output_dir); }

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"datasets", "segmentation", "clamp", "ma_window", "fluctuation", "split", "seed", "models", "cv",
                 "sweep", "output_dir", "paper_activation"},
             "config");
  PipelineConfig c;
  c.base_dir = base_dir;
  if (j.contains("seed")) c.seed = get_seed(j["seed"], "seed");

  if (!j.contains("datasets") || !j["datasets"].is_object()) bad_config("datasets must be an object of name -> files");
  for (const auto& [name, v] : j["datasets"].items()) {
    DatasetInput in;
    in.name = name;
    if (v.is_object()) {
      check_keys(v, {"files", "segmentation"}, "datasets." + name);
      if (!v.contains("files")) bad_config("datasets." + name + " needs files");
      in.files = file_list(v["files"], "datasets." + name + ".files");
      if (v.contains("segmentation") && !v["segmentation"].is_null()) {
        in.segmentation = segmentation_from(v["segmentation"], base_dir);
      }
    } else {
      in.files = file_list(v, "datasets." + name);
    }
    for (const auto& f : in.files) in.resolved.push_back(resolve(base_dir, f));
    c.datasets.push_back(std::move(in));
  }
  if (j.contains("segmentation") && !j["segmentation"].is_null()) {
    c.segmentation = segmentation_from(j["segmentation"], base_dir);
  }
  if (j.contains("clamp")) {
    const auto& cl = j["clamp"];
    if (!cl.is_array() || cl.size() != 2) bad_config("clamp must be [lo, hi]");
    c.clamp_lo_C = get_as<double>(cl[0], "clamp");
    c.clamp_hi_C = get_as<double>(cl[1], "clamp");
  }
  if (j.contains("ma_window")) c.turbulence.ma_window = get_size(j["ma_window"], "ma_window");
  if (j.contains("fluctuation")) {
    const auto& f = j["fluctuation"];
    check_keys(f, {"mode", "rolling_window"}, "fluctuation");
    if (f.contains("mode")) {
      const auto mode = get_as<std::string>(f["mode"], "fluctuation.mode");
      if (mode == "segment_mean") {
        c.turbulence.mode = FluctuationMode::segment_mean;
      } else if (mode == "rolling_mean") {
        c.turbulence.mode = FluctuationMode::rolling_mean;
      } else {
        bad_config("fluctuation.mode must be \"segment_mean\" or \"rolling_mean\"");
      }
    }
    if (f.contains("rolling_window")) c.turbulence.rolling_window = get_size(f["rolling_window"], "fluctuation.rolling_window");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, {"ratios", "mode", "seed"}, "split");
    if (s.contains("ratios")) {
      const auto r = get_as<std::vector<double>>(s["ratios"], "split.ratios");
      if (r.size() != 3) bad_config("split.ratios must be [train, test, val]");
      c.ratios = {r[0], r[1], r[2]};
    }
    if (s.contains("mode")) c.split_mode = split_mode_from_string(get_as<std::string>(s["mode"], "split.mode"));
    if (s.contains("seed")) c.split_seed = get_seed(s["seed"], "split.seed");
  }
  if (j.contains("models")) {
    const auto& m = j["models"];
    auto add = [&](const std::string& name, const json& params) {
      c.models.push_back(spec_from_json(model_kind_from_string(name), params, c.seed));
    };
    if (m.is_array()) {
      for (const auto& item : m) {
        if (item.is_string()) {
          add(item.get<std::string>(), json::object());
        } else if (item.is_object() && item.size() == 1) {
          add(item.begin().key(), item.begin().value());
        } else {
          bad_config("models entries must be a name or {\"<name>\": {...}}");
        }
      }
    } else if (m.is_object()) {
      for (const auto& [name, params] : m.items()) add(name, params);
    } else {
      bad_config("models must be a list or an object");
    }
  } else {
    for (ModelKind k : kAllModelKinds) c.models.push_back(RegressorSpec::defaults(k, c.seed));
  }
  if (j.contains("cv")) {
    const auto& cv = j["cv"];
    check_keys(cv, {"folds", "train_frac"}, "cv");
    if (cv.contains("folds")) c.cv.folds = get_size(cv["folds"], "cv.folds");
    if (cv.contains("train_frac")) c.cv.train_frac = get_as<double>(cv["train_frac"], "cv.train_frac");
  }
  if (j.contains("sweep")) {
    const auto& sw = j["sweep"];
    if (!sw.is_object()) bad_config("sweep must be an object of model -> {param: [values]}");
    for (const auto& [name, grid] : sw.items()) {
      if (!grid.is_object()) bad_config("sweep." + name + " must be an object");
      SweepGrid g;
      for (const auto& [key, values] : grid.items()) {
        if (!values.is_array()) bad_config("sweep." + name + "." + key + " must be a list");
        g[key] = values.get<std::vector<json>>();
      }
      c.sweep[model_kind_from_string(name)] = std::move(g);
    }
  }
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
  if (j.contains("paper_activation") && get_as<bool>(j["paper_activation"], "paper_activation")) {
    use_paper_activation(c);
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, "config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json datasets = json::object();
  for (const auto& d : c.datasets) datasets[d.name] = {{"files", d.files}, {"segmentation", segmentation_json(d.segmentation)}};
  json models = json::array();
  for (const auto& m : c.models) models.push_back(to_json(m));
  json sweep = json::object();
  for (const auto& [kind, grid] : c.sweep) {
    json g = json::object();
    for (const auto& [key, values] : grid) g[key] = values;
    sweep[std::string(to_string(kind))] = g;
  }
  return {{"datasets", datasets},
          {"segmentation", segmentation_json(c.segmentation)},
          {"clamp", {c.clamp_lo_C, c.clamp_hi_C}},
          {"ma_window", c.turbulence.ma_window},
          {"fluctuation",
           {{"mode", c.turbulence.mode == FluctuationMode::segment_mean ? "segment_mean" : "rolling_mean"},
            {"rolling_window", c.turbulence.rolling_window}}},
          {"split",
           {{"ratios", {c.ratios.train, c.ratios.test, c.ratios.val}},
            {"mode", std::string(to_string(c.split_mode))},
            {"seed", c.effective_split_seed()}}},
          {"seed", c.seed},
          {"models", models},
          {"cv", {{"folds", c.cv.folds}, {"train_frac", c.cv.train_frac}}},
          {"sweep", sweep},
          {"output_dir", c.output_dir}};
}

std::string config_hash(const PipelineConfig& config) { return hex64(fnv1a(to_json(config).dump())); }

void use_paper_activation(PipelineConfig& config) {
  for (auto& m : config.models) {
    if (m.kind == ModelKind::mlp) std::get<MlpParams>(m.params).activation = MlpActivation::paper_softmax;
  }
}

// ---- run -----------------------------------------------------------------

const PairEvaluation* EvaluationReport::find(ModelKind model, const std::string& dataset) const {
  for (const auto& p : pairs) {
    if (p.model == model && p.dataset == dataset) return &p;
  }
  return nullptr;
}

std::uint64_t pair_seed(std::uint64_t base, std::size_t dataset_index, ModelKind kind) {
  return derive_seed(derive_seed(base, 1000 + dataset_index), static_cast<std::uint64_t>(kind));
}

PreparedDataset prepare_dataset(const PipelineConfig& config, const DatasetInput& input) {
  PreparedDataset d;
  d.name = input.name;
  d.data = staged("ingest", [&] {
    std::optional<ClusterDataset> merged;
    for (const auto& path : input.resolved) {
      ClusterDataset part = parse_csv(path);
      merged = merged ? merge_clusters(*merged, part) : std::move(part);
    }
    merged->name = input.name;
    return std::move(*merged);
  });
  const auto& seg = input.segmentation ? input.segmentation : config.segmentation;
  if (seg) d.data = staged("segment", [&] { return segment_phases(d.data, seg->bounds, Phase::burn); });
  d.data = staged("clamp", [&] { return clamp_outliers(d.data, config.clamp_lo_C, config.clamp_hi_C); });
  d.turbulence = staged("turbulence", [&] { return compute_turbulence(d.data, config.turbulence); });
  const FeatureTable table = staged("split", [&] { return assemble(d.data, d.turbulence); });
  d.correlations = staged("correlate", [&] {
    std::vector<std::vector<double>> columns;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const auto col = table.X.col(static_cast<Eigen::Index>(c));
      columns.emplace_back(col.data(), col.data() + col.size());
      names.push_back(feature_names()[c]);
    }
    columns.emplace_back(table.y.data(), table.y.data() + table.y.size());
    names.emplace_back(kTargetName);
    return correlation_matrix(columns, names);
  });
  d.table = staged("split", [&] { return split(table, config.effective_split_seed(), config.ratios, config.split_mode); });
  d.scaler = staged("scale", [&] { return fit_scaler(d.table.X, d.table.rows_in(Split::train)); });
  return d;
}

RunResult run(const PipelineConfig& config, const RunOptions& options) {
  staged("config", [&] { config.validate(); });
  auto sink = staged("write", [&] { return std::make_unique<OutputSink>(config.output_path(), options.log); });
  try {
    sink->log("config", "loaded", {{"config_hash", config_hash(config)}, {"datasets", config.datasets.size()},
                                   {"models", config.models.size()}});
    const auto data = prepare_all(config, *sink);
    auto pairs = train_and_evaluate(
        config, data,
        [&](std::size_t di, std::size_t mi) {
          return with_seed(config.models[mi], pair_seed(config.seed, di, config.models[mi].kind));
        },
        options);
    sink->log("train", "done", {{"pairs", pairs.size()}});
    return finish_run(config, *sink, data, std::move(pairs), "run", json::object());
  } catch (const StageError& e) {
    sink->quarantine(e);
    throw;
  }
}

// ---- sweep ---------------------------------------------------------------

std::vector<json> expand_grid(const RegressorSpec& base, const SweepGrid& grid) {
  const json base_params = to_json(base).begin().value();
  std::vector<json> points{base_params};
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw Error(ErrorCode::parameter, "sweep " + key + " has no values");
    std::vector<json> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        json q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  // Normalize through the parser so equivalent spellings compare equal.
  for (auto& p : points) p = to_json(spec_from_json(base.kind, p, base.seed)).begin().value();
  return points;
}

SweepResult grid_sweep(const PipelineConfig& config, const RunOptions& options) {
  staged("config", [&] {
    config.validate();
    if (config.sweep.empty()) throw Error(ErrorCode::parameter, "sweep: no sweep lists configured");
  });
  auto sink = staged("write", [&] { return std::make_unique<OutputSink>(config.output_path(), options.log); });
  try {
    sink->log("config", "loaded", {{"config_hash", config_hash(config)}, {"command", "sweep"}});
    const auto data = prepare_all(config, *sink);
    const std::size_t n_models = config.models.size();

    // Candidate lists per model; unswept models contribute their configured point.
    std::vector<std::vector<json>> candidates(n_models);
    staged("sweep", [&] {
      for (std::size_t mi = 0; mi < n_models; ++mi) {
        const auto it = config.sweep.find(config.models[mi].kind);
        candidates[mi] = expand_grid(config.models[mi], it == config.sweep.end() ? SweepGrid{} : it->second);
      }
    });

    struct Task {
      std::size_t di, mi, pi, fold;
    };
    std::vector<std::vector<Fold>> folds(data.size());
    std::vector<Task> tasks;
    for (std::size_t di = 0; di < data.size(); ++di) {
      std::vector<std::size_t> pool = data[di].table.rows_in(Split::train);
      const auto test = data[di].table.rows_in(Split::test);
      pool.insert(pool.end(), test.begin(), test.end());
      std::sort(pool.begin(), pool.end());
      folds[di] = staged("sweep", [&] {
        return shuffle_split_cv(pool, config.cv.folds, config.cv.train_frac,
                                derive_seed(config.effective_split_seed(), 0xC5));
      });
      for (std::size_t mi = 0; mi < n_models; ++mi) {
        for (std::size_t pi = 0; pi < candidates[mi].size(); ++pi) {
          for (std::size_t f = 0; f < folds[di].size(); ++f) tasks.push_back({di, mi, pi, f});
        }
      }
    }
    sink->log("sweep", "start", {{"fits", tasks.size()}});

    std::vector<std::pair<double, double>> scores(tasks.size());
    parallel_for(tasks.size(), std::max<std::size_t>(options.threads, 1), [&](std::size_t t) {
      const auto& task = tasks[t];
      const auto& d = data[task.di];
      const auto& fold = folds[task.di][task.fold];
      staged("sweep", [&] {
        const RegressorSpec spec = spec_from_json(config.models[task.mi].kind, candidates[task.mi][task.pi],
                                                  pair_seed(config.seed, task.di, config.models[task.mi].kind));
        const ScalerState sc = fit_scaler(d.table.X, fold.train);
        const Eigen::MatrixXd Z = transform(d.table.X, sc);
        const auto model = fit(spec, select_rows(Z, fold.train), select_rows(d.table.y, fold.train));
        const Eigen::VectorXd y = select_rows(d.table.y, fold.eval);
        const Eigen::VectorXd p = model->predict(select_rows(Z, fold.eval));
        const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
        const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
        scores[t] = {r_squared(ys, ps), mse(ys, ps)};
      });
    });

    SweepResult result;
    std::vector<RegressorSpec> best(data.size() * n_models);
    std::size_t t = 0;
    for (std::size_t di = 0; di < data.size(); ++di) {
      for (std::size_t mi = 0; mi < n_models; ++mi) {
        std::vector<SweepRow> group;
        for (std::size_t pi = 0; pi < candidates[mi].size(); ++pi) {
          SweepRow row;
          row.model = config.models[mi].kind;
          row.dataset = data[di].name;
          row.params = candidates[mi][pi];
          row.folds = folds[di].size();
          for (std::size_t f = 0; f < row.folds; ++f, ++t) {
            row.mean_r2 += scores[t].first;
            row.mean_mse += scores[t].second;
          }
          row.mean_r2 /= static_cast<double>(row.folds);
          row.mean_mse /= static_cast<double>(row.folds);
          group.push_back(std::move(row));
        }
        std::stable_sort(group.begin(), group.end(), [](const SweepRow& a, const SweepRow& b) {
          if (a.mean_r2 != b.mean_r2) return a.mean_r2 > b.mean_r2;
          if (a.mean_mse != b.mean_mse) return a.mean_mse < b.mean_mse;
          return a.params.dump() < b.params.dump();
        });
        for (std::size_t r = 0; r < group.size(); ++r) group[r].rank = r + 1;
        best[di * n_models + mi] = spec_from_json(group.front().model, group.front().params,
                                                  pair_seed(config.seed, di, group.front().model));
        for (auto& row : group) result.rows.push_back(std::move(row));
      }
    }

    staged("write", [&] {
      std::ostringstream out;
      out << "dataset,model,rank,mean_r2,mean_mse,folds,params\n";
      for (const auto& r : result.rows) {
        out << r.dataset << ',' << to_string(r.model) << ',' << r.rank << ',' << fmt17(r.mean_r2) << ','
            << fmt17(r.mean_mse) << ',' << r.folds << ',' << csv_quote(r.params.dump()) << '\n';
      }
      sink->text("sweep.csv", out.str());
    });
    sink->log("sweep", "ranked", {{"rows", result.rows.size()}});

    auto pairs = train_and_evaluate(
        config, data, [&](std::size_t di, std::size_t mi) { return best[di * n_models + mi]; }, options);
    json winners = json::array();
    for (std::size_t i = 0; i < best.size(); ++i) {
      winners.push_back({{"dataset", data[i / n_models].name}, {"model", to_json(best[i])}});
    }
    result.best = finish_run(config, *sink, data, std::move(pairs), "sweep", {{"selected", winners}});
    return result;
  } catch (const StageError& e) {
    sink->quarantine(e);
    throw;
  }
}

// ---- reporting -----------------------------------------------------------

std::string format_percent(double r2) {
  if (!std::isfinite(r2)) return "n/a";
  const long long tenths = std::llround(r2 * 1000.0);  // llround rounds halves away from zero
  const unsigned long long mag = static_cast<unsigned long long>(tenths < 0 ? -tenths : tenths);
  std::string s = tenths < 0 ? "-" : "";
  return s + std::to_string(mag / 10) + "." + std::to_string(mag % 10);
}

namespace {

// Row labels as used in published comparisons.
std::string_view display_name(ModelKind m) {
  switch (m) {
    case ModelKind::mlp: return "DNN";
    case ModelKind::rf: return "RFR";
    default: return {};
  }
}

}  // namespace

std::string report_table(const EvaluationReport& report) {
  auto label = [](ModelKind m) {
    const auto d = display_name(m);
    return d.empty() ? upper(to_string(m)) : std::string(d);
  };
  const std::size_t name_w = 10;  // "ML Models" plus a space
  std::size_t col_w = 7;
  for (const auto& d : report.datasets) col_w = std::max(col_w, d.size() + 2);

  std::ostringstream out;
  for (const auto& [split, title] : {std::pair{Split::test, "Test (%)"}, std::pair{Split::val, "Validation (%)"}}) {
    out << title << '\n';
    out << std::left << std::setw(static_cast<int>(name_w)) << "ML Models";
    for (const auto& d : report.datasets) out << std::right << std::setw(static_cast<int>(col_w)) << d;
    out << '\n';
    for (ModelKind m : report.models) {
      out << std::left << std::setw(static_cast<int>(name_w)) << label(m);
      for (const auto& d : report.datasets) {
        const PairEvaluation* pe = report.find(m, d);
        if (!pe || !pe->splits.count(split)) {
          throw Error(ErrorCode::missing_cell, "report has no " + std::string(to_string(split)) + " result for (" +
                                                   std::string(to_string(m)) + ", " + d + ")");
        }
        out << std::right << std::setw(static_cast<int>(col_w)) << format_percent(pe->splits.at(split).metrics.r2);
      }
      out << '\n';
    }
    if (split == Split::test) out << '\n';
  }
  return out.str();
}

void write_metrics_csv(std::ostream& out, const EvaluationReport& report) {
  out << "model,dataset,split,n,r2,mse,mae\n";
  for (const auto& d : report.datasets) {
    for (ModelKind m : report.models) {
      const PairEvaluation* pe = report.find(m, d);
      if (!pe) continue;
      for (Split s : {Split::train, Split::test, Split::val}) {
        const auto it = pe->splits.find(s);
        if (it == pe->splits.end()) continue;
        const auto& r = it->second.metrics;
        out << to_string(m) << ',' << d << ',' << to_string(s) << ',' << r.n << ',' << fmt17(r.r2) << ','
            << fmt17(r.mse) << ',' << fmt17(r.mae) << '\n';
      }
    }
  }
}

}  // namespace tke
