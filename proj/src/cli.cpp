#include "dgsp/cli.hpp"

#include "dgsp/adapters.hpp"
#include "dgsp/anomaly.hpp"
#include "dgsp/error.hpp"
#include "dgsp/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace dgsp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads the "options" object of a run_config.json back into CLI11.
class JsonRunConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("run config: ") + e.what());
    }
    const json& opts = doc.contains("options") ? doc.at("options") : doc;
    const std::string subcommand = doc.value("subcommand", "");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : opts.items()) {
      CLI::ConfigItem item;
      if (!subcommand.empty()) item.parents = {subcommand};
      item.name = key;
      if (value.is_array()) {
        for (const json& v : value) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      } else {
        item.inputs.push_back(value.is_string() ? value.get<std::string>() : value.dump());
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

fs::path default_out(const std::string& subcommand) {
  const char* root = std::getenv("DGSP_OUTPUT_ROOT");
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / subcommand;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << text;
}

json resolved_options(const CLI::App& sub) {
  json opts = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (results.size() == 1 && opt->get_expected_max() <= 1) {
        opts[name] = results.front();
      } else {
        opts[name] = results;
      }
    } else if (!opt->get_default_str().empty()) {
      opts[name] = opt->get_default_str();
    }
  }
  return opts;
}

void write_run_config(const CLI::App& sub, const fs::path& dir) {
  json doc = {{"toolkit_version", kToolkitVersion},
              {"subcommand", sub.get_name()},
              {"options", resolved_options(sub)}};
  write_text(dir / "run_config.json", doc.dump(2) + "\n");
}

fs::path ensure_dir(const std::string& out, const std::string& subcommand) {
  fs::path dir = out.empty() ? default_out(subcommand) : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

std::string checkpoint_name(int fold) { return "fold_" + std::to_string(fold) + ".checkpoint.json"; }

struct Options {
  // convert
  std::string raw;
  std::string kind;
  bool require_counts = false;
  // shared
  std::string dataset;
  std::string prepared;
  std::string out;
  std::uint64_t seed = 0;
  int length = 10;
  // prepare
  int stride = 1;
  double corrupt_probability = 0.5;
  // train
  std::string cell = "A3TGCN";
  int embed_dim = 32;
  int attention_dim = 32;
  int epochs = 30;
  double lr = 0.01;
  int folds = 3;
  std::string optimizer = "adam";
  int batch_size = 1;
  std::string fold_mode = "random";
  int fold = -1;
  bool full = false;
  bool redraw = false;
  bool directed = false;
  // eval
  std::string checkpoints;
  // detect
  std::string checkpoint;
  std::string policy = "zscore";
  double tau = 0.7;
  int window = 20;
  double k = 3.0;
  // report
  std::vector<std::string> metrics;
  bool allow_mixed = false;
};

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.epochs = o.epochs;
  c.learning_rate = o.lr;
  c.bucket_length = o.length;
  c.folds = o.folds;
  c.seed = o.seed;
  c.optimizer = parse_optimizer(o.optimizer);
  c.batch_size = o.batch_size;
  c.fold_mode = parse_fold_mode(o.fold_mode);
  c.redraw_noise = o.redraw;
  c.validate();
  return c;
}

ModelConfig model_config(const Options& o, const PreparedSet& set) {
  ModelConfig m;
  m.cell = parse_cell_kind(o.cell);
  m.embed_dim = o.embed_dim;
  m.attention_dim = o.attention_dim;
  m.input_channels = set.signal->num_channels();
  m.symmetrize = !o.directed;
  m.validate();
  return m;
}

void cmd_convert(const Options& o, const CLI::App& sub, std::ostream& out) {
  const AdaptResult r = adapt_dataset(fs::path(o.raw), parse_dataset_kind(o.kind), o.require_counts);
  const fs::path dir = ensure_dir(o.out, "convert");
  for (const std::string& w : r.warnings) out << "warning: " << w << '\n';
  write_canonical(r.signal, dir / "dataset.json");
  write_run_config(sub, dir);
  out << "converted " << r.signal.name << ": " << r.signal.num_nodes << " nodes, "
      << r.signal.edges.size() << " edges, " << r.signal.num_snapshots() << " snapshots -> "
      << (dir / "dataset.json").string() << '\n';
}

void cmd_prepare(const Options& o, const CLI::App& sub, std::ostream& out) {
  auto signal = std::make_shared<const TemporalGraphSignal>(load_canonical(o.dataset));
  const fs::path dir = ensure_dir(o.out, "prepare");
  NoiseSpec noise{o.corrupt_probability, o.seed};
  PreparedSet set = prepare(signal, o.length, o.stride, noise, fs::absolute(o.dataset).lexically_normal().string());
  save_prepared(set, dir / "prepared.json");
  write_run_config(sub, dir);
  const auto corrupted = std::count_if(set.buckets.begin(), set.buckets.end(),
                                       [](const LabeledBucket& b) { return !b.perturbed_nodes.empty(); });
  out << "prepared " << set.buckets.size() << " buckets (" << corrupted << " corrupted) -> "
      << (dir / "prepared.json").string() << '\n';
}

void cmd_train(const Options& o, const CLI::App& sub, std::ostream& out) {
  const PreparedSet set = load_prepared(o.prepared);
  const TrainConfig config = train_config(o);
  if (config.bucket_length != set.length && sub.count("--length") > 0) {
    throw ConfigError("train: --length " + std::to_string(config.bucket_length) +
                      " contradicts the prepared set's L=" + std::to_string(set.length));
  }
  const ModelConfig model = model_config(o, set);
  const fs::path dir = ensure_dir(o.out, "train");

  std::ostringstream history;
  history << std::setprecision(10) << "fold,epoch,loss\n";
  auto run = [&](int fold, const std::vector<LabeledBucket>& train_set) {
    TrainConfig fold_config = config;
    fold_config.noise = set.noise;
    TrainResult r = train(train_set, fold_config, model);
    r.checkpoint.provenance.fold = fold;
    r.checkpoint.provenance.folds = fold < 0 ? 0 : config.folds;
    r.checkpoint.provenance.split_seed = config.seed;
    r.checkpoint.provenance.fold_mode = std::string(to_string(config.fold_mode));
    for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
      history << fold << ',' << e << ',' << r.loss_history[e] << '\n';
    }
    const fs::path file = dir / (fold < 0 ? std::string("checkpoint.json") : checkpoint_name(fold));
    save_checkpoint(r.checkpoint, file);
    out << "trained " << (fold < 0 ? std::string("full set") : "fold " + std::to_string(fold))
        << ": final loss " << r.loss_history.back() << " -> " << file.string() << '\n';
  };

  if (o.full) {
    run(-1, set.buckets);
  } else {
    const auto splits = kfold_split(set.buckets.size(), config.folds, config.seed, config.fold_mode);
    if (o.fold >= config.folds) {
      throw ConfigError("train: --fold " + std::to_string(o.fold) + " but K=" + std::to_string(config.folds));
    }
    for (int f = 0; f < config.folds; ++f) {
      if (o.fold >= 0 && f != o.fold) continue;
      run(f, gather(set.buckets, splits[f].train));
    }
  }
  write_text(dir / "loss_history.csv", history.str());
  write_run_config(sub, dir);
}

void cmd_eval(const Options& o, const CLI::App& sub, std::ostream& out) {
  const PreparedSet set = load_prepared(o.prepared);
  const fs::path ckdir(o.checkpoints);
  const fs::path first = ckdir / checkpoint_name(0);
  if (!fs::exists(first)) throw ParseError(first.string() + ": missing fold checkpoint");
  const Checkpoint c0 = load_checkpoint(first);
  const int folds = c0.provenance.folds;
  std::vector<Checkpoint> checkpoints{c0};
  for (int f = 1; f < folds; ++f) checkpoints.push_back(load_checkpoint(ckdir / checkpoint_name(f)));
  for (const Checkpoint& c : checkpoints) {
    if (c.provenance.split_seed != c0.provenance.split_seed || c.provenance.folds != folds ||
        c.provenance.fold_mode != c0.provenance.fold_mode) {
      throw ConfigError("eval: fold checkpoints come from different splits");
    }
  }
  const auto splits = kfold_split(set.buckets.size(), folds, c0.provenance.split_seed,
                                  parse_fold_mode(c0.provenance.fold_mode));
  MetricsReport report = evaluate_folds(set, splits, checkpoints);
  TrainConfig echo;
  echo.epochs = c0.provenance.epochs;
  echo.folds = folds;
  echo.seed = c0.provenance.seed;
  echo.fold_mode = parse_fold_mode(c0.provenance.fold_mode);
  report.config["checkpoint"] = {{"cell", to_string(c0.config.cell)},
                                 {"embed_dim", c0.config.embed_dim},
                                 {"epochs", c0.provenance.epochs},
                                 {"seed", c0.provenance.seed},
                                 {"folds", folds},
                                 {"fold_mode", c0.provenance.fold_mode}};
  const fs::path dir = ensure_dir(o.out, "eval");
  write_text(dir / "metrics.json", report.to_json().dump(2) + "\n");
  write_text(dir / "metrics.csv", report.to_csv());
  write_run_config(sub, dir);
  out << report.to_csv();
}

void cmd_baseline(const Options& o, const CLI::App& sub, std::ostream& out) {
  const PreparedSet set = load_prepared(o.prepared);
  const auto splits = kfold_split(set.buckets.size(), o.folds, o.seed, parse_fold_mode(o.fold_mode));
  const fs::path dir = ensure_dir(o.out, "baseline");
  for (BaselineMethod m : {BaselineMethod::Random, BaselineMethod::TimeSeriesRegression}) {
    MetricsReport report = baseline_report(set, splits, m, o.seed);
    report.config["split"] = {{"folds", o.folds}, {"seed", o.seed}, {"fold_mode", o.fold_mode}};
    const std::string stem(to_string(m));
    write_text(dir / (stem + ".json"), report.to_json().dump(2) + "\n");
    write_text(dir / (stem + ".csv"), report.to_csv());
    out << report.to_csv();
  }
  write_run_config(sub, dir);
}

void cmd_detect(const Options& o, const CLI::App& sub, std::ostream& out) {
  auto signal = std::make_shared<const TemporalGraphSignal>(load_canonical(o.dataset));
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  AlarmPolicy policy;
  if (o.policy == "fixed") {
    policy.mode = AlarmMode::FixedThreshold;
  } else if (o.policy == "zscore") {
    policy.mode = AlarmMode::TrailingZScore;
  } else {
    throw ConfigError("detect: unknown policy '" + o.policy + "' (expected fixed or zscore)");
  }
  policy.threshold = o.tau;
  policy.window = o.window;
  policy.multiplier = o.k;
  policy.validate();
  const std::vector<double> scores = score_stream(signal, ck, o.length);
  const int first = o.length - 1;
  const DetectionResult result = detect(scores, policy, first);
  const fs::path dir = ensure_dir(o.out, "detect");
  write_text(dir / "events.json", events_to_json(result.events).dump(2) + "\n");
  write_text(dir / "scores.csv", scores_to_csv(scores, result, first));
  write_run_config(sub, dir);
  out << result.events.size() << " events over " << scores.size() << " scored snapshots\n";
}

void cmd_report(const Options& o, const CLI::App& sub, std::ostream& out) {
  std::vector<MetricsReport> reports;
  for (const std::string& path : o.metrics) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    try {
      reports.push_back(MetricsReport::from_json(json::parse(in)));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  if (!o.allow_mixed) {
    auto key = [](const MetricsReport& r) {
      const json& d = r.config.at("data");
      return json{d.at("length"), d.at("noise")};
    };
    for (const MetricsReport& r : reports) {
      if (key(r) != key(reports.front())) {
        throw ConfigError("report: runs differ in bucket length or noise settings; pass --allow-mixed to merge");
      }
    }
  }
  std::ostringstream csv;
  csv << std::setprecision(4) << std::fixed << "dataset,method,recurrent_layer,mse,mae,rmse\n";
  for (const MetricsReport& r : reports) {
    csv << r.dataset << ',' << r.method << ',' << r.cell << ',' << r.mean.mse << ',' << r.mean.mae
        << ',' << r.mean.rmse << '\n';
  }
  const fs::path dir = ensure_dir(o.out, "report");
  write_text(dir / "comparison.csv", csv.str());
  write_run_config(sub, dir);
  out << csv.str();
}

void print_error(std::ostream& err, const std::string& category, const std::string& message) {
  err << json{{"error", category}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal graph similarity prediction toolkit", "dgsp"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  // Config is read at the top level and routed to the subcommand named in the
  // file; options given on the command line take precedence.
  app.fallthrough();
  CLI::Option* config_opt =
      app.set_config("--config", "", "Re-run from a run_config.json written by a previous run");
  app.config_formatter(std::make_shared<JsonRunConfig>());

  auto config_aware = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory (default: $DGSP_OUTPUT_ROOT/<subcommand>)");
  };

  auto* convert = app.add_subcommand("convert", "Convert a published raw dataset to the canonical format");
  config_aware(convert);
  convert->add_option("--raw", o.raw, "Published raw JSON file")->required()->check(CLI::ExistingFile);
  convert->add_option("--kind", o.kind, "WikiMath, Chickenpox, PedalMe, MontevideoBus or MetraLa")->required();
  convert->add_flag("--require-reference-counts", o.require_counts,
                    "Fail when node/edge/snapshot counts differ from the published ones");

  auto* prep = app.add_subcommand("prepare", "Bucketize a dataset and inject labeled noise");
  config_aware(prep);
  prep->add_option("--dataset", o.dataset, "Canonical dataset file")->required()->check(CLI::ExistingFile);
  prep->add_option("-L,--length", o.length, "Snapshots per bucket");
  prep->add_option("--stride", o.stride, "Start offset between consecutive buckets");
  prep->add_option("-p,--corrupt-probability", o.corrupt_probability, "Per-bucket corruption probability");
  prep->add_option("--seed", o.seed, "Noise seed");

  auto* tr = app.add_subcommand("train", "Train one model per fold (or on the full set)");
  config_aware(tr);
  tr->add_option("--prepared", o.prepared, "prepared.json from `prepare`")->required()->check(CLI::ExistingFile);
  tr->add_option("--cell", o.cell, "GConvGRU, TGCN or A3TGCN");
  tr->add_option("--embed-dim", o.embed_dim, "Node embedding width");
  tr->add_option("--attention-dim", o.attention_dim, "Attention width (A3TGCN)");
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--lr", o.lr, "Learning rate");
  tr->add_option("-L,--length", o.length, "Expected bucket length (checked against the prepared set)");
  tr->add_option("--folds", o.folds, "K for cross-validation");
  tr->add_option("--seed", o.seed, "Initialization, shuffling and fold split seed");
  tr->add_option("--optimizer", o.optimizer, "adam or sgd");
  tr->add_option("--batch-size", o.batch_size);
  tr->add_option("--fold-mode", o.fold_mode, "random or contiguous");
  tr->add_option("--fold", o.fold, "Train only this fold (-1: all)");
  tr->add_flag("--full", o.full, "Train a single model on every bucket");
  tr->add_flag("--redraw-noise", o.redraw, "Re-draw candidate noise every epoch");
  tr->add_flag("--directed", o.directed, "Keep edge direction when building the adjacency");

  auto* ev = app.add_subcommand("eval", "Evaluate fold checkpoints on their test folds");
  config_aware(ev);
  ev->add_option("--prepared", o.prepared)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoints", o.checkpoints, "Directory written by `train`")->required()->check(CLI::ExistingDirectory);

  auto* bl = app.add_subcommand("baseline", "Random and time-series-regression baselines");
  config_aware(bl);
  bl->add_option("--prepared", o.prepared)->required()->check(CLI::ExistingFile);
  bl->add_option("--folds", o.folds);
  bl->add_option("--seed", o.seed, "Fold split and random-draw seed");
  bl->add_option("--fold-mode", o.fold_mode);

  auto* det = app.add_subcommand("detect", "Score a snapshot stream and flag anomalies");
  config_aware(det);
  det->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  det->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  det->add_option("-L,--length", o.length);
  det->add_option("--policy", o.policy, "zscore or fixed");
  det->add_option("--tau", o.tau, "Fixed threshold");
  det->add_option("--window", o.window, "Trailing window for z-score mode");
  det->add_option("--k", o.k, "Standard deviation multiplier for z-score mode");

  auto* rep = app.add_subcommand("report", "Merge metrics reports into one comparison table");
  config_aware(rep);
  rep->add_option("--metrics", o.metrics, "metrics.json / baseline JSON files")->required()->check(CLI::ExistingFile);
  rep->add_flag("--allow-mixed", o.allow_mixed, "Merge runs with different L or noise settings");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kUsageError;
  }

  const std::vector<std::pair<CLI::App*, std::function<void(const Options&, const CLI::App&, std::ostream&)>>>
      handlers{{convert, cmd_convert}, {prep, cmd_prepare}, {tr, cmd_train},     {ev, cmd_eval},
               {bl, cmd_baseline},     {det, cmd_detect},   {rep, cmd_report}};
  try {
    if (config_opt->count() > 0) {
      std::ifstream in(config_opt->as<std::string>());
      const std::string named = json::parse(in, nullptr, false).value("subcommand", "");
      const auto parsed = app.get_subcommands();
      if (!named.empty() && (parsed.empty() || parsed.front()->get_name() != named)) {
        throw ConfigError("--config was written by `" + named + "`, not by this subcommand");
      }
    }
    for (const auto& [sub, handler] : handlers) {
      if (sub->parsed()) handler(o, *sub, out);
    }
    return kSuccess;
  } catch (const ConfigError& e) {
    print_error(err, e.category(), e.what());
    return kUsageError;
  } catch (const TrainingError& e) {
    print_error(err, e.category(), e.what());
    return kRunFailure;
  } catch (const Error& e) {
    print_error(err, e.category(), e.what());
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "io", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kRunFailure;
  }
}

}  // namespace dgsp::cli
