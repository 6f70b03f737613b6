// egogest: generate synthetic gesture data, train and evaluate the
// recognizer, stream sequences through it and run parameter sweeps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egogest/dataio.hpp"
#include "egogest/error.hpp"
#include "egogest/experiment.hpp"
#include "egogest/gradcheck.hpp"
#include "egogest/inference.hpp"
#include "egogest/training.hpp"

namespace fs = std::filesystem;
using namespace egogest;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3, kDivergence = 4, kIncompatible = 5 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::MalformedRecord:
      return kIo;
    case ErrorCode::Divergence:
      return kDivergence;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::VersionMismatch:
    case ErrorCode::UnknownVersion:
    case ErrorCode::IncompatibleRate:
      return kIncompatible;
    case ErrorCode::InvalidArgument:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::InsufficientClassMembers:
    case ErrorCode::SequenceTooShort:
      return kUsage;
    default:
      return kCheckFailed;
  }
}

int default_threads() {
  if (const char* env = std::getenv("EGOGEST_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

struct TrainFlags {
  std::string features = "descriptor16";
  std::string channels = "both";
  double alpha_w = 1.0;
  double alpha_e = 1.0;
  std::string split = "stratified";
  std::string task = "all";
  int hidden = 128;
  std::uint64_t seed = 0;
  int epochs = 30;
  double lr = 5e-4;
  int batch = 32;
  int snippet = 40;
  int overlap = 30;
  double undersample = 1.5;
  int threads = default_threads();
  bool verbose = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--features", f.features, "raw8 | descriptor16")
      ->check(CLI::IsMember({"raw8", "descriptor16"}))
      ->capture_default_str();
  cmd->add_option("--channels", f.channels, "world | eye | both")
      ->check(CLI::IsMember({"world", "eye", "both"}))
      ->capture_default_str();
  cmd->add_option("--alpha-w", f.alpha_w, "world channel weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--alpha-e", f.alpha_e, "eye channel weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--split", f.split, "stratified | actor:K | scene:indoor|outdoor")->capture_default_str();
  cmd->add_option("--task", f.task, "all | binary:<Class>")->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "LSTM hidden size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", f.seed, "run seed")->capture_default_str();
  cmd->add_option("--epochs", f.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", f.lr)->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--batch", f.batch, "snippets per batch")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--snippet", f.snippet, "snippet length S")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--overlap", f.overlap, "snippet overlap O")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--undersample", f.undersample, "Neutral cap ratio")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--threads", f.threads, "parallel runs (default $EGOGEST_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("-v,--verbose", f.verbose, "per-epoch progress on stderr");
}

TrainConfig make_config(const Dataset& data, const TrainFlags& f) {
  TrainConfig c;
  c.features.kind = *parse_feature_kind(f.features);
  c.features.channels = *parse_channels(f.channels);
  c.features.alpha_w = f.alpha_w;
  c.features.alpha_e = f.alpha_e;
  c.split = SplitSpec::parse(f.split);
  c.classes = task_classes(data, f.task);
  c.hidden = f.hidden;
  c.seed = f.seed;
  c.epochs = f.epochs;
  c.lr = f.lr;
  c.batch_size = f.batch;
  c.snippet_length = f.snippet;
  c.overlap = f.overlap;
  c.undersample_ratio = f.undersample;
  c.validate();
  return c;
}

EpochCallback progress(bool verbose) {
  if (!verbose) return {};
  return [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %3d  loss %.5f  val %.4f  lr %.2e\n", r.epoch, r.train_loss, r.val_accuracy, r.lr);
  };
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + suffix);
  return out;
}

void print_summary(const std::string& label, const DistributionSummary& s, std::size_t n) {
  std::printf("%s runs=%zu max=%.4f mean=%.4f std=%.4f q1=%.4f median=%.4f q3=%.4f\n", label.c_str(), n, s.max,
              s.mean, s.stddev, s.q1, s.median, s.q3);
}

void print_distribution(const Dataset& d) {
  std::map<GestureClass, long> frames;
  std::map<GestureClass, int> instances;
  std::map<GestureClass, int> sessions;
  long total = 0;
  for (const auto& seq : d.sequences) {
    instances[seq.session_class] += seq.instances;
    ++sessions[seq.session_class];
    for (const auto& f : seq.frames) ++frames[f.label];
    total += static_cast<long>(seq.frames.size());
  }
  const double fps = static_cast<double>(d.frame_rate);
  std::printf("%-12s %8s %9s %10s %8s\n", "class", "sessions", "instances", "seconds", "share%");
  for (auto c : dataset_classes(d)) {
    const double secs = static_cast<double>(frames[c]) / fps;
    const double share = total > 0 ? 100.0 * static_cast<double>(frames[c]) / static_cast<double>(total) : 0.0;
    std::printf("%-12s %8d %9d %10.2f %8.2f\n", std::string(class_name(c)).c_str(), sessions[c], instances[c], secs,
                share);
  }
  std::printf("%-12s %8zu %9s %10.2f %8.2f\n", "total", d.sequences.size(), "",
              static_cast<double>(total) / fps, 100.0);
}

// ---- commands ---------------------------------------------------------------

struct GenFlags {
  fs::path out;
  std::uint64_t seed = 0;
  int fps = 20;
  int actors = 4;
  int classes = 5;
  double noise_scale = 1.0;
};

int run_gen(const GenFlags& f) {
  GeneratorConfig cfg;
  cfg.noise_scale = f.noise_scale;
  const Dataset d = synthesize_dataset(ActorProfile::roster(f.actors), SceneProfile::indoor(),
                                       SceneProfile::outdoor(), f.fps, f.seed, f.classes, cfg);
  write_dataset(f.out, d);
  std::printf("wrote %zu sequences to %s\n", d.sequences.size(), f.out.string().c_str());
  print_distribution(d);
  return kOk;
}

struct TrainCmd {
  fs::path data;
  fs::path out;
  int repeats = 1;
  TrainFlags flags;
};

Checkpoint to_checkpoint(const TrainResult& r) {
  Checkpoint c;
  c.config = r.config;
  c.model = r.model;
  c.stats = r.stats;
  c.best_epoch = r.report.best_epoch;
  c.peak_val_accuracy = r.report.peak_val_accuracy;
  c.history = r.report.history;
  return c;
}

int run_train(const TrainCmd& t) {
  const Dataset d = read_dataset(t.data);
  const TrainConfig config = make_config(d, t.flags);
  if (t.repeats > 1) {
    const RepeatReport rep = repeat_runs(d, config, t.repeats, t.flags.threads);
    write_checkpoint(t.out, to_checkpoint(*rep.best));
    write_history_csv(sibling(t.out, "_history.csv"), rep.best->report.history);
    write_repeats_csv(sibling(t.out, "_repeats.csv"), rep);
    for (std::size_t i = 0; i < rep.peaks.size(); ++i) {
      std::printf("run %zu seed %llu peak %.4f\n", i, static_cast<unsigned long long>(rep.seeds[i]), rep.peaks[i]);
    }
    print_summary("peak_val_accuracy", rep.summary, rep.peaks.size());
    std::printf("checkpoint: run %zu -> %s\n", rep.best_run, t.out.string().c_str());
    return kOk;
  }
  const TrainResult r = train(d, config, progress(t.flags.verbose));
  write_checkpoint(t.out, to_checkpoint(r));
  write_history_csv(sibling(t.out, "_history.csv"), r.report.history);
  std::printf("peak_val_accuracy %.4f at epoch %d\n", r.report.peak_val_accuracy, r.report.best_epoch);
  std::printf("checkpoint -> %s\n", t.out.string().c_str());
  return kOk;
}

struct EvalCmd {
  fs::path ckpt;
  fs::path data;
  fs::path report;
  int k = 10;
};

int run_eval(const EvalCmd& e) {
  const Checkpoint ckpt = read_checkpoint(e.ckpt);
  const Dataset d = read_dataset(e.data);
  const TrainConfig& config = ckpt.config;
  check_compatible(ckpt, config);

  const PreparedData prepared = prepare_training_data(d, config, &ckpt.stats);
  ConfusionMatrix snippet_cm(ckpt.model.dims.classes);
  const double val = snippet_accuracy(ckpt.model, prepared.validation, config.batch_size, &snippet_cm);

  const Dataset val_seqs = validation_sequences(d, config);
  std::vector<SequencePrediction> predictions;
  const MetricsReport report = evaluate(ckpt.model, ckpt.stats, config, val_seqs, &predictions);

  std::error_code ec;
  fs::create_directories(e.report / "time", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + e.report.string() + "': " + ec.message());
  write_confusion_csv(e.report / "confusion.csv", report);
  write_class_metrics_csv(e.report / "class_metrics.csv", report);
  write_confusion_csv(e.report / "snippet_confusion.csv", metrics_from_confusion(snippet_cm, config.class_names()));
  write_history_csv(e.report / "history.csv", ckpt.history);

  long onsets = 0;
  long detected = 0;
  for (const auto& p : predictions) {
    const int fps = d.sequences[static_cast<std::size_t>(p.sequence)].frame_rate;
    const TimeDiagram td = time_diagram(p.predicted, p.truth, fps, ckpt.model.dims.classes, e.k);
    for (const auto& o : td.onsets) {
      ++onsets;
      detected += o.detected ? 1 : 0;
    }
    const std::size_t id = static_cast<std::size_t>(p.sequence);
    write_time_diagram_csv(e.report / "time" / sequence_file_name(id), td);
  }

  std::printf("validation snippet accuracy %.6f (recorded peak %.6f)\n", val, ckpt.peak_val_accuracy);
  std::printf("sequence frame accuracy %.6f over %ld frames in %zu sequences\n", report.accuracy,
              report.confusion.total(), predictions.size());
  std::printf("%-12s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1", "support");
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    std::printf("%-12s %9.4f %9.4f %9.4f %8ld\n", report.class_names[c].c_str(), m.precision, m.recall, m.f1,
                m.support);
  }
  std::printf("onsets detected %ld / %ld\n", detected, onsets);
  return kOk;
}

struct StreamCmd {
  fs::path ckpt;
  std::string data;
  int k = 10;
  bool no_carry = false;
  int fps = 0;
  fs::path diagram;
};

int run_stream(const StreamCmd& s) {
  const Checkpoint ckpt = read_checkpoint(s.ckpt);
  const TrainConfig& config = ckpt.config;
  std::ifstream file;
  std::istream* in = &std::cin;
  if (s.data != "-") {
    file.open(s.data, std::ios::binary);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + s.data + "'");
    in = &file;
  }
  SequenceReader reader(*in, s.data == "-" ? std::string("<stdin>") : s.data);
  const int fps = s.fps > 0 ? s.fps : reader.frame_rate();

  FeatureExtractor extractor(config.features);
  StreamState stream(ckpt.model, ckpt.stats, config.features.layout(), {s.k, !s.no_carry});
  const auto names = config.class_names();
  std::vector<int> predicted;
  std::vector<int> truth;

  auto emit = [&](const BatchResult& b) {
    std::printf("batch %lld %zu %s", static_cast<long long>(b.first_frame), b.labels.size(),
                names[static_cast<std::size_t>(b.voted)].c_str());
    for (int l : b.labels) std::printf(" %d", l);
    std::printf("\n");
    std::fflush(stdout);
    predicted.insert(predicted.end(), b.labels.begin(), b.labels.end());
  };

  while (auto frame = reader.next()) {
    const auto it = std::find(config.classes.begin(), config.classes.end(), frame->label);
    if (it == config.classes.end()) {
      throw Error(ErrorCode::LabelOutOfRange, "frame " + std::to_string(frame->index) + " carries " +
                                                  std::string(class_name(frame->label)));
    }
    truth.push_back(static_cast<int>(it - config.classes.begin()));
    if (auto b = stream.ingest(extractor.next(*frame))) emit(*b);
  }
  if (auto b = stream.flush()) emit(*b);
  if (stream.batch_seconds().empty()) throw Error(ErrorCode::SequenceTooShort, "no frames in the stream");

  const std::array<int, 4> rates{10, 20, 30, fps};
  const LatencyReport lat = latency_report(stream.batch_seconds(), s.k, std::span<const int>(rates.data(), 3));
  std::fprintf(stderr, "latency batches=%zu mean=%.6fs p95=%.6fs max=%.6fs\n", lat.batches, lat.mean_seconds,
               lat.p95_seconds, lat.max_seconds);
  for (const auto& v : latency_report(stream.batch_seconds(), s.k, std::span<const int>(rates.data(), 4)).verdicts) {
    std::fprintf(stderr, "real-time %d fps: budget %.4fs -> %s\n", v.frame_rate, v.budget_seconds,
                 v.real_time ? "PASS" : "FAIL");
  }

  const TimeDiagram td = time_diagram(predicted, truth, reader.frame_rate(), ckpt.model.dims.classes, s.k);
  long hits = 0;
  for (const auto& r : td.records) hits += r.hit ? 1 : 0;
  std::fprintf(stderr, "frame accuracy %.4f over %zu frames\n",
               td.records.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(td.records.size()),
               td.records.size());
  if (!s.diagram.empty()) write_time_diagram_csv(s.diagram, td);
  return kOk;
}

struct GradCmd {
  std::vector<int> dims{4, 8, 3, 5, 2};
  std::uint64_t seed = 0;
  int seeds = 1;
  bool eval_bn = false;
  std::string corrupt;
};

int run_gradcheck(const GradCmd& g) {
  if (g.dims.size() != 5) throw Error(ErrorCode::InvalidArgument, "--dims takes D,H,N,T,M");
  GradCheckDims dims{g.dims[0], g.dims[1], g.dims[2], g.dims[3], g.dims[4]};
  GradCheckOptions opts;
  opts.bn_train = !g.eval_bn;
  if (!g.corrupt.empty()) opts.corrupt_gate = g.corrupt;
  bool pass = true;
  for (int i = 0; i < g.seeds; ++i) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(i);
    const GradCheckReport r = grad_check(seed, dims, opts);
    std::printf("seed %llu\n", static_cast<unsigned long long>(seed));
    for (const auto& e : r.entries) {
      std::printf("  %-22s n=%-5zu max_rel=%.3e %s\n", e.name.c_str(), e.count, e.max_relative_error,
                  e.pass ? "PASS" : "FAIL");
    }
    pass = pass && r.pass;
  }
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? kOk : kCheckFailed;
}

struct SweepCmd {
  fs::path data;
  fs::path out;
  std::string axis;
  std::vector<double> values;
  int repeats = 5;
  TrainFlags flags;
};

int run_sweep(const SweepCmd& s) {
  const auto axis = parse_sweep_axis(s.axis);
  if (!axis) throw Error(ErrorCode::InvalidArgument, "unknown axis '" + s.axis + "'");
  const Dataset d = read_dataset(s.data);
  const TrainConfig base = make_config(d, s.flags);
  const SweepOutcome outcome = sweep(d, base, *axis, s.values, s.repeats, s.flags.threads);
  const auto rows = outcome.rows();
  write_sweep_csv(s.out, rows);
  for (const auto& setting : outcome.settings) {
    print_summary(setting.label, setting.report.summary, setting.report.peaks.size());
    double final_sum = 0.0;
    double epochs_sum = 0.0;
    for (const auto& run : setting.report.runs) {
      final_sum += run.history.back().val_accuracy;
      epochs_sum += epochs_to_fraction(run.history, 0.9);
    }
    const auto n = static_cast<double>(setting.report.runs.size());
    std::printf("%s final_mean=%.4f epochs_to_90pct_mean=%.2f\n", setting.label.c_str(), final_sum / n,
                epochs_sum / n);
  }
  std::printf("wrote %zu rows to %s\n", rows.size(), s.out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egogest: egocentric head/eye gesture recognition from frame-pair homographies"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "synthesize a labeled dataset");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--fps", gen.fps)->check(CLI::IsMember({10, 20, 30, 60}))->capture_default_str();
  gen_cmd->add_option("--actors", gen.actors)->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes)->check(CLI::IsMember({5, 6}))->capture_default_str();
  gen_cmd->add_option("--noise-scale", gen.noise_scale)->check(CLI::NonNegativeNumber)->capture_default_str();

  TrainCmd train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model, optionally repeated over derived seeds");
  train_cmd->add_option("--data", train_args.data, "dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint path")->required();
  train_cmd->add_option("--repeats", train_args.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  add_train_flags(train_cmd, train_args.flags);

  EvalCmd eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval_args.ckpt)->required();
  eval_cmd->add_option("--data", eval_args.data)->required();
  eval_cmd->add_option("--report", eval_args.report, "report directory")->required();
  eval_cmd->add_option("--k", eval_args.k, "vote window for onset detection")->check(CLI::PositiveNumber);

  StreamCmd stream_args;
  auto* stream_cmd = app.add_subcommand("stream", "online recognition of one sequence file ('-' for stdin)");
  stream_cmd->add_option("--ckpt", stream_args.ckpt)->required();
  stream_cmd->add_option("--data", stream_args.data)->required();
  stream_cmd->add_option("--k", stream_args.k)->check(CLI::PositiveNumber)->capture_default_str();
  stream_cmd->add_flag("--no-carry", stream_args.no_carry, "reset the recurrent state every batch");
  stream_cmd->add_option("--fps", stream_args.fps, "frame rate for the real-time verdict")
      ->check(CLI::PositiveNumber);
  stream_cmd->add_option("--diagram", stream_args.diagram, "time diagram CSV output");

  GradCmd grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  grad_cmd->add_option("--dims", grad_args.dims, "D,H,N,T,M")->delimiter(',')->expected(5);
  grad_cmd->add_option("--seed", grad_args.seed)->capture_default_str();
  grad_cmd->add_option("--seeds", grad_args.seeds, "consecutive seeds to check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad_cmd->add_flag("--eval-bn", grad_args.eval_bn, "batch norm in eval mode");
  grad_cmd->add_option("--corrupt", grad_args.corrupt, "scale one gate's gradient (negative control)")
      ->check(CLI::IsMember({"input", "forget", "cell", "output"}));

  SweepCmd sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "repeated training across one parameter axis");
  sweep_cmd->add_option("--data", sweep_args.data)->required();
  sweep_cmd->add_option("--out", sweep_args.out, "long-format CSV")->required();
  sweep_cmd->add_option("--axis", sweep_args.axis)->required()->check(CLI::IsMember({"hidden", "fps", "alpha-w"}));
  sweep_cmd->add_option("--values", sweep_args.values)->required()->delimiter(',');
  sweep_cmd->add_option("--repeats", sweep_args.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  add_train_flags(sweep_cmd, sweep_args.flags);

  fs::path report_data;
  auto* report_cmd = app.add_subcommand("report", "instance distribution of a dataset");
  report_cmd->add_option("--data", report_data)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*stream_cmd) return run_stream(stream_args);
    if (*grad_cmd) return run_gradcheck(grad_args);
    if (*sweep_cmd) return run_sweep(sweep_args);
    if (*report_cmd) {
      print_distribution(read_dataset(report_data));
      return kOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "egogest: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "egogest: %s\n", e.what());
    return kCheckFailed;
  }
  return kUsage;
}
