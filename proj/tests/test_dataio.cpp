#include <doctest.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "egogest/dataio.hpp"
#include "egogest/error.hpp"
#include "egogest/inference.hpp"
#include "fixtures.hpp"

using namespace egogest;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("egogest_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

void expect_code(ErrorCode code, const std::function<void()>& fn, const std::string& mentions = {}) {
  try {
    fn();
    FAIL("expected " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
    if (!mentions.empty()) CHECK(std::string(e.what()).find(mentions) != std::string::npos);
  }
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.master_seed != b.master_seed || a.frame_rate != b.frame_rate || a.class_count != b.class_count ||
      a.noise_scale != b.noise_scale || a.actors.size() != b.actors.size() ||
      a.sequences.size() != b.sequences.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.actors.size(); ++i) {
    if (a.actors[i].actor_id != b.actors[i].actor_id || a.actors[i].amplitude_scale != b.actors[i].amplitude_scale ||
        a.actors[i].noise_sigma != b.actors[i].noise_sigma) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.sequences.size(); ++i) {
    const auto& x = a.sequences[i];
    const auto& y = b.sequences[i];
    if (x.actor_id != y.actor_id || x.scene != y.scene || x.session_class != y.session_class ||
        x.instances != y.instances || x.seed != y.seed || x.frames.size() != y.frames.size()) {
      return false;
    }
    for (std::size_t k = 0; k < x.frames.size(); ++k) {
      if (x.frames[k].world != y.frames[k].world || x.frames[k].eye != y.frames[k].eye ||
          x.frames[k].label != y.frames[k].label || x.frames[k].index != y.frames[k].index) {
        return false;
      }
    }
  }
  return true;
}

const Dataset& small() {
  static const Dataset ds = egogest::testing::tiny_dataset();
  return ds;
}

const TrainResult& trained() {
  static const TrainResult r = [] {
    auto cfg = egogest::testing::tiny_config();
    return train(small(), cfg);
  }();
  return r;
}

Checkpoint checkpoint_of(const TrainResult& r) {
  Checkpoint c;
  c.config = r.config;
  c.model = r.model;
  c.stats = r.stats;
  c.best_epoch = r.report.best_epoch;
  c.peak_val_accuracy = r.report.peak_val_accuracy;
  c.history = r.report.history;
  return c;
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("doubles round-trip exactly through text") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 5000; ++i) {
    double v = std::bit_cast<double>(bits(rng));
    if (!std::isfinite(v)) continue;
    CHECK(parse_double(format_double(v), "t") == v);
  }
  for (double v : {0.0, -0.0, 1e-310, std::numeric_limits<double>::max(), 0.1, 1.0 / 3.0}) {
    CHECK(parse_double(format_double(v), "t") == v);
  }
  expect_code(ErrorCode::MalformedRecord, [] { parse_double("1.5x", "here"); }, "here");
  expect_code(ErrorCode::MalformedRecord, [] { parse_double("", "here"); });
  expect_code(ErrorCode::MalformedRecord, [] { parse_integer("12 ", "here"); });
  CHECK(parse_integer("-42", "t") == -42);
}

TEST_CASE("sequence round trip and header") {
  const auto& seq = small().sequences[3];
  std::stringstream ss;
  write_sequence(ss, seq);
  const std::string text = ss.str();
  CHECK(text.rfind("egogest-sequence,1\nframe_rate,10\nframe_index,timestamp_s,w0", 0) == 0);
  std::istringstream is(text);
  const auto back = read_sequence(is, "mem");
  CHECK(back.frame_rate == seq.frame_rate);
  REQUIRE(back.frames.size() == seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    CHECK(back.frames[i].world == seq.frames[i].world);
    CHECK(back.frames[i].eye == seq.frames[i].eye);
    CHECK(back.frames[i].label == seq.frames[i].label);
  }
  std::stringstream again;
  write_sequence(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed sequence records name their line") {
  std::stringstream ss;
  write_sequence(ss, small().sequences[0]);
  std::string text = ss.str();

  SUBCASE("truncated line") {
    std::istringstream lines(text);
    std::string out, line;
    for (int n = 1; std::getline(lines, line); ++n) {
      if (n == 6) line = line.substr(0, line.size() / 2);
      out += line + "\n";
    }
    std::istringstream is(out);
    expect_code(ErrorCode::MalformedRecord, [&] { read_sequence(is, "seq.csv"); }, "seq.csv:6");
  }
  SUBCASE("trailing garbage in a field") {
    const auto pos = text.find("\n0,0,") + 1;
    text.insert(text.find(',', pos), "x");
    std::istringstream is(text);
    expect_code(ErrorCode::MalformedRecord, [&] { read_sequence(is, "seq.csv"); }, "seq.csv:4");
  }
  SUBCASE("label out of range") {
    const auto end = text.find('\n', text.find("\n0,0,") + 1);
    text.replace(end - 1, 1, "9");
    std::istringstream is(text);
    CHECK_THROWS_AS(read_sequence(is, "seq.csv"), Error);
  }
  SUBCASE("unknown version is checked first") {
    text.replace(0, text.find('\n'), "egogest-sequence,7");
    text += "garbage\n";
    std::istringstream is(text);
    expect_code(ErrorCode::UnknownVersion, [&] { read_sequence(is, "seq.csv"); });
  }
}

TEST_CASE("incremental reader yields frames one at a time") {
  const auto& seq = small().sequences[1];
  std::stringstream ss;
  write_sequence(ss, seq);
  SequenceReader reader(ss, "mem");
  CHECK(reader.frame_rate() == 10);
  std::size_t n = 0;
  while (auto f = reader.next()) {
    CHECK(f->world == seq.frames[n].world);
    ++n;
  }
  CHECK(n == seq.frames.size());
}

TEST_CASE("dataset round trip") {
  TempDir dir;
  write_dataset(dir.path, small());
  CHECK(fs::exists(dir.path / kManifestName));
  CHECK(fs::exists(dir.path / sequence_file_name(0)));
  CHECK(sequence_file_name(7) == "seq_007.csv");
  const auto back = read_dataset(dir.path);
  CHECK(same_dataset(back, small()));

  TempDir again;
  write_dataset(again.path, back);
  CHECK(read_text(again.path / kManifestName) == read_text(dir.path / kManifestName));
  CHECK(read_text(again.path / sequence_file_name(5)) == read_text(dir.path / sequence_file_name(5)));

  fs::remove(dir.path / sequence_file_name(2));
  expect_code(ErrorCode::Io, [&] { read_dataset(dir.path); }, sequence_file_name(2));
}

TEST_CASE("dataset manifest version is checked") {
  TempDir dir;
  write_dataset(dir.path, small());
  std::string m = read_text(dir.path / kManifestName);
  const auto pos = m.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  m.replace(pos, 19, "\"format_version\": 9");
  write_text(dir.path / kManifestName, m);
  expect_code(ErrorCode::UnknownVersion, [&] { read_dataset(dir.path); });
  expect_code(ErrorCode::Io, [] { read_dataset("/nonexistent/egogest"); });
}

TEST_CASE("config round trip") {
  TrainConfig c;
  c.split = SplitSpec::parse("actor:actor1");
  c.features.kind = FeatureKind::Raw8;
  c.features.channels = Channels::World;
  c.features.alpha_w = 0.5;
  c.lr = 1.0 / 3.0;
  c.classes = {GestureClass::Neutral, GestureClass::Surprise};
  c.seed = 0xfeedfacecafebeefULL;
  const std::string text = config_to_json(c);
  const auto back = config_from_json(text);
  CHECK(back.lr == c.lr);
  CHECK(back.seed == c.seed);
  CHECK(back.split.to_string() == "actor:actor1");
  CHECK(back.features.layout() == c.features.layout());
  CHECK(back.classes == c.classes);
  CHECK(config_to_json(back) == text);
}

TEST_CASE("checkpoint round trip is byte-identical") {
  const auto ckpt = checkpoint_of(trained());
  const std::string text = checkpoint_to_json(ckpt);
  const auto back = checkpoint_from_json(text);
  CHECK(checkpoint_to_json(back) == text);
  CHECK(back.model.lstm.w_ih == ckpt.model.lstm.w_ih);
  CHECK(back.model.bn.running_var == ckpt.model.bn.running_var);
  CHECK(back.stats.mean == ckpt.stats.mean);
  CHECK(back.peak_val_accuracy == ckpt.peak_val_accuracy);
  CHECK(back.history.size() == ckpt.history.size());

  TempDir dir;
  write_checkpoint(dir.path / "m.json", ckpt);
  const auto disk = read_checkpoint(dir.path / "m.json");
  CHECK(checkpoint_to_json(disk) == text);
}

TEST_CASE("reloaded checkpoint reproduces evaluation exactly") {
  const auto& r = trained();
  TempDir dir;
  write_checkpoint(dir.path / "m.json", checkpoint_of(r));
  const auto c = read_checkpoint(dir.path / "m.json");
  const auto data = prepare_training_data(small(), c.config, &c.stats);
  CHECK(snippet_accuracy(c.model, data.validation, c.config.batch_size) == c.peak_val_accuracy);
  std::vector<SequencePrediction> before, after;
  evaluate(r.model, r.stats, r.config, small(), &before);
  evaluate(c.model, c.stats, c.config, small(), &after);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].predicted == after[i].predicted);
}

TEST_CASE("checkpoint shape and version errors") {
  const auto ckpt = checkpoint_of(trained());
  TrainConfig other = ckpt.config;
  other.hidden = 64;
  expect_code(ErrorCode::ShapeMismatch, [&] { check_compatible(ckpt, other); });
  check_compatible(ckpt, ckpt.config);

  std::string text = checkpoint_to_json(ckpt);
  std::string bumped = text;
  bumped.replace(bumped.find("\"format_version\": 1"), 19, "\"format_version\": 2");
  expect_code(ErrorCode::VersionMismatch, [&] { checkpoint_from_json(bumped); });

  std::string shrunk = text;
  const auto pos = shrunk.find("\"hidden\": 8");
  REQUIRE(pos != std::string::npos);
  shrunk.replace(pos, 11, "\"hidden\": 9");
  expect_code(ErrorCode::ShapeMismatch, [&] { checkpoint_from_json(shrunk); });
}

TEST_CASE("report files") {
  TempDir dir;
  ConfusionMatrix cm(5);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) cm.add(static_cast<int>(rng() % 5), static_cast<int>(rng() % 5));
  auto report = metrics_from_confusion(cm, TrainConfig{}.class_names());
  for (int e = 1; e <= 30; ++e) report.history.push_back({e, 1.0 / e, 0.5 + e / 100.0, 5e-4});

  SUBCASE("5-class confusion matrix is a 6x6 grid") {
    write_confusion_csv(dir.path / "c.csv", report);
    const auto t = read_csv(dir.path / "c.csv");
    CHECK(t.header.size() == 6);
    CHECK(t.header[0] == "truth\\predicted");
    CHECK(t.rows.size() == 5);
    for (const auto& r : t.rows) CHECK(r.size() == 6);
    std::vector<std::string> names;
    const auto back = read_confusion_csv(dir.path / "c.csv", &names);
    CHECK(names == report.class_names);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) CHECK(back.at(i, j) == cm.at(i, j));
    }
  }
  SUBCASE("history of 30 epochs has 30 rows and round-trips") {
    write_history_csv(dir.path / "h.csv", report.history);
    CHECK(read_csv(dir.path / "h.csv").rows.size() == 30);
    const auto back = read_history_csv(dir.path / "h.csv");
    REQUIRE(back.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(back[i].train_loss == report.history[i].train_loss);
      CHECK(back[i].val_accuracy == report.history[i].val_accuracy);
    }
  }
  SUBCASE("time diagram of 300 frames") {
    std::vector<int> truth(300), pred(300);
    for (int i = 0; i < 300; ++i) {
      truth[static_cast<std::size_t>(i)] = (i / 50) % 3;
      pred[static_cast<std::size_t>(i)] = (i / 40) % 3;
    }
    write_time_diagram_csv(dir.path / "t.csv", time_diagram(pred, truth, 20, 3));
    const auto t = read_csv(dir.path / "t.csv");
    CHECK(t.header == std::vector<std::string>{"frame", "truth", "predicted", "hit"});
    REQUIRE(t.rows.size() == 300);
    for (const auto& r : t.rows) CHECK((r[3] == "0" || r[3] == "1"));
  }
  SUBCASE("class metrics and sweep rows") {
    write_class_metrics_csv(dir.path / "m.csv", report);
    const auto m = read_csv(dir.path / "m.csv");
    CHECK(m.header == std::vector<std::string>{"class", "precision", "recall", "f1", "support"});
    CHECK(m.rows.size() == 5);
    const std::vector<SweepRow> rows = {{0, "10", 1, "val_accuracy", 0.25}, {1, "20", 30, "train_loss", 1e-3}};
    write_sweep_csv(dir.path / "s.csv", rows);
    const auto back = read_sweep_csv(dir.path / "s.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].setting == "20");
    CHECK(back[1].value == 1e-3);
  }
  SUBCASE("ragged rows are rejected") {
    write_text(dir.path / "bad.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(dir.path / "bad.csv"), Error);
  }
  SUBCASE("unwritable path surfaces the path") {
    expect_code(ErrorCode::Io, [&] { write_history_csv("/nonexistent/dir/h.csv", report.history); }, "/nonexistent/dir/h.csv");
  }
}

}  // TEST_SUITE
