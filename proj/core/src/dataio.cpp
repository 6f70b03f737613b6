#include "egogest/dataio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egogest/error.hpp"

namespace egogest {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kSequenceMagic = "egogest-sequence";
constexpr const char* kDatasetFormat = "egogest-dataset";
constexpr const char* kCheckpointFormat = "egogest-checkpoint";
constexpr std::size_t kSequenceFields = 19;

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return is;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::string slurp(const fs::path& path) {
  auto is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool read_line(std::istream& is, std::string& line) {
  if (!std::getline(is, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from(const json& j) {
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.validate();
  return k;
}

template <typename Derived>
json array_json(const Eigen::DenseBase<Derived>& m, bool vector) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  json shape = vector ? json::array({m.size()}) : json::array({m.rows(), m.cols()});
  return {{"shape", shape}, {"data", data}};
}

std::vector<double> array_data(const json& j, std::vector<long> expected, const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<long>>();
  const auto data = j.at("data").get<std::vector<double>>();
  long n = 1;
  for (long s : shape) n *= s;
  if (static_cast<std::size_t>(n) != data.size()) {
    throw Error(ErrorCode::ShapeMismatch, name + ": declared shape holds " + std::to_string(n) +
                                              " values, found " + std::to_string(data.size()));
  }
  if (shape != expected) {
    std::string want;
    for (long s : expected) want += (want.empty() ? "" : "x") + std::to_string(s);
    std::string got;
    for (long s : shape) got += (got.empty() ? "" : "x") + std::to_string(s);
    throw Error(ErrorCode::ShapeMismatch, name + ": expected " + want + ", found " + got);
  }
  return data;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  const auto data = array_data(j, {static_cast<long>(rows), static_cast<long>(cols)}, name);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index n, const std::string& name) {
  const auto data = array_data(j, {static_cast<long>(n)}, name);
  return Eigen::Map<const Eigen::VectorXd>(data.data(), n);
}

json config_json(const TrainConfig& c) {
  json classes = json::array();
  for (auto g : c.classes) classes.push_back(std::string(class_name(g)));
  return {
      {"snippet_length", c.snippet_length},
      {"overlap", c.overlap},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"adam_eps", c.adam_eps},
      {"decoupled_weight_decay", c.decoupled_weight_decay},
      {"scheduler",
       {{"factor", c.scheduler.factor},
        {"patience", c.scheduler.patience},
        {"min_lr", c.scheduler.min_lr},
        {"threshold", c.scheduler.threshold}}},
      {"undersample_ratio", c.undersample_ratio},
      {"split", c.split.to_string()},
      {"train_fraction", c.split.train_fraction},
      {"seed", c.seed},
      {"hidden", c.hidden},
      {"classes", classes},
      {"bn_momentum", c.bn_momentum},
      {"bn_eps", c.bn_eps},
      {"features",
       {{"kind", std::string(feature_kind_name(c.features.kind))},
        {"channels", std::string(channels_name(c.features.channels))},
        {"alpha_w", c.features.alpha_w},
        {"alpha_e", c.features.alpha_e},
        {"centered_raw", c.features.centered_raw},
        {"world", intrinsics_json(c.features.world)},
        {"eye", intrinsics_json(c.features.eye)}}},
  };
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.snippet_length = j.at("snippet_length").get<int>();
  c.overlap = j.at("overlap").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.decoupled_weight_decay = j.at("decoupled_weight_decay").get<bool>();
  const json& s = j.at("scheduler");
  c.scheduler.factor = s.at("factor").get<double>();
  c.scheduler.patience = s.at("patience").get<int>();
  c.scheduler.min_lr = s.at("min_lr").get<double>();
  c.scheduler.threshold = s.at("threshold").get<double>();
  c.undersample_ratio = j.at("undersample_ratio").get<double>();
  c.split = SplitSpec::parse(j.at("split").get<std::string>());
  c.split.train_fraction = j.at("train_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.hidden = j.at("hidden").get<int>();
  c.classes.clear();
  for (const auto& name : j.at("classes")) {
    const auto g = parse_class(name.get<std::string>());
    if (!g) throw Error(ErrorCode::MalformedRecord, "unknown class '" + name.get<std::string>() + "'");
    c.classes.push_back(*g);
  }
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  const json& f = j.at("features");
  const auto kind = parse_feature_kind(f.at("kind").get<std::string>());
  const auto channels = parse_channels(f.at("channels").get<std::string>());
  if (!kind || !channels) throw Error(ErrorCode::MalformedRecord, "unknown feature kind or channels");
  c.features.kind = *kind;
  c.features.channels = *channels;
  c.features.alpha_w = f.at("alpha_w").get<double>();
  c.features.alpha_e = f.at("alpha_e").get<double>();
  c.features.centered_raw = f.at("centered_raw").get<bool>();
  c.features.world = intrinsics_from(f.at("world"));
  c.features.eye = intrinsics_from(f.at("eye"));
  c.validate();
  return c;
}

template <typename F>
auto guarded(const std::string& where, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::MalformedRecord, where + ": bad number '" + std::string(token) + "'");
  }
  return v;
}

long parse_integer(std::string_view token, const std::string& where) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::MalformedRecord, where + ": bad integer '" + std::string(token) + "'");
  }
  return v;
}

void write_sequence(std::ostream& os, const LabeledSequence& seq) {
  os << kSequenceMagic << ',' << kSequenceFormatVersion << '\n';
  os << "frame_rate," << seq.frame_rate << '\n';
  os << "frame_index,timestamp_s";
  for (int i = 0; i < 8; ++i) os << ",w" << i;
  for (int i = 0; i < 8; ++i) os << ",e" << i;
  os << ",label\n";
  for (const auto& f : seq.frames) {
    os << f.index << ',' << format_double(static_cast<double>(f.index) / seq.frame_rate);
    for (double v : f.world) os << ',' << format_double(v);
    for (double v : f.eye) os << ',' << format_double(v);
    os << ',' << class_id(f.label) << '\n';
  }
}

void write_sequence(const fs::path& path, const LabeledSequence& seq) {
  auto os = open_out(path);
  write_sequence(os, seq);
  finish(os, path);
}

SequenceReader::SequenceReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {
  std::string line;
  ++line_;
  if (!read_line(is_, line)) throw Error(ErrorCode::MalformedRecord, where() + ": empty input");
  const auto magic = split_fields(line);
  if (magic.size() != 2 || magic[0] != kSequenceMagic) {
    throw Error(ErrorCode::UnknownVersion, where() + ": not a sequence file");
  }
  if (parse_integer(magic[1], where()) != kSequenceFormatVersion) {
    throw Error(ErrorCode::UnknownVersion, where() + ": unsupported version " + std::string(magic[1]));
  }
  ++line_;
  if (!read_line(is_, line)) throw Error(ErrorCode::MalformedRecord, where() + ": missing frame rate");
  const auto rate = split_fields(line);
  if (rate.size() != 2 || rate[0] != "frame_rate") {
    throw Error(ErrorCode::MalformedRecord, where() + ": expected frame_rate");
  }
  frame_rate_ = static_cast<int>(parse_integer(rate[1], where()));
  if (frame_rate_ < 1) throw Error(ErrorCode::MalformedRecord, where() + ": non-positive frame rate");
  ++line_;
  if (!read_line(is_, line) || split_fields(line).size() != kSequenceFields ||
      line.rfind("frame_index,timestamp_s,", 0) != 0) {
    throw Error(ErrorCode::MalformedRecord, where() + ": bad column header");
  }
}

std::string SequenceReader::where() const { return source_ + ":" + std::to_string(line_); }

std::optional<FrameRecord> SequenceReader::next() {
  std::string line;
  if (!read_line(is_, line)) return std::nullopt;
  ++line_;
  const auto fields = split_fields(line);
  if (fields.size() != kSequenceFields) {
    throw Error(ErrorCode::MalformedRecord, where() + ": expected " + std::to_string(kSequenceFields) +
                                                " fields, found " + std::to_string(fields.size()));
  }
  FrameRecord f;
  f.index = static_cast<int>(parse_integer(fields[0], where()));
  if (f.index != expected_index_) {
    throw Error(ErrorCode::MalformedRecord, where() + ": frame index " + std::to_string(f.index) +
                                                ", expected " + std::to_string(expected_index_));
  }
  parse_double(fields[1], where());
  for (std::size_t i = 0; i < 8; ++i) {
    f.world[i] = parse_double(fields[2 + i], where());
    f.eye[i] = parse_double(fields[10 + i], where());
  }
  const long label = parse_integer(fields[18], where());
  if (label < 0 || label >= kGestureClassCount) {
    throw Error(ErrorCode::MalformedRecord, where() + ": label " + std::to_string(label) + " out of range");
  }
  f.label = class_from_id(static_cast<int>(label));
  ++expected_index_;
  return f;
}

LabeledSequence read_sequence(std::istream& is, const std::string& source) {
  SequenceReader reader(is, source);
  LabeledSequence seq;
  seq.frame_rate = reader.frame_rate();
  while (auto f = reader.next()) seq.frames.push_back(*f);
  return seq;
}

LabeledSequence read_sequence(const fs::path& path) {
  auto is = open_in(path);
  return read_sequence(is, path.string());
}

std::string sequence_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%03zu.csv", index);
  return buf;
}

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());

  json actors = json::array();
  for (const auto& a : dataset.actors) {
    actors.push_back({{"actor_id", a.actor_id},
                      {"amplitude_scale", a.amplitude_scale},
                      {"frequency_scale", a.frequency_scale},
                      {"noise_sigma", a.noise_sigma},
                      {"timing_jitter", a.timing_jitter}});
  }
  json scenes = json::array();
  for (const auto& s : dataset.scenes) {
    scenes.push_back({{"kind", std::string(scene_name(s.kind))},
                      {"plane_depth", s.plane_depth},
                      {"correspondence_noise", s.correspondence_noise}});
  }
  json entries = json::array();
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    const auto& seq = dataset.sequences[i];
    if (seq.frame_rate != dataset.frame_rate) {
      throw Error(ErrorCode::IncompatibleRate, "sequence " + std::to_string(i) + " is not at the dataset rate");
    }
    const std::string file = sequence_file_name(i);
    write_sequence(dir / file, seq);
    entries.push_back({{"id", i},
                       {"file", file},
                       {"actor", seq.actor_id},
                       {"scene", std::string(scene_name(seq.scene))},
                       {"class", std::string(class_name(seq.session_class))},
                       {"frames", seq.frames.size()},
                       {"instances", seq.instances},
                       {"seed", seq.seed}});
  }
  const json manifest = {{"format", kDatasetFormat},
                         {"format_version", kDatasetFormatVersion},
                         {"master_seed", dataset.master_seed},
                         {"frame_rate", dataset.frame_rate},
                         {"class_count", dataset.class_count},
                         {"noise_scale", dataset.noise_scale},
                         {"actors", actors},
                         {"scenes", scenes},
                         {"entries", entries}};
  const fs::path path = dir / kManifestName;
  auto os = open_out(path);
  os << dump(manifest);
  finish(os, path);
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  const std::string where = path.string();
  const std::string text = slurp(path);
  return guarded(where, [&] {
    const json m = json::parse(text);
    if (!m.is_object() || m.value("format", std::string()) != kDatasetFormat ||
        !m.contains("format_version") || !m.at("format_version").is_number_integer() ||
        m.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw Error(ErrorCode::UnknownVersion, where + ": unrecognized dataset format or version");
    }
    Dataset d;
    d.master_seed = m.at("master_seed").get<std::uint64_t>();
    d.frame_rate = m.at("frame_rate").get<int>();
    d.class_count = m.at("class_count").get<int>();
    d.noise_scale = m.at("noise_scale").get<double>();
    for (const auto& a : m.at("actors")) {
      ActorProfile p;
      p.actor_id = a.at("actor_id").get<std::string>();
      p.amplitude_scale = a.at("amplitude_scale").get<double>();
      p.frequency_scale = a.at("frequency_scale").get<double>();
      p.noise_sigma = a.at("noise_sigma").get<double>();
      p.timing_jitter = a.at("timing_jitter").get<double>();
      p.validate();
      d.actors.push_back(p);
    }
    for (const auto& s : m.at("scenes")) {
      const auto kind = parse_scene(s.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::MalformedRecord, where + ": unknown scene kind");
      SceneProfile p{*kind, s.at("plane_depth").get<double>(), s.at("correspondence_noise").get<double>()};
      p.validate();
      d.scenes.push_back(p);
    }
    for (const auto& e : m.at("entries")) {
      const fs::path file = dir / e.at("file").get<std::string>();
      if (!fs::exists(file)) {
        throw Error(ErrorCode::Io, where + ": missing sequence file '" + file.string() + "'");
      }
      LabeledSequence seq = read_sequence(file);
      if (seq.frame_rate != d.frame_rate) {
        throw Error(ErrorCode::MalformedRecord, file.string() + ": frame rate disagrees with the manifest");
      }
      if (seq.frames.size() != e.at("frames").get<std::size_t>()) {
        throw Error(ErrorCode::MalformedRecord, file.string() + ": frame count disagrees with the manifest");
      }
      seq.actor_id = e.at("actor").get<std::string>();
      const auto scene = parse_scene(e.at("scene").get<std::string>());
      const auto cls = parse_class(e.at("class").get<std::string>());
      if (!scene || !cls) throw Error(ErrorCode::MalformedRecord, where + ": bad scene or class in entry");
      seq.scene = *scene;
      seq.session_class = *cls;
      seq.instances = e.at("instances").get<int>();
      seq.seed = e.at("seed").get<std::uint64_t>();
      d.sequences.push_back(std::move(seq));
    }
    return d;
  });
}

std::string config_to_json(const TrainConfig& config) { return dump(config_json(config)); }

TrainConfig config_from_json(const std::string& text) {
  return guarded("config", [&] { return config_from(json::parse(text)); });
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const ModelState& m = ckpt.model;
  json history = json::array();
  for (const auto& r : ckpt.history) {
    history.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_accuracy", r.val_accuracy}, {"lr", r.lr}});
  }
  const json j = {
      {"format", kCheckpointFormat},
      {"format_version", ckpt.format_version},
      {"config", config_json(ckpt.config)},
      {"model",
       {{"dims", {{"input", m.dims.input}, {"hidden", m.dims.hidden}, {"classes", m.dims.classes}}},
        {"layout", m.layout},
        {"bn",
         {{"gamma", array_json(m.bn.gamma, true)},
          {"beta", array_json(m.bn.beta, true)},
          {"running_mean", array_json(m.bn.running_mean, true)},
          {"running_var", array_json(m.bn.running_var, true)},
          {"momentum", m.bn.momentum},
          {"eps", m.bn.eps}}},
        {"lstm",
         {{"w_ih", array_json(m.lstm.w_ih, false)},
          {"w_hh", array_json(m.lstm.w_hh, false)},
          {"bias", array_json(m.lstm.bias, true)}}},
        {"fc", {{"weight", array_json(m.fc.weight, false)}, {"bias", array_json(m.fc.bias, true)}}}}},
      {"stats", {{"mean", ckpt.stats.mean}, {"stddev", ckpt.stats.stddev}}},
      {"best_epoch", ckpt.best_epoch},
      {"peak_val_accuracy", ckpt.peak_val_accuracy},
      {"history", history},
  };
  return dump(j);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  return guarded("checkpoint", [&] {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat ||
        !j.contains("format_version") || !j.at("format_version").is_number_integer()) {
      throw Error(ErrorCode::VersionMismatch, "not a checkpoint");
    }
    Checkpoint c;
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(c.format_version) +
                                                  ", expected " + std::to_string(kCheckpointFormatVersion));
    }
    c.config = config_from(j.at("config"));
    const json& m = j.at("model");
    ModelState& s = c.model;
    s.dims.input = m.at("dims").at("input").get<int>();
    s.dims.hidden = m.at("dims").at("hidden").get<int>();
    s.dims.classes = m.at("dims").at("classes").get<int>();
    if (s.dims.input < 1 || s.dims.hidden < 1 || s.dims.classes < 1) {
      throw Error(ErrorCode::ShapeMismatch, "non-positive model dimensions");
    }
    s.layout = m.at("layout").get<std::string>();
    const Eigen::Index d = s.dims.input;
    const Eigen::Index h = s.dims.hidden;
    const Eigen::Index n = s.dims.classes;
    const json& bn = m.at("bn");
    s.bn.gamma = vector_from(bn.at("gamma"), d, "bn.gamma");
    s.bn.beta = vector_from(bn.at("beta"), d, "bn.beta");
    s.bn.running_mean = vector_from(bn.at("running_mean"), d, "bn.running_mean");
    s.bn.running_var = vector_from(bn.at("running_var"), d, "bn.running_var");
    s.bn.momentum = bn.at("momentum").get<double>();
    s.bn.eps = bn.at("eps").get<double>();
    const json& lstm = m.at("lstm");
    s.lstm.w_ih = matrix_from(lstm.at("w_ih"), 4 * h, d, "lstm.w_ih");
    s.lstm.w_hh = matrix_from(lstm.at("w_hh"), 4 * h, h, "lstm.w_hh");
    s.lstm.bias = vector_from(lstm.at("bias"), 4 * h, "lstm.bias");
    s.fc.weight = matrix_from(m.at("fc").at("weight"), n, h, "fc.weight");
    s.fc.bias = vector_from(m.at("fc").at("bias"), n, "fc.bias");
    s.validate();
    c.stats.mean = j.at("stats").at("mean").get<std::vector<double>>();
    c.stats.stddev = j.at("stats").at("stddev").get<std::vector<double>>();
    if (c.stats.mean.size() != static_cast<std::size_t>(d) || c.stats.stddev.size() != c.stats.mean.size()) {
      throw Error(ErrorCode::ShapeMismatch, "feature statistics do not match the model input");
    }
    c.best_epoch = j.at("best_epoch").get<int>();
    c.peak_val_accuracy = j.at("peak_val_accuracy").get<double>();
    for (const auto& r : j.at("history")) {
      c.history.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                           r.at("val_accuracy").get<double>(), r.at("lr").get<double>()});
    }
    check_compatible(c, c.config);
    return c;
  });
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  auto os = open_out(path);
  os << checkpoint_to_json(ckpt);
  finish(os, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  try {
    return checkpoint_from_json(slurp(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path.string() + ": " + std::string(e.what()));
  }
}

void check_compatible(const Checkpoint& ckpt, const TrainConfig& config) {
  const ModelDims want = config.dims();
  const ModelDims& got = ckpt.model.dims;
  if (!(want == got)) {
    throw Error(ErrorCode::ShapeMismatch,
                "checkpoint model is D=" + std::to_string(got.input) + " H=" + std::to_string(got.hidden) +
                    " N=" + std::to_string(got.classes) + ", configuration expects D=" +
                    std::to_string(want.input) + " H=" + std::to_string(want.hidden) +
                    " N=" + std::to_string(want.classes));
  }
}

CsvTable read_csv(const fs::path& path) {
  auto is = open_in(path);
  CsvTable t;
  std::string line;
  if (!read_line(is, line)) throw Error(ErrorCode::MalformedRecord, path.string() + ": empty file");
  for (auto f : split_fields(line)) t.header.emplace_back(f);
  int n = 1;
  while (read_line(is, line)) {
    ++n;
    const auto fields = split_fields(line);
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(n) + ": expected " +
                                                  std::to_string(t.header.size()) + " fields");
    }
    t.rows.emplace_back(fields.begin(), fields.end());
  }
  return t;
}

void write_confusion_csv(const fs::path& path, const MetricsReport& report) {
  auto os = open_out(path);
  os << "truth\\predicted";
  for (const auto& name : report.class_names) os << ',' << name;
  os << '\n';
  for (int t = 0; t < report.confusion.classes(); ++t) {
    os << report.class_names[static_cast<std::size_t>(t)];
    for (int p = 0; p < report.confusion.classes(); ++p) os << ',' << report.confusion.at(t, p);
    os << '\n';
  }
  finish(os, path);
}

ConfusionMatrix read_confusion_csv(const fs::path& path, std::vector<std::string>* names) {
  const CsvTable t = read_csv(path);
  const auto n = static_cast<int>(t.header.size()) - 1;
  if (n < 1 || static_cast<int>(t.rows.size()) != n) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": confusion matrix is not square");
  }
  ConfusionMatrix cm(n);
  for (int r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    if (row[0] != t.header[static_cast<std::size_t>(r) + 1]) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ": row labels do not match the header");
    }
    for (int c = 0; c < n; ++c) {
      const long count = parse_integer(row[static_cast<std::size_t>(c) + 1], path.string());
      for (long k = 0; k < count; ++k) cm.add(r, c);
    }
  }
  if (names != nullptr) names->assign(t.header.begin() + 1, t.header.end());
  return cm;
}

void write_class_metrics_csv(const fs::path& path, const MetricsReport& report) {
  auto os = open_out(path);
  os << "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    os << report.class_names[c] << ',' << format_double(m.precision) << ',' << format_double(m.recall) << ','
       << format_double(m.f1) << ',' << m.support << '\n';
  }
  finish(os, path);
}

void write_history_csv(const fs::path& path, std::span<const EpochRecord> history) {
  auto os = open_out(path);
  os << "epoch,train_loss,val_accuracy,lr\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_accuracy) << ','
       << format_double(r.lr) << '\n';
  }
  finish(os, path);
}

std::vector<EpochRecord> read_history_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"epoch", "train_loss", "val_accuracy", "lr"}) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": not a history file");
  }
  std::vector<EpochRecord> out;
  const std::string where = path.string();
  for (const auto& row : t.rows) {
    out.push_back({static_cast<int>(parse_integer(row[0], where)), parse_double(row[1], where),
                   parse_double(row[2], where), parse_double(row[3], where)});
  }
  return out;
}

void write_time_diagram_csv(const fs::path& path, const TimeDiagram& diagram) {
  auto os = open_out(path);
  os << "frame,truth,predicted,hit\n";
  for (const auto& r : diagram.records) {
    os << r.frame << ',' << r.truth << ',' << r.predicted << ',' << (r.hit ? 1 : 0) << '\n';
  }
  finish(os, path);
}

void write_repeats_csv(const fs::path& path, const RepeatReport& report) {
  auto os = open_out(path);
  os << "run,seed,peak_val_accuracy\n";
  for (std::size_t i = 0; i < report.peaks.size(); ++i) {
    os << i << ',' << report.seeds[i] << ',' << format_double(report.peaks[i]) << '\n';
  }
  finish(os, path);
}

void write_sweep_csv(const fs::path& path, std::span<const SweepRow> rows) {
  auto os = open_out(path);
  os << "run,setting,epoch,metric,value\n";
  for (const auto& r : rows) {
    os << r.run << ',' << r.setting << ',' << r.epoch << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
  finish(os, path);
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"run", "setting", "epoch", "metric", "value"}) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": not a sweep file");
  }
  std::vector<SweepRow> out;
  const std::string where = path.string();
  for (const auto& row : t.rows) {
    out.push_back({static_cast<int>(parse_integer(row[0], where)), row[1],
                   static_cast<int>(parse_integer(row[2], where)), row[3], parse_double(row[4], where)});
  }
  return out;
}

}  // namespace egogest
