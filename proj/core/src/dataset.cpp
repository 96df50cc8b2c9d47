#include "accelcal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "accelcal/errors.hpp"
#include "accelcal/rng.hpp"

namespace accelcal {

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Shortest round-trip representation of a double.
void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_field(std::string_view field, std::size_t line, const char* name) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError(std::string("ingest_csv: malformed ") + name + " field '" +
                         std::string(field) + "'",
                     line);
  }
  if (!std::isfinite(v)) {
    throw ParseError(std::string("ingest_csv: non-finite ") + name + " value", line);
  }
  return v;
}

}  // namespace

Recording ingest_csv(const std::filesystem::path& path, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("ingest_csv: sample rate must be positive");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("ingest_csv: cannot open " + path.string());

  Recording rec;
  rec.id = path.stem().string();
  rec.segment.sample_rate_hz = sample_rate_hz;

  std::string linebuf;
  std::size_t line = 0;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, linebuf)) {
    ++line;
    if (!linebuf.empty() && linebuf.back() == '\r') linebuf.pop_back();
    if (line == 1) {
      if (linebuf != "t,fx,fy,fz") {
        throw ParseError("ingest_csv: expected header 't,fx,fy,fz', got '" + linebuf + "'",
                         line);
      }
      continue;
    }
    if (linebuf.empty()) continue;

    std::array<std::string_view, 4> fields;
    std::string_view rest = linebuf;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto comma = rest.find(',');
      if (i < 3) {
        if (comma == std::string_view::npos) {
          throw ParseError("ingest_csv: expected 4 comma-separated fields", line);
        }
        fields[i] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      } else {
        if (comma != std::string_view::npos) {
          throw ParseError("ingest_csv: expected 4 comma-separated fields", line);
        }
        fields[i] = rest;
      }
    }

    const double t = parse_field(fields[0], line, "t");
    if (t <= prev_t) throw ParseError("ingest_csv: non-monotonic time", line);
    prev_t = t;
    rec.segment.samples.push_back({parse_field(fields[1], line, "fx"),
                                   parse_field(fields[2], line, "fy"),
                                   parse_field(fields[3], line, "fz")});
  }
  if (rec.segment.samples.empty()) {
    throw ParseError("ingest_csv: no samples in " + path.string(), line == 0 ? 1 : line);
  }
  return rec;
}

void export_csv(const SignalSegment& segment, const std::filesystem::path& path) {
  std::string out;
  out.reserve(64 * segment.samples.size() + 16);
  out += "t,fx,fy,fz\n";
  for (std::size_t i = 0; i < segment.samples.size(); ++i) {
    append_double(out, static_cast<double>(i) / segment.sample_rate_hz);
    out += ',';
    append_double(out, segment.samples[i].x);
    out += ',';
    append_double(out, segment.samples[i].y);
    out += ',';
    append_double(out, segment.samples[i].z);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("export_csv: cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("export_csv: write failed for " + path.string());
}

ConvergenceResult detect_convergence(const SignalSegment& segment, std::size_t axis,
                                     double threshold, std::size_t window) {
  if (axis > 2) throw std::invalid_argument("detect_convergence: axis must be 0, 1, or 2");
  if (window < 1) throw std::invalid_argument("detect_convergence: window must be >= 1");
  const std::size_t t_len = segment.size();
  if (t_len <= window) {
    throw InsufficientDataError("detect_convergence: segment length " +
                                std::to_string(t_len) + " must exceed window " +
                                std::to_string(window));
  }

  ConvergenceResult result;
  result.running_mean_trace.resize(t_len);
  double acc = 0.0;
  for (std::size_t i = 0; i < t_len; ++i) {
    acc += segment.samples[i][axis];
    result.running_mean_trace[i] = acc / static_cast<double>(i + 1);
  }
  const auto& mu = result.running_mean_trace;

  // Numerical derivative of the running mean: one-sided at the first point,
  // central differences in the interior. The derivative at index j (0-based)
  // needs mu[j+1], so at scan position k samples the usable derivatives end
  // at j = k-2. Convergence is the first k with `window` consecutive
  // below-threshold derivatives.
  std::size_t run = 0;
  for (std::size_t j = 0; j + 1 < t_len; ++j) {
    const double d = (j == 0) ? (mu[1] - mu[0]) : 0.5 * (mu[j + 1] - mu[j - 1]);
    if (std::abs(d) < threshold) {
      ++run;
      if (run >= window) {
        result.converged = true;
        result.converged_at_sample = j + 2;  // sample count consumed (1-based)
        return result;
      }
    } else {
      run = 0;
    }
  }
  return result;
}

BiasVector label_bias(const Recording& recording, const OrientationAngles& known_orientation,
                      double g, std::size_t skip) {
  const std::size_t t_len = recording.segment.size();
  if (t_len <= skip) {
    throw InsufficientDataError("label_bias: need more than " + std::to_string(skip) +
                                " samples, got " + std::to_string(t_len));
  }
  Vec3 sum{};
  for (std::size_t i = skip; i < t_len; ++i) sum += recording.segment.samples[i];
  const Vec3 mean = sum / static_cast<double>(t_len - skip);
  return mean - gravity_projection(known_orientation, g);
}

SignalSegment align_by_reference(const SignalSegment& segment,
                                 const Vec3& reference_gravity_direction) {
  const Vec3& r = reference_gravity_direction;
  const double n = norm(r);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw std::invalid_argument("align_by_reference: reference direction must be unit length");
  }
  const Vec3 u = r / n;
  const Vec3 target{0.0, 0.0, -1.0};
  const double c = dot(u, target);

  Mat3 rot;
  if (c <= -1.0 + 1e-9) {
    // Antiparallel: rotate half a turn about the x-axis.
    rot.m = {{{1.0, 0.0, 0.0}, {0.0, -1.0, 0.0}, {0.0, 0.0, -1.0}}};
  } else {
    const Vec3 v = cross(u, target);  // |v| = sin(angle)
    Mat3 k;
    k.m = {{{0.0, -v.z, v.y}, {v.z, 0.0, -v.x}, {-v.y, v.x, 0.0}}};
    const Mat3 k2 = k * k;
    rot = Mat3::identity();
    const double scale = 1.0 / (1.0 + c);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) rot(i, j) += k(i, j) + scale * k2(i, j);
  }

  SignalSegment out;
  out.sample_rate_hz = segment.sample_rate_hz;
  out.samples.reserve(segment.samples.size());
  for (const Vec3& s : segment.samples) out.samples.push_back(rot * s);
  return out;
}

std::vector<WindowedExample> window_recording(const Recording& recording,
                                              std::size_t window_len) {
  if (window_len < 1) throw std::invalid_argument("window_recording: window must be >= 1");
  if (!recording.label_bias) {
    throw StateError("window_recording: recording '" + recording.id + "' is unlabeled");
  }
  const std::size_t count = recording.segment.size() / window_len;
  std::vector<WindowedExample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    WindowedExample ex;
    ex.target = *recording.label_bias;
    ex.window.assign(recording.segment.samples.begin() + static_cast<long>(w * window_len),
                     recording.segment.samples.begin() + static_cast<long>((w + 1) * window_len));
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<FoldSplit> make_folds(const std::vector<std::string>& recording_ids,
                                  std::size_t k, double test_fraction, std::uint64_t seed,
                                  const std::vector<std::string>& device_of) {
  const std::size_t n = recording_ids.size();
  if (k < 2) throw std::invalid_argument("make_folds: need k >= 2 folds");
  const auto per_fold = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  if (per_fold < 1 || k * per_fold > n) {
    throw std::invalid_argument("make_folds: test fraction " + std::to_string(test_fraction) +
                                " infeasible for " + std::to_string(n) + " recordings");
  }
  if (!device_of.empty() && device_of.size() != n) {
    throw std::invalid_argument("make_folds: device list size mismatch");
  }

  SplitMix64 rng(derive_seed(seed, "folds"));
  const auto shuffle = [&rng](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.next_below(i)]);
    }
  };

  // Build the held-out pool order. With device labels the recordings are
  // dealt round-robin across devices so each fold tests a balanced subset
  // from every sensor.
  std::vector<std::size_t> order;
  order.reserve(n);
  if (device_of.empty()) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order);
  } else {
    std::vector<std::string> devices;
    for (const auto& d : device_of) {
      if (std::find(devices.begin(), devices.end(), d) == devices.end()) devices.push_back(d);
    }
    std::vector<std::vector<std::size_t>> per_device(devices.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = static_cast<std::size_t>(
          std::find(devices.begin(), devices.end(), device_of[i]) - devices.begin());
      per_device[d].push_back(i);
    }
    for (auto& group : per_device) shuffle(group);
    for (std::size_t round = 0; order.size() < n; ++round) {
      for (const auto& group : per_device) {
        if (round < group.size()) order.push_back(group[round]);
      }
    }
  }

  std::vector<FoldSplit> folds(k);
  std::vector<char> in_test(n, 0);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].fold_index = f;
    std::fill(in_test.begin(), in_test.end(), 0);
    for (std::size_t j = f * per_fold; j < (f + 1) * per_fold; ++j) in_test[order[j]] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      (in_test[i] ? folds[f].test_ids : folds[f].train_ids).push_back(recording_ids[i]);
    }
  }
  return folds;
}

SynthesisConfig gravity_aligned_config(std::uint64_t seed) {
  SynthesisConfig c;
  c.devices = 4;
  c.recordings_per_device = 100;
  c.power_cycle_group = 1;
  c.leveled = true;
  c.seed = seed;
  return c;
}

SynthesisConfig rotated_config(std::uint64_t seed) {
  SynthesisConfig c;
  c.devices = 1;
  c.recordings_per_device = 87;
  c.power_cycle_group = 3;
  c.leveled = false;
  c.seed = seed;
  return c;
}

std::vector<Recording> generate_dataset(const SynthesisConfig& config) {
  if (config.devices < 1 || config.recordings_per_device < 1 || config.power_cycle_group < 1) {
    throw std::invalid_argument("generate_dataset: counts must be >= 1");
  }
  const auto n_samples = static_cast<std::size_t>(
      std::llround(config.duration_s * config.sample_rate_hz));

  std::vector<Recording> recordings;
  recordings.reserve(config.devices * config.recordings_per_device);

  char buf[64];
  for (std::size_t d = 0; d < config.devices; ++d) {
    Vec3 device_offset{};
    if (config.bias_mode == BiasMode::kDeviceAnchored) {
      SplitMix64 rng(derive_seed(config.seed, "device-offset", d));
      for (std::size_t a = 0; a < 3; ++a) {
        device_offset[a] = rng.next_uniform(-config.bias_range, config.bias_range);
      }
    }
    for (std::size_t r = 0; r < config.recordings_per_device; ++r) {
      const std::size_t cycle = r / config.power_cycle_group;

      BiasVector bias = device_offset;
      {
        SplitMix64 rng(derive_seed(config.seed, "turn-on-bias", d, cycle));
        for (std::size_t a = 0; a < 3; ++a) {
          if (config.bias_mode == BiasMode::kDeviceAnchored) {
            bias[a] += config.turn_on_sigma * rng.next_gaussian();
          } else {
            bias[a] = rng.next_uniform(-config.bias_range, config.bias_range);
          }
        }
      }

      OrientationAngles angles{};
      if (!config.leveled) {
        SplitMix64 rng(derive_seed(config.seed, "orientation", d, r));
        angles.roll_phi = rng.next_uniform(config.roll_min_deg, config.roll_max_deg) * kDegToRad;
        angles.pitch_theta =
            rng.next_uniform(config.pitch_min_deg, config.pitch_max_deg) * kDegToRad;
        angles.yaw_psi = rng.next_uniform(-180.0, 180.0) * kDegToRad;
      }

      Recording rec;
      const std::size_t index = recordings.size();
      std::snprintf(buf, sizeof(buf), "rec%04zu", index);
      rec.id = buf;
      std::snprintf(buf, sizeof(buf), "dev%zu", d);
      rec.device_id = buf;
      std::snprintf(buf, sizeof(buf), "dev%zu_pc%04zu", d, cycle);
      rec.power_cycle_id = buf;
      rec.seed = derive_seed(config.seed, "noise", d, r);
      rec.true_orientation = angles;
      rec.true_bias = bias;
      rec.segment = simulate_segment(angles, bias, {config.sigma, rec.seed}, n_samples,
                                     config.sample_rate_hz, config.g);
      recordings.push_back(std::move(rec));
    }
  }
  return recordings;
}

namespace {

json manifest_to_json(const std::vector<Recording>& recordings,
                      const DatasetManifest& manifest) {
  json root;
  root["schema_version"] = manifest.schema_version;
  root["preset"] = manifest.preset;
  root["sample_rate_hz"] = manifest.sample_rate_hz;
  root["g"] = manifest.g;
  root["root_seed"] = manifest.root_seed;
  if (!manifest.config_json.empty()) root["config"] = json::parse(manifest.config_json);

  json recs = json::array();
  for (const Recording& r : recordings) {
    json j;
    j["id"] = r.id;
    j["device_id"] = r.device_id;
    j["power_cycle_id"] = r.power_cycle_id;
    j["seed"] = r.seed;
    j["file"] = r.id + ".csv";
    if (r.true_bias) j["true_bias"] = {r.true_bias->x, r.true_bias->y, r.true_bias->z};
    if (r.true_orientation) {
      j["true_orientation_deg"] = {r.true_orientation->roll_phi / kDegToRad,
                                   r.true_orientation->pitch_theta / kDegToRad,
                                   r.true_orientation->yaw_psi / kDegToRad};
    }
    if (r.label_bias) j["label_bias"] = {r.label_bias->x, r.label_bias->y, r.label_bias->z};
    recs.push_back(std::move(j));
  }
  root["recordings"] = std::move(recs);
  return root;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

void save_dataset(const std::vector<Recording>& recordings, const DatasetManifest& manifest,
                  const std::filesystem::path& dir, bool write_csv) {
  std::filesystem::create_directories(dir);
  if (write_csv) {
    for (const Recording& r : recordings) export_csv(r.segment, dir / (r.id + ".csv"));
  }
  write_json_file(manifest_to_json(recordings, manifest), dir / "manifest.json");
}

void update_manifest(const std::vector<Recording>& recordings, const DatasetManifest& manifest,
                     const std::filesystem::path& dir) {
  write_json_file(manifest_to_json(recordings, manifest), dir / "manifest.json");
}

std::pair<std::vector<Recording>, DatasetManifest> load_dataset(
    const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream f(manifest_path, std::ios::binary);
  if (!f) throw Error("load_dataset: cannot open " + manifest_path.string());
  json root = json::parse(f, nullptr, /*allow_exceptions=*/true);

  DatasetManifest manifest;
  manifest.schema_version = root.at("schema_version").get<int>();
  if (manifest.schema_version != 1) {
    throw Error("load_dataset: unsupported schema_version " +
                std::to_string(manifest.schema_version));
  }
  manifest.preset = root.value("preset", std::string{});
  manifest.sample_rate_hz = root.at("sample_rate_hz").get<double>();
  manifest.g = root.at("g").get<double>();
  manifest.root_seed = root.value("root_seed", std::uint64_t{0});
  if (root.contains("config")) manifest.config_json = root["config"].dump();

  std::vector<Recording> recordings;
  for (const json& j : root.at("recordings")) {
    Recording rec = ingest_csv(dir / j.at("file").get<std::string>(), manifest.sample_rate_hz);
    rec.id = j.at("id").get<std::string>();
    rec.device_id = j.at("device_id").get<std::string>();
    rec.power_cycle_id = j.at("power_cycle_id").get<std::string>();
    rec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("true_bias")) {
      const auto& b = j["true_bias"];
      rec.true_bias = Vec3{b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
    }
    if (j.contains("true_orientation_deg")) {
      const auto& o = j["true_orientation_deg"];
      rec.true_orientation = OrientationAngles{o[0].get<double>() * kDegToRad,
                                               o[1].get<double>() * kDegToRad,
                                               o[2].get<double>() * kDegToRad};
    }
    if (j.contains("label_bias")) {
      const auto& b = j["label_bias"];
      rec.label_bias = Vec3{b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
    }
    recordings.push_back(std::move(rec));
  }
  return {std::move(recordings), std::move(manifest)};
}

}  // namespace accelcal
