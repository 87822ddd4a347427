#include "diffmia/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "diffmia/error.hpp"
#include "diffmia/schedule.hpp"

namespace diffmia {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  require(res.ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("parse_double: invalid number '" + s + "'");
  }
  return v;
}

namespace {

std::int64_t parse_i64(const std::string& s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("invalid integer '" + s + "'");
  }
  return v;
}

}  // namespace

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, std::int64_t v) {
  const auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(char((u >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct ByteReader {
  const std::string& data;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > data.size()) {
      throw DataError(std::string("truncated file while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= std::uint32_t(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::int64_t i64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= std::uint64_t(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 8;
    return static_cast<std::int64_t>(v);
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
  void expect_eof(const char* what) {
    if (pos != data.size()) {
      throw DataError(std::string("trailing bytes in ") + what);
    }
  }
};

void write_binary_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path);
}

std::string read_binary_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in " + what);
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> read_csv(const std::string& path,
                                  const std::string& expected_header) {
  std::istringstream in(read_binary_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) {
    throw DataError("unexpected CSV header in " + path + ": '" + line + "'");
  }
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  write_binary_file(path, content);
}

std::string read_text_file(const std::string& path) {
  return read_binary_file(path);
}

// --- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  require(ckpt.net.finite(), "save_checkpoint: non-finite parameters");
  require(ckpt.schedule.T >= 1, "save_checkpoint: empty schedule");

  json manifest;
  manifest["net"] = {{"pixels", ckpt.net.cfg.pixels},
                     {"embed_width", ckpt.net.cfg.embed_width},
                     {"hidden", ckpt.net.cfg.hidden},
                     {"activation", activation_name(ckpt.net.cfg.activation)}};
  manifest["schedule"] = {{"T", ckpt.schedule.T},
                          {"beta_start", ckpt.schedule.betas.front()},
                          {"beta_end", ckpt.schedule.betas.back()}};
  manifest["meta"] = {
      {"epochs", ckpt.meta.epochs},
      {"train_set_size", ckpt.meta.train_set_size},
      {"seed", ckpt.meta.seed},
      {"passes_per_datapoint", ckpt.meta.passes_per_datapoint}};
  const std::string mtext = manifest.dump();

  std::string out;
  out += "CMKM";
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(mtext.size()));
  out += mtext;
  for (int l = 0; l < ckpt.net.n_layers(); ++l) {
    const Eigen::MatrixXd& W = ckpt.net.W[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        put_f32(out, static_cast<float>(W(r, c)));
      }
    }
    for (Eigen::Index i = 0; i < ckpt.net.b[l].size(); ++i) {
      put_f32(out, static_cast<float>(ckpt.net.b[l][i]));
    }
  }
  write_binary_file(path, out);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  const std::string data = read_binary_file(path);
  ByteReader rd{data};
  if (rd.bytes(4, "magic") != "CMKM") {
    throw DataError("not a model checkpoint: " + path);
  }
  if (rd.u32("version") != kFormatVersion) {
    throw DataError("unsupported checkpoint version in " + path);
  }
  const std::uint32_t mlen = rd.u32("manifest length");
  const json manifest = parse_json(rd.bytes(mlen, "manifest"), path);

  ModelCheckpoint ckpt;
  try {
    const json& jn = manifest.at("net");
    NetConfig cfg;
    cfg.pixels = jn.at("pixels").get<int>();
    cfg.embed_width = jn.at("embed_width").get<int>();
    cfg.hidden = jn.at("hidden").get<std::vector<int>>();
    cfg.activation = activation_from_name(jn.at("activation").get<std::string>());

    const json& js = manifest.at("schedule");
    ckpt.schedule = build_linear_schedule(js.at("T").get<int>(),
                                          js.at("beta_start").get<double>(),
                                          js.at("beta_end").get<double>());

    const json& jm = manifest.at("meta");
    ckpt.meta.epochs = jm.at("epochs").get<int>();
    ckpt.meta.train_set_size = jm.at("train_set_size").get<int>();
    ckpt.meta.seed = jm.at("seed").get<std::uint64_t>();
    ckpt.meta.passes_per_datapoint = jm.at("passes_per_datapoint").get<int>();

    ckpt.net.cfg = cfg;
    const std::vector<int> dims = cfg.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      ckpt.net.W.emplace_back(dims[l], dims[l + 1]);
      ckpt.net.b.emplace_back(dims[l + 1]);
    }
  } catch (const json::exception& e) {
    throw DataError("bad checkpoint manifest in " + path + ": " + e.what());
  }

  for (int l = 0; l < ckpt.net.n_layers(); ++l) {
    Eigen::MatrixXd& W = ckpt.net.W[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        W(r, c) = rd.f32("weights");
      }
    }
    for (Eigen::Index i = 0; i < ckpt.net.b[l].size(); ++i) {
      ckpt.net.b[l][i] = rd.f32("biases");
    }
  }
  rd.expect_eof(path.c_str());
  if (!ckpt.net.finite()) {
    throw DataError("non-finite parameters in " + path);
  }
  return ckpt;
}

// --- splits ----------------------------------------------------------------

json spec_to_json(const DistributionSpec& spec) {
  return json{{"family", spec.family},
              {"smoothness", spec.smoothness},
              {"mean", spec.mean},
              {"contrast", spec.contrast},
              {"blob_mean", spec.blob_mean},
              {"blob_amp", spec.blob_amp},
              {"blob_min", spec.blob_min},
              {"blob_max", spec.blob_max},
              {"shift_delta", spec.shift_delta}};
}

DistributionSpec spec_from_json(const json& j) {
  DistributionSpec spec;
  try {
    spec.family = j.at("family").get<std::string>();
    spec.smoothness = j.at("smoothness").get<double>();
    spec.mean = j.at("mean").get<double>();
    spec.contrast = j.at("contrast").get<double>();
    spec.blob_mean = j.at("blob_mean").get<double>();
    spec.blob_amp = j.at("blob_amp").get<double>();
    spec.blob_min = j.at("blob_min").get<int>();
    spec.blob_max = j.at("blob_max").get<int>();
    spec.shift_delta = j.at("shift_delta").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad distribution spec: ") + e.what());
  }
  return spec;
}

namespace {

void append_samples(std::string& out, const std::vector<ImageSample>& list,
                    int pixels) {
  for (const ImageSample& s : list) {
    require(s.pixels.size() == pixels, "save_split: pixel count mismatch");
    put_i64(out, s.id);
    for (int i = 0; i < pixels; ++i) {
      put_f32(out, static_cast<float>(s.pixels[i]));
    }
  }
}

void append_manifest_rows(std::string& csv, const std::vector<ImageSample>& list,
                          const char* split, const char* role) {
  for (const ImageSample& s : list) {
    csv += std::to_string(s.id);
    csv += ',';
    csv += split;
    csv += ',';
    csv += role;
    csv += '\n';
  }
}

}  // namespace

void save_split(const std::string& dir, const BenchmarkSplit& split) {
  fs::create_directories(dir);
  const int pixels = split.H * split.W;

  json manifest;
  manifest["H"] = split.H;
  manifest["W"] = split.W;
  manifest["seed"] = split.seed;
  manifest["member_spec"] = spec_to_json(split.member_spec);
  manifest["nonmember_spec"] = spec_to_json(split.nonmember_spec);
  manifest["counts"] = {
      {"train", split.train_set.size()},
      {"nonmembers_val", split.nonmembers_val.size()},
      {"nonmembers_test", split.nonmembers_test.size()}};
  const std::string mtext = manifest.dump();

  std::string out;
  out += "CMKD";
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(mtext.size()));
  out += mtext;
  append_samples(out, split.train_set, pixels);
  append_samples(out, split.nonmembers_val, pixels);
  append_samples(out, split.nonmembers_test, pixels);
  write_binary_file((fs::path(dir) / "data.cmkd").string(), out);

  write_text_file((fs::path(dir) / "data.json").string(), manifest.dump(2) + "\n");

  std::string csv = "id,split,role\n";
  append_manifest_rows(csv, split.train_set, "train", "member");
  append_manifest_rows(csv, split.members_val, "val", "member");
  append_manifest_rows(csv, split.nonmembers_val, "val", "nonmember");
  append_manifest_rows(csv, split.members_test, "test", "member");
  append_manifest_rows(csv, split.nonmembers_test, "test", "nonmember");
  write_text_file((fs::path(dir) / "manifest.csv").string(), csv);
}

BenchmarkSplit load_split(const std::string& dir) {
  const std::string data =
      read_binary_file((fs::path(dir) / "data.cmkd").string());
  ByteReader rd{data};
  if (rd.bytes(4, "magic") != "CMKD") {
    throw DataError("not a dataset file in " + dir);
  }
  if (rd.u32("version") != kFormatVersion) {
    throw DataError("unsupported dataset version in " + dir);
  }
  const std::uint32_t mlen = rd.u32("manifest length");
  const json manifest = parse_json(rd.bytes(mlen, "manifest"), dir);

  BenchmarkSplit split;
  std::size_t n_train = 0, n_nv = 0, n_nt = 0;
  try {
    split.H = manifest.at("H").get<int>();
    split.W = manifest.at("W").get<int>();
    split.seed = manifest.at("seed").get<std::uint64_t>();
    split.member_spec = spec_from_json(manifest.at("member_spec"));
    split.nonmember_spec = spec_from_json(manifest.at("nonmember_spec"));
    n_train = manifest.at("counts").at("train").get<std::size_t>();
    n_nv = manifest.at("counts").at("nonmembers_val").get<std::size_t>();
    n_nt = manifest.at("counts").at("nonmembers_test").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError("bad dataset manifest in " + dir + ": " + e.what());
  }

  const int pixels = split.H * split.W;
  std::unordered_map<std::int64_t, ImageSample> by_id;
  const auto read_list = [&](std::size_t n, const std::string& family) {
    std::vector<ImageSample> list;
    list.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ImageSample s;
      s.id = rd.i64("sample id");
      s.source = family;
      s.pixels.resize(pixels);
      for (int p = 0; p < pixels; ++p) s.pixels[p] = rd.f32("pixels");
      by_id[s.id] = s;
      list.push_back(std::move(s));
    }
    return list;
  };
  split.train_set = read_list(n_train, split.member_spec.family);
  split.nonmembers_val = read_list(n_nv, split.nonmember_spec.family);
  split.nonmembers_test = read_list(n_nt, split.nonmember_spec.family);
  rd.expect_eof(dir.c_str());

  const auto rows = read_csv((fs::path(dir) / "manifest.csv").string(),
                             "id,split,role");
  for (const std::string& row : rows) {
    const auto cols = split_csv_line(row);
    if (cols.size() != 3) throw DataError("bad manifest row: " + row);
    const std::int64_t id = parse_i64(cols[0]);
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("manifest references unknown sample id " + cols[0]);
    }
    if (cols[1] == "train") continue;  // train list comes from the binary
    std::vector<ImageSample>* dst = nullptr;
    if (cols[1] == "val") {
      dst = (cols[2] == "member") ? &split.members_val : &split.nonmembers_val;
    } else if (cols[1] == "test") {
      dst = (cols[2] == "member") ? &split.members_test
                                  : &split.nonmembers_test;
    } else {
      throw DataError("bad split column in manifest row: " + row);
    }
    if (cols[2] == "member") dst->push_back(it->second);
    // Non-member rows are already materialized from the binary; verify only.
  }
  return split;
}

// --- scores & features -----------------------------------------------------

void save_scores(const std::string& path, const ScoreSet& scores) {
  std::string csv = "sample_id,score,label\n";
  for (const MiaScore& e : scores.entries) {
    csv += std::to_string(e.sample_id);
    csv += ',';
    csv += format_double(e.score);
    csv += ',';
    csv += std::to_string(e.label);
    csv += '\n';
  }
  write_text_file(path, csv);
}

ScoreSet load_scores(const std::string& path, const std::string& method,
                     const std::string& setup) {
  ScoreSet out;
  out.method = method;
  out.setup = setup;
  const auto rows = read_csv(path, "sample_id,score,label");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      const auto cols = split_csv_line(rows[i]);
      if (cols.size() != 3) throw DataError("wrong column count");
      MiaScore e;
      e.sample_id = parse_i64(cols[0]);
      e.score = parse_double(cols[1]);
      e.label = static_cast<int>(parse_i64(cols[2]));
      out.entries.push_back(e);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(i + 2) + ": " + e.what());
    }
  }
  return out;
}

void save_features(const std::string& path,
                   const std::vector<FeatureVector>& feats) {
  require(!feats.empty(), "save_features: empty feature list");
  const std::size_t k = feats.front().values.size();
  std::string csv = "sample_id,label";
  for (std::size_t j = 0; j < k; ++j) {
    csv += ",f" + std::to_string(j);
  }
  csv += '\n';
  for (const FeatureVector& fv : feats) {
    require(fv.values.size() == k, "save_features: ragged feature vectors");
    csv += std::to_string(fv.sample_id);
    csv += ',';
    csv += std::to_string(fv.label);
    for (double v : fv.values) {
      csv += ',';
      csv += format_double(v);
    }
    csv += '\n';
  }
  write_text_file(path, csv);
}

std::vector<FeatureVector> load_features(const std::string& path,
                                         const std::string& schema_id) {
  std::istringstream in(read_text_file(path));
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty CSV: " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto hcols = split_csv_line(header);
  if (hcols.size() < 3 || hcols[0] != "sample_id" || hcols[1] != "label") {
    throw DataError("unexpected feature CSV header in " + path);
  }
  for (std::size_t j = 2; j < hcols.size(); ++j) {
    if (hcols[j] != "f" + std::to_string(j - 2)) {
      throw DataError("unexpected feature column '" + hcols[j] + "' in " +
                      path);
    }
  }

  std::vector<FeatureVector> out;
  std::string row;
  int line = 1;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    try {
      const auto cols = split_csv_line(row);
      if (cols.size() != hcols.size()) throw DataError("wrong column count");
      FeatureVector fv;
      fv.sample_id = parse_i64(cols[0]);
      fv.label = static_cast<int>(parse_i64(cols[1]));
      fv.schema_id = schema_id;
      for (std::size_t j = 2; j < cols.size(); ++j) {
        fv.values.push_back(parse_double(cols[j]));
      }
      out.push_back(std::move(fv));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

// --- eval reports ----------------------------------------------------------

json eval_report_to_json(const EvalReport& rep) {
  json j;
  j["method"] = rep.method;
  j["setup"] = rep.setup;
  j["val"] = {{"tpr_at_1pct", rep.val_tpr_at_1pct},
              {"tpr_at_01pct", rep.val_tpr_at_01pct},
              {"auc", rep.val_auc},
              {"tau_1pct", rep.tau_1pct},
              {"tau_01pct", rep.tau_01pct}};
  j["test"] = {{"tpr_1pct", rep.test_tpr_1pct},
               {"fpr_1pct", rep.test_fpr_1pct},
               {"tpr_01pct", rep.test_tpr_01pct},
               {"fpr_01pct", rep.test_fpr_01pct}};
  j["flags"] = rep.flags;
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport rep;
  try {
    rep.method = j.at("method").get<std::string>();
    rep.setup = j.at("setup").get<std::string>();
    const json& v = j.at("val");
    rep.val_tpr_at_1pct = v.at("tpr_at_1pct").get<double>();
    rep.val_tpr_at_01pct = v.at("tpr_at_01pct").get<double>();
    rep.val_auc = v.at("auc").get<double>();
    rep.tau_1pct = v.at("tau_1pct").get<double>();
    rep.tau_01pct = v.at("tau_01pct").get<double>();
    const json& t = j.at("test");
    rep.test_tpr_1pct = t.at("tpr_1pct").get<double>();
    rep.test_fpr_1pct = t.at("fpr_1pct").get<double>();
    rep.test_tpr_01pct = t.at("tpr_01pct").get<double>();
    rep.test_fpr_01pct = t.at("fpr_01pct").get<double>();
    rep.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad eval report: ") + e.what());
  }
  return rep;
}

void save_eval_report(const std::string& path, const EvalReport& rep) {
  write_text_file(path, eval_report_to_json(rep).dump(2) + "\n");
}

EvalReport load_eval_report(const std::string& path) {
  return eval_report_from_json(parse_json(read_text_file(path), path));
}

}  // namespace diffmia
