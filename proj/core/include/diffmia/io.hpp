#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "diffmia/data.hpp"
#include "diffmia/eval.hpp"
#include "diffmia/train.hpp"

namespace diffmia {

// Shortest round-trip decimal formatting (used by every CSV/JSON writer so
// artifacts are byte-stable across runs).
std::string format_double(double v);
double parse_double(const std::string& s);

// --- model checkpoints -----------------------------------------------------
// Binary layout: magic "CMKM", u32 version, u32 manifest length, JSON
// manifest (net config, schedule endpoints, training meta), then float32
// little-endian parameters: per layer W row-major, then b.
// Parameters round-trip through float32; loading then saving is
// byte-identical.
void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);

// --- benchmark splits ------------------------------------------------------
// A split directory holds:
//   data.cmkd     magic "CMKD" binary: manifest + unique samples (train set,
//                 then val/test non-members) as i64 id + float32 pixels
//   data.json     the same manifest as a readable sidecar
//   manifest.csv  one row per usage: id,split,role with split in
//                 {train,val,test} and role in {member,nonmember}
void save_split(const std::string& dir, const BenchmarkSplit& split);
BenchmarkSplit load_split(const std::string& dir);

// --- attack artifacts ------------------------------------------------------
// Score CSV header: sample_id,score,label
void save_scores(const std::string& path, const ScoreSet& scores);
ScoreSet load_scores(const std::string& path, const std::string& method = "",
                     const std::string& setup = "");

// Feature CSV header: sample_id,label,f0,...,fK
void save_features(const std::string& path,
                   const std::vector<FeatureVector>& feats);
std::vector<FeatureVector> load_features(const std::string& path,
                                         const std::string& schema_id = "");

// --- evaluation reports ----------------------------------------------------
nlohmann::json eval_report_to_json(const EvalReport& rep);
EvalReport eval_report_from_json(const nlohmann::json& j);
void save_eval_report(const std::string& path, const EvalReport& rep);
EvalReport load_eval_report(const std::string& path);

// --- shared JSON helpers ---------------------------------------------------
nlohmann::json spec_to_json(const DistributionSpec& spec);
DistributionSpec spec_from_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace diffmia
