// SPDX-License-Identifier: Apache-2.0
#include "sul/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "sul/error.hpp"

namespace sul {

namespace {
using nlohmann::json;
}

std::string checkpoint_to_json(const ModelState& state, const Provenance& prov) {
  json doc;
  doc["arch"] = {{"d", state.arch.d}, {"h", state.arch.h}, {"c", state.arch.c}};
  doc["backbone"] = {{"w1", state.backbone.w1}, {"b1", state.backbone.b1}};
  doc["head"] = {{"w2", state.head.w2}, {"b2", state.head.b2}};
  json p;
  p["stage"] = prov.stage;
  p["seed"] = prov.seed;
  if (!prov.forget_subjects.empty()) p["forget_set"] = prov.forget_subjects;
  if (!prov.forget_set_hash.empty()) p["forget_set_hash"] = prov.forget_set_hash;
  doc["provenance"] = p;
  return doc.dump(2);
}

void save_checkpoint(const std::string& path, const ModelState& state, const Provenance& prov) {
  std::ofstream out(path);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << checkpoint_to_json(state, prov) << "\n";
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

Checkpoint checkpoint_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::Ingest, std::string("checkpoint parse error: ") + e.what());
  }
  try {
    Checkpoint ck;
    ck.state.arch.d = doc.at("arch").at("d").get<int>();
    ck.state.arch.h = doc.at("arch").at("h").get<int>();
    ck.state.arch.c = doc.at("arch").at("c").get<int>();
    ck.state.backbone.w1 = doc.at("backbone").at("w1").get<std::vector<double>>();
    ck.state.backbone.b1 = doc.at("backbone").at("b1").get<std::vector<double>>();
    ck.state.head.w2 = doc.at("head").at("w2").get<std::vector<double>>();
    ck.state.head.b2 = doc.at("head").at("b2").get<std::vector<double>>();
    const json& p = doc.at("provenance");
    ck.provenance.stage = p.at("stage").get<std::string>();
    ck.provenance.seed = p.at("seed").get<std::uint64_t>();
    if (p.contains("forget_set"))
      ck.provenance.forget_subjects = p.at("forget_set").get<std::vector<std::string>>();
    if (p.contains("forget_set_hash"))
      ck.provenance.forget_set_hash = p.at("forget_set_hash").get<std::string>();

    const auto& arch = ck.state.arch;
    if (ck.state.backbone.w1.size() !=
            static_cast<std::size_t>(arch.d) * static_cast<std::size_t>(arch.h) ||
        ck.state.backbone.b1.size() != static_cast<std::size_t>(arch.h) ||
        ck.state.head.w2.size() !=
            static_cast<std::size_t>(arch.h) * static_cast<std::size_t>(arch.c) ||
        ck.state.head.b2.size() != static_cast<std::size_t>(arch.c))
      raise(ErrorCode::Arch, "checkpoint arrays disagree with arch");
    return ck;
  } catch (const json::exception& e) {
    raise(ErrorCode::Ingest, std::string("checkpoint field error: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::Io, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

void save_ledger(const std::string& path, const ComputeLedger& ledger) {
  json doc;
  doc["gradient_steps"] = ledger.gradient_steps;
  doc["clips_processed"] = ledger.clips_processed;
  doc["wall_seconds"] = ledger.wall_seconds;
  std::ofstream out(path);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << doc.dump(2) << "\n";
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

ComputeLedger load_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::Io, "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::Ingest, std::string("ledger parse error: ") + e.what());
  }
  try {
    ComputeLedger ledger;
    ledger.gradient_steps = doc.at("gradient_steps").get<std::uint64_t>();
    ledger.clips_processed = doc.at("clips_processed").get<std::uint64_t>();
    ledger.wall_seconds = doc.at("wall_seconds").get<double>();
    return ledger;
  } catch (const json::exception& e) {
    raise(ErrorCode::Ingest, std::string("ledger field error: ") + e.what());
  }
}

}  // namespace sul
