// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sul/error.hpp"
#include "sul/harness.hpp"

namespace sul {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const ConfigMap& map, const std::string& section)
      : section_(section) {
    auto it = map.find(section);
    if (it != map.end()) entries_ = &it->second;
  }

  bool present() const { return entries_ != nullptr; }

  bool has(const std::string& key) const { return entries_ && entries_->count(key); }

  std::string str(const std::string& key, const std::string& fallback = "") const {
    if (!has(key)) return fallback;
    return entries_->at(key);
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = entries_->at(key);
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      raise(ErrorCode::Config, "[" + section_ + "] " + key + ": expected integer, got '" + v + "'");
    return out;
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = entries_->at(key);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      raise(ErrorCode::Config, "[" + section_ + "] " + key + ": expected number, got '" + v + "'");
    return out;
  }

  std::vector<std::string> list(const std::string& key) const {
    if (!has(key)) return {};
    return split_list(entries_->at(key));
  }

  void allow_only(const std::set<std::string>& keys) const {
    if (!entries_) return;
    for (const auto& [k, v] : *entries_)
      if (!keys.count(k))
        raise(ErrorCode::Config, "[" + section_ + "] unknown key '" + k + "'");
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>* entries_ = nullptr;
};

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& name) {
  ConfigMap map;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        raise(ErrorCode::Config, where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        raise(ErrorCode::Config, where + ": empty section name");
      map[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::Config, where + ": expected key = value");
    if (section.empty())
      raise(ErrorCode::Config, where + ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      raise(ErrorCode::Config, where + ": empty key");
    if (!map[section].emplace(key, value).second)
      raise(ErrorCode::Config, where + ": duplicate key '" + key + "'");
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::Config, "cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

ScenarioConfig scenario_config_from_map(const ConfigMap& map) {
  for (const auto& [section, kv] : map) {
    static const std::set<std::string> known{"data",      "corruption", "model", "protocol",
                                             "unlearn",   "short_ft",   "scenario"};
    if (!known.count(section))
      raise(ErrorCode::Config, "unknown section [" + section + "]");
  }

  ScenarioConfig cfg;

  {
    SectionReader data(map, "data");
    data.allow_only({"source", "num_subjects", "clips_min", "clips_max", "feature_dim",
                     "num_classes", "class_separation", "seed", "csv_path", "csv_classes",
                     "eval_fraction"});
    const std::string source = data.str("source", "synthetic");
    if (source == "synthetic") {
      cfg.data.source = DataSource::Synthetic;
    } else if (source == "csv") {
      cfg.data.source = DataSource::Csv;
    } else {
      raise(ErrorCode::Config, "[data] source must be synthetic or csv");
    }
    cfg.data.gen.num_subjects = static_cast<int>(data.integer("num_subjects", cfg.data.gen.num_subjects));
    cfg.data.gen.clips_per_subject.min = static_cast<int>(data.integer("clips_min", cfg.data.gen.clips_per_subject.min));
    cfg.data.gen.clips_per_subject.max = static_cast<int>(data.integer("clips_max", cfg.data.gen.clips_per_subject.max));
    cfg.data.gen.feature_dim = static_cast<int>(data.integer("feature_dim", cfg.data.gen.feature_dim));
    cfg.data.gen.num_classes = static_cast<int>(data.integer("num_classes", cfg.data.gen.num_classes));
    cfg.data.gen.class_separation = data.real("class_separation", cfg.data.gen.class_separation);
    cfg.data.gen.seed = static_cast<std::uint64_t>(data.integer("seed", 0));
    cfg.data.csv_path = data.str("csv_path");
    cfg.data.csv_classes = static_cast<int>(data.integer("csv_classes", 0));
    cfg.data.eval_fraction = data.real("eval_fraction", cfg.data.eval_fraction);
    if (cfg.data.source == DataSource::Csv && cfg.data.csv_path.empty())
      raise(ErrorCode::Config, "[data] csv_path required when source = csv");
    if (!(cfg.data.eval_fraction > 0.0) || !(cfg.data.eval_fraction < 1.0))
      raise(ErrorCode::Config, "[data] eval_fraction must be in (0, 1)");
  }

  {
    SectionReader corr(map, "corruption");
    corr.allow_only({"num_targets", "target_ids", "flip_rate", "flip_mode", "feature_shift"});
    if (corr.present()) {
      cfg.corruption.enabled = true;
      cfg.corruption.num_targets = static_cast<int>(corr.integer("num_targets", 0));
      cfg.corruption.target_ids = corr.list("target_ids");
      cfg.corruption.profile.label_flip_rate = corr.real("flip_rate", 0.0);
      const std::string mode = corr.str("flip_mode", "uniform");
      if (mode == "uniform") {
        cfg.corruption.profile.flip_mode = FlipMode::UniformRandomOtherClass;
      } else if (mode.rfind("fixed:", 0) == 0) {
        cfg.corruption.profile.flip_mode = FlipMode::FixedTargetClass;
        const std::string cls = mode.substr(6);
        int target = 0;
        auto [ptr, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), target);
        if (ec != std::errc() || ptr != cls.data() + cls.size())
          raise(ErrorCode::Config, "[corruption] flip_mode fixed:<class> needs an integer class");
        cfg.corruption.profile.fixed_target_class = target;
      } else {
        raise(ErrorCode::Config, "[corruption] flip_mode must be uniform or fixed:<class>");
      }
      for (const std::string& tok : corr.list("feature_shift")) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          raise(ErrorCode::Config, "[corruption] feature_shift must be a comma list of numbers");
        cfg.corruption.profile.feature_shift.push_back(v);
      }
      if (cfg.corruption.num_targets < 0)
        raise(ErrorCode::Config, "[corruption] num_targets must be >= 0");
      if (cfg.corruption.target_ids.empty() && cfg.corruption.num_targets == 0)
        raise(ErrorCode::Config, "[corruption] needs num_targets or target_ids");
      if (!cfg.corruption.target_ids.empty() && cfg.corruption.num_targets > 0)
        raise(ErrorCode::Config, "[corruption] num_targets and target_ids are exclusive");
    }
  }

  {
    SectionReader model(map, "model");
    model.allow_only({"hidden_dim"});
    cfg.hidden_dim = static_cast<int>(model.integer("hidden_dim", cfg.hidden_dim));
    if (cfg.hidden_dim < 1)
      raise(ErrorCode::Config, "[model] hidden_dim must be >= 1");
  }

  {
    SectionReader proto(map, "protocol");
    proto.allow_only({"epochs", "batch_size", "learning_rate", "selection"});
    cfg.protocol.epochs = static_cast<int>(proto.integer("epochs", 40));
    cfg.protocol.batch_size = static_cast<int>(proto.integer("batch_size", 32));
    cfg.protocol.learning_rate = proto.real("learning_rate", 0.1);
    const std::string sel = proto.str("selection", "final-epoch");
    if (sel == "final-epoch") {
      cfg.protocol.selection = Selection::FinalEpoch;
    } else if (sel == "best-train-loss") {
      cfg.protocol.selection = Selection::BestTrainLoss;
    } else {
      raise(ErrorCode::Config, "[protocol] selection must be final-epoch or best-train-loss");
    }
    if (cfg.protocol.epochs < 1 || cfg.protocol.batch_size < 1 ||
        !(cfg.protocol.learning_rate > 0.0))
      raise(ErrorCode::Config, "[protocol] epochs/batch_size must be >= 1 and learning_rate > 0");
  }

  {
    SectionReader unl(map, "unlearn");
    unl.allow_only({"lambda_cons", "lambda_forg", "lambda_reg", "steps", "steps_fraction",
                    "learning_rate", "learning_rate_scale", "batch_r", "batch_f"});
    cfg.unlearn.lambda_cons = unl.real("lambda_cons", cfg.unlearn.lambda_cons);
    cfg.unlearn.lambda_forg = unl.real("lambda_forg", cfg.unlearn.lambda_forg);
    cfg.unlearn.lambda_reg = unl.real("lambda_reg", cfg.unlearn.lambda_reg);
    if (unl.has("steps")) cfg.unlearn.steps = static_cast<std::uint64_t>(unl.integer("steps", 0));
    cfg.unlearn.steps_fraction = unl.real("steps_fraction", cfg.unlearn.steps_fraction);
    if (unl.has("learning_rate")) cfg.unlearn.learning_rate = unl.real("learning_rate", 0.0);
    cfg.unlearn.learning_rate_scale = unl.real("learning_rate_scale", cfg.unlearn.learning_rate_scale);
    cfg.unlearn.batch_r = static_cast<int>(unl.integer("batch_r", 0));
    cfg.unlearn.batch_f = static_cast<int>(unl.integer("batch_f", 0));
    if (cfg.unlearn.lambda_cons < 0.0 || cfg.unlearn.lambda_forg < 0.0 || cfg.unlearn.lambda_reg < 0.0)
      raise(ErrorCode::Config, "[unlearn] lambda weights must be >= 0");
    if (!cfg.unlearn.steps && !(cfg.unlearn.steps_fraction > 0.0))
      raise(ErrorCode::Config, "[unlearn] steps or a positive steps_fraction required");
  }

  {
    SectionReader ft(map, "short_ft");
    ft.allow_only({"epochs", "epochs_fraction", "learning_rate", "learning_rate_scale"});
    if (ft.has("epochs")) cfg.short_ft.epochs = static_cast<int>(ft.integer("epochs", 0));
    cfg.short_ft.epochs_fraction = ft.real("epochs_fraction", cfg.short_ft.epochs_fraction);
    if (ft.has("learning_rate")) cfg.short_ft.learning_rate = ft.real("learning_rate", 0.0);
    cfg.short_ft.learning_rate_scale = ft.real("learning_rate_scale", cfg.short_ft.learning_rate_scale);
  }

  {
    SectionReader sc(map, "scenario");
    sc.allow_only({"ks", "seeds", "output_dir", "formats"});
    if (sc.has("ks")) {
      cfg.ks.clear();
      for (const std::string& tok : sc.list("ks")) {
        int k = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), k);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          raise(ErrorCode::Config, "[scenario] ks must be a comma list of integers");
        cfg.ks.push_back(k);
      }
    }
    if (sc.has("seeds")) {
      cfg.seeds.clear();
      for (const std::string& tok : sc.list("seeds")) {
        std::uint64_t s = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), s);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          raise(ErrorCode::Config, "[scenario] seeds must be a comma list of integers");
        cfg.seeds.push_back(s);
      }
    }
    cfg.output_dir = sc.str("output_dir", cfg.output_dir);
    if (sc.has("formats")) {
      cfg.formats = sc.list("formats");
      for (const std::string& f : cfg.formats)
        if (f != "csv" && f != "json")
          raise(ErrorCode::Config, "[scenario] formats may contain only csv and json");
    }
  }

  if (cfg.seeds.empty())
    raise(ErrorCode::Config, "[scenario] seeds must be non-empty");
  if (cfg.ks.empty())
    raise(ErrorCode::Config, "[scenario] ks must be non-empty");
  for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
    if (cfg.ks[i] < 1)
      raise(ErrorCode::Config, "[scenario] ks entries must be >= 1");
    if (i > 0 && cfg.ks[i] <= cfg.ks[i - 1])
      raise(ErrorCode::Config, "[scenario] ks must be strictly increasing");
  }
  if (cfg.data.source == DataSource::Synthetic) {
    const auto& g = cfg.data.gen;
    if (g.num_subjects < 2 || g.num_classes < 2 || g.feature_dim < 1 ||
        g.clips_per_subject.min < 1 || g.clips_per_subject.max < g.clips_per_subject.min ||
        !(g.class_separation > 0.0))
      raise(ErrorCode::Config, "[data] invalid generator parameters");
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  return scenario_config_from_map(parse_config_file(path));
}

}  // namespace sul
