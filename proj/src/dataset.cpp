// SPDX-License-Identifier: Apache-2.0
#include "sul/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sul/error.hpp"
#include "sul/rng.hpp"

namespace sul {

namespace {

// Magnitude of the per-subject mean offset. Large enough that subjects are
// distinguishable, small relative to typical class separations.
constexpr double kSubjectOffsetSigma = 0.3;

std::string padded_index(const char* prefix, int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, std::min(width, 12), index);
  return buf;
}

void validate_clip(const ClipRecord& clip, int feature_dim, int num_classes,
                   const std::string& context) {
  if (static_cast<int>(clip.features.size()) != feature_dim)
    raise(ErrorCode::Arch, context + ": clip " + clip.clip_id + " has " +
                               std::to_string(clip.features.size()) +
                               " features, expected " + std::to_string(feature_dim));
  for (double f : clip.features)
    if (!std::isfinite(f))
      raise(ErrorCode::Data, context + ": clip " + clip.clip_id + " has non-finite feature");
  if (clip.label < 0 || clip.label >= num_classes ||
      clip.true_label < 0 || clip.true_label >= num_classes)
    raise(ErrorCode::Data, context + ": clip " + clip.clip_id + " label out of range");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

SubjectPool::SubjectPool(std::map<std::string, std::vector<ClipRecord>> subjects,
                         int num_classes, int feature_dim,
                         std::map<std::string, CorruptionProfile> corruption_manifest)
    : subjects_(std::move(subjects)),
      corruption_manifest_(std::move(corruption_manifest)),
      num_classes_(num_classes),
      feature_dim_(feature_dim) {
  std::set<std::string> seen_clip_ids;
  for (auto& [sid, clips] : subjects_) {
    if (clips.empty())
      raise(ErrorCode::Data, "subject " + sid + " has no clips");
    std::sort(clips.begin(), clips.end(),
              [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });
    for (const ClipRecord& clip : clips) {
      if (clip.subject_id != sid)
        raise(ErrorCode::Data, "clip " + clip.clip_id + " filed under wrong subject");
      if (!seen_clip_ids.insert(clip.clip_id).second)
        raise(ErrorCode::Data, "duplicate clip_id " + clip.clip_id);
      validate_clip(clip, feature_dim_, num_classes_, "pool");
    }
    subject_order_.push_back(sid);
    num_clips_ += clips.size();
  }
}

bool SubjectPool::has_subject(const std::string& subject_id) const {
  return subjects_.count(subject_id) != 0;
}

const std::vector<ClipRecord>& SubjectPool::clips(const std::string& subject_id) const {
  auto it = subjects_.find(subject_id);
  if (it == subjects_.end())
    raise(ErrorCode::Lookup, "unknown subject " + subject_id);
  if (access_hook_) access_hook_(subject_id);
  return it->second;
}

SubjectPool generate_pool(int num_subjects, ClipRange clips_per_subject,
                          int feature_dim, int num_classes,
                          double class_separation, std::uint64_t seed) {
  if (num_subjects < 2)
    raise(ErrorCode::Param, "generate_pool: num_subjects must be >= 2");
  if (num_classes < 2)
    raise(ErrorCode::Param, "generate_pool: num_classes must be >= 2");
  if (feature_dim < 1)
    raise(ErrorCode::Param, "generate_pool: feature_dim must be >= 1");
  if (clips_per_subject.min < 1 || clips_per_subject.max < clips_per_subject.min)
    raise(ErrorCode::Param, "generate_pool: invalid clips_per_subject range");
  if (!(class_separation > 0.0))
    raise(ErrorCode::Param, "generate_pool: class_separation must be positive");

  // Class centers. When C <= d, center c sits on axis c at sep/sqrt(2), so all
  // pairwise distances equal `class_separation`; otherwise centers are spaced
  // `class_separation` apart along the first axis.
  std::vector<std::vector<double>> centers(
      static_cast<std::size_t>(num_classes),
      std::vector<double>(static_cast<std::size_t>(feature_dim), 0.0));
  if (num_classes <= feature_dim) {
    const double r = class_separation / std::sqrt(2.0);
    for (int c = 0; c < num_classes; ++c) centers[c][c] = r;
  } else {
    for (int c = 0; c < num_classes; ++c) centers[c][0] = class_separation * c;
  }

  const int id_width = std::max<int>(3, static_cast<int>(std::to_string(num_subjects - 1).size()));

  Rng rng(seed);
  std::map<std::string, std::vector<ClipRecord>> subjects;
  for (int s = 0; s < num_subjects; ++s) {
    const std::string sid = padded_index("s", s, id_width);
    std::vector<double> offset(static_cast<std::size_t>(feature_dim));
    for (double& o : offset) o = rng.normal(0.0, kSubjectOffsetSigma);

    const int span = clips_per_subject.max - clips_per_subject.min + 1;
    const int n_clips =
        clips_per_subject.min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));

    std::vector<ClipRecord> clips;
    clips.reserve(static_cast<std::size_t>(n_clips));
    for (int j = 0; j < n_clips; ++j) {
      ClipRecord clip;
      clip.subject_id = sid;
      clip.clip_id = sid + padded_index("_c", j, 3);
      clip.label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_classes)));
      clip.true_label = clip.label;
      clip.features.resize(static_cast<std::size_t>(feature_dim));
      for (int i = 0; i < feature_dim; ++i)
        clip.features[i] = centers[clip.label][i] + offset[i] + rng.normal();
      clips.push_back(std::move(clip));
    }
    subjects.emplace(sid, std::move(clips));
  }
  return SubjectPool(std::move(subjects), num_classes, feature_dim);
}

SubjectPool corrupt_subjects(const SubjectPool& pool,
                             const std::set<std::string>& targets,
                             const CorruptionProfile& profile,
                             std::uint64_t seed) {
  if (profile.label_flip_rate < 0.0 || profile.label_flip_rate > 1.0)
    raise(ErrorCode::Param, "corrupt_subjects: label_flip_rate outside [0, 1]");
  if (!profile.feature_shift.empty() &&
      static_cast<int>(profile.feature_shift.size()) != pool.feature_dim())
    raise(ErrorCode::Param, "corrupt_subjects: feature_shift length != feature_dim");
  if (profile.flip_mode == FlipMode::FixedTargetClass &&
      (profile.fixed_target_class < 0 || profile.fixed_target_class >= pool.num_classes()))
    raise(ErrorCode::Param, "corrupt_subjects: fixed target class out of range");
  for (const std::string& t : targets)
    if (!pool.has_subject(t))
      raise(ErrorCode::Lookup, "corrupt_subjects: unknown subject " + t);

  const int num_classes = pool.num_classes();
  Rng rng(seed);
  std::map<std::string, std::vector<ClipRecord>> subjects;
  auto manifest = pool.corruption_manifest();

  // Targets consume the rng in sorted-id order; untouched subjects consume
  // nothing, so corruption of one subject is independent of the rest.
  for (const std::string& sid : pool.subject_ids()) {
    std::vector<ClipRecord> clips = pool.clips(sid);
    if (targets.count(sid)) {
      for (ClipRecord& clip : clips) {
        if (rng.uniform() < profile.label_flip_rate) {
          if (profile.flip_mode == FlipMode::UniformRandomOtherClass) {
            const int r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_classes - 1)));
            clip.label = r >= clip.label ? r + 1 : r;
          } else if (profile.fixed_target_class != clip.label) {
            clip.label = profile.fixed_target_class;
          }
        }
        if (!profile.feature_shift.empty())
          for (std::size_t i = 0; i < clip.features.size(); ++i)
            clip.features[i] += profile.feature_shift[i];
      }
      manifest[sid] = profile;
    }
    subjects.emplace(sid, std::move(clips));
  }
  return SubjectPool(std::move(subjects), num_classes, pool.feature_dim(), std::move(manifest));
}

SplitManifest split_subject_disjoint(const SubjectPool& pool,
                                     double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0.0) || !(eval_fraction < 1.0))
    raise(ErrorCode::Param, "split_subject_disjoint: eval_fraction must be in (0, 1)");
  if (pool.num_subjects() < 2)
    raise(ErrorCode::Data, "split_subject_disjoint: pool needs >= 2 subjects");

  std::vector<std::string> ids = pool.subject_ids();
  Rng rng(seed);
  rng.shuffle(ids);

  const auto n = ids.size();
  auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
  n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);

  SplitManifest manifest;
  manifest.seed = seed;
  for (std::size_t i = 0; i < n; ++i)
    (i < n_eval ? manifest.eval_subjects : manifest.train_subjects).insert(ids[i]);
  return manifest;
}

SubjectPool load_pool_from_csv(const std::string& path, int expected_classes) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::Io, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    raise(ErrorCode::Ingest, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 4 || header[0] != "clip_id" || header[1] != "subject_id" ||
      header[2] != "label")
    raise(ErrorCode::Ingest, path + ": header must start with clip_id,subject_id,label");
  const int feature_dim = static_cast<int>(header.size()) - 3;
  for (int i = 0; i < feature_dim; ++i)
    if (header[static_cast<std::size_t>(i) + 3] != "f" + std::to_string(i))
      raise(ErrorCode::Ingest, path + ": feature columns must be named f0..f" +
                                   std::to_string(feature_dim - 1));

  std::map<std::string, std::vector<ClipRecord>> subjects;
  int max_label = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(row);

    std::vector<std::string> tok;
    std::stringstream ss(line);
    std::string t;
    while (std::getline(ss, t, ',')) tok.push_back(t);
    if (static_cast<int>(tok.size()) != feature_dim + 3)
      raise(ErrorCode::Ingest, where + ": expected " + std::to_string(feature_dim + 3) +
                                   " columns, got " + std::to_string(tok.size()));

    ClipRecord clip;
    clip.clip_id = tok[0];
    clip.subject_id = tok[1];
    {
      int label = 0;
      auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), label);
      if (ec != std::errc() || ptr != tok[2].data() + tok[2].size())
        raise(ErrorCode::Ingest, where + ": label is not an integer");
      clip.label = label;
    }
    if (clip.label < 0)
      raise(ErrorCode::Ingest, where + ": label is negative");
    if (expected_classes > 0 && clip.label >= expected_classes)
      raise(ErrorCode::Ingest, where + ": label " + std::to_string(clip.label) +
                                   " outside [0, " + std::to_string(expected_classes) + ")");
    clip.true_label = clip.label;
    max_label = std::max(max_label, clip.label);

    clip.features.resize(static_cast<std::size_t>(feature_dim));
    for (int i = 0; i < feature_dim; ++i) {
      const std::string& cell = tok[static_cast<std::size_t>(i) + 3];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        raise(ErrorCode::Ingest, where + ": feature f" + std::to_string(i) + " is not a number");
      if (!std::isfinite(v))
        raise(ErrorCode::Ingest, where + ": feature f" + std::to_string(i) + " is not finite");
      clip.features[static_cast<std::size_t>(i)] = v;
    }
    subjects[clip.subject_id].push_back(std::move(clip));
  }
  if (subjects.empty())
    raise(ErrorCode::Ingest, path + ": no data rows");

  const int num_classes = expected_classes > 0 ? expected_classes : std::max(max_label + 1, 2);
  return SubjectPool(std::move(subjects), num_classes, feature_dim);
}

void save_pool_to_csv(const SubjectPool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << "clip_id,subject_id,label";
  for (int i = 0; i < pool.feature_dim(); ++i) out << ",f" << i;
  out << "\n";
  for (const std::string& sid : pool.subject_ids()) {
    for (const ClipRecord& clip : pool.clips(sid)) {
      out << clip.clip_id << "," << clip.subject_id << "," << clip.label;
      for (double f : clip.features) out << "," << format_double(f);
      out << "\n";
    }
  }
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

std::vector<const ClipRecord*> collect_clips(const SubjectPool& pool,
                                             const std::set<std::string>& subjects) {
  std::vector<const ClipRecord*> out;
  for (const std::string& sid : subjects)
    for (const ClipRecord& clip : pool.clips(sid)) out.push_back(&clip);
  return out;
}

}  // namespace sul
