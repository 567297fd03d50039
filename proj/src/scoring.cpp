// SPDX-License-Identifier: Apache-2.0
#include "sul/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "sul/digest.hpp"
#include "sul/error.hpp"

namespace sul {

ForgetSet empty_forget_set() { return ForgetSet{}; }

std::vector<SubjectScore> score_subjects(const ModelState& baseline,
                                         const SubjectPool& pool,
                                         const SplitManifest& manifest) {
  if (manifest.train_subjects.empty())
    raise(ErrorCode::Data, "score_subjects: no training subjects");

  std::vector<SubjectScore> scores;
  scores.reserve(manifest.train_subjects.size());
  for (const std::string& sid : manifest.train_subjects) {
    const auto& clips = pool.clips(sid);
    double total = 0.0;
    for (const ClipRecord& clip : clips)
      total += cross_entropy(forward(baseline, clip.features), clip.label);
    scores.push_back({sid, total / static_cast<double>(clips.size()),
                      static_cast<int>(clips.size())});
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const SubjectScore& a, const SubjectScore& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.subject_id < b.subject_id;
                   });
  return scores;
}

std::string ranking_hash(const std::vector<SubjectScore>& ranking) {
  Digest d;
  for (const SubjectScore& s : ranking) {
    d.add(s.subject_id);
    d.add(s.score);
    d.add(s.clip_count);
  }
  return d.hex();
}

ForgetSet build_forget_set(const std::vector<SubjectScore>& ranking, int k) {
  if (k < 1)
    raise(ErrorCode::Param, "build_forget_set: k must be >= 1");
  if (k >= static_cast<int>(ranking.size()))
    raise(ErrorCode::Param, "build_forget_set: k = " + std::to_string(k) +
                                " leaves no retained subjects (ranking has " +
                                std::to_string(ranking.size()) + ")");
  ForgetSet fs;
  fs.k = k;
  fs.source_ranking_hash = ranking_hash(ranking);
  fs.subjects.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) fs.subjects.push_back(ranking[static_cast<std::size_t>(i)].subject_id);
  return fs;
}

std::string forget_set_hash(const ForgetSet& fs) {
  Digest d;
  d.add(fs.k);
  for (const std::string& s : fs.subjects) d.add(s);
  d.add(fs.source_ranking_hash);
  return d.hex();
}

TrainPartition partition(const SubjectPool& pool, const SplitManifest& manifest,
                         const ForgetSet& fs) {
  std::set<std::string> forget(fs.subjects.begin(), fs.subjects.end());
  for (const std::string& sid : forget)
    if (!manifest.train_subjects.count(sid))
      raise(ErrorCode::Hygiene, "partition: forget subject " + sid +
                                    " is not a training subject");
  TrainPartition out;
  for (const std::string& sid : manifest.train_subjects) {
    auto& dest = forget.count(sid) ? out.forgotten : out.retained;
    for (const ClipRecord& clip : pool.clips(sid)) dest.push_back(&clip);
  }
  return out;
}

void save_ranking_csv(const std::vector<SubjectScore>& ranking, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << "rank,subject_id,score,clip_count\n";
  int rank = 1;
  char buf[64];
  for (const SubjectScore& s : ranking) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), s.score);
    (void)ec;
    out << rank++ << "," << s.subject_id << "," << std::string(buf, ptr) << ","
        << s.clip_count << "\n";
  }
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

}  // namespace sul
