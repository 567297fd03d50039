// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sul {

// One labeled feature vector. `label` is the supervision actually used for
// training; `true_label` is the pre-corruption ground truth and is reserved
// for post-hoc audit output. Training, scoring and unlearning code must not
// read it.
struct ClipRecord {
  std::string clip_id;
  std::string subject_id;
  std::vector<double> features;
  int label = 0;
  int true_label = 0;
};

enum class FlipMode {
  UniformRandomOtherClass,
  FixedTargetClass,
};

struct CorruptionProfile {
  double label_flip_rate = 0.0;           // in [0, 1]
  std::vector<double> feature_shift;      // length d, or empty for zero shift
  FlipMode flip_mode = FlipMode::UniformRandomOtherClass;
  int fixed_target_class = 0;             // used when flip_mode is FixedTargetClass
};

// Subject-indexed clip collection. Immutable after construction; clips are
// reachable only through accessors so tests can install an access hook and
// assert which subjects a pipeline stage actually touched.
class SubjectPool {
 public:
  using AccessHook = std::function<void(const std::string& subject_id)>;

  SubjectPool() = default;
  SubjectPool(std::map<std::string, std::vector<ClipRecord>> subjects,
              int num_classes, int feature_dim,
              std::map<std::string, CorruptionProfile> corruption_manifest = {});

  // Sorted ascending; stable iteration order for every seeded consumer.
  const std::vector<std::string>& subject_ids() const { return subject_order_; }

  bool has_subject(const std::string& subject_id) const;

  // Clips of one subject, canonically ordered by clip_id. Fires the access
  // hook when one is installed.
  const std::vector<ClipRecord>& clips(const std::string& subject_id) const;

  int num_classes() const { return num_classes_; }
  int feature_dim() const { return feature_dim_; }
  std::size_t num_subjects() const { return subject_order_.size(); }
  std::size_t num_clips() const { return num_clips_; }

  const std::map<std::string, CorruptionProfile>& corruption_manifest() const {
    return corruption_manifest_;
  }

  // Test instrumentation: invoked on every clips() access until cleared.
  void set_access_hook(AccessHook hook) const { access_hook_ = std::move(hook); }
  void clear_access_hook() const { access_hook_ = nullptr; }

 private:
  std::map<std::string, std::vector<ClipRecord>> subjects_;
  std::vector<std::string> subject_order_;
  std::map<std::string, CorruptionProfile> corruption_manifest_;
  int num_classes_ = 0;
  int feature_dim_ = 0;
  std::size_t num_clips_ = 0;
  mutable AccessHook access_hook_;
};

// Subject-disjoint train/eval partition.
struct SplitManifest {
  std::set<std::string> train_subjects;
  std::set<std::string> eval_subjects;
  std::uint64_t seed = 0;
};

struct ClipRange {
  int min = 1;
  int max = 1;
};

// Synthetic pool: class-conditional Gaussian clusters with a per-subject mean
// offset, so subjects are heterogeneous even before any corruption. Class
// centers are mutually `class_separation` apart (axis layout when C <= d,
// line layout along the first axis otherwise). Clean: label == true_label.
SubjectPool generate_pool(int num_subjects, ClipRange clips_per_subject,
                          int feature_dim, int num_classes,
                          double class_separation, std::uint64_t seed);

// Returns a new pool where each targeted subject's clips are label-flipped
// with probability profile.label_flip_rate and shifted by
// profile.feature_shift; non-targeted subjects are copied verbatim.
SubjectPool corrupt_subjects(const SubjectPool& pool,
                             const std::set<std::string>& targets,
                             const CorruptionProfile& profile,
                             std::uint64_t seed);

SplitManifest split_subject_disjoint(const SubjectPool& pool,
                                     double eval_fraction, std::uint64_t seed);

// CSV schema: header `clip_id,subject_id,label,f0,...,f{d-1}`.
// expected_classes == 0 infers C as max(label)+1 (at least 2).
SubjectPool load_pool_from_csv(const std::string& path, int expected_classes = 0);
void save_pool_to_csv(const SubjectPool& pool, const std::string& path);

// Clips of the given subjects (subjects ascending, clips by clip_id).
// Pointers stay valid for the pool's lifetime.
std::vector<const ClipRecord*> collect_clips(const SubjectPool& pool,
                                             const std::set<std::string>& subjects);

}  // namespace sul
