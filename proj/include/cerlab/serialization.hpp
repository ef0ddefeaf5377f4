// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "json.hpp"

#include "cerlab/policy.hpp"
#include "cerlab/tasks.hpp"

namespace cerlab {

/// Policy checkpoints and task files are JSON documents tagged with a format
/// name and version; see docs/file-formats.md.
inline constexpr int kPolicyFormatVersion = 1;
inline constexpr int kTaskFormatVersion = 1;

nlohmann::json policy_to_json(const PolicyParams& params);
/// Throws InputDomainError on a wrong format tag, version or table size.
PolicyParams policy_from_json(const nlohmann::json& doc);

nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& doc);

void save_json(const std::filesystem::path& path, const nlohmann::json& doc);
/// Throws InputDomainError when the file is missing or not valid JSON.
nlohmann::json load_json(const std::filesystem::path& path);

inline void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  save_json(path, policy_to_json(params));
}
inline PolicyParams load_policy(const std::filesystem::path& path) {
  return policy_from_json(load_json(path));
}
inline void save_task(const std::filesystem::path& path, const TaskSpec& task) {
  save_json(path, task_to_json(task));
}
inline TaskSpec load_task(const std::filesystem::path& path) { return task_from_json(load_json(path)); }

}  // namespace cerlab
