// SPDX-License-Identifier: Apache-2.0

#include "cerlab/serialization.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "cerlab/error.hpp"

namespace cerlab {

using nlohmann::json;

namespace {

void expect_header(const json& doc, const char* format, int version) {
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw InputDomainError(std::string("expected a '") + format + "' document");
  }
  if (doc.value("version", -1) != version) {
    throw InputDomainError(std::string("unsupported ") + format + " version");
  }
}

PolicyShape shape_from_json(const json& doc) {
  PolicyShape shape;
  shape.questions = doc.at("questions").get<std::size_t>();
  shape.vocab = doc.at("vocab").get<std::size_t>();
  shape.length = doc.at("length").get<std::size_t>();
  shape.answers = doc.at("answers").get<std::size_t>();
  return shape;
}

json shape_to_json(const PolicyShape& shape) {
  return json{{"questions", shape.questions},
              {"vocab", shape.vocab},
              {"length", shape.length},
              {"answers", shape.answers}};
}

void copy_table(const json& values, std::span<double> out, const char* name) {
  if (!values.is_array() || values.size() != out.size()) {
    throw InputDomainError(std::string("policy: table '") + name + "' has the wrong size");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = values[i].get<double>();
  }
}

}  // namespace

json policy_to_json(const PolicyParams& params) {
  return json{{"format", "cerlab.policy"},
              {"version", kPolicyFormatVersion},
              {"shape", shape_to_json(params.shape())},
              {"temperature", params.temperature()},
              {"solution_logits", params.solution_logits()},
              {"answer_logits", params.answer_logits()}};
}

PolicyParams policy_from_json(const json& doc) {
  expect_header(doc, "cerlab.policy", kPolicyFormatVersion);
  try {
    PolicyParams params(shape_from_json(doc.at("shape")), doc.at("temperature").get<double>());
    copy_table(doc.at("solution_logits"), params.solution_logits(), "solution_logits");
    copy_table(doc.at("answer_logits"), params.answer_logits(), "answer_logits");
    params.check_finite();
    return params;
  } catch (const json::exception& e) {
    throw InputDomainError(std::string("policy: malformed document: ") + e.what());
  }
}

json task_to_json(const TaskSpec& task) {
  json reference = json::array();
  for (AnswerId a : task.reference) {
    reference.push_back(a.value);
  }
  json doc{{"format", "cerlab.task"},
           {"version", kTaskFormatVersion},
           {"shape", shape_to_json(task.shape)},
           {"reference", reference},
           {"distribution", task.distribution}};
  if (task.alias_groups) {
    json groups = json::array();
    for (const auto& group : *task.alias_groups) {
      json members = json::array();
      for (AnswerId a : group) {
        members.push_back(a.value);
      }
      groups.push_back(members);
    }
    doc["alias_groups"] = groups;
  }
  return doc;
}

TaskSpec task_from_json(const json& doc) {
  expect_header(doc, "cerlab.task", kTaskFormatVersion);
  try {
    TaskSpec task;
    task.shape = shape_from_json(doc.at("shape"));
    for (const json& a : doc.at("reference")) {
      task.reference.emplace_back(a.get<std::size_t>());
    }
    task.distribution = doc.at("distribution").get<std::vector<double>>();
    if (doc.contains("alias_groups") && !doc["alias_groups"].is_null()) {
      AliasGroups groups;
      for (const json& members : doc["alias_groups"]) {
        std::vector<AnswerId> group;
        for (const json& a : members) {
          group.emplace_back(a.get<std::size_t>());
        }
        groups.push_back(std::move(group));
      }
      task.alias_groups = std::move(groups);
    }
    task.validate();
    return task;
  } catch (const json::exception& e) {
    throw InputDomainError(std::string("task: malformed document: ") + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw InputDomainError("cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputDomainError("cannot read " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputDomainError(path.string() + ": " + e.what());
  }
}

}  // namespace cerlab
