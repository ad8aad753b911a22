#include "aerr/priors.hpp"

#include "aerr/world.hpp"

#include <fstream>

namespace aerr {

PriorTable::PriorTable(std::map<std::string, std::map<std::string, double>> table) {
  for (auto& [k, v] : table) table_.emplace(k, std::move(v));
}

PriorTable PriorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prior table " + path.string());
  return from_json(nlohmann::json::parse(in));
}

PriorTable PriorTable::from_json(const nlohmann::json& doc) {
  return PriorTable(doc.get<std::map<std::string, std::map<std::string, double>>>());
}

nlohmann::json PriorTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : table_) j[k] = v;
  return j;
}

bool PriorTable::has_target(std::string_view target) const { return table_.find(target) != table_.end(); }

double PriorTable::weight(std::string_view target, std::string_view category) const {
  if (category.empty()) return 0.0;
  if (category == target) return 1.0;
  const auto it = table_.find(target);
  if (it == table_.end()) return 0.0;
  const auto jt = it->second.find(std::string(category));
  return jt == it->second.end() ? 0.0 : jt->second;
}

std::vector<double> PriorTable::category_weights(std::string_view target, const LabelTable& labels) const {
  std::vector<double> out;
  out.reserve(labels.categories().size());
  for (const auto& name : labels.categories()) out.push_back(weight(target, name));
  return out;
}

}  // namespace aerr
