#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aerr {

class LabelTable;

class UnknownTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Commonsense co-occurrence weights: target -> {object category or room type -> weight}.
/// A target is always fully related to itself.
class PriorTable {
 public:
  PriorTable() = default;
  explicit PriorTable(std::map<std::string, std::map<std::string, double>> table);

  static PriorTable load(const std::filesystem::path& path);
  static PriorTable from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  bool has_target(std::string_view target) const;
  double weight(std::string_view target, std::string_view category) const;

  /// weight(target, ·) for every category id of the table, indexed by id.
  std::vector<double> category_weights(std::string_view target, const LabelTable& labels) const;

 private:
  std::map<std::string, std::map<std::string, double>, std::less<>> table_;
};

}  // namespace aerr
