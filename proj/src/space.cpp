#include "mdpdt/space.hpp"

#include <algorithm>
#include <set>

namespace mdpdt {

ParameterSpace::ParameterSpace(std::vector<std::string> names,
                               std::vector<ParamKind> kinds)
    : names_(std::move(names)), kinds_(std::move(kinds)) {
  if (kinds_.size() != names_.size())
    throw std::invalid_argument("parameter space: names/kinds size mismatch");
  std::set<std::string> seen(names_.begin(), names_.end());
  if (seen.size() != names_.size())
    throw std::invalid_argument("parameter space: duplicate parameter name");
}

std::optional<std::size_t> ParameterSpace::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ParameterSpace::require(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw MissingParameter("unknown parameter: " + std::string(name));
  return *idx;
}

Measurement ParameterSpace::from_named(
    const std::map<std::string, double>& values) const {
  Measurement m(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto it = values.find(names_[i]);
    if (it == values.end())
      throw MissingParameter("measurement is missing parameter: " + names_[i]);
    m[i] = it->second;
  }
  return m;
}

void ParameterSpace::check(const Measurement& m) const {
  if (m.size() != names_.size())
    throw MissingParameter("measurement has " + std::to_string(m.size()) +
                           " values, space has " + std::to_string(names_.size()));
}

}  // namespace mdpdt
