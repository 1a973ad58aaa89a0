#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdpdt {

// A measurement is one real value per parameter of the space, in space order.
using Measurement = std::vector<double>;

struct MissingParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class ParamKind { continuous, discrete_integer };

// The ordered set of environment parameters over which states are defined.
// Every measurement supplies exactly these parameters, in this order.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  ParameterSpace(std::vector<std::string> names, std::vector<ParamKind> kinds);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  ParamKind kind(std::size_t i) const { return kinds_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  // Like index_of but throws MissingParameter for unknown names.
  std::size_t require(std::string_view name) const;

  // Builds a measurement from a named value map; throws MissingParameter
  // if any space parameter is absent. Extra keys are ignored.
  Measurement from_named(const std::map<std::string, double>& values) const;

  // Checks that m carries one value per parameter.
  void check(const Measurement& m) const;

  bool operator==(const ParameterSpace&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<ParamKind> kinds_;
};

}  // namespace mdpdt
