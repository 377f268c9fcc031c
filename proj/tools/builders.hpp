#pragma once

#include "config.hpp"
#include "sflow/control_path.hpp"
#include "sflow/functionals.hpp"
#include "sflow/imaging.hpp"
#include "sflow/kernels.hpp"

namespace sflow::cli {

BasisFamily build_basis(const ConfigReader::Node& node);

/// Zero, constant or CSV-loaded control on [0, t_end] with step dt.
/// Returns false (and leaves `out` untouched) for a zero control.
bool build_control(const ConfigReader::Node& node, double dt, double t_end, std::size_t modes, ControlPath& out);

FunctionalPtr build_endpoint_functional(const ConfigReader::Node& node);
TransformFunctionalPtr build_transform_functional(const ConfigReader::Node& node);

TemplatePtr build_template(const ConfigReader::Node& node, int dim);

MatchProblem build_match_problem(const ConfigReader::Node& node, std::uint64_t seed);
MatchOptions build_match_options(const ConfigReader::Node& node, std::uint64_t seed);

}  // namespace sflow::cli
