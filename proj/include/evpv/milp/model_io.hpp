// SPDX-License-Identifier: Apache-2.0
//
// Plain-text model dump, one record per line:
//
//   evpv-milp 1
//   var <index> <C|B> <lower> <upper> <cost> <name>
//   con <index> <L|E|G> <rhs> <count> <var>:<coef> ... <name>
//   offset <value>
//
// Numbers use the shortest representation that round-trips exactly; an
// infinite upper bound is written `inf`. Names contain no whitespace.
#pragma once

#include "evpv/milp/model.hpp"

#include <iosfwd>
#include <string>

namespace evpv::milp {

void write_model(std::ostream& out, const MilpModel& model);
std::string dump_model(const MilpModel& model);

/// Throws evpv::ParseError with the offending line number.
MilpModel read_model(std::istream& in, const std::string& source = "<stream>");

} // namespace evpv::milp
