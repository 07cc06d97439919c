#pragma once

#include <iosfwd>
#include <string>

#include "recallsurv/observation.hpp"

namespace recallsurv {

// CSV layout: id,s,delta,epsilon,v,m,d[,t] with a header row; reals carry
// 10 significant digits. The t column is written only when every record has
// a true event age.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Parses and validates. Month and year values of v are snapped back onto
// their 1/12 and integer grids to undo the 10-digit rounding.
Dataset read_dataset_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_dataset_csv(const std::string& path);

std::string format_real(double x);

}  // namespace recallsurv
