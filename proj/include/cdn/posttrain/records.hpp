#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cdn/posttrain/masking.hpp"

namespace cdn::posttrain {

// Binary record stream; see docs/posttrain_records.md for the layout.

void write_record(std::ostream& out, const PosttrainExample& ex);
void write_records(std::ostream& out, const std::vector<PosttrainExample>& examples);
void write_records(const std::string& path, const std::vector<PosttrainExample>& examples);

/// Throws FormatError on a truncated record or an unknown kind byte.
std::vector<PosttrainExample> read_records(std::istream& in);
std::vector<PosttrainExample> read_records(const std::string& path);

}  // namespace cdn::posttrain
