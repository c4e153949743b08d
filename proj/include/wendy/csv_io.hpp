#pragma once

#include <string>

#include "wendy/core.hpp"

namespace wendy {

/// "t,u1,...,ud" header followed by one row per sample, full precision.
[[nodiscard]] std::string dataset_to_csv(const Dataset& ds);

/// Parses the format above. The time column must be uniform to within
/// 1e-9 of dt (NonUniformGrid); malformed content raises ParseError.
[[nodiscard]] Dataset dataset_from_csv(const std::string& text);

void write_dataset(const std::string& path, const Dataset& ds);
[[nodiscard]] Dataset read_dataset(const std::string& path);

/// "data.csv" -> "data.truth.csv".
[[nodiscard]] std::string truth_path(const std::string& path);

[[nodiscard]] std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace wendy
