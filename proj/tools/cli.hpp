#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mfdgp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kObjectiveFailure = 3, kCorruptLog = 4 };

/// Entry point of the `mfdgp` command; returns the process exit status.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a CSV written by this tool. Throws std::runtime_error on a missing
/// header or a row whose column count differs from the header's.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace mfdgp::cli
