#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace koopnet::cli {

/// Runs one command (args exclude the program name). A one-line JSON summary
/// goes to out; failures print {"error": {...}} to err and return 1.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace koopnet::cli
