#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

int main(int argc, char** argv) {
  // Logs go to stderr; stdout carries command output only.
  spdlog::set_default_logger(spdlog::stderr_color_mt("mia"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
  std::vector<std::string> args(argv + 1, argv + argc);
  return mia::cli::run(args, mia::process_env(), std::cout, std::cerr);
}
