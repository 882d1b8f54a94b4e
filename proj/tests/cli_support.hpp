#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace cli {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Scratch directory removed on destruction.
class Scratch {
 public:
  explicit Scratch(const std::string& tag) {
    dir_ = fs::temp_directory_path() / ("isopoints_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  std::string operator/(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

inline Run run(const std::string& args, const Scratch& scratch) {
  const std::string out = scratch / "stdout.txt";
  const std::string err = scratch / "stderr.txt";
  const std::string cmd = std::string(ISOPOINTS_CLI) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

/// CSV text with the named column blanked on every row.
inline std::string drop_column(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  std::string line, result;
  int target = -1;
  bool header = true;
  while (std::getline(in, line)) {
    std::stringstream cells(line);
    std::string cell, row;
    int col = 0;
    while (std::getline(cells, cell, ',')) {
      if (header && cell == name) target = col;
      if (!header && col == target) cell.clear();
      row += (col ? "," : "") + cell;
      ++col;
    }
    header = false;
    result += row + "\n";
  }
  return result;
}

}  // namespace cli
