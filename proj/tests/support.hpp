#pragma once

// Test-only helpers: scratch directories, file utilities and independent
// oracles that deliberately avoid the library code paths they check.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name) {
    path_ = fs::temp_directory_path() /
            ("embprobe-" + name + "-" + std::to_string(std::random_device{}()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Textbook Pearson: sums of centred products, no clamping.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Sample covariance (divisor n - 1) of row-major data, as nested vectors.
inline std::vector<std::vector<double>> covariance_oracle(
    const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
  for (auto& row : c)
    for (auto& v : row) v /= static_cast<double>(n - 1);
  return c;
}

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues in
// descending order.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// Two-topic corpus: x1..x5 only co-occur with each other, likewise y1..y5.
// Sentences alternate topics, so a window leaking across a sentence boundary
// would mix them. Sentences are short (4 tokens) so that learning is still
// under way during the first epoch.
inline std::string two_topic_text(std::size_t sentences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string out;
  for (std::size_t s = 0; s < sentences; ++s) {
    const char topic = s % 2 == 0 ? 'x' : 'y';
    for (int w = 0; w < 4; ++w) {
      if (w) out += ' ';
      out += topic;
      out += std::to_string(1 + rng() % 5);
    }
    out += '\n';
  }
  return out;
}

// Path of the CLI binary, injected by CMake; the environment may override it.
inline std::string cli_path() {
  if (const char* p = std::getenv("EMBPROBE_CLI")) return p;
#ifdef EMBPROBE_CLI
  return EMBPROBE_CLI;
#else
  return "embprobe";
#endif
}

// Runs the CLI with stdout/stderr captured; returns the exit status.
inline int run_cli(const std::string& args, std::string* output = nullptr) {
  const auto log = fs::temp_directory_path() /
                   ("embprobe-cli-" + std::to_string(std::random_device{}()) + ".log");
  const std::string cmd = "\"" + cli_path() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  if (output) *output = read_file(log);
  std::error_code ec;
  fs::remove(log, ec);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace testing_support
