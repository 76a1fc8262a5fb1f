#include "memsde/ensemble_io.hpp"

#include "memsde/error.hpp"
#include "memsde/report_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>
#include <sstream>

namespace memsde {

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(Errc::IoError, "bad number '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(Errc::IoError, "bad integer '" + std::string(s) + "'");
  return v;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string ensemble_to_csv(const Ensemble& e) {
  const auto d = e.samples.cols();
  std::string out = "id,diverged_step";
  for (Eigen::Index i = 0; i < d; ++i) out += ",x_" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t r = 0; r < e.size(); ++r) {
    out += std::to_string(r) + ',' + std::to_string(e.diverged[r] ? *e.diverged[r] : -1);
    for (Eigen::Index i = 0; i < d; ++i) out += ',' + format_double(e.samples(static_cast<Eigen::Index>(r), i));
    out += '\n';
  }
  return out;
}

Ensemble ensemble_from_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  for (auto l : split(text, '\n'))
    if (!l.empty()) lines.push_back(l);
  if (lines.empty()) fail(Errc::IoError, "empty ensemble CSV");
  const auto head = split(lines[0], ',');
  if (head.size() < 3 || head[0] != "id" || head[1] != "diverged_step") fail(Errc::IoError, "bad ensemble CSV header");
  const std::size_t d = head.size() - 2;
  Ensemble e;
  e.samples.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(d));
  e.diverged.assign(lines.size() - 1, std::nullopt);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split(lines[r], ',');
    if (f.size() != d + 2) fail(Errc::IoError, "ensemble CSV row " + std::to_string(r) + " has the wrong width");
    const auto row = static_cast<Eigen::Index>(r - 1);
    if (parse_int(f[0]) != row) fail(Errc::IoError, "ensemble CSV ids must be 0..M-1 in order");
    const std::int64_t ds = parse_int(f[1]);
    if (ds >= 0) e.diverged[r - 1] = ds;
    for (std::size_t i = 0; i < d; ++i) e.samples(row, static_cast<Eigen::Index>(i)) = parse_double(f[i + 2]);
  }
  return e;
}

std::string ensemble_to_binary(const Ensemble& e) {
  const auto M = static_cast<std::uint64_t>(e.samples.rows());
  const auto d = static_cast<std::uint64_t>(e.samples.cols());
  std::string out = "MEM1";
  put_u64(out, M);
  put_u64(out, d);
  for (Eigen::Index r = 0; r < e.samples.rows(); ++r)
    for (Eigen::Index i = 0; i < e.samples.cols(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(e.samples(r, i)));
  return out;
}

Ensemble ensemble_from_binary(const std::string& bytes) {
  if (bytes.size() < 20 || bytes.compare(0, 4, "MEM1") != 0) fail(Errc::IoError, "not a MEM1 ensemble file");
  const std::uint64_t M = get_u64(bytes, 4);
  const std::uint64_t d = get_u64(bytes, 12);
  if (d == 0 || M > (bytes.size() - 20) / 8 / d || bytes.size() != 20 + 8 * M * d)
    fail(Errc::IoError, "MEM1 file size does not match its header");
  Ensemble e;
  e.samples.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(d));
  e.diverged.assign(M, std::nullopt);
  std::size_t at = 20;
  for (std::uint64_t r = 0; r < M; ++r) {
    bool finite = true;
    for (std::uint64_t i = 0; i < d; ++i, at += 8) {
      const double v = std::bit_cast<double>(get_u64(bytes, at));
      e.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = v;
      finite = finite && std::isfinite(v);
    }
    if (!finite) e.diverged[r] = 0;
  }
  return e;
}

void write_ensemble_csv(const std::filesystem::path& path, const Ensemble& e) {
  write_file_atomic(path, ensemble_to_csv(e));
}

void write_ensemble_binary(const std::filesystem::path& path, const Ensemble& e) {
  write_file_atomic(path, ensemble_to_binary(e));
}

Ensemble read_ensemble_csv(const std::filesystem::path& path) { return ensemble_from_csv(read_all(path)); }

Ensemble read_ensemble_binary(const std::filesystem::path& path) { return ensemble_from_binary(read_all(path)); }

}  // namespace memsde
