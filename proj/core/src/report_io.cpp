#include "memsde/report_io.hpp"

#include "memsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace memsde {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void dump_string(std::string& out, const std::string& s) {
  // nlohmann escapes strings correctly; reuse it for the scalar case.
  out += Json(s).dump();
}

void dump(std::string& out, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        dump_string(out, it.key());
        out += ": ";
        dump(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        dump(out, v, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  dump(out, j, 0);
  out += "\n";
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(Errc::IoError, "cannot open " + tmp.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) fail(Errc::IoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Errc::IoError, "cannot rename into " + path.string());
  }
}

std::string CsvTable::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

CsvTable errors_table(const std::vector<double>& taus, const std::vector<double>& errors,
                      const std::vector<double>& std_errors, const std::vector<std::size_t>& n_effective) {
  CsvTable t{{"tau", "w1", "se", "n_effective"}, {}};
  for (std::size_t i = 0; i < taus.size(); ++i)
    t.rows.push_back({taus[i], errors[i], std_errors[i], static_cast<double>(n_effective[i])});
  return t;
}

std::string rates_csv(const std::optional<RateFit>& logtau, const std::optional<RateFit>& loglog) {
  std::string out = "model,slope,intercept,residual\n";
  auto row = [&](const char* name, const std::optional<RateFit>& f) {
    if (!f) return;
    out += std::string(name) + "," + format_double(f->slope) + "," + format_double(f->intercept) + "," +
           format_double(f->residual) + "\n";
  };
  row("logtau", logtau);
  row("logtau_logcorrected", loglog);
  return out;
}

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) fail(Errc::IoError, "cannot create output directory " + dir_.string());
}

void OutputDir::write(const std::string& name, const std::string& content) {
  write_file_atomic(dir_ / name, content);
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputDir::write_json(const std::string& name, const Json& j) { write(name, dump_json(j)); }

void OutputDir::write_csv(const std::string& name, const CsvTable& table) { write(name, table.to_string()); }

void OutputDir::finish(const Json& effective_config) {
  // Everything present in the directory, so that pre-existing files are not hidden.
  std::vector<std::string> all;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir_))
    if (e.is_regular_file()) all.push_back(std::filesystem::relative(e.path(), dir_).generic_string());
  if (std::find(all.begin(), all.end(), "manifest.json") == all.end()) all.push_back("manifest.json");
  std::sort(all.begin(), all.end());
  Json m;
  m["schema"] = kSchemaVersion;
  m["files"] = all;
  m["config"] = effective_config;
  write_json("manifest.json", m);
}

}  // namespace memsde
