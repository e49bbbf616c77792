#include "tilt/app/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "tilt/errors.hpp"

namespace tilt::app {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_trials_csv(std::ostream& out, std::span<const TrialResult> rows) {
  out << "experiment,method,level_or_L,n,m,lambda,d_f,d_b,target_mse,seed,trial,status\n";
  for (const auto& r : rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.method) << ',' << format_real(r.level_or_L)
        << ',' << r.n << ',' << r.m << ',' << format_real(r.lambda) << ',' << r.d_f << ','
        << r.d_b << ',' << format_real(r.target_mse) << ',' << r.seed << ',' << r.trial << ','
        << csv_field(r.status) << '\n';
  }
}

void write_aggregates_csv(std::ostream& out, const SweepResult& sweep, ExperimentKind kind,
                          double level_or_L) {
  const bool lambda_keyed =
      kind == ExperimentKind::LambdaSensitivity || kind == ExperimentKind::BoundedRatioSweep;
  out << "experiment,method,level_or_L,mean,q25,q75,count,lambda\n";
  for (const auto& a : sweep.aggregates) {
    const double level = lambda_keyed ? level_or_L : a.key;
    const double lambda = lambda_keyed ? a.key : kNotApplicable;
    out << csv_field(a.experiment) << ',' << csv_field(a.series) << ',' << format_real(level)
        << ',' << format_real(a.mean) << ',' << format_real(a.q25) << ',' << format_real(a.q75)
        << ',' << a.count << ',' << format_real(lambda) << '\n';
  }
}

void write_err_lambda_csv(std::ostream& out, std::span<const ErrLambdaRecord> rows) {
  out << "d_f,d_b,lambda,trial,scaled_err_lambda_sq\n";
  for (const auto& r : rows) {
    out << r.d_f << ',' << r.d_b << ',' << format_real(r.lambda) << ',' << r.trial << ','
        << format_real(r.scaled_err_lambda_sq) << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("CSV has no column \"" + name + "\"");
}

namespace {

std::vector<std::string> split_record(std::istream& in, bool& ok) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  ok = false;
  for (int ch; (ch = in.get()) != EOF;) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      ok = true;
      return fields;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any) {
    fields.push_back(std::move(field));
    ok = true;
  }
  return fields;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  bool ok = false;
  table.header = split_record(in, ok);
  if (!ok) throw DataError(path.string() + " is empty");
  for (;;) {
    auto rec = split_record(in, ok);
    if (!ok) break;
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != table.header.size()) {
      throw DataError(path.string() + ": row has " + std::to_string(rec.size()) +
                      " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rec));
  }
  return table;
}

double parse_real(const std::string& text) {
  if (text == "nan" || text.empty()) return kNotApplicable;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw DataError("not a number: " + text);
  return v;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 initialisation failed");
  }
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace tilt::app
