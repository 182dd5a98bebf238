#include "mrd/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mrd/errors.hpp"

namespace mrd {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

// Splits CSV text into rows of raw cells. Quoted fields may contain commas,
// newlines and doubled quotes.
std::vector<std::vector<std::string>> split_csv(const std::string& text, const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      } else {
        rows.emplace_back();  // blank line, kept so row numbers match the file
      }
      row.clear();
      cell.clear();
      any = false;
      ++line;
    } else {
      cell += c;
    }
  }
  if (quoted) throw DataError(source + ": unterminated quoted field at line " + std::to_string(line));
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  // Shortest text that parses back to the same double.
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& source) {
  auto rows = split_csv(text, source);
  // Trailing blank lines are ignored, interior ones are errors.
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw DataError(source + ": empty file");

  CsvTable table;
  std::size_t first = 0;
  const auto& head = rows.front();
  for (const auto& cell : head) {
    if (!parse_number(cell)) table.has_header = true;
  }
  const std::size_t width = head.size();
  if (table.has_header) {
    for (const auto& cell : head) table.columns.push_back(trim(cell));
    first = 1;
  } else {
    for (std::size_t c = 0; c < width; ++c) table.columns.push_back("c" + std::to_string(c));
  }
  if (rows.size() == first) throw DataError(source + ": no data rows");

  table.data.resize(static_cast<Index>(rows.size() - first), static_cast<Index>(width));
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      throw DataError(source + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(row[c]);
      if (!v) {
        throw DataError(source + ": row " + std::to_string(r + 1) + ", column " +
                        std::to_string(c + 1) + ": '" + row[c] + "' is not a number");
      }
      table.data(static_cast<Index>(r - first), static_cast<Index>(c)) = *v;
    }
  }
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable load_csv(const std::string& path) { return parse_csv(read_file(path), path); }

Vector load_column(const std::string& path) {
  const CsvTable t = load_csv(path);
  if (t.data.cols() != 1) {
    throw DataError(path + ": expected a single column, found " + std::to_string(t.data.cols()));
  }
  return t.data.col(0);
}

std::string format_csv(const Matrix& data, const std::vector<std::string>& columns) {
  std::string out;
  if (!columns.empty()) {
    if (static_cast<Index>(columns.size()) != data.cols()) {
      throw DimensionError("format_csv: " + std::to_string(columns.size()) + " names for " +
                           std::to_string(data.cols()) + " columns");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += quote_if_needed(columns[c]);
    }
    out += '\n';
  }
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      out += format_double(data(r, c));
    }
    out += '\n';
  }
  return out;
}

void save_csv(const std::string& path, const Matrix& data, const std::vector<std::string>& columns) {
  write_file_atomic(path, format_csv(data, columns));
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot replace '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// Model files

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json dims_to_json(const std::vector<Index>& dims) {
  json out = json::array();
  for (Index d : dims) out.push_back(d + 1);
  return out;
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("model file: " + (path_.empty() ? std::string("<root>") : path_) + ": " + what);
  }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    auto it = j_.find(key);
    const std::string p = path_.empty() ? key : path_ + "." + key;
    if (it == j_.end()) throw DataError("model file: missing field '" + p + "'");
    return Reader(*it, p);
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  Reader at(std::size_t i) const {
    if (!j_.is_array() || i >= j_.size()) fail("expected an array with at least " + std::to_string(i + 1) + " entries");
    return Reader(j_[i], path_ + "[" + std::to_string(i) + "]");
  }
  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }
  std::uint64_t unsigned_integer() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return j_.get<std::uint64_t>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  Vector vector() const {
    Vector v(static_cast<Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) v[static_cast<Index>(i)] = at(i).number();
    return v;
  }
  Matrix matrix(Index cols) const {
    Matrix m(static_cast<Index>(size()), cols);
    for (std::size_t r = 0; r < size(); ++r) {
      const Reader row = at(r);
      if (static_cast<Index>(row.size()) != cols) {
        row.fail("expected " + std::to_string(cols) + " columns, found " + std::to_string(row.size()));
      }
      for (Index c = 0; c < cols; ++c) m(static_cast<Index>(r), c) = row.at(static_cast<std::size_t>(c)).number();
    }
    return m;
  }
  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).string());
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

}  // namespace

json segmentation_to_json(const Segmentation& seg) {
  json j;
  j["delta_rel"] = seg.delta_rel;
  j["views"] = seg.view_names;
  j["delta_abs"] = seg.delta_abs;
  j["shared"] = dims_to_json(seg.shared);
  json priv = json::object();
  for (std::size_t i = 0; i < seg.view_names.size(); ++i) priv[seg.view_names[i]] = dims_to_json(seg.private_dims[i]);
  j["private"] = priv;
  json partial = json::array();
  for (const auto& p : seg.partial) {
    json views = json::array();
    for (auto v : p.views) views.push_back(seg.view_names[v]);
    partial.push_back({{"views", views}, {"dims", dims_to_json(p.dims)}});
  }
  j["partial"] = partial;
  j["inactive"] = dims_to_json(seg.inactive);
  j["borderline"] = dims_to_json(seg.borderline);
  return j;
}

json model_to_json(const MrdModel& model, const std::optional<TrainingSummary>& training) {
  model.validate();
  json j;
  j["format_version"] = kModelFormatVersion;
  j["seed"] = model.seed;
  j["delta_rel"] = model.delta_rel;
  j["latent_dim"] = model.latent_dim();
  j["num_points"] = model.num_points();
  json views = json::array();
  for (const auto& v : model.views) {
    json jv;
    jv["name"] = v.name;
    jv["columns"] = v.columns;
    jv["col_mean"] = vector_to_json(v.col_mean);
    jv["col_scale"] = vector_to_json(v.col_scale);
    jv["kernel"] = {{"variance", v.kernel.variance}, {"weights", vector_to_json(v.kernel.weights)}};
    jv["noise_variance"] = v.noise_variance;
    jv["inducing"] = matrix_to_json(v.inducing);
    jv["data"] = matrix_to_json(v.data);
    views.push_back(std::move(jv));
  }
  j["views"] = std::move(views);
  j["q"] = {{"means", matrix_to_json(model.q.means)}, {"variances", matrix_to_json(model.q.variances)}};
  json prior;
  if (model.prior.is_dynamical()) {
    prior["kind"] = "dynamical";
    prior["timestamps"] = vector_to_json(model.prior.timestamps);
    prior["sequence_ids"] = model.prior.sequence_ids;
    prior["temporal"] = {{"variance", model.prior.temporal.variance},
                         {"lengthscale", model.prior.temporal.lengthscale},
                         {"jitter", model.prior.temporal.jitter}};
  } else {
    prior["kind"] = "standard";
  }
  j["prior"] = std::move(prior);
  j["segmentation"] = segmentation_to_json(segment(model, model.delta_rel));
  if (training) {
    json t;
    t["termination"] = training->termination;
    t["iterations"] = training->iterations;
    t["initial_bound"] = training->trace.empty() ? json(nullptr) : json(training->trace.front());
    t["final_bound"] = training->trace.empty() ? json(nullptr) : json(training->trace.back());
    t["trace"] = training->trace;
    j["training"] = std::move(t);
  }
  return j;
}

ModelFile model_from_json(const json& j) {
  const Reader root(j, "");
  if (!j.is_object()) root.fail("expected an object");
  const std::int64_t version = root.at("format_version").integer();
  if (version > kModelFormatVersion) {
    throw VersionError("model file format_version " + std::to_string(version) +
                       " is newer than the supported version " + std::to_string(kModelFormatVersion));
  }
  if (version < 1) root.at("format_version").fail("unsupported version " + std::to_string(version));

  ModelFile out;
  MrdModel& m = out.model;
  m.seed = root.at("seed").unsigned_integer();
  m.delta_rel = root.at("delta_rel").number();
  const std::int64_t q_dim = root.at("latent_dim").integer();
  if (q_dim < 1) root.at("latent_dim").fail("must be positive");
  const Index nq = static_cast<Index>(q_dim);

  const Reader jq = root.at("q");
  m.q.means = jq.at("means").matrix(nq);
  m.q.variances = jq.at("variances").matrix(nq);

  const Reader jviews = root.at("views");
  for (std::size_t i = 0; i < jviews.size(); ++i) {
    const Reader jv = jviews.at(i);
    ViewParams v;
    v.name = jv.at("name").string();
    v.columns = jv.at("columns").strings();
    const Index d = static_cast<Index>(v.columns.size());
    v.col_mean = jv.at("col_mean").vector();
    v.col_scale = jv.at("col_scale").vector();
    if (v.col_mean.size() != d) jv.at("col_mean").fail("expected " + std::to_string(d) + " entries");
    if (v.col_scale.size() != d) jv.at("col_scale").fail("expected " + std::to_string(d) + " entries");
    v.kernel.variance = jv.at("kernel").at("variance").number();
    v.kernel.weights = jv.at("kernel").at("weights").vector();
    v.noise_variance = jv.at("noise_variance").number();
    v.inducing = jv.at("inducing").matrix(nq);
    v.data = jv.at("data").matrix(d);
    v.data_gram = precompute_data_gram(v.data);
    m.views.push_back(std::move(v));
  }

  const Reader jp = root.at("prior");
  const std::string kind = jp.at("kind").string();
  if (kind == "dynamical") {
    TemporalKernelParams t;
    t.variance = jp.at("temporal").at("variance").number();
    t.lengthscale = jp.at("temporal").at("lengthscale").number();
    t.jitter = jp.at("temporal").at("jitter").number();
    std::vector<int> ids;
    const Reader jid = jp.at("sequence_ids");
    for (std::size_t i = 0; i < jid.size(); ++i) ids.push_back(static_cast<int>(jid.at(i).integer()));
    m.prior = LatentPrior::dynamical(jp.at("timestamps").vector(), std::move(ids), t);
  } else if (kind != "standard") {
    jp.at("kind").fail("unknown prior kind '" + kind + "'");
  }

  if (root.has("training")) {
    const Reader jt = root.at("training");
    TrainingSummary t;
    t.termination = jt.at("termination").string();
    t.iterations = static_cast<int>(jt.at("iterations").integer());
    t.trace = [&] {
      const Vector v = jt.at("trace").vector();
      return std::vector<double>(v.data(), v.data() + v.size());
    }();
    out.training = std::move(t);
  }

  try {
    m.validate();
  } catch (const Error& e) {
    throw DataError(std::string("model file: inconsistent model: ") + e.what());
  }
  return out;
}

void save_model(const std::string& path, const MrdModel& model,
                const std::optional<TrainingSummary>& training) {
  write_file_atomic(path, model_to_json(model, training).dump(1) + "\n");
}

ModelFile load_model_file(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

MrdModel load_model(const std::string& path) { return load_model_file(path).model; }

SynthSpec synth_spec_from_json(const json& j) {
  const Reader root(j, "");
  if (!j.is_object()) throw DataError("synth spec: expected a JSON object");
  static const std::vector<std::string> known = {"n", "n_shared", "n_private", "output_dims",
                                                 "noise_std", "nonlinearity", "n_sequences",
                                                 "n_classes", "share_maps", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DataError("synth spec: unknown field '" + key + "'");
    }
  }
  SynthSpec s;
  auto count = [&](const std::string& key, Index& out) {
    if (root.has(key)) out = static_cast<Index>(root.at(key).integer());
  };
  count("n", s.n);
  count("n_shared", s.n_shared);
  count("n_sequences", s.n_sequences);
  count("n_classes", s.n_classes);
  auto counts = [&](const std::string& key, std::vector<Index>& out) {
    if (!root.has(key)) return;
    const Reader r = root.at(key);
    out.clear();
    for (std::size_t i = 0; i < r.size(); ++i) out.push_back(static_cast<Index>(r.at(i).integer()));
  };
  counts("n_private", s.n_private);
  counts("output_dims", s.output_dims);
  if (root.has("noise_std")) {
    const Vector v = root.at("noise_std").vector();
    s.noise_std.assign(v.data(), v.data() + v.size());
  }
  if (root.has("nonlinearity")) s.nonlinearity = nonlinearity_from_string(root.at("nonlinearity").string());
  if (root.has("share_maps")) {
    if (!j["share_maps"].is_boolean()) root.at("share_maps").fail("expected a boolean");
    s.share_maps = j["share_maps"].get<bool>();
  }
  if (root.has("seed")) s.seed = root.at("seed").unsigned_integer();
  s.validate();
  return s;
}

json synth_truth_to_json(const SynthTruth& truth) {
  json j;
  j["n_shared"] = truth.n_shared;
  j["relevant"] = truth.relevant;
  j["signals"] = matrix_to_json(truth.signals);
  j["timestamps"] = vector_to_json(truth.timestamps);
  j["sequence_ids"] = truth.sequence_ids;
  json labels = json::array();
  for (int l : truth.labels) labels.push_back(l + 1);
  j["labels"] = labels;
  return j;
}

}  // namespace mrd
