#include "nnsub/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "nnsub/error.hpp"

namespace nnsub::io {
namespace {

struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  // Next line, with trailing '\r' removed. Returns false at end of input.
  bool next(std::string_view& out) {
    if (pos >= text.size()) return false;
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    out = text.substr(pos, stop - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = stop + 1;
    ++line;
    return true;
  }

  // Next line that is not blank.
  bool next_content(std::string_view& out) {
    while (next(out)) {
      if (out.find_first_not_of(" \t") != std::string_view::npos) return true;
    }
    return false;
  }
};

bool is_separator(char c) { return c == ',' || c == ' ' || c == '\t'; }

std::vector<double> parse_numbers(std::string_view line, std::size_t line_no) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_separator(line[i])) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_separator(line[j])) ++j;
    const std::string_view token = line.substr(i, j - i);
    double value = 0.0;
    const char* first = token.data();
    if (!token.empty() && token.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw ParseError("invalid number '" + std::string(token) + "'", line_no);
    }
    if (!std::isfinite(value)) {
      throw ParseError("non-finite value '" + std::string(token) + "'", line_no);
    }
    out.push_back(value);
    i = j;
  }
  return out;
}

// Parses "# key=value key=value ..." into a map.
std::map<std::string, std::string> parse_header(std::string_view line, std::size_t line_no) {
  if (line.empty() || line.front() != '#') throw ParseError("expected '#' header line", line_no);
  std::map<std::string, std::string> fields;
  std::istringstream in{std::string(line.substr(1))};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("malformed header field '" + token + "'", line_no);
    }
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

long header_count(const std::map<std::string, std::string>& fields, const std::string& key,
                  std::size_t line_no) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw ParseError("header lacks '" + key + "='", line_no);
  long value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) {
    throw ParseError("header field '" + key + "' must be a positive integer", line_no);
  }
  return value;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Matrix parse_matrix(std::string_view text) {
  LineCursor cursor{text};
  std::string_view line;
  if (!cursor.next_content(line)) throw ParseError("empty matrix file", 0);
  const auto header = parse_header(line, cursor.line);
  const long rows = header_count(header, "rows", cursor.line);
  const long cols = header_count(header, "cols", cursor.line);

  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!cursor.next_content(line)) {
      throw ParseError("expected " + std::to_string(rows) + " rows, found " + std::to_string(i),
                       cursor.line);
    }
    const auto values = parse_numbers(line, cursor.line);
    if (static_cast<long>(values.size()) != cols) {
      throw ParseError("expected " + std::to_string(cols) + " values, found " +
                           std::to_string(values.size()),
                       cursor.line);
    }
    for (long j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(j)];
  }
  if (cursor.next_content(line)) throw ParseError("unexpected trailing data", cursor.line);
  return m;
}

std::string format_matrix(const Matrix& m) {
  std::string out = "# rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      append_number(out, m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix read_matrix(const std::filesystem::path& path) { return parse_matrix(read_text(path)); }

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  write_text(path, format_matrix(m));
}

FeatureDataset parse_features(std::string_view text) {
  LineCursor cursor{text};
  std::string_view line;
  if (!cursor.next_content(line)) throw ParseError("empty feature file", 0);
  const auto header = parse_header(line, cursor.line);
  const long dims = header_count(header, "features", cursor.line);
  const long samples = header_count(header, "samples", cursor.line);
  const long classes = header_count(header, "classes", cursor.line);

  FeatureDataset data;
  data.features.resize(dims, samples);
  data.labels.reserve(static_cast<std::size_t>(samples));
  data.class_names = default_class_names(static_cast<int>(classes));

  long sample = 0;
  while (cursor.next_content(line)) {
    if (line.front() == '#') {
      const auto fields = parse_header(line, cursor.line);
      const auto it = fields.find("class_names");
      if (sample != 0 || it == fields.end()) {
        throw ParseError("unexpected comment line", cursor.line);
      }
      std::vector<std::string> names;
      std::stringstream ss(it->second);
      std::string name;
      while (std::getline(ss, name, ',')) names.push_back(name);
      if (static_cast<long>(names.size()) != classes) {
        throw ParseError("class_names lists " + std::to_string(names.size()) +
                             " names for " + std::to_string(classes) + " classes",
                         cursor.line);
      }
      data.class_names = std::move(names);
      continue;
    }
    if (sample >= samples) throw ParseError("more samples than declared", cursor.line);
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError("missing label separator", cursor.line);
    const std::string_view label_text = line.substr(0, comma);
    int label = 0;
    const auto [ptr, ec] =
        std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size()) {
      throw ParseError("invalid label '" + std::string(label_text) + "'", cursor.line);
    }
    if (label < 0 || label >= classes) {
      throw LabelError("line " + std::to_string(cursor.line) + ": label " + std::to_string(label) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    const auto values = parse_numbers(line.substr(comma + 1), cursor.line);
    if (static_cast<long>(values.size()) != dims) {
      throw ParseError("expected " + std::to_string(dims) + " features, found " +
                           std::to_string(values.size()),
                       cursor.line);
    }
    for (long i = 0; i < dims; ++i) data.features(i, sample) = values[static_cast<std::size_t>(i)];
    data.labels.push_back(label);
    ++sample;
  }
  if (sample != samples) {
    throw ParseError("declared " + std::to_string(samples) + " samples, found " +
                         std::to_string(sample),
                     cursor.line);
  }
  data.validate();
  return data;
}

std::string format_features(const FeatureDataset& data) {
  std::string out = "# features=" + std::to_string(data.dims()) +
                    " samples=" + std::to_string(data.samples()) +
                    " classes=" + std::to_string(data.classes()) + "\n";
  if (data.class_names != default_class_names(data.classes())) {
    out += "# class_names=";
    for (std::size_t c = 0; c < data.class_names.size(); ++c) {
      if (c) out += ',';
      out += data.class_names[c];
    }
    out += '\n';
  }
  for (Index j = 0; j < data.samples(); ++j) {
    out += std::to_string(data.labels[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < data.dims(); ++i) {
      out += ',';
      append_number(out, data.features(i, j));
    }
    out += '\n';
  }
  return out;
}

FeatureDataset load_features(const std::filesystem::path& path) {
  return parse_features(read_text(path));
}

void save_features(const std::filesystem::path& path, const FeatureDataset& data) {
  write_text(path, format_features(data));
}

FeatureMapStack parse_feature_map(std::string_view text, std::string source_id) {
  LineCursor cursor{text};
  std::string_view line;
  if (!cursor.next_content(line)) throw ParseError("empty feature-map file", 0);
  const auto header = parse_header(line, cursor.line);
  FeatureMapStack fmap;
  fmap.channels = static_cast<int>(header_count(header, "channels", cursor.line));
  fmap.height = static_cast<int>(header_count(header, "height", cursor.line));
  fmap.width = static_cast<int>(header_count(header, "width", cursor.line));
  fmap.source_id = std::move(source_id);
  const long lines = static_cast<long>(fmap.channels) * fmap.height;
  fmap.data.reserve(static_cast<std::size_t>(lines) * static_cast<std::size_t>(fmap.width));
  for (long r = 0; r < lines; ++r) {
    if (!cursor.next_content(line)) {
      throw ParseError("expected " + std::to_string(lines) + " rows, found " + std::to_string(r),
                       cursor.line);
    }
    const auto values = parse_numbers(line, cursor.line);
    if (static_cast<long>(values.size()) != fmap.width) {
      throw ParseError("expected " + std::to_string(fmap.width) + " values, found " +
                           std::to_string(values.size()),
                       cursor.line);
    }
    fmap.data.insert(fmap.data.end(), values.begin(), values.end());
  }
  if (cursor.next_content(line)) throw ParseError("unexpected trailing data", cursor.line);
  return fmap;
}

std::string format_feature_map(const FeatureMapStack& fmap) {
  std::string out = "# channels=" + std::to_string(fmap.channels) +
                    " height=" + std::to_string(fmap.height) +
                    " width=" + std::to_string(fmap.width) + "\n";
  std::size_t idx = 0;
  for (int r = 0; r < fmap.channels * fmap.height; ++r) {
    for (int x = 0; x < fmap.width; ++x) {
      if (x) out += ' ';
      append_number(out, fmap.data[idx++]);
    }
    out += '\n';
  }
  return out;
}

FeatureMapStack load_feature_map(const std::filesystem::path& path) {
  return parse_feature_map(read_text(path), path.filename().string());
}

void save_feature_map(const std::filesystem::path& path, const FeatureMapStack& fmap) {
  write_text(path, format_feature_map(fmap));
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ParseError("matrix must be a non-empty array of rows", 0);
  }
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError("ragged matrix row " + std::to_string(i), 0);
    }
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError("non-numeric matrix entry", 0);
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

json model_to_json(const FactorModel& model) {
  json j;
  j["method"] = std::string(method_name(model.method));
  j["k"] = model.k;
  j["hyper"] = {{"alpha", model.hyper.alpha},
                {"beta", model.hyper.beta},
                {"iters", model.hyper.iters},
                {"tol", model.hyper.tol},
                {"eps", model.hyper.eps}};
  j["seed"] = model.seed;
  j["U"] = matrix_to_json(model.U);
  j["V"] = matrix_to_json(model.V);
  if (model.A) j["A"] = matrix_to_json(*model.A);
  if (model.Z) j["Z"] = matrix_to_json(*model.Z);
  if (model.sigma) j["sigma"] = std::vector<double>(model.sigma->begin(), model.sigma->end());
  j["objective_trace"] = model.objective_trace;
  return j;
}

FactorModel model_from_json(const json& j) {
  try {
    FactorModel model;
    model.method = parse_method(j.at("method").get<std::string>());
    model.k = j.at("k").get<int>();
    const json& h = j.at("hyper");
    model.hyper.alpha = h.at("alpha").get<double>();
    model.hyper.beta = h.at("beta").get<double>();
    model.hyper.iters = h.at("iters").get<int>();
    model.hyper.tol = h.at("tol").get<double>();
    model.hyper.eps = h.at("eps").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.U = matrix_from_json(j.at("U"));
    model.V = matrix_from_json(j.at("V"));
    if (j.contains("A")) model.A = matrix_from_json(j.at("A"));
    if (j.contains("Z")) model.Z = matrix_from_json(j.at("Z"));
    if (j.contains("sigma")) {
      const auto s = j.at("sigma").get<std::vector<double>>();
      model.sigma = Eigen::Map<const Vector>(s.data(), static_cast<Index>(s.size()));
    }
    model.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    if (model.U.cols() != model.k || model.V.cols() != model.k) {
      throw DimensionError("model factors do not have k columns");
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid model document: ") + e.what(), 0);
  }
}

void save_model(const std::filesystem::path& path, const FactorModel& model) {
  write_text(path, model_to_json(model).dump(1) + "\n");
}

FactorModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not JSON: ") + e.what(), 0);
  }
  return model_from_json(j);
}

json head_to_json(const LinearHead& head) {
  json j;
  j["weights"] = matrix_to_json(head.weights);
  j["bias"] = std::vector<double>(head.bias.begin(), head.bias.end());
  j["loss_trace_final"] = head.loss_trace.empty() ? 0.0 : head.loss_trace.back();
  return j;
}

LinearHead head_from_json(const json& j) {
  try {
    LinearHead head;
    head.weights = matrix_from_json(j.at("weights"));
    const auto b = j.at("bias").get<std::vector<double>>();
    head.bias = Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size()));
    if (head.bias.size() != head.weights.cols()) throw DimensionError("bias length != classes");
    return head;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid head document: ") + e.what(), 0);
  }
}

json config_to_json(const EvalConfig& c) {
  return {{"method", std::string(method_name(c.method))},
          {"k", c.k},
          {"alpha", c.hyper.alpha},
          {"beta", c.hyper.beta},
          {"iters", c.hyper.iters},
          {"tol", c.hyper.tol},
          {"eps", c.hyper.eps},
          {"K", c.knn_k},
          {"repeats", c.repeats},
          {"seed", c.seed},
          {"distance", std::string(distance_name(c.distance))},
          {"classifier", c.classifier == Classifier::Knn ? "knn" : "linear"},
          {"head_epochs", c.head.epochs},
          {"head_lr", c.head.lr},
          {"standardize", c.standardize},
          {"resample", c.resample},
          {"protocol", c.protocol == Protocol::Resample ? "resample" : "episode"},
          {"ways", c.episode.ways},
          {"shots", c.episode.shots},
          {"query_per_class", c.episode.query_per_class},
          {"episode_repeats", c.episode.repeats},
          {"episode_seed", c.episode.seed}};
}

json report_to_json(const EvalReport& report) {
  return {{"per_run_accuracy", report.per_run_accuracy},
          {"mean", report.mean},
          {"std", report.std},
          {"config_echo", config_to_json(report.config)}};
}

std::string report_tsv_header() { return "method\tk\tclassifier\tK\truns\tseed\tmean\tstd"; }

std::string report_to_tsv(const EvalReport& report) {
  const EvalConfig& c = report.config;
  std::ostringstream out;
  out.precision(17);
  out << method_name(c.method) << '\t' << c.k << '\t'
      << (c.classifier == Classifier::Knn ? "knn" : "linear") << '\t' << c.knn_k << '\t'
      << report.per_run_accuracy.size() << '\t' << c.seed << '\t' << report.mean << '\t'
      << report.std;
  return out.str();
}

json cca_to_json(const CcaResult& result) {
  return {{"correlations", result.correlations}, {"mean_correlation", result.mean_correlation}};
}

json sparsity_to_json(const SparsityReport& report) {
  return {{"hoyer", report.hoyer},
          {"zero_fraction", report.zero_fraction},
          {"matrix_tag", std::string(matrix_tag_name(report.tag))}};
}

json activation_sidecar(const ActivationMap& map, const std::string& source_id) {
  return {{"predicted_class", map.predicted_class},
          {"class_score", map.class_score},
          {"constant_map", map.constant},
          {"height", map.values.rows()},
          {"width", map.values.cols()},
          {"source_id", source_id}};
}

void write_pgm(const std::filesystem::path& path, const Matrix& values) {
  std::string out = "P5\n" + std::to_string(values.cols()) + " " +
                    std::to_string(values.rows()) + "\n255\n";
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      const double v = std::clamp(values(i, j), 0.0, 1.0);
      out += static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  }
  write_text(path, out);
}

}  // namespace nnsub::io
