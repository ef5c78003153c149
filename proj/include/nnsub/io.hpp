#ifndef NNSUB_IO_HPP
#define NNSUB_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nnsub/analysis.hpp"
#include "nnsub/cam.hpp"
#include "nnsub/factorize.hpp"
#include "nnsub/fewshot.hpp"

namespace nnsub::io {

using nlohmann::json;

// Matrix text file: "# rows=<M> cols=<N>" then M lines of N numbers.
Matrix parse_matrix(std::string_view text);
std::string format_matrix(const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

// Feature file: "# features=<M> samples=<N> classes=<C>", an optional
// "# class_names=a,b,..." line, then per sample "<label>,<f1>,...,<fM>".
FeatureDataset parse_features(std::string_view text);
std::string format_features(const FeatureDataset& data);
FeatureDataset load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureDataset& data);

// Feature-map file: "# channels=<c> height=<h> width=<w>" then c*h lines of
// w numbers (channel-major, then row).
FeatureMapStack parse_feature_map(std::string_view text, std::string source_id = {});
std::string format_feature_map(const FeatureMapStack& fmap);
FeatureMapStack load_feature_map(const std::filesystem::path& path);
void save_feature_map(const std::filesystem::path& path, const FeatureMapStack& fmap);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json model_to_json(const FactorModel& model);
/// Extra keys (such as an embedded run configuration) are ignored.
FactorModel model_from_json(const json& j);
void save_model(const std::filesystem::path& path, const FactorModel& model);
FactorModel load_model(const std::filesystem::path& path);

json head_to_json(const LinearHead& head);
LinearHead head_from_json(const json& j);

json config_to_json(const EvalConfig& config);
json report_to_json(const EvalReport& report);
/// Single tab-separated row: method k classifier K repeats seed mean std.
std::string report_to_tsv(const EvalReport& report);
std::string report_tsv_header();

json cca_to_json(const CcaResult& result);
json sparsity_to_json(const SparsityReport& report);
json activation_sidecar(const ActivationMap& map, const std::string& source_id);

/// Binary PGM (P5), values in [0, 1] mapped to 0..255.
void write_pgm(const std::filesystem::path& path, const Matrix& values);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace nnsub::io

#endif  // NNSUB_IO_HPP
