// CSV and JSON persistence for datasets, run logs, summaries and trained
// networks. Every artifact carries a provenance line with the seed and the
// hash of the configuration that produced it.
#pragma once

#include "rally/mlp.hpp"
#include "rally/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rally {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return {buf, res.ptr};
}

inline double parse_number(std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kIo, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string config_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;

  [[nodiscard]] std::string comment_line() const {
    return "# seed=" + std::to_string(seed) + " config_hash=" + config_hash;
  }
};

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> parts;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) parts.push_back(field);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

/// Reads a CSV file, skipping '#' comment lines, and checks the header.
inline std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                        std::string_view expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::string line;
  bool header_seen = false;
  std::vector<std::vector<std::string>> rows;
  std::size_t columns = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != expected_header) {
        throw Error(ErrorKind::kIo, path.string() + ":" + std::to_string(line_no) +
                                        ": expected header '" + std::string(expected_header) + "'");
      }
      columns = split(line).size();
      header_seen = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != columns) {
      throw Error(ErrorKind::kIo, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  if (!header_seen) throw Error(ErrorKind::kIo, path.string() + ": missing header");
  return rows;
}

inline std::string join(std::initializer_list<double> values) {
  std::string out;
  for (const double v : values) {
    if (!out.empty()) out += ',';
    out += format_number(v);
  }
  return out;
}

}  // namespace detail

inline constexpr std::string_view kDatasetHeader = "theta1,theta4,land_x,land_y";
inline constexpr std::string_view kRunLogHeader =
    "iter,theta1,theta4,land_x,land_y,alpha,loss,eps,sigma,rbar_x,rbar_y";
inline constexpr std::string_view kSummaryHeader =
    "run,seed,target_x,target_y,theta1_init,theta4_init,n_iters,final_eps,final_sigma,"
    "iters_to_threshold,final_distance,misses";

inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                              const Provenance& prov) {
  auto out = detail::open_for_write(path);
  out << prov.comment_line() << '\n' << kDatasetHeader << '\n';
  for (const auto& rec : data) {
    out << detail::join({rec.phi.theta1, rec.phi.theta4, rec.landing.x(), rec.landing.y()}) << '\n';
  }
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  Dataset data;
  for (const auto& row : detail::read_table(path, kDatasetHeader)) {
    data.push_back({{parse_number(row[0]), parse_number(row[1])},
                    Vec2(parse_number(row[2]), parse_number(row[3]))});
  }
  return data;
}

inline void write_runlog_csv(const std::filesystem::path& path, const RunLog& log,
                             const Provenance& prov) {
  auto out = detail::open_for_write(path);
  out << prov.comment_line() << " target=" << format_number(log.target.x()) << ','
      << format_number(log.target.y()) << '\n'
      << kRunLogHeader << '\n';
  for (const auto& r : log.records) {
    out << r.iter << ','
        << detail::join({r.phi.theta1, r.phi.theta4, r.landing.x(), r.landing.y(), r.alpha, r.loss,
                         r.eps, r.sigma, r.r_bar.x(), r.r_bar.y()})
        << '\n';
  }
}

/// Reads back the per-iteration columns. Miss counts and the gradient flag are
/// not part of the file and come back as defaults.
inline std::vector<IterationRecord> read_runlog_csv(const std::filesystem::path& path) {
  std::vector<IterationRecord> records;
  for (const auto& row : detail::read_table(path, kRunLogHeader)) {
    IterationRecord r;
    r.iter = std::stoi(row[0]);
    r.phi = {parse_number(row[1]), parse_number(row[2])};
    r.landing = {parse_number(row[3]), parse_number(row[4])};
    r.alpha = parse_number(row[5]);
    r.loss = parse_number(row[6]);
    r.eps = parse_number(row[7]);
    r.sigma = parse_number(row[8]);
    r.r_bar = {parse_number(row[9]), parse_number(row[10])};
    records.push_back(r);
  }
  return records;
}

struct SummaryRow {
  std::string run;
  std::uint64_t seed = 0;
  Vec2 target = Vec2::Zero();
  InterceptionPolicy phi1;
  int n_iters = 0;
  double final_eps = 0.0;
  double final_sigma = 0.0;
  int iters_to_threshold = -1;  // first iteration with |r - target| below threshold, -1 if never
  double final_distance = 0.0;
  int misses = 0;
};

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<SummaryRow>& rows, const Provenance& prov) {
  auto out = detail::open_for_write(path);
  out << prov.comment_line() << '\n' << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.run << ',' << r.seed << ','
        << detail::join({r.target.x(), r.target.y(), r.phi1.theta1, r.phi1.theta4}) << ','
        << r.n_iters << ',' << detail::join({r.final_eps, r.final_sigma}) << ','
        << r.iters_to_threshold << ',' << format_number(r.final_distance) << ',' << r.misses
        << '\n';
  }
}

inline std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::vector<SummaryRow> rows;
  for (const auto& f : detail::read_table(path, kSummaryHeader)) {
    SummaryRow r;
    r.run = f[0];
    r.seed = std::stoull(f[1]);
    r.target = {parse_number(f[2]), parse_number(f[3])};
    r.phi1 = {parse_number(f[4]), parse_number(f[5])};
    r.n_iters = std::stoi(f[6]);
    r.final_eps = parse_number(f[7]);
    r.final_sigma = parse_number(f[8]);
    r.iters_to_threshold = std::stoi(f[9]);
    r.final_distance = parse_number(f[10]);
    r.misses = std::stoi(f[11]);
    rows.push_back(r);
  }
  return rows;
}

inline void write_history_csv(const std::filesystem::path& path, const TrainHistory& history,
                              const Provenance& prov) {
  auto out = detail::open_for_write(path);
  out << prov.comment_line() << '\n' << "epoch,train_mse,validation_mse\n";
  for (std::size_t e = 0; e < history.train_mse.size(); ++e) {
    const double val = e < history.validation_mse.size() ? history.validation_mse[e] : 0.0;
    out << (e + 1) << ',' << detail::join({history.train_mse[e], val}) << '\n';
  }
}

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vec2 json_vec2(const nlohmann::json& j, const char* field) {
  const auto v = j.at(field).get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorKind::kIo, std::string(field) + ": expected 2 numbers");
  return {v[0], v[1]};
}

}  // namespace detail

inline nlohmann::json model_to_json(const MlpModel& model, const Provenance& prov) {
  nlohmann::json j;
  j["seed"] = prov.seed;
  j["config_hash"] = prov.config_hash;
  j["architecture"] = std::vector<int>(kMlpWidths.begin(), kMlpWidths.end());
  j["activation"] = "tanh";
  j["input_lower"] = detail::vec_json(model.input_lower);
  j["input_upper"] = detail::vec_json(model.input_upper);
  j["output_mean"] = detail::vec_json(model.output_mean);
  j["output_std"] = detail::vec_json(model.output_std);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      rows.push_back(detail::vec_json(layer.weights.row(r).transpose()));
    }
    layers.push_back({{"weights", rows}, {"bias", detail::vec_json(layer.bias)}});
  }
  j["layers"] = layers;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    const auto arch = j.at("architecture").get<std::vector<int>>();
    if (!std::equal(arch.begin(), arch.end(), kMlpWidths.begin(), kMlpWidths.end())) {
      throw Error(ErrorKind::kIo, "architecture does not match 2-4-4-4-4-2");
    }
    MlpModel model;
    model.input_lower = detail::json_vec2(j, "input_lower");
    model.input_upper = detail::json_vec2(j, "input_upper");
    model.output_mean = detail::json_vec2(j, "output_mean");
    model.output_std = detail::json_vec2(j, "output_std");
    const auto& layers = j.at("layers");
    if (layers.size() != static_cast<std::size_t>(kMlpLayers)) {
      throw Error(ErrorKind::kIo, "wrong number of layers");
    }
    for (int l = 0; l < kMlpLayers; ++l) {
      auto& layer = model.layers[l];
      const auto rows = layers[l].at("weights").get<std::vector<std::vector<double>>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      if (rows.size() != static_cast<std::size_t>(layer.weights.rows()) ||
          bias.size() != static_cast<std::size_t>(layer.bias.size())) {
        throw Error(ErrorKind::kIo, "layer " + std::to_string(l) + " has the wrong shape");
      }
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (row.size() != static_cast<std::size_t>(layer.weights.cols())) {
          throw Error(ErrorKind::kIo, "layer " + std::to_string(l) + " has the wrong shape");
        }
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
          layer.weights(r, c) = row[static_cast<std::size_t>(c)];
        }
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
        layer.bias(i) = bias[static_cast<std::size_t>(i)];
      }
    }
    if (!model.finite()) throw Error(ErrorKind::kIo, "model contains non-finite numbers");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("malformed model document: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const MlpModel& model,
                       const Provenance& prov) {
  auto out = detail::open_for_write(path);
  out << model_to_json(model, prov).dump(2) << '\n';
}

inline MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kIo, path.string() + ": " + e.what());
  }
}

}  // namespace rally
