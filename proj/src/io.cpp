#include "lossdisc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lossdisc {

using nlohmann::json;

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError("expected a non-empty array of numbers");
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json mat_to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    out.push_back(std::move(row));
  }
  return out;
}

Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    throw ConfigError("expected a non-empty nested array (matrix)");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols) {
      throw ConfigError("ragged matrix rows in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                    .get<double>();
    }
  }
  return m;
}

void to_json(json& j, const GroupSpec& g) {
  j = json{{"mean", vec_to_json(g.mean)},
           {"cov", mat_to_json(g.cov)},
           {"weight", g.weight}};
}

void from_json(const json& j, GroupSpec& g) {
  g.mean = vec_from_json(j.at("mean"));
  g.cov = mat_from_json(j.at("cov"));
  g.weight = j.at("weight").get<double>();
}

void to_json(json& j, const TrueLinearModel& m) {
  j = json{{"beta", vec_to_json(m.beta)}, {"alpha", m.alpha}};
}

void from_json(const json& j, TrueLinearModel& m) {
  m.beta = vec_from_json(j.at("beta"));
  m.alpha = j.at("alpha").get<double>();
}

namespace {

const char* family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::Laplace: return "laplace";
    case NoiseFamily::Discrete: return "discrete";
  }
  return "gaussian";
}

NoiseFamily family_from_name(const std::string& s) {
  if (s == "gaussian") return NoiseFamily::Gaussian;
  if (s == "laplace") return NoiseFamily::Laplace;
  if (s == "discrete") return NoiseFamily::Discrete;
  throw ConfigError("unknown noise family '" + s + "'");
}

}  // namespace

void to_json(json& j, const NoiseSpec& n) {
  j = json{{"cov", mat_to_json(n.cov)}, {"family", family_name(n.family)}};
  if (n.family == NoiseFamily::Discrete) {
    j["support"] = vec_to_json(n.discrete_support);
    j["probs"] = vec_to_json(n.discrete_probs);
  }
}

void from_json(const json& j, NoiseSpec& n) {
  n.cov = mat_from_json(j.at("cov"));
  n.family = family_from_name(j.value("family", "gaussian"));
  if (n.family == NoiseFamily::Discrete) {
    n.discrete_support = vec_from_json(j.at("support"));
    n.discrete_probs = vec_from_json(j.at("probs"));
  }
}

void to_json(json& j, const PopulationSpec& p) {
  j = json{{"groups", json::array({p.group0, p.group1})},
           {"model", p.model},
           {"noise", p.noise}};
}

void from_json(const json& j, PopulationSpec& p) {
  const auto& groups = j.at("groups");
  if (!groups.is_array() || groups.size() != 2) {
    throw ConfigError("population needs exactly two groups");
  }
  groups[0].get_to(p.group0);
  groups[1].get_to(p.group1);
  j.at("model").get_to(p.model);
  j.at("noise").get_to(p.noise);
  p.validate();
}

void to_json(json& j, const LinearPredictor& p) {
  j = json{{"beta_hat", vec_to_json(p.beta_hat)},
           {"alpha_hat", p.alpha_hat},
           {"mode", p.mode == Mode::NoGroup ? "no_group" : "with_group"}};
  if (p.beta_g.has_value()) {
    j["beta_g"] = *p.beta_g;
  }
}

void from_json(const json& j, LinearPredictor& p) {
  p.beta_hat = vec_from_json(j.at("beta_hat"));
  p.alpha_hat = j.at("alpha_hat").get<double>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "no_group") {
    p.mode = Mode::NoGroup;
    p.beta_g.reset();
  } else if (mode == "with_group") {
    p.mode = Mode::WithGroup;
    p.beta_g = j.at("beta_g").get<double>();
  } else {
    throw ConfigError("unknown predictor mode '" + mode + "'");
  }
}

void to_json(json& j, const DiscrepancyReport& r) {
  j = json{{"sld_res", r.sld_res},
           {"sld_sq", r.sld_sq},
           {"cld_res", r.cld_res},
           {"cld_sq", r.cld_sq},
           {"mode", r.mode == Mode::NoGroup ? "no_group" : "with_group"},
           {"source", r.source == Source::Analytic ? "analytic" : "empirical"},
           {"signed_sld_res", r.signed_sld_res}};
}

void from_json(const json& j, DiscrepancyReport& r) {
  r.sld_res = j.at("sld_res").get<double>();
  r.sld_sq = j.at("sld_sq").get<double>();
  r.cld_res = j.at("cld_res").get<double>();
  r.cld_sq = j.at("cld_sq").get<double>();
  r.mode = j.at("mode").get<std::string>() == "with_group" ? Mode::WithGroup
                                                           : Mode::NoGroup;
  r.source = j.at("source").get<std::string>() == "empirical"
                 ? Source::Empirical
                 : Source::Analytic;
  r.signed_sld_res = j.value("signed_sld_res", 0.0);
}

void to_json(json& j, const ShiftScenario& s) {
  j = json{{"mu", vec_to_json(s.mu)},
           {"sigma", mat_to_json(s.sigma)},
           {"noise_cov", mat_to_json(s.noise_cov)},
           {"model", s.model}};
}

void from_json(const json& j, ShiftScenario& s) {
  s.mu = vec_from_json(j.at("mu"));
  s.sigma = mat_from_json(j.at("sigma"));
  s.noise_cov = mat_from_json(j.at("noise_cov"));
  j.at("model").get_to(s.model);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace and CR.
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

double parse_cell(const std::string& cell, const std::string& column,
                  std::size_t row) {
  double out = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ConfigError("non-numeric value '" + cell + "' in column '" + column +
                      "' at data row " + std::to_string(row));
  }
  return out;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open dataset file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("dataset file '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);

  std::ptrdiff_t target_idx = -1, group_idx = -1;
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.target_column) {
      target_idx = static_cast<std::ptrdiff_t>(c);
    } else if (header[c] == schema.group_column) {
      group_idx = static_cast<std::ptrdiff_t>(c);
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (target_idx < 0) {
    throw ConfigError("target column '" + schema.target_column +
                      "' not found in '" + path + "'");
  }
  if (group_idx < 0) {
    throw ConfigError("group column '" + schema.group_column +
                      "' not found in '" + path + "'");
  }
  if (feature_cols.empty()) {
    throw ConfigError("dataset '" + path + "' has no feature columns");
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::uint8_t> groups;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    ++row_no;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("row " + std::to_string(row_no) + " of '" + path +
                        "' has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(header.size()));
    }
    std::vector<double> feats;
    feats.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) {
      feats.push_back(parse_cell(cells[c], header[c], row_no));
    }
    rows.push_back(std::move(feats));
    targets.push_back(parse_cell(cells[static_cast<std::size_t>(target_idx)],
                                 schema.target_column, row_no));
    const std::string& raw = cells[static_cast<std::size_t>(group_idx)];
    const auto it = schema.group_mapping.find(raw);
    if (it == schema.group_mapping.end()) {
      throw ConfigError("unmapped group value '" + raw + "' at data row " +
                        std::to_string(row_no));
    }
    if (it->second != 0 && it->second != 1) {
      throw ConfigError("group mapping must target 0 or 1");
    }
    groups.push_back(static_cast<std::uint8_t>(it->second));
  }
  if (rows.empty()) {
    throw ConfigError("dataset '" + path + "' has no data rows");
  }

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(feature_cols.size()));
  ds.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
    ds.target(static_cast<Eigen::Index>(i)) = targets[i];
  }
  ds.group = std::move(groups);
  ds.feature_names = std::move(feature_names);
  return ds;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 16; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(probe, "%lf", &back);
    if (back == v) {
      return std::string(probe);
    }
  }
  return std::string(buf);
}

}  // namespace lossdisc
