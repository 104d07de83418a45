#include "ofs/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "ofs/errors.hpp"

namespace ofs {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double x = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error("cannot parse number '" + text + "'");
  }
  return x;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error("matrix rows must all have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error("vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json layout_to_json(const ParamLayout& layout) {
  Json a = Json::array();
  for (std::size_t i = 0; i < layout.names.size(); ++i) {
    a.push_back({{"name", layout.names[i]}, {"support", to_string(layout.supports[i])}});
  }
  return a;
}

ParamLayout layout_from_json(const Json& j) {
  ParamLayout layout;
  for (const Json& e : j) {
    layout.names.push_back(e.at("name").get<std::string>());
    layout.supports.push_back(support_from_string(e.at("support").get<std::string>()));
  }
  return layout;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  CsvTable table;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw Error("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(table.header.size()) + " fields, found " +
                  std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

fs::path chain_metadata_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

Json chain_config_to_json(const ChainConfig& c) {
  Json j;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["initial"] = vector_to_json(c.initial);
  j["proposal_cov"] = c.proposal_cov.size() ? matrix_to_json(c.proposal_cov) : Json::array();
  j["adapt"] = {{"enabled", c.adapt.enabled},
                {"target_acceptance", c.adapt.target_acceptance},
                {"window", c.adapt.window}};
  j["seed"] = c.seed;
  return j;
}

ChainConfig chain_config_from_json(const Json& j) {
  ChainConfig c;
  c.iterations = j.at("iterations").get<int>();
  c.burn_in = j.at("burn_in").get<int>();
  c.thin = j.at("thin").get<int>();
  c.initial = vector_from_json(j.at("initial"));
  if (!j.at("proposal_cov").empty()) c.proposal_cov = matrix_from_json(j.at("proposal_cov"));
  const Json& a = j.at("adapt");
  c.adapt.enabled = a.at("enabled").get<bool>();
  c.adapt.target_acceptance = a.at("target_acceptance").get<double>();
  c.adapt.window = a.at("window").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_chain(const Chain& chain, const fs::path& csv_path) {
  std::string text;
  for (const std::string& name : chain.layout.names) text += name + ",";
  text += "log_value\n";
  for (Eigen::Index r = 0; r < chain.size(); ++r) {
    for (Eigen::Index c = 0; c < chain.dim(); ++c) text += format_double(chain.draws(r, c)) + ",";
    text += format_double(chain.log_values[r]) + "\n";
  }
  write_text(csv_path, text);

  Json meta;
  meta["layout"] = layout_to_json(chain.layout);
  meta["adjusted"] = to_string(chain.adjusted);
  meta["seed"] = chain.config.seed;
  meta["config"] = chain_config_to_json(chain.config);
  meta["proposed"] = chain.proposed;
  meta["accepted"] = chain.accepted;
  meta["acceptance_rate"] = chain.acceptance_rate;
  meta["support_violations"] = chain.support_violations;
  meta["draws"] = chain.size();
  write_text(chain_metadata_path(csv_path), meta.dump(2) + "\n");
}

Chain read_chain(const fs::path& csv_path) {
  Json meta;
  try {
    meta = Json::parse(read_text(chain_metadata_path(csv_path)));
  } catch (const Json::exception& e) {
    throw Error("chain metadata '" + chain_metadata_path(csv_path).string() + "': " + e.what());
  }
  Chain chain;
  try {
    chain.layout = layout_from_json(meta.at("layout"));
    chain.adjusted = adjustment_from_string(meta.at("adjusted").get<std::string>());
    chain.config = chain_config_from_json(meta.at("config"));
    chain.proposed = meta.at("proposed").get<std::uint64_t>();
    chain.accepted = meta.at("accepted").get<std::uint64_t>();
    chain.acceptance_rate = meta.at("acceptance_rate").get<double>();
    chain.support_violations = meta.at("support_violations").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw Error("chain metadata '" + chain_metadata_path(csv_path).string() + "': " + e.what());
  }
  const CsvTable table = read_csv(csv_path);
  const auto p = chain.layout.size();
  if (static_cast<Eigen::Index>(table.header.size()) != p + 1 || table.header.back() != "log_value") {
    throw Error("chain file '" + csv_path.string() + "' does not match its metadata layout");
  }
  for (Eigen::Index c = 0; c < p; ++c) {
    if (table.header[static_cast<std::size_t>(c)] != chain.layout.names[static_cast<std::size_t>(c)]) {
      throw Error("chain column '" + table.header[static_cast<std::size_t>(c)] +
                  "' does not match metadata name '" + chain.layout.names[static_cast<std::size_t>(c)] + "'");
    }
  }
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  chain.draws.resize(rows, p);
  chain.log_values.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < p; ++c) chain.draws(r, c) = parse_double(row[static_cast<std::size_t>(c)]);
    chain.log_values[r] = parse_double(row.back());
  }
  return chain;
}

Json sandwich_to_json(const SandwichEstimate& s) {
  Json j;
  j["p_hat"] = matrix_to_json(s.p_hat.matrix());
  j["q_hat"] = matrix_to_json(s.q_hat.matrix());
  j["p_method"] = to_string(s.p_method);
  j["q_method"] = to_string(s.q_method);
  j["scale"] = s.scale;
  j["provenance"] = s.provenance;
  return j;
}

SandwichEstimate sandwich_from_json(const Json& j) {
  if (j.at("scale").get<std::string>() != "total_data") {
    throw Error("sandwich estimate uses scale '" + j.at("scale").get<std::string>() +
                "'; only total_data is supported");
  }
  return SandwichEstimate(SymMatrix(matrix_from_json(j.at("p_hat"))),
                          SymMatrix(matrix_from_json(j.at("q_hat"))),
                          p_method_from_string(j.at("p_method").get<std::string>()),
                          q_method_from_string(j.at("q_method").get<std::string>()),
                          j.value("provenance", std::string()));
}

Json adjustment_to_json(const AdjustmentMatrix& a) {
  Json j;
  j["omega"] = matrix_to_json(a.omega);
  j["center"] = vector_to_json(a.center.values());
  j["layout"] = layout_to_json(a.center.layout());
  j["excluded"] = a.excluded;
  j["source"] = a.source ? sandwich_to_json(*a.source) : Json(nullptr);
  return j;
}

AdjustmentMatrix adjustment_from_json(const Json& j) {
  const ParamLayout layout = layout_from_json(j.at("layout"));
  AdjustmentMatrix a{matrix_from_json(j.at("omega")), std::nullopt,
                     ParamVec(layout, vector_from_json(j.at("center"))),
                     j.at("excluded").get<std::vector<Eigen::Index>>()};
  if (a.omega.rows() != a.omega.cols() || a.omega.rows() != layout.size()) {
    throw DimensionMismatch("adjustment matrix does not match its center");
  }
  if (!j.at("source").is_null()) a.source = sandwich_from_json(j.at("source"));
  return a;
}

void write_gp_dataset(const Dataset& data, const fs::path& path) {
  if (data.replicate_count() != 1) throw DimensionMismatch("GP dataset holds one realization");
  const Eigen::Index n = data.location_count();
  if (data.locations.rows() != n) throw DimensionMismatch("GP dataset needs locations");
  const bool has_t = data.times.size() == n;
  const Eigen::Index q = data.covariates.rows() == n ? data.covariates.cols() : 0;
  std::string text = has_t ? "x,y,t,value" : "x,y,value";
  for (Eigen::Index k = 0; k < q; ++k) text += ",x" + std::to_string(k + 1);
  text += "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    text += format_double(data.locations(i, 0)) + "," + format_double(data.locations(i, 1));
    if (has_t) text += "," + format_double(data.times[i]);
    text += "," + format_double(data.observations(0, i));
    for (Eigen::Index k = 0; k < q; ++k) text += "," + format_double(data.covariates(i, k));
    text += "\n";
  }
  write_text(path, text);
}

Dataset read_gp_dataset(const fs::path& path) {
  const CsvTable t = read_csv(path);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < t.header.size(); ++i) col[t.header[i]] = i;
  for (const char* need : {"x", "y", "value"}) {
    if (!col.count(need)) throw Error("'" + path.string() + "' lacks column '" + need + "'");
  }
  const bool has_t = col.count("t") > 0;
  const std::size_t first_cov = col["value"] + 1;
  const auto q = static_cast<Eigen::Index>(t.header.size() - first_cov);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Dataset d;
  d.observations.resize(1, n);
  d.locations.resize(n, 2);
  if (has_t) d.times.resize(n);
  if (q > 0) d.covariates.resize(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    d.locations(i, 0) = parse_double(row[col["x"]]);
    d.locations(i, 1) = parse_double(row[col["y"]]);
    if (has_t) d.times[i] = parse_double(row[col["t"]]);
    d.observations(0, i) = parse_double(row[col["value"]]);
    for (Eigen::Index k = 0; k < q; ++k) {
      d.covariates(i, k) = parse_double(row[first_cov + static_cast<std::size_t>(k)]);
    }
  }
  d.validate();
  return d;
}

void write_replicated_dataset(const Dataset& data, const fs::path& path) {
  const Eigen::Index m = data.location_count();
  if (data.locations.rows() != m) throw DimensionMismatch("replicated dataset needs locations");
  std::string text = "replicate,site,x,y,value\n";
  for (Eigen::Index r = 0; r < data.replicate_count(); ++r) {
    for (Eigen::Index s = 0; s < m; ++s) {
      text += std::to_string(r) + "," + std::to_string(s) + "," +
              format_double(data.locations(s, 0)) + "," + format_double(data.locations(s, 1)) +
              "," + format_double(data.observations(r, s)) + "\n";
    }
  }
  write_text(path, text);
}

Dataset read_replicated_dataset(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"replicate", "site", "x", "y", "value"}) {
    throw Error("'" + path.string() + "' must have columns replicate,site,x,y,value");
  }
  Eigen::Index reps = 0;
  Eigen::Index sites = 0;
  for (const auto& row : t.rows) {
    reps = std::max<Eigen::Index>(reps, std::stol(row[0]) + 1);
    sites = std::max<Eigen::Index>(sites, std::stol(row[1]) + 1);
  }
  if (reps * sites != static_cast<Eigen::Index>(t.rows.size())) {
    throw Error("'" + path.string() + "' does not hold every (replicate, site) pair exactly once");
  }
  Dataset d;
  d.observations = Matrix::Constant(reps, sites, std::numeric_limits<double>::quiet_NaN());
  d.locations.resize(sites, 2);
  for (const auto& row : t.rows) {
    const Eigen::Index r = std::stol(row[0]);
    const Eigen::Index s = std::stol(row[1]);
    d.locations(s, 0) = parse_double(row[2]);
    d.locations(s, 1) = parse_double(row[3]);
    d.observations(r, s) = parse_double(row[4]);
  }
  if (!d.observations.allFinite()) throw Error("'" + path.string() + "' has duplicate rows");
  return d;
}

}  // namespace ofs
