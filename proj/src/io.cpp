#include "jmls/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace jmls {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, int rows, int cols, const std::string& name) {
  Matrix m(rows, cols);
  if (static_cast<int>(j.size()) != rows) {
    throw std::invalid_argument(name + ": expected " + std::to_string(rows) + " rows");
  }
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) {
      throw std::invalid_argument(name + ": expected " + std::to_string(cols) + " columns");
    }
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& j, int n, const std::string& name) {
  if (static_cast<int>(j.size()) != n) {
    throw std::invalid_argument(name + ": expected length " + std::to_string(n));
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
  return v;
}

json model_to_json(const JmlsModel& model) {
  json j;
  j["dims"] = {{"n_z", model.dims.n_z}, {"n_y", model.dims.n_y}, {"n_u", model.dims.n_u},
               {"K", model.dims.K},     {"T", model.dims.T}};
  j["modes"] = json::array();
  for (const auto& p : model.modes) {
    j["modes"].push_back({{"A", matrix_to_json(p.A)},
                          {"B", matrix_to_json(p.B)},
                          {"C", matrix_to_json(p.C)},
                          {"D", matrix_to_json(p.D)},
                          {"Q", matrix_to_json(p.Q)},
                          {"R", matrix_to_json(p.R)}});
  }
  j["Pi"] = matrix_to_json(model.Pi);
  j["p_s1"] = vector_to_json(model.p_s1);
  j["mu1"] = vector_to_json(model.mu1);
  j["P1"] = matrix_to_json(model.P1);
  return j;
}

JmlsModel model_from_json(const json& j) {
  Dims dims;
  dims.n_z = j.at("dims").at("n_z").get<int>();
  dims.n_y = j.at("dims").at("n_y").get<int>();
  dims.n_u = j.at("dims").at("n_u").get<int>();
  dims.K = j.at("dims").at("K").get<int>();
  dims.T = j.at("dims").at("T").get<int>();
  JmlsModel model = JmlsModel::with_defaults(dims);
  const json& modes = j.at("modes");
  if (static_cast<int>(modes.size()) != dims.K) {
    throw std::invalid_argument("model file: expected " + std::to_string(dims.K) + " modes");
  }
  for (int n = 0; n < dims.K; ++n) {
    ModeParams& p = model.modes[static_cast<std::size_t>(n)];
    const json& jm = modes[n];
    p.A = matrix_from_json(jm.at("A"), dims.n_z, dims.n_z, "A");
    p.B = matrix_from_json(jm.at("B"), dims.n_z, dims.n_u, "B");
    p.C = matrix_from_json(jm.at("C"), dims.n_y, dims.n_z, "C");
    p.D = matrix_from_json(jm.at("D"), dims.n_y, dims.n_u, "D");
    p.Q = matrix_from_json(jm.at("Q"), dims.n_z, dims.n_z, "Q");
    p.R = matrix_from_json(jm.at("R"), dims.n_y, dims.n_y, "R");
  }
  model.Pi = matrix_from_json(j.at("Pi"), dims.K, dims.K, "Pi");
  model.p_s1 = vector_from_json(j.at("p_s1"), dims.K, "p_s1");
  model.mu1 = vector_from_json(j.at("mu1"), dims.n_z, "mu1");
  model.P1 = matrix_from_json(j.at("P1"), dims.n_z, dims.n_z, "P1");
  return model;
}

json suffstats_to_json(const SuffStats& s) {
  json j;
  j["S1"] = matrix_to_json(s.S1);
  j["S2m"] = vector_to_json(s.S2m);
  j["S2q"] = vector_to_json(s.S2q);
  j["S3"] = json::array();
  for (const auto& m : s.S3) j["S3"].push_back(matrix_to_json(m));
  return j;
}

SuffStats suffstats_from_json(const json& j, const Dims& dims) {
  SuffStats s = SuffStats::zeros(dims);
  s.S1 = matrix_from_json(j.at("S1"), dims.K, dims.K, "S1");
  s.S2m = vector_from_json(j.at("S2m"), dims.K, "S2m");
  s.S2q = vector_from_json(j.at("S2q"), dims.K, "S2q");
  const int d = SuffStats::stacked_dim(dims);
  for (int n = 0; n < dims.K; ++n) {
    s.S3[static_cast<std::size_t>(n)] = matrix_from_json(j.at("S3")[n], d, d, "S3");
  }
  return s;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(probe, "%lf", &back);
    if (back == v) return probe;
  }
  return buf;
}

void save_model(const JmlsModel& model, const std::string& path) {
  write_json_file(model_to_json(model), path);
}

JmlsModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  const int n_u = static_cast<int>(data.u.cols());
  const int n_y = static_cast<int>(data.y.cols());
  out << "t";
  for (int i = 1; i <= n_u; ++i) out << ",u" << i;
  for (int i = 1; i <= n_y; ++i) out << ",y" << i;
  out << "\n";
  for (int t = 0; t < data.T(); ++t) {
    out << (t + 1);
    for (int i = 0; i < n_u; ++i) out << "," << format_double(data.u(t, i));
    for (int i = 0; i < n_y; ++i) out << "," << format_double(data.y(t, i));
    out << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty dataset file");

  int n_u = 0, n_y = 0;
  {
    std::stringstream header(line);
    std::string col;
    bool first = true;
    while (std::getline(header, col, ',')) {
      if (first) {
        if (col != "t") throw std::invalid_argument(path + ": first column must be 't'");
        first = false;
      } else if (col.rfind("u", 0) == 0) {
        ++n_u;
      } else if (col.rfind("y", 0) == 0) {
        ++n_y;
      } else {
        throw std::invalid_argument(path + ": unexpected column '" + col + "'");
      }
    }
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != 1 + n_u + n_y) {
      throw std::invalid_argument(path + ": row with wrong column count");
    }
    rows.push_back(std::move(row));
  }

  Dataset data;
  const int T = static_cast<int>(rows.size());
  data.u.resize(T, n_u);
  data.y.resize(T, n_y);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n_u; ++i) data.u(t, i) = rows[static_cast<std::size_t>(t)][1 + i];
    for (int i = 0; i < n_y; ++i) {
      data.y(t, i) = rows[static_cast<std::size_t>(t)][1 + n_u + i];
    }
  }
  if (!data.u.allFinite() || !data.y.allFinite()) {
    throw std::invalid_argument(path + ": dataset contains non-finite entries");
  }
  return data;
}

void save_checkpoint(const PsaemState& state, const std::string& rng_state,
                     const std::string& path) {
  json j;
  j["theta"] = model_to_json(state.theta);
  j["stats"] = suffstats_to_json(state.stats);
  j["reference"] = state.reference;
  j["iteration"] = state.iteration;
  j["rng_state"] = rng_state;
  write_json_file(j, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const json j = read_json_file(path);
  Checkpoint ck;
  ck.state.theta = model_from_json(j.at("theta"));
  ck.state.stats = suffstats_from_json(j.at("stats"), ck.state.theta.dims);
  ck.state.reference = j.at("reference").get<std::vector<int>>();
  ck.state.iteration = j.at("iteration").get<int>();
  ck.rng_state = j.value("rng_state", std::string());
  return ck;
}

}  // namespace jmls
