#pragma once

// Matrix serialization. A matrix is
//   {"rows": r, "cols": c, "data": [[re, im], ...]}
// with data in row-major order; real vectors are plain arrays. Doubles are
// written with round-trip precision, so a load after a save is exact.
//
// QR checkpoints wrap the chain state:
//   {"schema": "cartan.checkpoint/1", "step": ..., "frame": <matrix>,
//    "batch_sums": [[...], ...], "current": [...], "rng_state": "..."}

#include "cartan/lyapunov.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace cartan {

using json = nlohmann::json;

inline constexpr const char* checkpoint_schema = "cartan.checkpoint/1";

inline json matrix_to_json(const Mat& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back({m(i, j).real(), m(i, j).imag()});
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Mat matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw DataError("matrix JSON needs rows, cols and data");
  if (!j["rows"].is_number_integer() || !j["cols"].is_number_integer())
    throw DataError("matrix JSON rows and cols must be integers");
  const long r = j["rows"].get<long>(), c = j["cols"].get<long>();
  if (r < 0 || c < 0) throw DataError("matrix JSON has negative dimensions");
  const json& d = j["data"];
  if (!d.is_array() || static_cast<long>(d.size()) != r * c)
    throw DataError("matrix JSON data has " + std::to_string(d.is_array() ? d.size() : 0) + " entries, expected " +
                    std::to_string(r * c));
  Mat m(r, c);
  for (long k = 0; k < r * c; ++k) {
    const json& e = d[static_cast<size_t>(k)];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw DataError("matrix JSON entry " + std::to_string(k) + " is not a [re, im] pair");
    m(k / c, k % c) = cplx(e[0].get<double>(), e[1].get<double>());
  }
  if (!m.allFinite()) throw DataError("matrix JSON has non-finite entries");
  return m;
}

inline json vector_to_json(const RVec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline RVec vector_from_json(const json& j) {
  if (!j.is_array()) throw DataError("vector JSON must be an array");
  RVec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError("vector JSON entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json checkpoint_to_json(const QrState& st) {
  json sums = json::array();
  for (auto& b : st.batch_sums) sums.push_back(vector_to_json(b));
  return {{"schema", checkpoint_schema},     {"step", st.step},
          {"frame", matrix_to_json(st.frame)}, {"batch_sums", std::move(sums)},
          {"current", vector_to_json(st.current)}, {"rng_state", st.rng_state}};
}

inline QrState checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != checkpoint_schema)
    throw DataError(std::string("checkpoint schema is not ") + checkpoint_schema);
  QrState st;
  try {
    st.step = j.at("step").get<long>();
    st.frame = matrix_from_json(j.at("frame"));
    for (auto& b : j.at("batch_sums")) st.batch_sums.push_back(vector_from_json(b));
    st.current = vector_from_json(j.at("current"));
    st.rng_state = j.at("rng_state").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  const auto d = st.frame.rows();
  if (st.frame.cols() != d || st.current.size() != d) throw DataError("checkpoint sizes are inconsistent");
  for (auto& b : st.batch_sums)
    if (b.size() != d) throw DataError("checkpoint batch sums have the wrong length");
  return st;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace cartan
