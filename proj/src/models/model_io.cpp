#include "tke/models/model_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "tke/error.hpp"
#include "tke/models/boosting.hpp"
#include "tke/models/forest.hpp"
#include "tke/models/gpr.hpp"
#include "tke/models/knn.hpp"
#include "tke/models/mlp.hpp"

namespace tke {

namespace {
constexpr char kMagic[8] = {'T', 'K', 'E', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint64_t kMaxLength = 1ULL << 34;
}  // namespace

void BinaryWriter::write_bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error(ErrorCode::io, "model write failed");
}

void BinaryWriter::put_string(const std::string& s) {
  put<std::uint64_t>(s.size());
  write_bytes(s.data(), s.size());
}

void BinaryWriter::put_doubles(const std::vector<double>& v) {
  put<std::uint64_t>(v.size());
  write_bytes(v.data(), v.size() * sizeof(double));
}

void BinaryWriter::put_matrix(const Eigen::MatrixXd& m) {
  put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  write_bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

void BinaryWriter::put_vector(const Eigen::VectorXd& v) {
  put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
  write_bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void BinaryReader::read_bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw Error(ErrorCode::parse, "model file truncated");
}

std::uint64_t BinaryReader::get_length() {
  const auto n = get<std::uint64_t>();
  if (n > kMaxLength) throw Error(ErrorCode::parse, "model file: implausible length field");
  return n;
}

std::string BinaryReader::get_string() {
  std::string s(get_length(), '\0');
  read_bytes(s.data(), s.size());
  return s;
}

std::vector<double> BinaryReader::get_doubles() {
  std::vector<double> v(get_length());
  read_bytes(v.data(), v.size() * sizeof(double));
  return v;
}

Eigen::MatrixXd BinaryReader::get_matrix() {
  const auto rows = get_length();
  const auto cols = get_length();
  if (rows * cols > kMaxLength) throw Error(ErrorCode::parse, "model file: implausible matrix shape");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  read_bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return m;
}

Eigen::VectorXd BinaryReader::get_vector() {
  Eigen::VectorXd v(static_cast<Eigen::Index>(get_length()));
  read_bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  return v;
}

void save_model(std::ostream& out, const Regressor& model) {
  BinaryWriter w(out);
  out.write(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kModelFormatVersion);
  nlohmann::json spec = to_json(model.spec());
  spec["seed"] = model.spec().seed;
  w.put_string(spec.dump());
  w.put<std::uint64_t>(model.n_features());
  model.write_payload(w);
}

void save_model(const std::filesystem::path& path, const Regressor& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  save_model(out, model);
}

std::unique_ptr<Regressor> load_model(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::parse, "not a model file (bad magic)");
  }
  BinaryReader r(in);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::parse, "unsupported model format version " + std::to_string(version));
  }
  nlohmann::json spec_json;
  try {
    spec_json = nlohmann::json::parse(r.get_string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("model file: embedded spec: ") + e.what());
  }
  const auto seed = spec_json.value("seed", std::uint64_t{42});
  spec_json.erase("seed");
  const RegressorSpec spec = spec_from_json(spec_json, seed);
  const auto n_features = static_cast<std::size_t>(r.get<std::uint64_t>());
  switch (spec.kind) {
    case ModelKind::knn: return KnnModel::read(spec, r);
    case ModelKind::rf: return RfModel::read(spec, n_features, r);
    case ModelKind::gbr: return GbrModel::read(spec, n_features, r);
    case ModelKind::xgb: return XgbModel::read(spec, n_features, r);
    case ModelKind::gpr: return GprModel::read(spec, r);
    case ModelKind::mlp: return MlpModel::read(spec, n_features, r);
  }
  throw Error(ErrorCode::parse, "model file: unknown kind");
}

std::unique_ptr<Regressor> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace tke
