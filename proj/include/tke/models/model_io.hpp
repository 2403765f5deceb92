#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "tke/models/regressor.hpp"

namespace tke {

// Little-endian-native fixed-width encoding for the model container.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    write_bytes(&v, sizeof v);
  }
  void put_string(const std::string& s);
  void put_doubles(const std::vector<double>& v);
  void put_matrix(const Eigen::MatrixXd& m);
  void put_vector(const Eigen::VectorXd& v);

 private:
  void write_bytes(const void* data, std::size_t n);
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v{};
    read_bytes(&v, sizeof v);
    return v;
  }
  std::string get_string();
  std::vector<double> get_doubles();
  Eigen::MatrixXd get_matrix();
  Eigen::VectorXd get_vector();

 private:
  void read_bytes(void* data, std::size_t n);
  std::uint64_t get_length();
  std::istream& in_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Container: magic "TKEMODEL", format version, spec JSON, feature count, then
// the kind-specific payload.
void save_model(std::ostream& out, const Regressor& model);
void save_model(const std::filesystem::path& path, const Regressor& model);
std::unique_ptr<Regressor> load_model(std::istream& in);
std::unique_ptr<Regressor> load_model(const std::filesystem::path& path);

}  // namespace tke
