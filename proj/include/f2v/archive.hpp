#pragma once

// Self-describing checkpoint archive.
//
// Layout (all integers little-endian):
//   magic   "F2VARCH\0"                 8 bytes
//   version u32                          currently 1
//   config  u64 length + UTF-8 JSON
//   count   u64
//   entries name (u32 length + bytes), dtype u8 (1 = float64),
//           ndim u32, dims u64[ndim], row-major float64 data
//   crc32   u32 over every preceding byte

#include "f2v/core.hpp"
#include "f2v/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace f2v {

inline constexpr std::uint32_t kArchiveVersion = 1;

class Archive {
 public:
  nlohmann::json config = nlohmann::json::object();

  void add(const std::string& name, const Matrix& data);
  bool contains(const std::string& name) const;
  const Matrix& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Matrix>>& entries() const { return entries_; }

  std::string serialize() const;
  static Archive deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
};

// Every parameter is stored under `prefix + name`.
void store_parameters(Archive& archive, const nn::ParameterSet& params, const std::string& prefix = "");
// Every parameter must be present with its declared shape.
void load_parameters(const Archive& archive, nn::ParameterSet& params, const std::string& prefix = "");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace f2v
