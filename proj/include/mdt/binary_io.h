#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace mdt {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

uint32_t crc32Of(std::span<const uint8_t> bytes);

// Writes through a temporary sibling file and renames it into place.
void writeFileAtomic(const std::filesystem::path& path, std::span<const uint8_t> bytes);
// Throws NotFoundError when the file is missing.
std::vector<uint8_t> readFile(const std::filesystem::path& path);

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void putBytes(std::span<const uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }
  void putString(std::string_view s) {
    put(static_cast<uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  [[nodiscard]] const std::vector<uint8_t>& bytes() const {
    return bytes_;
  }
  std::vector<uint8_t>& bytes() {
    return bytes_;
  }

 private:
  std::vector<uint8_t> bytes_;
};

// Bounds-checked reader; running past the end throws IntegrityError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }
  std::string getString(size_t maxLength = 1u << 20);
  std::span<const uint8_t> take(size_t count);
  [[nodiscard]] size_t remaining() const {
    return bytes_.size() - offset_;
  }
  [[nodiscard]] size_t offset() const {
    return offset_;
  }

 private:
  std::span<const uint8_t> bytes_;
  size_t offset_ = 0;
};

} // namespace mdt
