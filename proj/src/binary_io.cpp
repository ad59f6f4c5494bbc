#include "mdt/binary_io.h"

#include "mdt/errors.h"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace mdt {

uint32_t crc32Of(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes a 32-bit length; feed large buffers in pieces.
  size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<size_t>(bytes.size() - offset, 1u << 30));
    crc = crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<uint32_t>(crc);
}

void writeFileAtomic(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open '" + tmp.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<uint8_t> readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NotFoundError("file not found: '" + path.string() + "'");
  }
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::span<const uint8_t> ByteReader::take(size_t count) {
  if (count > remaining()) {
    throw IntegrityError("unexpected end of data");
  }
  auto out = bytes_.subspan(offset_, count);
  offset_ += count;
  return out;
}

std::string ByteReader::getString(size_t maxLength) {
  const auto length = get<uint32_t>();
  if (length > maxLength) {
    throw IntegrityError("string length field out of range");
  }
  const auto raw = take(length);
  return std::string(raw.begin(), raw.end());
}

} // namespace mdt
